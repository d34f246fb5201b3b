use crate::error::{Error, Result};
use crate::image::RgbImage;

use super::LatentGrid;

/// Image <-> latent mapping used around the denoiser.
pub trait Codec {
    /// Spatial downsampling factor between image and latent.
    fn stride(&self) -> usize;
    fn encode(&self, image: &RgbImage) -> Result<LatentGrid>;
    fn decode(&self, latent: &LatentGrid) -> Result<RgbImage>;
}

/// Model-free codec: area-averages `stride x stride` blocks into four
/// channels `(r, g, b, luma)` where luma is the RGB mean. Decoding reads the
/// first three channels back, clamped to `[0, 1]`, at latent resolution.
/// With stride 1, `decode(encode(x)) == x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityCodec {
    pub stride: usize,
}

impl Default for IdentityCodec {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

impl Codec for IdentityCodec {
    fn stride(&self) -> usize {
        self.stride
    }

    fn encode(&self, image: &RgbImage) -> Result<LatentGrid> {
        let s = self.stride;
        if s == 0 {
            return Err(Error::validation("stride", "must be >= 1"));
        }
        let (w, h) = image.dims();
        if w % s != 0 || h % s != 0 {
            return Err(Error::validation(
                "image",
                format!("{w}x{h} is not divisible by codec stride {s}"),
            ));
        }
        let area = (s * s) as f64;
        Ok(LatentGrid::from_fn(h / s, w / s, 4, |y, x, c| {
            let mut acc = 0.0;
            for dy in 0..s {
                for dx in 0..s {
                    let px = image.get(x * s + dx, y * s + dy);
                    acc += if c < 3 { px[c] } else { (px[0] + px[1] + px[2]) / 3.0 };
                }
            }
            acc / area
        }))
    }

    fn decode(&self, latent: &LatentGrid) -> Result<RgbImage> {
        if latent.channels() < 3 {
            return Err(Error::validation("latent", "needs at least 3 channels to decode"));
        }
        let (h, w, _) = latent.shape();
        let mut img = RgbImage::filled(w, h, [0.0; 3]);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, [latent.get(y, x, 0), latent.get(y, x, 1), latent.get(y, x, 2)]);
            }
        }
        Ok(img)
    }
}

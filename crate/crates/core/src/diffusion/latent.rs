use crate::error::{Error, Result};

use super::{NOISE_CHANNELS, POSE_CHANNELS, SPARSE_CHANNELS};

/// Real-valued `height x width x channels` grid, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl LatentGrid {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "latent dimensions must be positive");
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_values(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::validation("latent", "dimensions must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::validation(
                "latent",
                format!("{} values do not fill {height}x{width}x{channels}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("latent", "values must be finite"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Fills from `f(y, x, c)` in storage order.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut g = Self::zeros(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    g.data[(y * width + x) * channels + c] = f(y, x, c);
                }
            }
        }
        g
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn ensure_same_shape(&self, context: &'static str, other: &LatentGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                context,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_same_spatial(&self, context: &'static str, other: &LatentGrid) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::ShapeMismatch {
                context,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> LatentGrid {
        LatentGrid {
            data: self.data.iter().map(|v| f(*v)).collect(),
            ..*self
        }
    }

    /// Elementwise combination; shapes must already agree.
    pub(crate) fn zip_map(&self, other: &LatentGrid, f: impl Fn(f64, f64) -> f64) -> LatentGrid {
        debug_assert_eq!(self.shape(), other.shape());
        LatentGrid {
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
            ..*self
        }
    }

    /// Channels `start..start + count` as a new grid.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<LatentGrid> {
        if count == 0 || start + count > self.channels {
            return Err(Error::validation(
                "channels",
                format!("range {start}..{} exceeds {}", start + count, self.channels),
            ));
        }
        Ok(Self::from_fn(self.height, self.width, count, |y, x, c| {
            self.get(y, x, start + c)
        }))
    }

    /// Channel concatenation in argument order.
    pub fn concat_channels(parts: &[&LatentGrid]) -> Result<LatentGrid> {
        let first = parts
            .first()
            .ok_or_else(|| Error::validation("channels", "nothing to concatenate"))?;
        for p in &parts[1..] {
            first.ensure_same_spatial("concat_channels", p)?;
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(first.height * first.width * channels);
        for px in 0..first.height * first.width {
            for p in parts {
                data.extend_from_slice(&p.data[px * p.channels..(px + 1) * p.channels]);
            }
        }
        Ok(LatentGrid {
            height: first.height,
            width: first.width,
            channels,
            data,
        })
    }

    pub fn squared_distance(&self, other: &LatentGrid) -> Result<f64> {
        self.ensure_same_shape("squared_distance", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn max_abs_diff(&self, other: &LatentGrid) -> Result<f64> {
        self.ensure_same_shape("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelReducer {
    #[default]
    Mean,
    FirstChannel,
}

/// Fixed-function 4 -> 1 channel reduction of an encoded pose map.
pub fn channel_reduce(pose_latent4: &LatentGrid, reducer: ChannelReducer) -> Result<LatentGrid> {
    if pose_latent4.channels() != 4 {
        return Err(Error::validation(
            "pose latent",
            format!("expected 4 channels, got {}", pose_latent4.channels()),
        ));
    }
    let (h, w, _) = pose_latent4.shape();
    Ok(LatentGrid::from_fn(h, w, 1, |y, x, _| match reducer {
        ChannelReducer::Mean => (0..4).map(|c| pose_latent4.get(y, x, c)).sum::<f64>() / 4.0,
        ChannelReducer::FirstChannel => pose_latent4.get(y, x, 0),
    }))
}

/// Everything the denoiser is conditioned on besides the noisy latent.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningBundle {
    pub sparse_latent: LatentGrid,
    pub pose_latent: LatentGrid,
    pub text_embedding: Option<Vec<f64>>,
    /// Source description the embedding was computed from, if known.
    pub text_raw: Option<String>,
}

impl ConditioningBundle {
    pub fn new(sparse_latent: LatentGrid, pose_latent: LatentGrid) -> Result<Self> {
        let b = Self {
            sparse_latent,
            pose_latent,
            text_embedding: None,
            text_raw: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_text(mut self, embedding: Vec<f64>, raw: Option<String>) -> Self {
        self.text_embedding = Some(embedding);
        self.text_raw = raw;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sparse_latent
            .ensure_same_spatial("conditioning bundle", &self.pose_latent)?;
        if self.sparse_latent.channels() != SPARSE_CHANNELS {
            return Err(Error::validation(
                "sparse_latent",
                format!("expected {SPARSE_CHANNELS} channels, got {}", self.sparse_latent.channels()),
            ));
        }
        if self.pose_latent.channels() != POSE_CHANNELS {
            return Err(Error::validation(
                "pose_latent",
                format!("expected {POSE_CHANNELS} channel, got {}", self.pose_latent.channels()),
            ));
        }
        Ok(())
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.sparse_latent.height(), self.sparse_latent.width())
    }
}

/// `[sparse | pose | noisy]` along channels.
pub fn assemble_latent(bundle: &ConditioningBundle, noisy: &LatentGrid) -> Result<LatentGrid> {
    bundle.validate()?;
    bundle.sparse_latent.ensure_same_spatial("assemble_latent", noisy)?;
    if noisy.channels() != NOISE_CHANNELS {
        return Err(Error::validation(
            "noisy latent",
            format!("expected {NOISE_CHANNELS} channels, got {}", noisy.channels()),
        ));
    }
    LatentGrid::concat_channels(&[&bundle.sparse_latent, &bundle.pose_latent, noisy])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reduce_examples() {
        let g = LatentGrid::filled(3, 3, 4, 0.7);
        let r = channel_reduce(&g, ChannelReducer::Mean).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.7));
        let g = LatentGrid::from_fn(2, 2, 4, |_, _, c| if c == 3 { 4.0 } else { 0.0 });
        let r = channel_reduce(&g, ChannelReducer::Mean).unwrap();
        assert!(r.values().iter().all(|v| *v == 1.0));
        let r = channel_reduce(&g, ChannelReducer::FirstChannel).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
        assert!(channel_reduce(&LatentGrid::zeros(2, 2, 3), ChannelReducer::Mean).is_err());
    }

    #[test]
    fn reduce_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = LatentGrid::from_fn(7, 5, 4, |_, _, _| rng.random_range(-3.0..3.0));
        let r = channel_reduce(&g, ChannelReducer::Mean).unwrap();
        for y in 0..7 {
            for x in 0..5 {
                let mut s = 0.0;
                for c in 0..4 {
                    s += g.get(y, x, c);
                }
                assert!((r.get(y, x, 0) - s / 4.0).abs() < 1e-12);
            }
        }
    }

    fn bundle(h: usize, w: usize) -> ConditioningBundle {
        ConditioningBundle::new(LatentGrid::filled(h, w, 4, 1.0), LatentGrid::filled(h, w, 1, 2.0))
            .unwrap()
    }

    #[test]
    fn assemble_nine_channels() {
        let b = bundle(64, 64);
        let z = LatentGrid::filled(64, 64, 4, 3.0);
        let out = assemble_latent(&b, &z).unwrap();
        assert_eq!(out.shape(), (64, 64, 9));
        for y in [0, 31, 63] {
            for x in [0, 17, 63] {
                for c in 0..9 {
                    let want = match c {
                        0..=3 => 1.0,
                        4 => 2.0,
                        _ => 3.0,
                    };
                    assert_eq!(out.get(y, x, c), want);
                }
            }
        }
    }

    #[test]
    fn disassembly_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut r = |_: usize, _: usize, _: usize| rng.random_range(-1.0..1.0);
        let sparse = LatentGrid::from_fn(5, 6, 4, &mut r);
        let pose = LatentGrid::from_fn(5, 6, 1, &mut r);
        let noisy = LatentGrid::from_fn(5, 6, 4, &mut r);
        let b = ConditioningBundle::new(sparse.clone(), pose.clone()).unwrap();
        let out = assemble_latent(&b, &noisy).unwrap();
        assert_eq!(out.slice_channels(0, 4).unwrap(), sparse);
        assert_eq!(out.slice_channels(4, 1).unwrap(), pose);
        assert_eq!(out.slice_channels(5, 4).unwrap(), noisy);
    }

    #[test]
    fn assemble_errors() {
        let b = bundle(4, 4);
        assert!(matches!(
            assemble_latent(&b, &LatentGrid::zeros(4, 5, 4)),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(assemble_latent(&b, &LatentGrid::zeros(4, 4, 3)).is_err());
        assert!(ConditioningBundle::new(LatentGrid::zeros(4, 4, 4), LatentGrid::zeros(4, 3, 1)).is_err());
        assert!(ConditioningBundle::new(LatentGrid::zeros(4, 4, 3), LatentGrid::zeros(4, 4, 1)).is_err());
    }

    #[test]
    fn from_values_rejects_non_finite() {
        assert!(LatentGrid::from_values(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(LatentGrid::from_values(1, 1, 2, vec![0.0]).is_err());
    }
}

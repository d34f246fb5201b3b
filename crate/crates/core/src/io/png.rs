use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Compression, Encoder, Filter, Transformations};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::image::{Mask, RgbImage};

pub fn unit_to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn byte_to_unit(b: u8) -> f64 {
    b as f64 / 255.0
}

// Encoder settings are fixed so identical images give identical files.
fn encode(width: usize, height: usize, color: ColorType, data: &[u8]) -> std::result::Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut enc = Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        enc.set_compression(Compression::Balanced);
        enc.set_filter(Filter::Adaptive);
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
        writer.finish()?;
    }
    Ok(out)
}

fn encode_err(path: &Path, e: png::EncodingError) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Decodes to 8-bit samples, returning `(width, height, channels, samples)`.
fn decode(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut cursor = Cursor::new(bytes);
    let parse_err = |pos: u64, e: png::DecodingError| Error::Parse {
        path: path.to_path_buf(),
        offset: pos,
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(&mut cursor);
    decoder.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = match decoder.read_info() {
        Ok(r) => r,
        Err(e) => return Err(parse_err(cursor.position(), e)),
    };
    let size = reader.output_buffer_size().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        offset: 0,
        message: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = match reader.next_frame(&mut buf) {
        Ok(i) => i,
        Err(e) => {
            drop(reader);
            return Err(parse_err(cursor.position(), e));
        }
    };
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => 3,
    };
    buf.truncate(info.line_size * info.height as usize);
    let (w, h) = (info.width as usize, info.height as usize);
    let mut samples = Vec::with_capacity(w * h * channels);
    for row in buf.chunks_exact(info.line_size) {
        samples.extend_from_slice(&row[..w * channels]);
    }
    Ok((w, h, channels, samples))
}

pub fn save_rgb(image: &RgbImage, path: &Path) -> Result<()> {
    let data: Vec<u8> = image
        .pixels()
        .iter()
        .flat_map(|px| px.map(unit_to_byte))
        .collect();
    let bytes = encode(image.width(), image.height(), ColorType::Rgb, &data)
        .map_err(|e| encode_err(path, e))?;
    write_file(path, &bytes)
}

/// Loads an RGB PNG. Gray inputs are replicated to three channels; alpha is dropped.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = read_file(path)?;
    let (w, h, channels, samples) = decode(path, &bytes)?;
    let pixels = samples
        .chunks_exact(channels)
        .map(|s| match channels {
            1 | 2 => [byte_to_unit(s[0]); 3],
            _ => [byte_to_unit(s[0]), byte_to_unit(s[1]), byte_to_unit(s[2])],
        })
        .collect();
    RgbImage::from_pixels(w, h, pixels)
}

pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let data: Vec<u8> = mask.values().iter().map(|m| if *m { 255 } else { 0 }).collect();
    let bytes = encode(mask.width(), mask.height(), ColorType::Grayscale, &data)
        .map_err(|e| encode_err(path, e))?;
    write_file(path, &bytes)
}

/// Loads a grayscale mask; any nonzero sample is set.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = read_file(path)?;
    let (w, h, channels, samples) = decode(path, &bytes)?;
    let values = samples.chunks_exact(channels).map(|s| s[0] != 0).collect();
    Mask::from_values(w, h, values)
}

//! Dense per-pixel grids: RGB images, depth maps and boolean masks.
//!
//! All grids are row-major with `index = y * width + x`.

use crate::error::{Error, Result};

/// True when a depth sample is usable: finite and strictly positive.
#[inline]
pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

fn check_len(field: &str, width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::validation(field, "width and height must be >= 1"));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::validation(
            field,
            format!("{len} samples do not fill a {width}x{height} grid"),
        ));
    }
    Ok(())
}

/// Three-channel image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![color; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        check_len("rgb image", width, height, data.len())?;
        if let Some(i) = data
            .iter()
            .position(|px| px.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::validation(
                "rgb image",
                format!("pixel {i} has a channel outside [0, 1]"),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Sets a pixel, clamping channels into `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, color: [f64; 3]) {
        self.data[y * self.width + x] = color.map(|c| c.clamp(0.0, 1.0));
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }
}

/// Metric depth per pixel. Entries that are not finite or not positive are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    /// All-invalid map (every entry zero).
    pub fn invalid(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "depth dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len("depth map", width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        is_valid_depth(self.get(x, y))
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| is_valid_depth(**d)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len("mask", width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

pub(crate) fn ensure_dims(
    context: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

//! Metric scale recovery for relative depth maps.
//!
//! A rendered hand depth (metric) is compared against the estimated
//! (relative) depth over the pixels the hand covers; the median ratio is the
//! global scale that makes the estimate metric.

use crate::error::{Error, Result};
use crate::image::{ensure_dims, is_valid_depth, DepthMap, Mask};

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Pixels where the metric hand depth is valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandRegion {
    pub mask: Mask,
}

impl HandRegion {
    pub fn pixel_count(&self) -> usize {
        self.mask.count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactor {
    pub value: f64,
    pub sample_count: usize,
}

impl ScaleFactor {
    pub fn unit() -> Self {
        Self {
            value: 1.0,
            sample_count: 1,
        }
    }
}

pub fn hand_region_from_depth(hand_depth: &DepthMap) -> HandRegion {
    let (w, h) = hand_depth.dims();
    let values = hand_depth.values().iter().map(|d| is_valid_depth(*d)).collect();
    HandRegion {
        mask: Mask::from_values(w, h, values).expect("dimensions come from a valid map"),
    }
}

/// Median of `hand / (est + delta)` over the region.
pub fn compute_scale(
    hand_depth: &DepthMap,
    est_depth: &DepthMap,
    region: &HandRegion,
    delta: f64,
) -> Result<ScaleFactor> {
    ensure_dims("compute_scale estimated depth", hand_depth.dims(), est_depth.dims())?;
    ensure_dims("compute_scale region", hand_depth.dims(), region.mask.dims())?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::validation("delta", "must be finite and >= 0"));
    }

    let (w, h) = hand_depth.dims();
    let mut ratios = Vec::with_capacity(region.pixel_count());
    for y in 0..h {
        for x in 0..w {
            if !region.mask.get(x, y) {
                continue;
            }
            let est = est_depth.get(x, y);
            if !is_valid_depth(est) {
                return Err(Error::InvalidSample { x, y });
            }
            let hand = hand_depth.get(x, y);
            if !is_valid_depth(hand) {
                return Err(Error::validation(
                    "hand depth",
                    format!("invalid at region pixel ({x}, {y})"),
                ));
            }
            ratios.push(hand / (est + delta));
        }
    }

    let value = median(&mut ratios).ok_or(Error::EmptyRegion)?;
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::validation("scale", format!("median ratio {value} is not usable")));
    }
    Ok(ScaleFactor {
        value,
        sample_count: ratios.len(),
    })
}

/// Median with the even-count case defined as the midpoint of the central pair.
fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn apply_scale(depth: &DepthMap, s: &ScaleFactor) -> DepthMap {
    let values = depth
        .values()
        .iter()
        .map(|&d| if is_valid_depth(d) { d * s.value } else { d })
        .collect();
    DepthMap::from_values(depth.width(), depth.height(), values)
        .expect("dimensions come from a valid map")
}

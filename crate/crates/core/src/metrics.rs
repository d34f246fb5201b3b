//! Full-reference image fidelity: MSE, PSNR and SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_dims, Mask, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window_size: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window_size: 11,
            gaussian_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.window_size.is_multiple_of(2) {
            return Err(Error::validation("window_size", "must be odd and positive"));
        }
        for (name, v) in [
            ("gaussian_sigma", self.gaussian_sigma),
            ("k1", self.k1),
            ("k2", self.k2),
            ("dynamic_range", self.dynamic_range),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Normalized 1D Gaussian taps; the 2D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let half = (self.window_size / 2) as f64;
        let s2 = 2.0 * self.gaussian_sigma * self.gaussian_sigma;
        let taps: Vec<f64> = (0..self.window_size)
            .map(|i| {
                let d = i as f64 - half;
                (-d * d / s2).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    ensure_dims("mse", a.dims(), b.dims())?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(pa, pb)| (0..3).map(move |c| (pa[c] - pb[c]).powi(2)))
        .sum();
    Ok(sum / (3 * a.pixels().len()) as f64)
}

/// MSE restricted to pixels where `mask` is set. `None` when the mask is empty.
pub fn masked_mse(a: &RgbImage, b: &RgbImage, mask: &Mask) -> Result<Option<f64>> {
    ensure_dims("masked mse", a.dims(), b.dims())?;
    ensure_dims("masked mse mask", a.dims(), mask.dims())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((pa, pb), m) in a.pixels().iter().zip(b.pixels()).zip(mask.values()) {
        if *m {
            sum += (0..3).map(|c| (pa[c] - pb[c]).powi(2)).sum::<f64>();
            n += 3;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical inputs.
pub fn psnr(a: &RgbImage, b: &RgbImage, max_value: f64) -> Result<f64> {
    if !(max_value.is_finite() && max_value > 0.0) {
        return Err(Error::validation("max_value", "must be finite and > 0"));
    }
    Ok(psnr_from_mse(mse(a, b)?, max_value))
}

pub fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value * max_value / mse).log10()
    }
}

/// Mean SSIM over the three channels, Gaussian-weighted, valid-region windows only.
pub fn ssim(a: &RgbImage, b: &RgbImage, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    ensure_dims("ssim", a.dims(), b.dims())?;
    let (w, h) = a.dims();
    if w < params.window_size || h < params.window_size {
        return Err(Error::validation(
            "image",
            format!(
                "{w}x{h} is smaller than the {0}x{0} SSIM window",
                params.window_size
            ),
        ));
    }
    let kernel = params.kernel();
    let total: f64 = (0..3)
        .map(|c| {
            let pa: Vec<f64> = a.pixels().iter().map(|p| p[c]).collect();
            let pb: Vec<f64> = b.pixels().iter().map(|p| p[c]).collect();
            ssim_plane(&pa, &pb, w, h, &kernel, params)
        })
        .sum();
    Ok(total / 3.0)
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, kernel: &[f64], p: &SsimParams) -> f64 {
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);

    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(a, w, h, kernel);
    let mu_b = filter_valid(b, w, h, kernel);
    let e_aa = filter_valid(&aa, w, h, kernel);
    let e_bb = filter_valid(&bb, w, h, kernel);
    let e_ab = filter_valid(&ab, w, h, kernel);

    let n = mu_a.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    sum / n as f64
}

/// Separable convolution without padding; output is `(w-k+1) x (h-k+1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = line[x..x + k].iter().zip(kernel).map(|(v, t)| v * t).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|j| rows[(y + j) * ow + x] * kernel[j]).sum();
        }
    }
    out
}

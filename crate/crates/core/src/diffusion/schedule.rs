use crate::error::{Error, Result};

use super::LatentGrid;

/// Cumulative signal retention `alpha_bar[t]` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from `alpha_bar[0..=T]`. Requires `alpha_bar[0] == 1`
    /// and strictly decreasing values in `(0, 1]`.
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 {
            return Err(Error::validation("alpha_bar", "needs at least T = 1"));
        }
        if alpha_bar[0] != 1.0 {
            return Err(Error::validation("alpha_bar", "alpha_bar[0] must be 1"));
        }
        for (t, pair) in alpha_bar.windows(2).enumerate() {
            let next = pair[1];
            if !(next > 0.0 && next <= 1.0) {
                return Err(Error::validation(
                    "alpha_bar",
                    format!("alpha_bar[{}] = {next} is outside (0, 1]", t + 1),
                ));
            }
            if !(next < pair[0]) {
                return Err(Error::validation(
                    "alpha_bar",
                    format!("not strictly decreasing at t = {}", t + 1),
                ));
            }
        }
        Ok(Self { alpha_bar })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub(crate) fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// Sub-schedule over `steps` evenly strided timesteps of this one
    /// (always including `T`), for sampling with fewer denoiser calls.
    pub fn respaced(&self, steps: usize) -> Result<Self> {
        let total = self.steps();
        if steps == 0 || steps > total {
            return Err(Error::validation(
                "steps",
                format!("must be in 1..={total}, got {steps}"),
            ));
        }
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        for i in 1..=steps {
            // round(i * total / steps) keeps the last entry at T
            let t = (i * total + steps / 2) / steps;
            alpha_bar.push(self.alpha_bar[t.max(1)]);
        }
        Self::from_alpha_bar(alpha_bar)
    }
}

impl Default for NoiseSchedule {
    /// 1000 steps, beta linear in `[1e-4, 0.02]`.
    fn default() -> Self {
        linear_beta_schedule(1000, 1e-4, 0.02).expect("default bounds are valid")
    }
}

/// `alpha_bar[t] = prod_{i <= t} (1 - beta_i)` with `beta` linearly spaced
/// from `beta_start` (t = 1) to `beta_end` (t = T).
pub fn linear_beta_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::validation("T", "must be >= 1"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::validation(
            "beta",
            "bounds must satisfy 0 < beta_start <= beta_end < 1",
        ));
    }
    let mut alpha_bar = Vec::with_capacity(steps + 1);
    alpha_bar.push(1.0);
    let mut acc = 1.0;
    for i in 0..steps {
        let beta = if steps == 1 {
            beta_start
        } else {
            beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
        };
        acc *= 1.0 - beta;
        alpha_bar.push(acc);
    }
    NoiseSchedule::from_alpha_bar(alpha_bar)
}

/// `sqrt(alpha_bar) * z0 + sqrt(1 - alpha_bar) * eps` for an explicit noise level.
pub fn noise_with_alpha_bar(z0: &LatentGrid, eps: &LatentGrid, alpha_bar: f64) -> Result<LatentGrid> {
    z0.ensure_same_shape("forward_noise", eps)?;
    if !(0.0..=1.0).contains(&alpha_bar) {
        return Err(Error::validation("alpha_bar", "must lie in [0, 1]"));
    }
    let a = alpha_bar.sqrt();
    let b = (1.0 - alpha_bar).sqrt();
    Ok(z0.zip_map(eps, |x, e| a * x + b * e))
}

pub fn forward_noise(
    z0: &LatentGrid,
    t: usize,
    eps: &LatentGrid,
    schedule: &NoiseSchedule,
) -> Result<LatentGrid> {
    schedule.check_timestep(t)?;
    noise_with_alpha_bar(z0, eps, schedule.alpha_bar(t))
}

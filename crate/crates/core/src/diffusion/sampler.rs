use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

use super::{assemble_latent, forward_noise, ConditioningBundle, LatentGrid, NoiseSchedule, NOISE_CHANNELS};

/// Noise predictor `eps_theta(z', t, c)`.
///
/// `z_prime` is the assembled conditioning latent; the returned grid has the
/// spatial size of `z_prime` and [`NOISE_CHANNELS`] channels. `text = None`
/// is the unconditional query.
pub trait Denoiser {
    fn predict_noise(
        &mut self,
        z_prime: &LatentGrid,
        t: usize,
        text: Option<&[f64]>,
    ) -> Result<LatentGrid>;
}

impl<F> Denoiser for F
where
    F: FnMut(&LatentGrid, usize, Option<&[f64]>) -> Result<LatentGrid>,
{
    fn predict_noise(
        &mut self,
        z_prime: &LatentGrid,
        t: usize,
        text: Option<&[f64]>,
    ) -> Result<LatentGrid> {
        self(z_prime, t, text)
    }
}

/// Always predicts zero noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict_noise(&mut self, z: &LatentGrid, _t: usize, _text: Option<&[f64]>) -> Result<LatentGrid> {
        Ok(LatentGrid::zeros(z.height(), z.width(), NOISE_CHANNELS))
    }
}

/// Knows the clean latent and returns the exact noise that explains the
/// current noisy latent: `(z_t - sqrt(a_t) z0) / sqrt(1 - a_t)`.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    pub z0: LatentGrid,
    pub schedule: NoiseSchedule,
}

impl Denoiser for OracleDenoiser {
    fn predict_noise(&mut self, z: &LatentGrid, t: usize, _text: Option<&[f64]>) -> Result<LatentGrid> {
        self.schedule.check_timestep(t)?;
        let zt = z.slice_channels(z.channels() - NOISE_CHANNELS, NOISE_CHANNELS)?;
        zt.ensure_same_shape("oracle denoiser", &self.z0)?;
        let ab = self.schedule.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(zt.zip_map(&self.z0, |z, x| (z - a * x) / b))
    }
}

/// `(1 + w) * eps_cond - w * eps_uncond`, evaluated as `c + w * (c - u)` so
/// that equal inputs or `w = 0` return `eps_cond` bit for bit.
pub fn cfg_combine(eps_cond: &LatentGrid, eps_uncond: &LatentGrid, w: f64) -> Result<LatentGrid> {
    eps_cond.ensure_same_shape("cfg_combine", eps_uncond)?;
    if !w.is_finite() {
        return Err(Error::validation("w", "must be finite"));
    }
    Ok(eps_cond.zip_map(eps_uncond, |c, u| c + w * (c - u)))
}

/// Clean-latent estimate from a noisy latent and predicted noise.
pub fn predict_x0(
    z_t: &LatentGrid,
    eps_hat: &LatentGrid,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentGrid> {
    schedule.check_timestep(t)?;
    predict_x0_with_alpha_bar(z_t, eps_hat, schedule.alpha_bar(t))
}

pub(crate) fn predict_x0_with_alpha_bar(
    z_t: &LatentGrid,
    eps_hat: &LatentGrid,
    alpha_bar: f64,
) -> Result<LatentGrid> {
    z_t.ensure_same_shape("predict_x0", eps_hat)?;
    if !(alpha_bar > 0.0) {
        return Err(Error::validation("alpha_bar", "must be > 0 to invert the noising"));
    }
    let a = alpha_bar.sqrt();
    let b = (1.0 - alpha_bar).sqrt();
    Ok(z_t.zip_map(eps_hat, |z, e| (z - b * e) / a))
}

fn checked_query(
    denoiser: &mut dyn Denoiser,
    z_prime: &LatentGrid,
    t: usize,
    text: Option<&[f64]>,
) -> Result<LatentGrid> {
    let out = denoiser.predict_noise(z_prime, t, text)?;
    let want = (z_prime.height(), z_prime.width(), NOISE_CHANNELS);
    if out.shape() != want {
        return Err(Error::Denoiser(format!(
            "returned shape {:?}, expected {want:?}",
            out.shape()
        )));
    }
    Ok(out)
}

/// Squared L2 error between the injected noise and the denoiser's prediction.
pub fn denoiser_loss(
    z0: &LatentGrid,
    bundle: &ConditioningBundle,
    t: usize,
    eps: &LatentGrid,
    schedule: &NoiseSchedule,
    denoiser: &mut dyn Denoiser,
) -> Result<f64> {
    let z_t = forward_noise(z0, t, eps, schedule)?;
    let z_prime = assemble_latent(bundle, &z_t)?;
    let eps_hat = checked_query(denoiser, &z_prime, t, bundle.text_embedding.as_deref())?;
    eps.squared_distance(&eps_hat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Classifier-free guidance weight.
    pub guidance_weight: f64,
    /// 0 = deterministic implicit steps, 1 = ancestral sampling.
    pub eta: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            guidance_weight: 0.0,
            eta: 0.0,
            seed: 0,
        }
    }
}

/// Runs the reverse process from seeded Gaussian noise and returns the
/// clean-latent estimate after the final step.
pub fn reverse_sample(
    denoiser: &mut dyn Denoiser,
    bundle: &ConditioningBundle,
    schedule: &NoiseSchedule,
    config: &SamplerConfig,
) -> Result<LatentGrid> {
    bundle.validate()?;
    if !(0.0..=1.0).contains(&config.eta) {
        return Err(Error::validation("eta", "must lie in [0, 1]"));
    }
    if !config.guidance_weight.is_finite() {
        return Err(Error::validation("w", "must be finite"));
    }
    let (h, w) = bundle.spatial();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut z = LatentGrid::from_fn(h, w, NOISE_CHANNELS, |_, _, _| normal());
    let text = bundle.text_embedding.as_deref();
    let guided = text.is_some() && config.guidance_weight != 0.0;

    let mut x0 = z.clone();
    for t in (1..=schedule.steps()).rev() {
        let z_prime = assemble_latent(bundle, &z)?;
        let eps_hat = if guided {
            let cond = checked_query(denoiser, &z_prime, t, text)?;
            let uncond = checked_query(denoiser, &z_prime, t, None)?;
            cfg_combine(&cond, &uncond, config.guidance_weight)?
        } else {
            checked_query(denoiser, &z_prime, t, text)?
        };

        let ab_t = schedule.alpha_bar(t);
        let ab_prev = schedule.alpha_bar(t - 1);
        x0 = predict_x0_with_alpha_bar(&z, &eps_hat, ab_t)?;
        if t == 1 {
            break;
        }

        let sigma = config.eta
            * ((1.0 - ab_prev) / (1.0 - ab_t)).sqrt()
            * (1.0 - ab_t / ab_prev).sqrt();
        let dir = (1.0 - ab_prev - sigma * sigma).max(0.0).sqrt();
        let a_prev = ab_prev.sqrt();
        let mut next = x0.zip_map(&eps_hat, |x, e| a_prev * x + dir * e);
        if sigma > 0.0 {
            next = next.map(|v| v + sigma * normal());
        }
        z = next;
    }
    Ok(x0)
}

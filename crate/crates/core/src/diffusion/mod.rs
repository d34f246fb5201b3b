//! Latent-diffusion arithmetic for egocentric view inpainting.
//!
//! Everything here is model-free: the denoiser and the image codec are
//! injected through the [`Denoiser`] and [`Codec`] traits. The conditioning
//! latent fed to the denoiser is the channel concatenation
//! `[sparse map (4) | pose map (1) | noisy latent (4)]`.

mod codec;
mod latent;
mod process;
mod sampler;
mod schedule;

pub use codec::{Codec, IdentityCodec};
pub use latent::{assemble_latent, channel_reduce, ChannelReducer, ConditioningBundle, LatentGrid};
pub use process::{read_frame, write_frame, ProcessDenoiser};
pub use sampler::{
    cfg_combine, denoiser_loss, predict_x0, reverse_sample, Denoiser, OracleDenoiser, SamplerConfig,
    ZeroDenoiser,
};
pub use schedule::{forward_noise, linear_beta_schedule, noise_with_alpha_bar, NoiseSchedule};

/// Channels of the noisy (and clean) latent.
pub const NOISE_CHANNELS: usize = 4;
/// Channels of the encoded sparse egocentric map.
pub const SPARSE_CHANNELS: usize = 4;
/// Channels of the reduced pose embedding.
pub const POSE_CHANNELS: usize = 1;

//! Geometric exocentric-to-egocentric view translation.
//!
//! The pipeline calibrates a relative exocentric depth map to metric scale
//! using a rendered hand depth, lifts the exocentric image to a colored point
//! cloud, estimates the exocentric-to-egocentric similarity transform from
//! paired hand keypoints and projects the cloud into a sparse egocentric map.
//! The [`diffusion`] module carries the conditioning and sampling arithmetic
//! used to inpaint that sparse map with a latent diffusion denoiser.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod calibration;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod metrics;
pub mod reprojection;
pub mod synthetic;

pub use error::{Error, Result};
pub use nalgebra;

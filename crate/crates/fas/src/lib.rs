//! Learning sets of Frequently-Approximately-Satisfied (FAS) linear
//! constraints under a product-of-experts density.
//!
//! A FAS constraint is a linear filter whose output ("violation") on a data
//! vector is usually tiny but occasionally large, so the violation is
//! modelled with a heavy-tailed distribution. A collection of such experts
//! defines a density proportional to `exp(-sum_j E_j(d))`, and this crate
//! implements three ways of fitting the constraints:
//!
//! - [`simple`]: gradient descent on the summed student-t violation cost
//!   with weight-sum rescaling and energy-proportional case reweighting.
//! - [`pl`]: exact pseudo-likelihood over quantized visible variables,
//!   with single-site Gibbs sampling and a brute-force enumeration oracle.
//! - [`cd`]: one-step contrastive divergence with mixture-of-two-Gaussians
//!   experts and a pseudo-inverse reconstruction sampler.
//!
//! [`datagen`] produces the synthetic soft-edge images (with anti-correlated
//! noise) the simplistic learner trains on and extracts noised patches from
//! grayscale images. [`pgm`], [`archive`] and [`viz`] cover file formats and
//! inspection outputs; the `fas` binary wires everything into subcommands.
//! The `examples/` directory has one runnable example per capability.

pub mod archive;
pub mod cd;
pub mod data;
pub mod datagen;
pub mod error;
pub mod image;
pub mod linalg;
pub mod pgm;
pub mod pl;
pub mod rng;
pub mod simple;
pub mod stats;
pub mod viz;

pub use data::DataBatch;
pub use error::{Error, Result};
pub use image::GrayImage;
pub use rng::RngStream;

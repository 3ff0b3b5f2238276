//! Mode-space simulation of noise-driven acoustic waves in a stratified
//! sphere: WKB propagators, surface scattering operators, noise
//! autocorrelations and exact radial reference solutions.
// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod daylight;
pub mod error;
pub mod harmonics;
pub mod integrator;
pub mod medium;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod rng;
pub mod robustness;
pub mod scattering;
pub mod spectrum;

pub use error::{Error, Result};
pub use medium::{FluctuationSpec, Medium, MediumSpec, SmoothProfileSpec};

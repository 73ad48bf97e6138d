//! Remote creation of Wigner negativity from Gaussian EPR steering.
//!
//! Two modes of a squeezed resource travel through lossy channels to Alice
//! and Bob. Alice subtracts a photon from her mode; Bob's heralded state can
//! then have a negative Wigner function, which happens exactly when mode B
//! can steer mode A. The modules cover each stage:
//!
//! - [`gaussian`]: covariance matrices, purities, steerability and thresholds
//! - [`wigner`]: the heralded Wigner function and its negativity
//! - [`fock`]: number-basis density matrices, fidelity and loss
//! - [`sampling`]: reproducible homodyne and two-mode Gaussian data
//! - [`tomography`]: covariance estimation and maximum-likelihood reconstruction
//! - [`metrology`]: quantum Fisher information and metrological power
//!
//! All quadratures use `x = a + a†`, i.e. unit vacuum variance.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod gaussian;
pub mod metrology;
pub mod quadrature;
pub mod sampling;
pub mod tomography;
pub mod wigner;

pub use error::{Error, Result};
pub use gaussian::{
    steering_threshold_eta_b, ChannelParams, PurityTriple, SqueezingSpec, TwoModeCovariance,
};
pub use wigner::{PhaseSpacePoint, SubtractedStateParams};

/// Formats a float with 12 significant digits, the precision of every CSV
/// this crate writes.
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

//! Link-level Monte-Carlo simulator of a jammed mmWave massive MU-MIMO uplink
//! with low-resolution data converters.
//!
//! The receive pipeline under test partitions the antenna array into clusters
//! of `S` adjacent elements, applies a phase-rotated `S`-point DFT to each
//! cluster ahead of the ADCs (beam-slicing), learns per-beam gains, quantizes
//! with a `q`-bit uniform midrise converter, estimates the jammer covariance
//! and the UE channels from the quantized observations, and detects uplink
//! data with a distortion-aware soft-nulling linear equalizer. `S = 1`
//! disables the spatial transform and yields the antenna-domain baseline;
//! `S = B` yields the conventional full beamspace transform.
//!
//! Modules follow the signal path: [`scenario`] draws geometry and channels,
//! [`beamslice`] applies the analog transform, [`quantfront`] models gain
//! control and quantization, [`estimators`] produces the covariance and
//! channel estimates, [`detector`] builds and applies the equalizer,
//! [`metrics`] scores a trial, and [`harness`] runs seeded parameter sweeps.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form is true for NaN, so malformed inputs fail closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamslice;
pub mod detector;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod quantfront;
pub mod rng;
pub mod scenario;

pub use error::{Result, SimError};

/// Dense complex matrix used throughout the receive pipeline.
pub type CMat = nalgebra::DMatrix<num_complex::Complex64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<num_complex::Complex64>;

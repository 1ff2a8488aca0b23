//! Distortion-aware soft-nulling linear detection and hard decisions.
//!
//! The equalizer is LMMSE-shaped: the estimated channel Gram is loaded with
//! the measured jammer covariance, the thermal noise, and a white Bussgang
//! distortion term whose per-beam level follows the inverse squared gains —
//! beams driven hard by the jammer get de-weighted rather than hard-nulled.
//! Everything is built in the beam-slice domain on quantized observations.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::linalg::hermitian_gram;
use crate::quantfront::{GainControl, QuantizerSpec, Resolution};
use crate::scenario::{Constellation, BITS_PER_SYMBOL};
use crate::CMat;

/// Linear combiner built from the estimates plus the quantizer model it
/// assumed (kept for bookkeeping and tests).
#[derive(Debug, Clone)]
pub struct Equalizer {
    /// `U x B` combining matrix applied to quantized slice-domain columns.
    pub weights: CMat,
    /// Bussgang gain the build assumed.
    pub bussgang_gain: f64,
    /// Distortion power the build assumed.
    pub distortion_power: f64,
    /// Resolution the constants came from.
    pub resolution: Resolution,
}

/// Build the soft-nulling equalizer
/// `W = (1/gamma) H^H (H H^H + (C_J + N0 I + 2 D gamma^-2 G^-2) / Es)^-1`
/// through a Cholesky factorization of the Hermitian loaded Gram matrix.
pub fn build_equalizer(
    channel_est: &CMat,
    jammer_cov: &CMat,
    noise_var: f64,
    symbol_energy: f64,
    spec: &QuantizerSpec,
    pilot_gains: &GainControl,
) -> Result<Equalizer> {
    let beams = channel_est.nrows();
    if jammer_cov.nrows() != beams || jammer_cov.ncols() != beams {
        return Err(SimError::DimensionMismatch(format!(
            "covariance {} x {} for {} beams",
            jammer_cov.nrows(),
            jammer_cov.ncols(),
            beams
        )));
    }
    if pilot_gains.len() != beams {
        return Err(SimError::DimensionMismatch(format!(
            "{} gains for {} beams",
            pilot_gains.len(),
            beams
        )));
    }
    if !(symbol_energy > 0.0) {
        return Err(SimError::InvalidParams(format!(
            "Es must be positive, got {symbol_energy}"
        )));
    }
    if noise_var < 0.0 {
        return Err(SimError::InvalidParams(format!(
            "noise_var must be >= 0, got {noise_var}"
        )));
    }
    let gamma = spec.bussgang_gain;
    if !(gamma > 0.0) {
        return Err(SimError::InvalidParams(format!(
            "Bussgang gain must be positive, got {gamma}"
        )));
    }

    let mut system = hermitian_gram(channel_est, 1.0);
    let inv_es = 1.0 / symbol_energy;
    for j in 0..beams {
        for i in 0..beams {
            system[(i, j)] += jammer_cov[(i, j)] * inv_es;
        }
    }
    let dist_level = 2.0 * spec.distortion_power / (gamma * gamma);
    for (b, &g) in pilot_gains.gains().iter().enumerate() {
        let load = (noise_var + dist_level / (g * g)) * inv_es;
        system[(b, b)] += Complex64::new(load, 0.0);
    }

    let chol = Cholesky::new(system).ok_or(SimError::NotPositiveDefinite)?;
    let weights = chol.solve(channel_est).adjoint() * Complex64::new(1.0 / gamma, 0.0);
    Ok(Equalizer {
        weights,
        bussgang_gain: gamma,
        distortion_power: spec.distortion_power,
        resolution: spec.resolution,
    })
}

/// Apply the combiner to a block of quantized slice-domain columns.
pub fn equalize(eq: &Equalizer, observations: &CMat) -> Result<CMat> {
    if observations.nrows() != eq.weights.ncols() {
        return Err(SimError::DimensionMismatch(format!(
            "{} observation rows for {} combiner columns",
            observations.nrows(),
            eq.weights.ncols()
        )));
    }
    Ok(&eq.weights * observations)
}

/// Nearest-point decisions for a `U x n` block of symbol estimates: the
/// label matrix plus the detected bits flattened UE-major, slot next, MSB
/// first within a label.
pub fn hard_decision(
    estimates: &CMat,
    constellation: &Constellation,
) -> (DMatrix<u8>, Vec<bool>) {
    let (users, slots) = estimates.shape();
    let mut labels = DMatrix::<u8>::zeros(users, slots);
    let mut bits = Vec::with_capacity(users * slots * BITS_PER_SYMBOL);
    for u in 0..users {
        for k in 0..slots {
            let label = constellation.nearest(estimates[(u, k)]);
            labels[(u, k)] = label as u8;
            bits.extend_from_slice(&Constellation::bits(label));
        }
    }
    (labels, bits)
}

//! Per-trial performance metrics: uncoded BER, per-UE relative symbol error,
//! and the served-UE criterion.

use crate::error::{Result, SimError};
use crate::quantfront::Resolution;
use crate::CMat;

/// A UE is served when its relative symbol error stays strictly below this.
pub const SERVED_RMSSE_THRESHOLD: f64 = 0.125;

/// Root-mean-square symbol error of each UE, relative to its own symbol
/// energy: `sqrt(sum_k |shat - s|^2 / sum_k |s|^2)` over the block.
pub fn rmsse_per_ue(sent: &CMat, estimated: &CMat) -> Result<Vec<f64>> {
    if sent.shape() != estimated.shape() {
        return Err(SimError::DimensionMismatch(format!(
            "sent {:?} vs estimated {:?}",
            sent.shape(),
            estimated.shape()
        )));
    }
    if sent.ncols() == 0 {
        return Err(SimError::EmptyInput("symbol block"));
    }
    (0..sent.nrows())
        .map(|u| {
            let mut err = 0.0;
            let mut energy = 0.0;
            for k in 0..sent.ncols() {
                err += (estimated[(u, k)] - sent[(u, k)]).norm_sqr();
                energy += sent[(u, k)].norm_sqr();
            }
            if !(energy > 0.0) {
                return Err(SimError::ZeroEnergyTransmission(u));
            }
            Ok((err / energy).sqrt())
        })
        .collect()
}

/// Fraction of differing bits between two equal-length bit strings.
pub fn uncoded_ber(sent: &[bool], detected: &[bool]) -> Result<f64> {
    if sent.len() != detected.len() {
        return Err(SimError::DimensionMismatch(format!(
            "{} sent bits vs {} detected",
            sent.len(),
            detected.len()
        )));
    }
    if sent.is_empty() {
        return Err(SimError::EmptyInput("bit strings"));
    }
    Ok(count_bit_errors(sent, detected) as f64 / sent.len() as f64)
}

/// Number of differing bits (the raw count backing [`uncoded_ber`]).
pub fn count_bit_errors(sent: &[bool], detected: &[bool]) -> u64 {
    sent.iter().zip(detected).filter(|(a, b)| a != b).count() as u64
}

/// Everything measured on one Monte-Carlo trial, parameter echo included.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Uncoded BER over all UEs and slots.
    pub ber: f64,
    /// Raw bit-error count behind `ber`.
    pub bit_errors: u64,
    /// Bits compared.
    pub bit_count: u64,
    /// Per-UE relative symbol error.
    pub rmsse: Vec<f64>,
    /// Per-UE served flags (`rmsse < threshold`, strictly).
    pub served: Vec<bool>,
    /// Cluster size the trial ran with.
    pub cluster_size: usize,
    /// ADC resolution the trial ran with.
    pub resolution: Resolution,
    /// SNR in dB.
    pub snr_db: f64,
    /// Jammer power ratio in dB (`None` = no jammer).
    pub rho_db: Option<f64>,
    /// Trial index within the cell.
    pub trial_index: usize,
    /// Base seed the streams were derived from.
    pub seed: u64,
}

impl TrialResult {
    /// Number of served UEs in this trial.
    pub fn served_count(&self) -> u64 {
        self.served.iter().filter(|&&s| s).count() as u64
    }
}

/// Served flags for a block of per-UE errors.
pub fn served_flags(rmsse: &[f64]) -> Vec<bool> {
    rmsse
        .iter()
        .map(|&r| r < SERVED_RMSSE_THRESHOLD)
        .collect()
}

/// Overall fraction of served UEs across a batch of trials.
pub fn served_fraction(results: &[TrialResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(SimError::EmptyInput("trial results"));
    }
    let mut served = 0u64;
    let mut total = 0u64;
    for r in results {
        served += r.served_count();
        total += r.served.len() as u64;
    }
    if total == 0 {
        return Err(SimError::EmptyInput("served flags"));
    }
    Ok(served as f64 / total as f64)
}

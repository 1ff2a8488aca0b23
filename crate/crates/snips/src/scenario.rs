//! Scenario generation: UE/jammer geometry, line-of-sight channels, power
//! calibration, the flat-fading transmit/receive model, and the 16-QAM
//! alphabet.
//!
//! The base station is a half-wavelength ULA of `B` elements serving `U`
//! single-antenna UEs inside an angular sector, with one barrage jammer in
//! the same sector. All transmitters sit on distinct angles with a minimum
//! pairwise separation; UE large-scale gains model imperfect power control.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SimError};
use crate::quantfront::Resolution;
use crate::{CMat, CVec};

/// Total redraw budget for placement rejection sampling.
pub const PLACEMENT_REDRAW_BUDGET: usize = 10_000;

/// All scenario parameters for one simulation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// BS antennas `B`.
    pub antennas: usize,
    /// Single-antenna UEs `U`.
    pub users: usize,
    /// Beam-slicing cluster size `S` (must divide `B`).
    pub cluster_size: usize,
    /// ADC resolution `q` in bits per real dimension.
    pub adc_bits: Resolution,
    /// Average receive SNR in dB (sets the noise power).
    pub snr_db: f64,
    /// Jammer-to-UE receive power ratio in dB; `None` disables the jammer.
    pub rho_db: Option<f64>,
    /// Per-UE symbol energy `Es`.
    pub symbol_energy: f64,
    /// UE-silent slots used to learn the jammer covariance (`N`).
    pub jammer_train_slots: usize,
    /// Payload slots per trial.
    pub data_slots: usize,
    /// Monte-Carlo trials per sweep cell.
    pub trials: usize,
    /// Base RNG seed.
    pub seed: u64,
    /// Width of the served angular sector in degrees.
    pub sector_deg: f64,
    /// Minimum pairwise angular separation in degrees.
    pub min_sep_deg: f64,
    /// Power-control error range: per-UE gains are log-uniform within
    /// `+-pc_range_db`.
    pub pc_range_db: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            antennas: 256,
            users: 32,
            cluster_size: 8,
            adc_bits: Resolution::Bits(4),
            snr_db: 10.0,
            rho_db: Some(25.0),
            symbol_energy: 1.0,
            jammer_train_slots: 256,
            data_slots: 128,
            trials: 200,
            seed: 42,
            sector_deg: 120.0,
            min_sep_deg: 1.0,
            pc_range_db: 3.0,
        }
    }
}

impl SystemParams {
    /// Rejects dimension and range combinations the pipeline cannot run.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::InvalidParams(msg));
        if self.antennas == 0 || self.users == 0 {
            return fail("antennas and users must be >= 1".into());
        }
        if self.users > self.antennas {
            return fail(format!(
                "users ({}) must not exceed antennas ({})",
                self.users, self.antennas
            ));
        }
        if self.cluster_size == 0 || !self.antennas.is_multiple_of(self.cluster_size) {
            return Err(SimError::ClusterMismatch {
                antennas: self.antennas,
                cluster_size: self.cluster_size,
            });
        }
        self.adc_bits.validate()?;
        if !self.snr_db.is_finite() {
            return fail(format!("snr_db must be finite, got {}", self.snr_db));
        }
        if !(self.symbol_energy > 0.0) {
            return fail(format!("Es must be positive, got {}", self.symbol_energy));
        }
        if self.jammer_train_slots == 0 || self.data_slots == 0 || self.trials == 0 {
            return fail("N, n_data, and trials must be >= 1".into());
        }
        if !(self.sector_deg > 0.0) || self.sector_deg > 180.0 {
            return fail(format!(
                "sector_deg must be in (0, 180], got {}",
                self.sector_deg
            ));
        }
        if self.min_sep_deg < 0.0 {
            return fail(format!(
                "min_sep_deg must be >= 0, got {}",
                self.min_sep_deg
            ));
        }
        // U + 1 transmitters with pairwise separation d need more sector
        // than (U) * d to have any feasible configuration at all.
        if self.users as f64 * self.min_sep_deg >= self.sector_deg {
            return fail(format!(
                "{} transmitters with {} deg separation cannot fit a {} deg sector",
                self.users + 1,
                self.min_sep_deg,
                self.sector_deg
            ));
        }
        if self.pc_range_db < 0.0 {
            return fail(format!(
                "pc_range_db must be >= 0, got {}",
                self.pc_range_db
            ));
        }
        Ok(())
    }
}

/// Angles and large-scale gains of one drawn scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    /// UE angles in degrees, in draw order.
    pub ue_angles_deg: Vec<f64>,
    /// Jammer angle in degrees.
    pub jammer_angle_deg: f64,
    /// UE large-scale power gains (linear), log-uniform in `+-pc_range_db`.
    pub ue_gains: Vec<f64>,
}

/// Draw UE and jammer angles uniformly in the sector by rejection, then the
/// power-control gains. Each angle is redrawn until it clears every already
/// accepted angle by the minimum separation; the total number of redraws is
/// capped by [`PLACEMENT_REDRAW_BUDGET`].
pub fn draw_placement<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<Placement> {
    params.validate()?;
    let half = params.sector_deg / 2.0;
    let mut angles: Vec<f64> = Vec::with_capacity(params.users + 1);
    let mut redraws = 0usize;
    while angles.len() < params.users + 1 {
        let cand = rng.gen_range(-half..half);
        if angles
            .iter()
            .all(|&a| (a - cand).abs() >= params.min_sep_deg)
        {
            angles.push(cand);
        } else {
            redraws += 1;
            if redraws >= PLACEMENT_REDRAW_BUDGET {
                return Err(SimError::PlacementInfeasible {
                    budget: PLACEMENT_REDRAW_BUDGET,
                });
            }
        }
    }
    let jammer_angle_deg = angles.pop().expect("drew users + 1 angles");
    let ue_gains = (0..params.users)
        .map(|_| {
            if params.pc_range_db == 0.0 {
                1.0
            } else {
                let db = rng.gen_range(-params.pc_range_db..params.pc_range_db);
                10f64.powf(db / 10.0)
            }
        })
        .collect();
    Ok(Placement {
        ue_angles_deg: angles,
        jammer_angle_deg,
        ue_gains,
    })
}

/// Far-field steering vector of a half-wavelength ULA, zero-indexed:
/// entry `b` is `exp(-i pi b sin(theta))`.
pub fn steering_vector(antennas: usize, angle_deg: f64) -> CVec {
    let s = angle_deg.to_radians().sin();
    CVec::from_fn(antennas, |b, _| {
        Complex64::from_polar(1.0, -PI * b as f64 * s)
    })
}

/// Channels and calibrated powers of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `B x U` UE channel matrix; column `u` is `sqrt(g_u)` times a steering
    /// vector.
    pub ue_channels: CMat,
    /// Unit-gain jammer steering vector.
    pub jammer_channel: CVec,
    /// Per-entry complex noise variance `N0`.
    pub noise_var: f64,
    /// Jammer symbol variance `Ej`; 0 when the jammer is absent.
    pub jammer_var: f64,
}

/// Line-of-sight channels for a placement. Powers start uncalibrated (zero
/// noise, zero jammer) and are filled in by the calibration functions.
pub fn los_channel(placement: &Placement, params: &SystemParams) -> ChannelSet {
    let b = params.antennas;
    let mut ue_channels = CMat::zeros(b, placement.ue_angles_deg.len());
    for (u, (&angle, &gain)) in placement
        .ue_angles_deg
        .iter()
        .zip(&placement.ue_gains)
        .enumerate()
    {
        let col = steering_vector(b, angle) * Complex64::new(gain.sqrt(), 0.0);
        ue_channels.set_column(u, &col);
    }
    let jammer_channel = steering_vector(b, placement.jammer_angle_deg);
    ChannelSet {
        ue_channels,
        jammer_channel,
        noise_var: 0.0,
        jammer_var: 0.0,
    }
}

/// Noise variance that realizes the requested average receive SNR:
/// `N0 = Es ||H||_F^2 / (B 10^(snr/10))`.
pub fn calibrate_noise(ue_channels: &CMat, snr_db: f64, symbol_energy: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(SimError::InvalidParams(format!(
            "snr_db must be finite, got {snr_db}"
        )));
    }
    let fro2 = ue_channels.norm_squared();
    if !(fro2 > 0.0) {
        return Err(SimError::DegenerateChannel);
    }
    Ok(symbol_energy * fro2 / (ue_channels.nrows() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Jammer symbol variance that realizes the requested rx power ratio `rho`
/// over the average UE: `Ej = 10^(rho/10) Es ||H||_F^2 / (U ||h_J||^2)`.
/// `None` (no jammer) calibrates to zero.
pub fn calibrate_jammer(
    ue_channels: &CMat,
    jammer_channel: &CVec,
    rho_db: Option<f64>,
    symbol_energy: f64,
) -> Result<f64> {
    let Some(rho) = rho_db else {
        return Ok(0.0);
    };
    let hj2 = jammer_channel.norm_squared();
    if !(hj2 > 0.0) {
        return Err(SimError::DegenerateJammer);
    }
    let fro2 = ue_channels.norm_squared();
    if !(fro2 > 0.0) {
        return Err(SimError::DegenerateChannel);
    }
    let users = ue_channels.ncols() as f64;
    Ok(10f64.powf(rho / 10.0) * symbol_energy * fro2 / (users * hj2))
}

/// Jammer symbols for `count` slots, i.i.d. `CN(0, jammer_var)`. Draws are
/// consumed even at zero variance so streams stay aligned across sweep cells.
pub fn draw_jammer_symbols<R: Rng + ?Sized>(
    count: usize,
    jammer_var: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let scale = (jammer_var / 2.0).sqrt();
    (0..count)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        })
        .collect()
}

/// Add the jammer contribution and i.i.d. `CN(0, noise_var)` noise onto a
/// block of receive columns, drawing column by column, antenna by antenna.
/// Noise draws are consumed even at zero variance (stream alignment).
pub(crate) fn add_jammer_and_noise<R: Rng + ?Sized>(
    y: &mut CMat,
    jammer_channel: &CVec,
    jammer_symbols: &[Complex64],
    noise_var: f64,
    rng: &mut R,
) {
    let rows = y.nrows();
    let scale = (noise_var / 2.0).sqrt();
    for (k, &sj) in jammer_symbols.iter().enumerate() {
        let mut col = y.column_mut(k);
        for b in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            col[b] += jammer_channel[b] * sj + Complex64::new(scale * re, scale * im);
        }
    }
}

/// Flat-fading uplink receive block: `Y = H S + h_J s_J^T + W` for a `U x n`
/// symbol block, length-`n` jammer symbols, and white noise of per-entry
/// variance `noise_var`.
pub fn transmit_and_receive<R: Rng + ?Sized>(
    ue_channels: &CMat,
    tx_symbols: &CMat,
    jammer_channel: &CVec,
    jammer_symbols: &[Complex64],
    noise_var: f64,
    rng: &mut R,
) -> Result<CMat> {
    if tx_symbols.nrows() != ue_channels.ncols() {
        return Err(SimError::DimensionMismatch(format!(
            "{} tx rows for {} UE columns",
            tx_symbols.nrows(),
            ue_channels.ncols()
        )));
    }
    if jammer_channel.len() != ue_channels.nrows() {
        return Err(SimError::DimensionMismatch(format!(
            "jammer channel of length {} for {} antennas",
            jammer_channel.len(),
            ue_channels.nrows()
        )));
    }
    if jammer_symbols.len() != tx_symbols.ncols() {
        return Err(SimError::DimensionMismatch(format!(
            "{} jammer symbols for {} slots",
            jammer_symbols.len(),
            tx_symbols.ncols()
        )));
    }
    if noise_var < 0.0 {
        return Err(SimError::InvalidParams(format!(
            "noise_var must be >= 0, got {noise_var}"
        )));
    }
    let mut y = ue_channels * tx_symbols;
    add_jammer_and_noise(&mut y, jammer_channel, jammer_symbols, noise_var, rng);
    Ok(y)
}

/// Bits per 16-QAM symbol.
pub const BITS_PER_SYMBOL: usize = 4;

/// Gray-mapped 16-QAM alphabet scaled to a target average symbol energy.
///
/// The index of a point is its 4-bit label: the two high bits select the
/// in-phase level and the two low bits the quadrature level, each through the
/// Gray map 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3 (scaled by
/// `sqrt(Es / 10)`), so nearest-neighbor decisions differ in exactly one bit
/// per axis step.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    symbol_energy: f64,
}

impl Constellation {
    /// Gray-mapped 16-QAM with average energy `symbol_energy`.
    pub fn qam16(symbol_energy: f64) -> Self {
        const GRAY_LEVELS: [(usize, f64); 4] = [(0b00, -3.0), (0b01, -1.0), (0b11, 1.0), (0b10, 3.0)];
        let scale = (symbol_energy / 10.0).sqrt();
        let mut points = vec![Complex64::new(0.0, 0.0); 16];
        for &(gi, re) in &GRAY_LEVELS {
            for &(gq, im) in &GRAY_LEVELS {
                points[(gi << 2) | gq] = Complex64::new(re * scale, im * scale);
            }
        }
        Constellation {
            points,
            symbol_energy,
        }
    }

    /// The 16 points, indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Average symbol energy the alphabet was scaled to.
    pub fn symbol_energy(&self) -> f64 {
        self.symbol_energy
    }

    /// Point for a label.
    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Label of the nearest point; ties break to the smallest label.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Label bits, most significant first.
    pub fn bits(index: usize) -> [bool; BITS_PER_SYMBOL] {
        [
            index & 0b1000 != 0,
            index & 0b0100 != 0,
            index & 0b0010 != 0,
            index & 0b0001 != 0,
        ]
    }

    /// Uniform random label.
    pub fn draw_index<R: Rng + ?Sized>(rng: &mut R) -> usize {
        rng.gen_range(0..16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Phase};

    fn small_params() -> SystemParams {
        SystemParams {
            antennas: 8,
            users: 2,
            cluster_size: 2,
            jammer_train_slots: 16,
            data_slots: 8,
            trials: 1,
            ..SystemParams::default()
        }
    }

    #[test]
    fn default_params_validate() {
        SystemParams::default().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_combinations() {
        let mut p = small_params();
        p.cluster_size = 3;
        assert!(matches!(
            p.validate(),
            Err(SimError::ClusterMismatch { .. })
        ));

        let mut p = small_params();
        p.users = 9;
        assert!(p.validate().is_err());

        let mut p = small_params();
        p.symbol_energy = 0.0;
        assert!(p.validate().is_err());

        let mut p = small_params();
        p.min_sep_deg = 70.0; // 3 transmitters cannot fit 120 deg at 70 deg apart
        assert!(p.validate().is_err());

        let mut p = small_params();
        p.snr_db = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn placement_respects_sector_and_separation() {
        let params = small_params();
        let mut rng = substream(3, 0, Phase::Placement);
        for _ in 0..1000 {
            let p = draw_placement(&params, &mut rng).unwrap();
            let mut all = p.ue_angles_deg.clone();
            all.push(p.jammer_angle_deg);
            for &a in &all {
                assert!((-60.0..60.0).contains(&a), "angle {a} outside sector");
            }
            for i in 0..all.len() {
                for j in 0..i {
                    assert!(
                        (all[i] - all[j]).abs() >= params.min_sep_deg,
                        "separation violated: {} vs {}",
                        all[i],
                        all[j]
                    );
                }
            }
        }
    }

    #[test]
    fn placement_gains_stay_in_power_control_range() {
        let params = SystemParams {
            users: 16,
            antennas: 16,
            cluster_size: 1,
            ..small_params()
        };
        let mut rng = substream(4, 0, Phase::Placement);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..6250 {
            // 1e5 gain draws total
            let p = draw_placement(&params, &mut rng).unwrap();
            for &g in &p.ue_gains {
                lo = lo.min(g);
                hi = hi.max(g);
            }
        }
        let bound = 10f64.powf(0.3); // +-3 dB
        assert!(hi / lo <= bound * bound && hi / lo < 4.0, "ratio {}", hi / lo);
        assert!(hi <= bound && lo >= 1.0 / bound);
    }

    #[test]
    fn dense_placement_remains_feasible() {
        // The default scenario packs 33 transmitters at >= 1 degree spacing
        // into 120 degrees; sequential rejection must succeed routinely.
        let params = SystemParams::default();
        let mut rng = substream(5, 0, Phase::Placement);
        for _ in 0..50 {
            draw_placement(&params, &mut rng).unwrap();
        }
    }

    #[test]
    fn infeasible_placement_errors_out() {
        // Three transmitters at 59 degrees separation in a 120 degree sector
        // pass the coarse validate() bound, and feasible configurations exist
        // (e.g. -59.9, -0.5, 58.9) — but once the first two angles land away
        // from the sector edges there is no room left for the third, so the
        // redraw budget must trip instead of hanging.
        let params = SystemParams {
            antennas: 4,
            users: 2,
            cluster_size: 1,
            min_sep_deg: 59.0,
            sector_deg: 120.0,
            ..small_params()
        };
        let mut rng = substream(6, 0, Phase::Placement);
        let mut saw_budget_error = false;
        for _ in 0..4 {
            if let Err(SimError::PlacementInfeasible { budget }) =
                draw_placement(&params, &mut rng)
            {
                assert_eq!(budget, PLACEMENT_REDRAW_BUDGET);
                saw_budget_error = true;
                break;
            }
        }
        assert!(saw_budget_error, "expected the redraw budget to trip");
    }

    #[test]
    fn steering_vector_reference_values() {
        let a = steering_vector(4, 0.0);
        for b in 0..4 {
            assert!((a[b] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        // At 90 degrees the phase advances by pi per element.
        let a = steering_vector(4, 90.0);
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((a[2] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // Norm is sqrt(B) at any angle.
        let a = steering_vector(16, 37.3);
        assert!((a.norm_squared() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn los_channel_columns_scale_with_gains() {
        let params = small_params();
        let placement = Placement {
            ue_angles_deg: vec![10.0, -25.0],
            jammer_angle_deg: 40.0,
            ue_gains: vec![2.0, 0.5],
        };
        let ch = los_channel(&placement, &params);
        assert_eq!(ch.ue_channels.shape(), (8, 2));
        assert!((ch.ue_channels.column(0).norm_squared() - 16.0).abs() < 1e-12);
        assert!((ch.ue_channels.column(1).norm_squared() - 4.0).abs() < 1e-12);
        assert!((ch.jammer_channel.norm_squared() - 8.0).abs() < 1e-12);
        assert_eq!(ch.noise_var, 0.0);
        assert_eq!(ch.jammer_var, 0.0);
    }

    #[test]
    fn noise_calibration_closed_forms() {
        // Unit-gain single UE: ||H||_F^2 = B, so snr 0 dB gives N0 = Es.
        let h = CMat::from_fn(4, 1, |_, _| Complex64::new(1.0, 0.0));
        assert!((calibrate_noise(&h, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // 10 dB on the same channel: N0 = 0.1.
        assert!((calibrate_noise(&h, 10.0, 1.0).unwrap() - 0.1).abs() < 1e-12);
        // Enormous SNR drives the noise to (numerically) zero.
        assert!(calibrate_noise(&h, 300.0, 1.0).unwrap() < 1e-25);
        // Zero channel cannot be calibrated.
        let z = CMat::zeros(4, 1);
        assert!(matches!(
            calibrate_noise(&z, 0.0, 1.0),
            Err(SimError::DegenerateChannel)
        ));
    }

    #[test]
    fn jammer_calibration_closed_forms() {
        let params = SystemParams::default();
        let placement = {
            let mut rng = substream(7, 0, Phase::Placement);
            draw_placement(&params, &mut rng).unwrap()
        };
        let ch = los_channel(&placement, &params);
        // No jammer calibrates to exactly zero.
        assert_eq!(
            calibrate_jammer(&ch.ue_channels, &ch.jammer_channel, None, 1.0).unwrap(),
            0.0
        );
        // rho = 25 dB with B = 256, U = 32: Ej/Es = 10^2.5 ||H||_F^2/(U B).
        let ej = calibrate_jammer(&ch.ue_channels, &ch.jammer_channel, Some(25.0), 1.0).unwrap();
        let expected = 10f64.powf(2.5) * ch.ue_channels.norm_squared() / (32.0 * 256.0);
        assert!((ej - expected).abs() < 1e-9 * expected);
        // Unit-gain UEs make the expected value exactly 10^2.5; with power
        // control it stays within the +-3 dB band of it.
        assert!(ej / 10f64.powf(2.5) < 2.0 && ej / 10f64.powf(2.5) > 0.5);
    }

    #[test]
    fn jammer_calibration_identity() {
        // Ej ||h_J||^2 / (Es ||H||_F^2 / U) must equal 10^(rho/10) exactly.
        let h = CMat::from_fn(8, 3, |b, u| {
            Complex64::from_polar(1.0 + u as f64, 0.3 * (b * u) as f64)
        });
        let hj = steering_vector(8, 17.0);
        for rho in [-10.0, 0.0, 15.0, 25.0] {
            let ej = calibrate_jammer(&h, &hj, Some(rho), 2.0).unwrap();
            let got = ej * hj.norm_squared() / (2.0 * h.norm_squared() / 3.0);
            assert!((got - 10f64.powf(rho / 10.0)).abs() < 1e-9 * got.max(1.0));
        }
    }

    #[test]
    fn receive_is_exact_without_noise() {
        let h = CMat::from_fn(4, 2, |b, u| Complex64::new(b as f64, u as f64));
        let s = CMat::from_fn(2, 3, |u, k| Complex64::new(1.0 + (u + k) as f64, -1.0));
        let hj = steering_vector(4, 30.0);
        let sj = vec![Complex64::new(0.5, -0.25); 3];
        let mut rng = substream(8, 0, Phase::Data);
        let y = transmit_and_receive(&h, &s, &hj, &sj, 0.0, &mut rng).unwrap();
        let expected = {
            let mut e = &h * &s;
            for k in 0..3 {
                for b in 0..4 {
                    e[(b, k)] += hj[b] * sj[k];
                }
            }
            e
        };
        assert!((y - expected).norm() < 1e-12);
    }

    #[test]
    fn all_zero_inputs_give_zero_output() {
        let h = CMat::zeros(3, 2);
        let s = CMat::zeros(2, 4);
        let hj = CVec::zeros(3);
        let sj = vec![Complex64::new(0.0, 0.0); 4];
        let mut rng = substream(9, 0, Phase::Data);
        let y = transmit_and_receive(&h, &s, &hj, &sj, 0.0, &mut rng).unwrap();
        assert_eq!(y, CMat::zeros(3, 4));
    }

    #[test]
    fn noise_variance_is_calibrated() {
        let h = CMat::zeros(100, 1);
        let s = CMat::zeros(1, 10_000);
        let hj = CVec::zeros(100);
        let sj = vec![Complex64::new(0.0, 0.0); 10_000];
        let mut rng = substream(10, 0, Phase::Data);
        let n0 = 0.37;
        let y = transmit_and_receive(&h, &s, &hj, &sj, n0, &mut rng).unwrap();
        let var = y.norm_squared() / 1e6;
        assert!((var / n0 - 1.0).abs() < 0.01, "variance {var} vs {n0}");
    }

    #[test]
    fn empirical_snr_matches_request() {
        // Average rx SNR over UEs: E||H s||^2 / E||w||^2 with s drawn from
        // the alphabet must land within 0.1 dB of the request.
        let params = SystemParams {
            antennas: 8,
            users: 2,
            cluster_size: 1,
            ..small_params()
        };
        let mut rng = substream(11, 0, Phase::Placement);
        let placement = draw_placement(&params, &mut rng).unwrap();
        let ch = los_channel(&placement, &params);
        let target_db = 7.0;
        let n0 = calibrate_noise(&ch.ue_channels, target_db, params.symbol_energy).unwrap();

        let slots = 100_000;
        let constellation = Constellation::qam16(params.symbol_energy);
        let mut rng = substream(11, 0, Phase::Data);
        let s = CMat::from_fn(params.users, slots, |_, _| {
            constellation.point(Constellation::draw_index(&mut rng))
        });
        let signal = &ch.ue_channels * &s;
        let signal_power = signal.norm_squared() / slots as f64;
        let noise_power = n0 * params.antennas as f64;
        let snr_db = 10.0 * (signal_power / noise_power).log10();
        assert!(
            (snr_db - target_db).abs() < 0.1,
            "empirical {snr_db} dB vs target {target_db} dB"
        );
    }

    #[test]
    fn qam16_has_unit_average_energy_and_gray_labels() {
        let c = Constellation::qam16(1.0);
        let mean: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-12);
        // 16 distinct points on the +-1, +-3 grid (scaled).
        let scale = (1.0f64 / 10.0).sqrt();
        for p in c.points() {
            let re = p.re / scale;
            let im = p.im / scale;
            assert!([-3.0, -1.0, 1.0, 3.0].iter().any(|l| (re - l).abs() < 1e-12));
            assert!([-3.0, -1.0, 1.0, 3.0].iter().any(|l| (im - l).abs() < 1e-12));
        }
        for i in 0..16 {
            for j in 0..i {
                assert!((c.point(i) - c.point(j)).norm() > 1e-6);
            }
        }
        // Horizontal and vertical nearest neighbors differ in exactly one
        // label bit (Gray property).
        for i in 0..16usize {
            for j in 0..16usize {
                if i == j {
                    continue;
                }
                let d = (c.point(i) - c.point(j)).norm() / scale;
                if d < 2.0 + 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1, "labels {i} and {j}");
                }
            }
        }
    }

    #[test]
    fn nearest_point_decisions() {
        let c = Constellation::qam16(10.0); // scale 1: levels at +-1, +-3
        for i in 0..16 {
            assert_eq!(c.nearest(c.point(i)), i);
            // small perturbation keeps the decision
            let z = c.point(i) + Complex64::new(0.3, -0.3);
            assert_eq!(c.nearest(z), i);
        }
        // The origin ties between four points; smallest label wins.
        let tie = c.nearest(Complex64::new(0.0, 0.0));
        let d0 = (c.point(tie) - Complex64::new(0.0, 0.0)).norm();
        for i in 0..16 {
            assert!(d0 <= (c.point(i)).norm() + 1e-12);
        }
        assert_eq!(tie, 0b0101); // (-1, -1) is the lowest label among the tied four
    }

    #[test]
    fn bits_round_trip() {
        for i in 0..16usize {
            let bits = Constellation::bits(i);
            let back = bits
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
            assert_eq!(back, i);
        }
    }

    #[test]
    fn placement_and_receive_are_deterministic() {
        let params = small_params();
        let draw = |seed| {
            let mut rng = substream(seed, 2, Phase::Placement);
            draw_placement(&params, &mut rng).unwrap()
        };
        assert_eq!(draw(21), draw(21));
        assert_ne!(draw(21), draw(22));

        let placement = draw(21);
        let ch = los_channel(&placement, &params);
        let s = CMat::from_element(2, 4, Complex64::new(1.0, 0.0));
        let run = || {
            let mut rng = substream(21, 2, Phase::Data);
            let sj = draw_jammer_symbols(4, 1.5, &mut rng);
            transmit_and_receive(&ch.ue_channels, &s, &ch.jammer_channel, &sj, 0.25, &mut rng)
                .unwrap()
        };
        assert_eq!(run(), run());
    }
}

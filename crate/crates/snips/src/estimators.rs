//! Quantized-domain estimators.
//!
//! Both estimators observe the channel through the full front end — beam
//! slicing, gain control, quantization — so their outputs absorb the front
//! end's distortion exactly the way the detector will see it at run time:
//!
//! * the jammer covariance is the sample covariance of a UE-silent training
//!   block, quantization distortion included;
//! * the UE channels come from a least-squares fit against an orthogonal
//!   pilot block, with the pilot-phase gains kept for reuse on data.

use num_complex::Complex64;
use rand::Rng;

use crate::beamslice::{unitary_dft, BeamSlicer};
use crate::error::{Result, SimError};
use crate::linalg::{hermitian_gram, hermitian_residual};
use crate::quantfront::{learn_gains, quantize_complex, GainControl, QuantizerSpec};
use crate::scenario::{add_jammer_and_noise, draw_jammer_symbols, ChannelSet};
use crate::CMat;

/// Sample covariance of the quantized, beam-sliced jammer-plus-noise signal.
#[derive(Debug, Clone)]
pub struct JammerCovEstimate {
    /// `B x B` Hermitian PSD matrix.
    pub cov: CMat,
}

impl JammerCovEstimate {
    /// Confirms the matrix is Hermitian (to rounding); the construction
    /// guarantees positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        if self.cov.nrows() != self.cov.ncols() {
            return Err(SimError::DimensionMismatch(format!(
                "covariance is {} x {}",
                self.cov.nrows(),
                self.cov.ncols()
            )));
        }
        let res = hermitian_residual(&self.cov);
        if res > 1e-12 {
            return Err(SimError::InvalidParams(format!(
                "covariance asymmetry {res}"
            )));
        }
        Ok(())
    }
}

/// Estimate the jammer covariance from `train_slots` UE-silent slots:
/// the receive block runs through the slicer, fresh gains are learned on it,
/// and the quantized block's scaled Gram matrix is returned.
pub fn estimate_jammer_cov<R: Rng + ?Sized>(
    channels: &ChannelSet,
    slicer: &BeamSlicer,
    spec: &QuantizerSpec,
    rng: &mut R,
    train_slots: usize,
) -> Result<JammerCovEstimate> {
    if train_slots == 0 {
        return Err(SimError::InvalidParams(
            "jammer training needs at least one slot".into(),
        ));
    }
    let antennas = channels.ue_channels.nrows();
    if slicer.antennas() != antennas || channels.jammer_channel.len() != antennas {
        return Err(SimError::DimensionMismatch(format!(
            "slicer for {} antennas, channels have {}",
            slicer.antennas(),
            antennas
        )));
    }
    // UEs silent: the receive block is jammer plus noise only.
    let jammer_symbols = draw_jammer_symbols(train_slots, channels.jammer_var, rng);
    let mut y = CMat::zeros(antennas, train_slots);
    add_jammer_and_noise(
        &mut y,
        &channels.jammer_channel,
        &jammer_symbols,
        channels.noise_var,
        rng,
    );
    let sliced = slicer.apply(&y)?;
    let gains = learn_gains(&sliced);
    let quantized = quantize_complex(&sliced, &gains, spec)?;
    let cov = hermitian_gram(&quantized, 1.0 / train_slots as f64);
    Ok(JammerCovEstimate { cov })
}

/// Orthogonal pilot block: `sqrt(U * Es)` times the unitary `U`-point DFT,
/// so `S_P S_P^H = U Es I` while every UE transmits at `Es` per slot.
pub fn pilot_matrix(users: usize, symbol_energy: f64) -> CMat {
    unitary_dft(users) * Complex64::new((users as f64 * symbol_energy).sqrt(), 0.0)
}

/// LS channel estimate in the slice domain plus the pilot-phase gains, which
/// the detector reuses during the data phase.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// `B x U` estimate of the beam-sliced UE channels.
    pub channel: CMat,
    /// Gains learned on the pilot block.
    pub gains: GainControl,
}

/// Least-squares channel estimation from a pilot block with jammer active.
///
/// For row-orthogonal pilots (`S_P S_P^H = c I`) the general LS solution
/// collapses to `R_P S_P^H / c`; `c` is read off the pilot Gram so any
/// orthogonal pilot block works.
pub fn estimate_channel<R: Rng + ?Sized>(
    channels: &ChannelSet,
    slicer: &BeamSlicer,
    spec: &QuantizerSpec,
    pilots: &CMat,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    let users = channels.ue_channels.ncols();
    if pilots.nrows() != users {
        return Err(SimError::DimensionMismatch(format!(
            "{} pilot rows for {} UEs",
            pilots.nrows(),
            users
        )));
    }
    if pilots.ncols() < users {
        return Err(SimError::InvalidParams(format!(
            "pilot block of {} slots cannot resolve {} UEs",
            pilots.ncols(),
            users
        )));
    }
    let scale = pilots.norm_squared() / users as f64;
    if !(scale > 0.0) {
        return Err(SimError::InvalidParams("pilot block has no energy".into()));
    }
    let slots = pilots.ncols();
    let jammer_symbols = draw_jammer_symbols(slots, channels.jammer_var, rng);
    let y = crate::scenario::transmit_and_receive(
        &channels.ue_channels,
        pilots,
        &channels.jammer_channel,
        &jammer_symbols,
        channels.noise_var,
        rng,
    )?;
    let sliced = slicer.apply(&y)?;
    let gains = learn_gains(&sliced);
    let quantized = quantize_complex(&sliced, &gains, spec)?;
    let channel = quantized * pilots.adjoint() * Complex64::new(1.0 / scale, 0.0);
    Ok(ChannelEstimate { channel, gains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use crate::quantfront::Resolution;
    use crate::rng::{substream, Phase};
    use crate::scenario::{
        calibrate_jammer, calibrate_noise, draw_placement, los_channel, steering_vector,
        SystemParams,
    };
    use crate::CVec;

    fn ideal_spec() -> QuantizerSpec {
        QuantizerSpec::new(Resolution::Infinite)
    }

    fn scenario(antennas: usize, users: usize, seed: u64) -> (SystemParams, ChannelSet) {
        let params = SystemParams {
            antennas,
            users,
            cluster_size: 1,
            jammer_train_slots: 64,
            data_slots: 8,
            trials: 1,
            ..SystemParams::default()
        };
        let mut rng = substream(seed, 0, Phase::Placement);
        let placement = draw_placement(&params, &mut rng).unwrap();
        let ch = los_channel(&placement, &params);
        (params, ch)
    }

    #[test]
    fn silent_world_gives_zero_covariance() {
        // No jammer, no noise, ideal ADCs: the training block is all zeros
        // and the covariance must come back exactly zero without faulting
        // (the gain cap handles the dead beams).
        let (_, mut ch) = scenario(8, 2, 1);
        ch.noise_var = 0.0;
        ch.jammer_var = 0.0;
        let slicer = BeamSlicer::new(8, 2).unwrap();
        let mut rng = substream(1, 0, Phase::JammerTraining);
        let est = estimate_jammer_cov(&ch, &slicer, &ideal_spec(), &mut rng, 32).unwrap();
        assert_eq!(est.cov, CMat::zeros(8, 8));
        est.validate().unwrap();
    }

    #[test]
    fn noiseless_jammer_covariance_is_rank_one() {
        let (_, mut ch) = scenario(8, 2, 2);
        ch.noise_var = 0.0;
        ch.jammer_var = 2.5;
        let slicer = BeamSlicer::new(8, 1).unwrap();
        let mut rng = substream(2, 0, Phase::JammerTraining);
        let est = estimate_jammer_cov(&ch, &slicer, &ideal_spec(), &mut rng, 64).unwrap();
        let vals = hermitian_eigenvalues(&est.cov);
        let top = vals[vals.len() - 1];
        let second = vals[vals.len() - 2];
        assert!(top > 0.0);
        assert!(
            second.abs() < 1e-8 * top,
            "second eigenvalue {second} vs top {top}"
        );
    }

    #[test]
    fn covariance_converges_to_the_model() {
        // Ideal front end, many slots: Ĉ -> Ej h_J h_J^H + N0 I.
        let antennas = 8;
        let (_, mut ch) = scenario(antennas, 2, 3);
        ch.noise_var = 0.5;
        ch.jammer_var = 3.0;
        let slicer = BeamSlicer::new(antennas, 1).unwrap();
        let mut rng = substream(3, 0, Phase::JammerTraining);
        let slots = 100_000;
        let est = estimate_jammer_cov(&ch, &slicer, &ideal_spec(), &mut rng, slots).unwrap();
        let mut model = CMat::identity(antennas, antennas) * Complex64::new(ch.noise_var, 0.0);
        for i in 0..antennas {
            for j in 0..antennas {
                model[(i, j)] += ch.jammer_channel[i]
                    * ch.jammer_channel[j].conj()
                    * Complex64::new(ch.jammer_var, 0.0);
            }
        }
        let rel = (&est.cov - &model).norm() / model.norm();
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn quantized_covariance_stays_hermitian_psd() {
        let (params, mut ch) = scenario(16, 4, 4);
        ch.noise_var = calibrate_noise(&ch.ue_channels, 10.0, 1.0).unwrap();
        ch.jammer_var =
            calibrate_jammer(&ch.ue_channels, &ch.jammer_channel, Some(20.0), 1.0).unwrap();
        for bits in [1u32, 3, 4] {
            let spec = QuantizerSpec::new(Resolution::Bits(bits));
            let slicer = BeamSlicer::new(params.antennas, 4).unwrap();
            let mut rng = substream(4, 0, Phase::JammerTraining);
            let est = estimate_jammer_cov(&ch, &slicer, &spec, &mut rng, 128).unwrap();
            est.validate().unwrap();
            assert_eq!(hermitian_residual(&est.cov), 0.0);
            let vals = hermitian_eigenvalues(&est.cov);
            assert!(vals[0] > -1e-10, "q={bits}: eigenvalue {}", vals[0]);
        }
    }

    #[test]
    fn pilots_are_orthogonal_with_per_slot_energy() {
        for users in [1usize, 2, 8, 32] {
            let es = 1.7;
            let pilots = pilot_matrix(users, es);
            let gram = &pilots * pilots.adjoint();
            let target = Complex64::new(users as f64 * es, 0.0);
            for i in 0..users {
                for j in 0..users {
                    let expect = if i == j {
                        target
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    assert!(
                        (gram[(i, j)] - expect).norm() < 1e-10,
                        "users={users} entry ({i},{j})"
                    );
                }
            }
            // every pilot symbol carries Es
            for v in pilots.iter() {
                assert!((v.norm_sqr() - es).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_user_pilot_is_scalar() {
        let pilots = pilot_matrix(1, 4.0);
        assert_eq!(pilots.shape(), (1, 1));
        assert!((pilots[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_user_pilots_are_the_real_hadamard_block() {
        // sqrt(U * Es) = sqrt(2) cancels the DFT's 1/sqrt(2) at Es = 1.
        let pilots = pilot_matrix(2, 1.0);
        for (idx, expect) in [(0, 1.0), (1, 1.0), (2, 1.0), (3, -1.0)] {
            let (i, j) = (idx % 2, idx / 2);
            assert!((pilots[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn clean_pilots_recover_the_sliced_channel() {
        // Ideal ADCs, no jammer, no noise: the estimate equals V H exactly.
        let (params, mut ch) = scenario(16, 4, 5);
        ch.noise_var = 0.0;
        ch.jammer_var = 0.0;
        let slicer = BeamSlicer::new(params.antennas, 4).unwrap();
        let pilots = pilot_matrix(4, params.symbol_energy);
        let mut rng = substream(5, 0, Phase::Pilot);
        let est = estimate_channel(&ch, &slicer, &ideal_spec(), &pilots, &mut rng).unwrap();
        let truth = slicer.apply(&ch.ue_channels).unwrap();
        assert!((&est.channel - &truth).norm() < 1e-10 * truth.norm());
    }

    #[test]
    fn shortcut_matches_general_least_squares() {
        // R S^H (S S^H)^-1 computed the long way must match the scaled form.
        let (params, mut ch) = scenario(8, 4, 6);
        ch.noise_var = 0.3;
        ch.jammer_var = 1.0;
        let slicer = BeamSlicer::new(params.antennas, 2).unwrap();
        let pilots = pilot_matrix(4, 2.0);
        let spec = QuantizerSpec::new(Resolution::Bits(4));

        let mut rng = substream(6, 0, Phase::Pilot);
        let est = estimate_channel(&ch, &slicer, &spec, &pilots, &mut rng).unwrap();

        // Re-run the identical front end to recover the quantized block.
        let mut rng = substream(6, 0, Phase::Pilot);
        let jam = draw_jammer_symbols(pilots.ncols(), ch.jammer_var, &mut rng);
        let y = crate::scenario::transmit_and_receive(
            &ch.ue_channels,
            &pilots,
            &ch.jammer_channel,
            &jam,
            ch.noise_var,
            &mut rng,
        )
        .unwrap();
        let sliced = slicer.apply(&y).unwrap();
        let gains = learn_gains(&sliced);
        let quantized = quantize_complex(&sliced, &gains, &spec).unwrap();
        let gram_inv = (&pilots * pilots.adjoint())
            .try_inverse()
            .expect("pilot Gram invertible");
        let general = &quantized * pilots.adjoint() * gram_inv;
        assert!((&est.channel - &general).norm() < 1e-10 * general.norm());
    }

    #[test]
    fn estimate_is_linear_in_the_observation() {
        // Scaling the channel, jammer, and noise amplitude by alpha scales
        // the ideal-ADC estimate by alpha.
        let (params, mut ch) = scenario(8, 2, 7);
        ch.noise_var = 0.0;
        ch.jammer_var = 0.0;
        let slicer = BeamSlicer::new(params.antennas, 2).unwrap();
        let pilots = pilot_matrix(2, 1.0);
        let mut rng = substream(7, 0, Phase::Pilot);
        let base = estimate_channel(&ch, &slicer, &ideal_spec(), &pilots, &mut rng).unwrap();

        let alpha = Complex64::new(-1.3, 0.4);
        let mut scaled = ch.clone();
        scaled.ue_channels *= alpha;
        let mut rng = substream(7, 0, Phase::Pilot);
        let est = estimate_channel(&scaled, &slicer, &ideal_spec(), &pilots, &mut rng).unwrap();
        assert!((&est.channel - &base.channel * alpha).norm() < 1e-10);
    }

    #[test]
    fn ls_error_variance_matches_theory() {
        // Ideal front end, no jammer: each estimate entry carries white
        // estimation noise with variance N0 / (U Es).
        let antennas = 4;
        let users = 2;
        let es = 1.0;
        let n0 = 0.8;
        let h = CMat::from_fn(antennas, users, |b, u| {
            Complex64::from_polar(1.0, 0.7 * (b * (u + 1)) as f64)
        });
        let ch = ChannelSet {
            ue_channels: h.clone(),
            jammer_channel: steering_vector(antennas, 5.0),
            noise_var: n0,
            jammer_var: 0.0,
        };
        let slicer = BeamSlicer::new(antennas, 1).unwrap();
        let pilots = pilot_matrix(users, es);
        let mut acc = 0.0;
        let reps = 10_000;
        for rep in 0..reps {
            let mut rng = substream(8, rep, Phase::Pilot);
            let est = estimate_channel(&ch, &slicer, &ideal_spec(), &pilots, &mut rng).unwrap();
            acc += (&est.channel - &h).norm_squared();
        }
        let per_entry = acc / (reps as f64 * (antennas * users) as f64);
        let expected = n0 / (users as f64 * es);
        assert!(
            (per_entry / expected - 1.0).abs() < 0.05,
            "empirical {per_entry} vs {expected}"
        );
    }

    #[test]
    fn estimators_are_deterministic() {
        let (params, mut ch) = scenario(8, 2, 9);
        ch.noise_var = 0.2;
        ch.jammer_var = 5.0;
        let slicer = BeamSlicer::new(params.antennas, 2).unwrap();
        let spec = QuantizerSpec::new(Resolution::Bits(3));

        let cov = |seed| {
            let mut rng = substream(seed, 1, Phase::JammerTraining);
            estimate_jammer_cov(&ch, &slicer, &spec, &mut rng, 32)
                .unwrap()
                .cov
        };
        assert_eq!(cov(9), cov(9));
        assert_ne!(cov(9), cov(10));

        let pilots = pilot_matrix(2, 1.0);
        let chan = |seed| {
            let mut rng = substream(seed, 1, Phase::Pilot);
            estimate_channel(&ch, &slicer, &spec, &pilots, &mut rng)
                .unwrap()
                .channel
        };
        assert_eq!(chan(9), chan(9));
        assert_ne!(chan(9), chan(10));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let (_, ch) = scenario(8, 2, 11);
        let slicer = BeamSlicer::new(4, 2).unwrap(); // wrong antenna count
        let mut rng = substream(11, 0, Phase::JammerTraining);
        assert!(matches!(
            estimate_jammer_cov(&ch, &slicer, &ideal_spec(), &mut rng, 8),
            Err(SimError::DimensionMismatch(_))
        ));

        let slicer = BeamSlicer::new(8, 2).unwrap();
        let bad_pilots = pilot_matrix(3, 1.0); // 3 rows for 2 UEs
        let mut rng = substream(11, 0, Phase::Pilot);
        assert!(matches!(
            estimate_channel(&ch, &slicer, &ideal_spec(), &bad_pilots, &mut rng),
            Err(SimError::DimensionMismatch(_))
        ));

        let mut rng = substream(11, 0, Phase::JammerTraining);
        assert!(estimate_jammer_cov(&ch, &slicer, &ideal_spec(), &mut rng, 0).is_err());
    }

    #[test]
    fn zero_jammer_covariance_is_noise_only() {
        // With the jammer disabled the covariance approaches N0 I.
        let (_, mut ch) = scenario(4, 2, 12);
        ch.noise_var = 1.0;
        ch.jammer_var = 0.0;
        let slicer = BeamSlicer::new(4, 1).unwrap();
        let mut rng = substream(12, 0, Phase::JammerTraining);
        let est = estimate_jammer_cov(&ch, &slicer, &ideal_spec(), &mut rng, 50_000).unwrap();
        let eye = CMat::identity(4, 4);
        let rel = (&est.cov - &eye).norm() / eye.norm();
        assert!(rel < 0.05, "deviation {rel}");
    }

    // Referenced here so the helper stays exercised even when the detector
    // tests move: apply_vector must agree with apply on a single column.
    #[test]
    fn slicer_vector_apply_agrees_with_matrix_apply() {
        let slicer = BeamSlicer::new(8, 4).unwrap();
        let v = CVec::from_fn(8, |i, _| Complex64::new(i as f64, -(i as f64) / 2.0));
        let m = CMat::from_fn(8, 1, |i, _| v[i]);
        let via_matrix = slicer.apply(&m).unwrap();
        let via_vector = slicer.apply_vector(&v).unwrap();
        for i in 0..8 {
            assert_eq!(via_matrix[(i, 0)], via_vector[i]);
        }
    }
}

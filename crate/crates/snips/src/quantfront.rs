//! Data-conversion front end: per-beam gain control, uniform midrise
//! quantization, the MSE-optimal step size, and the Bussgang linearization
//! constants of the quantizer on unit-variance Gaussian input.
//!
//! Real and imaginary rails are converted independently. Gain control scales
//! each beam so the quantizer sees (approximately) unit variance per real
//! dimension, which is the operating point the step size and the Bussgang
//! constants are derived for.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::CMat;

/// ADC resolution in bits per real dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    /// Finite `q`-bit converter, `1 <= q <= 24`.
    Bits(u32),
    /// Ideal converter; quantization becomes the identity.
    Infinite,
}

/// Largest finite resolution accepted; beyond this the converter is
/// numerically indistinguishable from ideal and the per-cell sums get slow.
pub const MAX_BITS: u32 = 24;

impl Resolution {
    /// True for the ideal converter.
    pub fn is_infinite(self) -> bool {
        matches!(self, Resolution::Infinite)
    }

    /// Rejects out-of-range bit widths.
    pub fn validate(self) -> Result<()> {
        match self {
            Resolution::Bits(q) if q == 0 || q > MAX_BITS => Err(SimError::InvalidParams(
                format!("ADC resolution must be in 1..={MAX_BITS} bits or inf, got {q}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(q) => write!(f, "{q}"),
            Resolution::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Resolution {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") {
            return Ok(Resolution::Infinite);
        }
        let q: u32 = t
            .parse()
            .map_err(|_| SimError::Config(format!("bad ADC resolution {t:?}")))?;
        let r = Resolution::Bits(q);
        r.validate()?;
        Ok(r)
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-x * x / 2.0).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Mean-square error `E[(Q(x) - x)^2]` of the `q`-bit midrise quantizer with
/// the given step on standard-normal input, in closed form.
///
/// Summed cell by cell over the positive half (doubled by symmetry) using the
/// Gaussian moments of each interval; the outermost cell extends to infinity.
pub fn quantizer_mse(bits: u32, step: f64) -> f64 {
    assert!((1..=MAX_BITS).contains(&bits), "unsupported bit width");
    assert!(step > 0.0, "step must be positive");
    let cells = 1u64 << (bits - 1);
    let mut mse = 0.0;
    for cell in 0..cells {
        let level = (cell as f64 + 0.5) * step;
        let lo = cell as f64 * step;
        let (i0, i1, i2) = if cell + 1 == cells {
            // Half-open saturation cell [lo, inf).
            let p = normal_pdf(lo);
            (1.0 - normal_cdf(lo), p, 1.0 - normal_cdf(lo) + lo * p)
        } else {
            let hi = (cell as f64 + 1.0) * step;
            let (plo, phi) = (normal_pdf(lo), normal_pdf(hi));
            let mass = normal_cdf(hi) - normal_cdf(lo);
            (mass, plo - phi, mass + lo * plo - hi * phi)
        };
        // integral of (level - x)^2 phi(x) over the cell
        mse += level * level * i0 - 2.0 * level * i1 + i2;
    }
    2.0 * mse
}

/// MSE-optimal step size of the `q`-bit midrise quantizer on standard-normal
/// input, found by golden-section search (the MSE is unimodal in the step).
pub fn optimal_step(bits: u32) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let f = |d: f64| quantizer_mse(bits, d);
    let (mut lo, mut hi) = (1e-3_f64, 4.0_f64);
    let mut a = hi - (hi - lo) * INV_PHI;
    let mut b = lo + (hi - lo) * INV_PHI;
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - (hi - lo) * INV_PHI;
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + (hi - lo) * INV_PHI;
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Bussgang gain and distortion power `(gamma, D)` of the `q`-bit midrise
/// quantizer with the given step on standard-normal input, in closed form:
/// `gamma = E[Q(x) x]` telescopes to the step times the Gaussian density
/// summed over the cell boundaries, and `D = E[Q(x)^2] - gamma^2`.
pub fn bussgang_constants(bits: u32, step: f64) -> (f64, f64) {
    assert!((1..=MAX_BITS).contains(&bits), "unsupported bit width");
    assert!(step > 0.0, "step must be positive");
    let cells = 1u64 << (bits - 1);

    let mut gamma = normal_pdf(0.0);
    for j in 1..cells {
        gamma += 2.0 * normal_pdf(j as f64 * step);
    }
    let gamma = step * gamma;

    let mut second = 0.0;
    for cell in 0..cells {
        let level = (cell as f64 + 0.5) * step;
        let lo = normal_cdf(cell as f64 * step);
        let hi = if cell + 1 == cells {
            1.0
        } else {
            normal_cdf((cell as f64 + 1.0) * step)
        };
        second += level * level * (hi - lo);
    }
    let second = 2.0 * second;

    (gamma, second - gamma * gamma)
}

/// Quantizer description with precomputed step and Bussgang constants.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    /// Bits per real dimension.
    pub resolution: Resolution,
    /// Step size at the unit-variance operating point (0 when ideal).
    pub step: f64,
    /// Bussgang gain `gamma` in (0, 1].
    pub bussgang_gain: f64,
    /// Distortion power `D` per real dimension.
    pub distortion_power: f64,
}

impl QuantizerSpec {
    /// Spec for the given resolution at its MSE-optimal step.
    pub fn new(resolution: Resolution) -> Self {
        match resolution {
            Resolution::Infinite => QuantizerSpec {
                resolution,
                step: 0.0,
                bussgang_gain: 1.0,
                distortion_power: 0.0,
            },
            Resolution::Bits(q) => {
                let step = optimal_step(q);
                let (bussgang_gain, distortion_power) = bussgang_constants(q, step);
                QuantizerSpec {
                    resolution,
                    step,
                    bussgang_gain,
                    distortion_power,
                }
            }
        }
    }

    /// Largest output magnitude, `(step/2) * (2^q - 1)`.
    pub fn saturation(&self) -> f64 {
        match self.resolution {
            Resolution::Infinite => f64::INFINITY,
            Resolution::Bits(q) => 0.5 * self.step * ((1u64 << q) - 1) as f64,
        }
    }
}

/// Uniform midrise quantization of one real sample; identity when ideal.
/// Inputs on or beyond the outermost cell boundary saturate to the largest
/// output level of matching sign.
pub fn quantize_real(x: f64, spec: &QuantizerSpec) -> f64 {
    let Resolution::Bits(q) = spec.resolution else {
        return x;
    };
    // Quantize the magnitude and copy the sign back, so that odd symmetry
    // Q(-x) = -Q(x) holds bit-exactly (the plain floor form is off by one
    // ulp for some negative inputs).
    let step = spec.step;
    let a = x.abs();
    if a == 0.0 {
        // zero (of either sign) belongs to the first positive cell
        return 0.5 * step;
    }
    let limit = step * (1u64 << (q - 1)) as f64;
    let magnitude = if a >= limit {
        spec.saturation()
    } else {
        step * (a / step).floor() + 0.5 * step
    };
    magnitude.copysign(x)
}

/// Gain applied to a beam whose training rows carry (numerically) no energy.
pub const MAX_GAIN: f64 = 1e6;

const ZERO_ENERGY: f64 = 1e-300;

/// Per-beam gains that present unit variance per real dimension to the ADCs.
#[derive(Debug, Clone, PartialEq)]
pub struct GainControl {
    gains: Vec<f64>,
}

impl GainControl {
    /// Identical gain on every beam (handy for tests and ideal front ends).
    pub fn uniform(beams: usize, gain: f64) -> Self {
        GainControl {
            gains: vec![gain; beams],
        }
    }

    /// One gain per beam.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Number of beams covered.
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    /// True when no beams are covered.
    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Learn per-beam gains from a training block: `g_b = sqrt(2 T / ||row_b||^2)`
/// for a block of `T` columns, so each rail of beam `b` leaves the scaler with
/// empirical unit variance. Beams with no measurable energy get [`MAX_GAIN`].
pub fn learn_gains(train: &CMat) -> GainControl {
    learn_gains_with_cap(train, MAX_GAIN)
}

/// [`learn_gains`] with an explicit gain cap.
pub fn learn_gains_with_cap(train: &CMat, max_gain: f64) -> GainControl {
    let slots = train.ncols() as f64;
    let gains = (0..train.nrows())
        .map(|b| {
            let energy = train.row(b).norm_squared();
            if energy < ZERO_ENERGY {
                max_gain
            } else {
                (2.0 * slots / energy).sqrt().min(max_gain)
            }
        })
        .collect();
    GainControl { gains }
}

/// Gain-scaled complex quantization: each entry of row `b` becomes
/// `(Q(Re g_b y) + i Q(Im g_b y)) / g_b`. Bit-exact identity when ideal.
pub fn quantize_complex(y: &CMat, gains: &GainControl, spec: &QuantizerSpec) -> Result<CMat> {
    if gains.len() != y.nrows() {
        return Err(SimError::DimensionMismatch(format!(
            "{} gains for {} beams",
            gains.len(),
            y.nrows()
        )));
    }
    if spec.resolution.is_infinite() {
        return Ok(y.clone());
    }
    let rows = y.nrows();
    let mut out = y.clone();
    for (idx, v) in out.as_mut_slice().iter_mut().enumerate() {
        let g = gains.gains[idx % rows];
        let scaled = *v * g;
        *v = Complex64::new(
            quantize_real(scaled.re, spec) / g,
            quantize_real(scaled.im, spec) / g,
        );
    }
    Ok(out)
}

//! Experiment harness: single trials, seeded parameter sweeps over
//! `(snr_db, rho_db, S, q)` cells, deterministic aggregation, and CSV output.
//!
//! Reproducibility contract: a sweep's output is a pure function of the
//! config. Trials derive their streams from `(seed, trial, phase)` only, so
//! any worker count and any scheduling order produce byte-identical CSVs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::beamslice::BeamSlicer;
use crate::detector::{build_equalizer, equalize, hard_decision};
use crate::error::{Result, SimError};
use crate::estimators::{estimate_channel, estimate_jammer_cov, pilot_matrix};
use crate::metrics::{count_bit_errors, rmsse_per_ue, served_flags, TrialResult};
use crate::quantfront::{quantize_complex, QuantizerSpec, Resolution};
use crate::rng::{substream, Phase};
use crate::scenario::{
    calibrate_jammer, calibrate_noise, draw_jammer_symbols, draw_placement, los_channel,
    transmit_and_receive, Constellation, SystemParams,
};
use crate::CMat;
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// single trial
// ---------------------------------------------------------------------------

/// Run one complete trial: placement and calibration, jammer training, pilot
/// phase, equalizer build, data phase, metrics. Deterministic in
/// `(params.seed, trial_index)`.
pub fn run_trial(params: &SystemParams, trial_index: usize) -> Result<TrialResult> {
    run_trial_inner(params, trial_index).map_err(|e| SimError::Trial {
        trial_index,
        source: Box::new(e),
    })
}

fn run_trial_inner(params: &SystemParams, trial_index: usize) -> Result<TrialResult> {
    params.validate()?;
    let trial = trial_index as u64;
    let slicer = BeamSlicer::new(params.antennas, params.cluster_size)?;
    let spec = QuantizerSpec::new(params.adc_bits);
    let constellation = Constellation::qam16(params.symbol_energy);

    // Scenario: geometry, channels, calibrated powers.
    let mut rng = substream(params.seed, trial, Phase::Placement);
    let placement = draw_placement(params, &mut rng)?;
    let mut channels = los_channel(&placement, params);
    channels.noise_var =
        calibrate_noise(&channels.ue_channels, params.snr_db, params.symbol_energy)?;
    channels.jammer_var = calibrate_jammer(
        &channels.ue_channels,
        &channels.jammer_channel,
        params.rho_db,
        params.symbol_energy,
    )?;

    // Jammer training: UEs silent.
    let mut rng = substream(params.seed, trial, Phase::JammerTraining);
    let jammer_cov = estimate_jammer_cov(
        &channels,
        &slicer,
        &spec,
        &mut rng,
        params.jammer_train_slots,
    )?;

    // Pilot phase: jammer stays active; gains learned here are reused below.
    let mut rng = substream(params.seed, trial, Phase::Pilot);
    let pilots = pilot_matrix(params.users, params.symbol_energy);
    let estimate = estimate_channel(&channels, &slicer, &spec, &pilots, &mut rng)?;

    let eq = build_equalizer(
        &estimate.channel,
        &jammer_cov.cov,
        channels.noise_var,
        params.symbol_energy,
        &spec,
        &estimate.gains,
    )?;

    // Data phase.
    let mut rng = substream(params.seed, trial, Phase::Data);
    let mut sent_labels = vec![0u8; params.users * params.data_slots];
    let mut sent = CMat::zeros(params.users, params.data_slots);
    for k in 0..params.data_slots {
        for u in 0..params.users {
            let label = Constellation::draw_index(&mut rng);
            sent_labels[u * params.data_slots + k] = label as u8;
            sent[(u, k)] = constellation.point(label);
        }
    }
    let jammer_symbols = draw_jammer_symbols(params.data_slots, channels.jammer_var, &mut rng);
    let y = transmit_and_receive(
        &channels.ue_channels,
        &sent,
        &channels.jammer_channel,
        &jammer_symbols,
        channels.noise_var,
        &mut rng,
    )?;
    let observed = quantize_complex(&slicer.apply(&y)?, &estimate.gains, &spec)?;
    let symbol_estimates = equalize(&eq, &observed)?;
    let (_, detected_bits) = hard_decision(&symbol_estimates, &constellation);

    let mut sent_bits = Vec::with_capacity(detected_bits.len());
    for &label in &sent_labels {
        sent_bits.extend_from_slice(&Constellation::bits(label as usize));
    }
    let rmsse = rmsse_per_ue(&sent, &symbol_estimates)?;
    let served = served_flags(&rmsse);
    let bit_errors = count_bit_errors(&sent_bits, &detected_bits);
    let bit_count = sent_bits.len() as u64;

    Ok(TrialResult {
        ber: bit_errors as f64 / bit_count as f64,
        bit_errors,
        bit_count,
        rmsse,
        served,
        cluster_size: params.cluster_size,
        resolution: params.adc_bits,
        snr_db: params.snr_db,
        rho_db: params.rho_db,
        trial_index,
        seed: params.seed,
    })
}

// ---------------------------------------------------------------------------
// sweep configuration
// ---------------------------------------------------------------------------

/// Base parameters plus the four sweep axes, output path, and worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Cell-independent parameters; its `snr_db`/`rho_db`/`cluster_size`/
    /// `adc_bits` are the values substituted when an axis is not swept.
    pub base: SystemParams,
    /// SNR grid in dB.
    pub sweep_snr_db: Vec<f64>,
    /// Jammer power grid in dB; `None` entries disable the jammer.
    pub sweep_rho_db: Vec<Option<f64>>,
    /// Cluster-size grid.
    pub sweep_cluster_size: Vec<usize>,
    /// Resolution grid.
    pub sweep_adc_bits: Vec<Resolution>,
    /// CSV output path.
    pub out: PathBuf,
    /// Worker threads for the sweep.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let base = SystemParams::default();
        ExperimentConfig {
            sweep_snr_db: (-5..=5).map(|k| 3.0 * k as f64).collect(),
            sweep_rho_db: vec![base.rho_db],
            sweep_cluster_size: vec![base.cluster_size],
            sweep_adc_bits: vec![base.adc_bits],
            out: PathBuf::from("results.csv"),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            base,
        }
    }
}

impl ExperimentConfig {
    /// Parameters of one sweep cell by flat index (row-major over the nested
    /// snr -> rho -> S -> q loops).
    pub fn cell_params(&self, cell: &CellParams) -> SystemParams {
        let mut p = self.base.clone();
        p.snr_db = cell.snr_db;
        p.rho_db = cell.rho_db;
        p.cluster_size = cell.cluster_size;
        p.adc_bits = cell.adc_bits;
        p
    }

    /// The sweep cells in deterministic order.
    pub fn cells(&self) -> Vec<CellParams> {
        let mut cells = Vec::with_capacity(
            self.sweep_snr_db.len()
                * self.sweep_rho_db.len()
                * self.sweep_cluster_size.len()
                * self.sweep_adc_bits.len(),
        );
        for &snr_db in &self.sweep_snr_db {
            for &rho_db in &self.sweep_rho_db {
                for &cluster_size in &self.sweep_cluster_size {
                    for &adc_bits in &self.sweep_adc_bits {
                        cells.push(CellParams {
                            snr_db,
                            rho_db,
                            cluster_size,
                            adc_bits,
                        });
                    }
                }
            }
        }
        cells
    }

    /// Validates the base parameters and every cell of the grid.
    pub fn validate(&self) -> Result<()> {
        if self.sweep_snr_db.is_empty()
            || self.sweep_rho_db.is_empty()
            || self.sweep_cluster_size.is_empty()
            || self.sweep_adc_bits.is_empty()
        {
            return Err(SimError::Config("empty sweep axis".into()));
        }
        if self.workers == 0 {
            return Err(SimError::Config("workers must be >= 1".into()));
        }
        self.base.validate()?;
        for cell in self.cells() {
            self.cell_params(&cell).validate()?;
        }
        Ok(())
    }

    /// Apply one `key=value` assignment (config-file line or `--set` pair).
    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| SimError::Config(format!("bad value for {what}: {v:?}"));
        match key.trim() {
            "B" => self.base.antennas = parse_num(v).ok_or_else(|| bad("B"))?,
            "U" => self.base.users = parse_num(v).ok_or_else(|| bad("U"))?,
            "S" => {
                self.base.cluster_size = parse_num(v).ok_or_else(|| bad("S"))?;
                self.sweep_cluster_size = vec![self.base.cluster_size];
            }
            "q" => {
                self.base.adc_bits = v.parse()?;
                self.sweep_adc_bits = vec![self.base.adc_bits];
            }
            "snr_db" => {
                self.base.snr_db = parse_num(v).ok_or_else(|| bad("snr_db"))?;
                self.sweep_snr_db = vec![self.base.snr_db];
            }
            "rho_db" => {
                self.base.rho_db = parse_rho(v)?;
                self.sweep_rho_db = vec![self.base.rho_db];
            }
            "Es" => self.base.symbol_energy = parse_num(v).ok_or_else(|| bad("Es"))?,
            "N" => self.base.jammer_train_slots = parse_num(v).ok_or_else(|| bad("N"))?,
            "n_data" => self.base.data_slots = parse_num(v).ok_or_else(|| bad("n_data"))?,
            "trials" => self.base.trials = parse_num(v).ok_or_else(|| bad("trials"))?,
            "seed" => self.base.seed = parse_num(v).ok_or_else(|| bad("seed"))?,
            "sector_deg" => self.base.sector_deg = parse_num(v).ok_or_else(|| bad("sector_deg"))?,
            "min_sep_deg" => {
                self.base.min_sep_deg = parse_num(v).ok_or_else(|| bad("min_sep_deg"))?
            }
            "pc_range_db" => {
                self.base.pc_range_db = parse_num(v).ok_or_else(|| bad("pc_range_db"))?
            }
            "sweep_snr_db" => {
                self.sweep_snr_db =
                    parse_list(v, parse_num::<f64>).ok_or_else(|| bad("sweep_snr_db"))?
            }
            "sweep_rho_db" => {
                self.sweep_rho_db =
                    parse_list(v, |t| parse_rho(t).ok()).ok_or_else(|| bad("sweep_rho_db"))?
            }
            "sweep_S" => {
                self.sweep_cluster_size =
                    parse_list(v, parse_num::<usize>).ok_or_else(|| bad("sweep_S"))?
            }
            "sweep_q" => {
                self.sweep_adc_bits = parse_list(v, |t| t.parse::<Resolution>().ok())
                    .ok_or_else(|| bad("sweep_q"))?
            }
            "out" => self.out = PathBuf::from(v),
            "workers" => self.workers = parse_num(v).ok_or_else(|| bad("workers"))?,
            other => {
                return Err(SimError::Config(format!("unknown key {other:?}")));
            }
        }
        Ok(())
    }

    /// Parse a flat `key = value` config document (one pair per line; blank
    /// lines and `#` comments ignored) on top of the current values.
    pub fn apply_document(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SimError::Config(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                )));
            };
            let value = value.trim().trim_matches('"');
            self.apply_key(key, value)
                .map_err(|e| SimError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Load a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_document(&text)?;
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Option<T> {
    v.trim().parse().ok()
}

/// `rho_db` accepts a dB number, or `none`/`-inf`/`off` for "no jammer".
pub fn parse_rho(v: &str) -> Result<Option<f64>> {
    let t = v.trim();
    if t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("off") || t == "-inf" {
        return Ok(None);
    }
    let x: f64 = t
        .parse()
        .map_err(|_| SimError::Config(format!("bad rho_db value {t:?}")))?;
    if x == f64::NEG_INFINITY {
        return Ok(None);
    }
    if !x.is_finite() {
        return Err(SimError::Config(format!("bad rho_db value {t:?}")));
    }
    Ok(Some(x))
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let items: Option<Vec<T>> = v
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(f)
        .collect();
    items.filter(|list| !list.is_empty())
}

// ---------------------------------------------------------------------------
// sweep execution
// ---------------------------------------------------------------------------

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub snr_db: f64,
    pub rho_db: Option<f64>,
    pub cluster_size: usize,
    pub adc_bits: Resolution,
}

/// Count-and-sum aggregates of one sweep cell, folded in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub cell: CellParams,
    /// UEs per trial.
    pub ue_count: usize,
    /// Trials that completed without error.
    pub trials_completed: usize,
    pub bit_errors: u64,
    pub bit_count: u64,
    pub served_count: u64,
    pub served_total: u64,
    /// All per-UE RMSSE samples of the cell, trial-major order.
    pub rmsse_samples: Vec<f64>,
}

impl CellAggregate {
    fn new(cell: CellParams, ue_count: usize) -> Self {
        CellAggregate {
            cell,
            ue_count,
            trials_completed: 0,
            bit_errors: 0,
            bit_count: 0,
            served_count: 0,
            served_total: 0,
            rmsse_samples: Vec::new(),
        }
    }

    /// Fold one trial into the aggregate.
    pub fn absorb(&mut self, trial: &TrialResult) {
        self.trials_completed += 1;
        self.bit_errors += trial.bit_errors;
        self.bit_count += trial.bit_count;
        self.served_count += trial.served_count();
        self.served_total += trial.served.len() as u64;
        self.rmsse_samples.extend_from_slice(&trial.rmsse);
    }

    /// Mean uncoded BER over all bits of the cell.
    pub fn ber_mean(&self) -> f64 {
        if self.bit_count == 0 {
            f64::NAN
        } else {
            self.bit_errors as f64 / self.bit_count as f64
        }
    }

    /// Fraction of served UEs over all trials of the cell.
    pub fn served_fraction(&self) -> f64 {
        if self.served_total == 0 {
            f64::NAN
        } else {
            self.served_count as f64 / self.served_total as f64
        }
    }

    /// Binomial standard error of the served fraction.
    pub fn served_stderr(&self) -> f64 {
        let n = self.served_total as f64;
        let p = self.served_fraction();
        (p * (1.0 - p) / n).sqrt()
    }

    /// RMSSE quantile (linear interpolation between order statistics).
    pub fn rmsse_quantile(&self, p: f64) -> f64 {
        let mut sorted = self.rmsse_samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("RMSSE samples are finite"));
        quantile_sorted(&sorted, p)
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// A trial that failed, kept out of the aggregates but reported.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub cell_index: usize,
    pub trial_index: usize,
    pub message: String,
}

/// Output of a full sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellAggregate>,
    pub failures: Vec<TrialFailure>,
}

impl SweepResult {
    /// Find a cell aggregate by its coordinates.
    pub fn cell(
        &self,
        snr_db: f64,
        rho_db: Option<f64>,
        cluster_size: usize,
        adc_bits: Resolution,
    ) -> Option<&CellAggregate> {
        self.cells.iter().find(|c| {
            c.cell.snr_db == snr_db
                && c.cell.rho_db == rho_db
                && c.cell.cluster_size == cluster_size
                && c.cell.adc_bits == adc_bits
        })
    }
}

/// Run every `(cell, trial)` job of the sweep on a private worker pool and
/// fold the results in ascending `(cell, trial)` order, so the output is
/// independent of scheduling. Failed trials are excluded from the aggregates
/// and reported in `failures`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let cells = config.cells();
    let trials = config.base.trials;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| SimError::Config(format!("cannot build worker pool: {e}")))?;
    let mut outcomes: Vec<(usize, usize, std::result::Result<TrialResult, String>)> =
        pool.install(|| {
            jobs.par_iter()
                .map(|&(c, t)| {
                    let params = config.cell_params(&cells[c]);
                    let run = run_trial(&params, t).map_err(|e| e.to_string());
                    (c, t, run)
                })
                .collect()
        });
    // Rayon's indexed collect already preserves job order; the sort makes the
    // merge order an explicit invariant rather than a library property.
    outcomes.sort_by_key(|&(c, t, _)| (c, t));

    let mut aggregates: Vec<CellAggregate> = cells
        .iter()
        .map(|&cell| CellAggregate::new(cell, config.base.users))
        .collect();
    let mut failures = Vec::new();
    for (c, t, outcome) in outcomes {
        match outcome {
            Ok(trial) => aggregates[c].absorb(&trial),
            Err(message) => failures.push(TrialFailure {
                cell_index: c,
                trial_index: t,
                message,
            }),
        }
    }
    Ok(SweepResult {
        cells: aggregates,
        failures,
    })
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Column header of the sweep CSV.
pub const CSV_HEADER: &str = "snr_db,rho_db,S,q,trials,ue_count,ber_mean,served_count,served_total,served_fraction,rmsse_p50,rmsse_p90";

/// Format a float with 9 significant digits; infinities print as `inf`/`-inf`
/// (the spelling the `rho_db`/`q` columns use for "disabled"/"ideal").
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..=12).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

fn csv_line(agg: &CellAggregate) -> String {
    let rho = match agg.cell.rho_db {
        Some(r) => format_sig9(r),
        None => "-inf".into(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        format_sig9(agg.cell.snr_db),
        rho,
        agg.cell.cluster_size,
        agg.cell.adc_bits,
        agg.trials_completed,
        agg.ue_count,
        format_sig9(agg.ber_mean()),
        agg.served_count,
        agg.served_total,
        format_sig9(agg.served_fraction()),
        format_sig9(agg.rmsse_quantile(0.5)),
        format_sig9(agg.rmsse_quantile(0.9)),
    )
}

/// Write the sweep CSV: the fixed header plus one row per cell, in sweep
/// order.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut text = String::with_capacity(64 * (result.cells.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for agg in &result.cells {
        text.push_str(&csv_line(agg));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| SimError::Write {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// plot data
// ---------------------------------------------------------------------------

/// Raw `(rho_db, S, q)` fields identifying one curve in a sweep CSV.
type CurveKey = (String, String, String);
/// A curve's rows as `(snr_db, raw CSV line)` pairs.
type CurveRows = Vec<(f64, String)>;

/// Split a sweep CSV into one file per `(rho_db, S, q)` curve, rows ordered
/// by SNR, for direct consumption by plotting tools. Returns the files
/// written, in first-appearance order of the curves.
pub fn split_curves(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != CSV_HEADER {
        return Err(SimError::Config(format!(
            "{}: unexpected CSV header {header:?}",
            csv_path.display()
        )));
    }
    // key -> (first-appearance index, rows)
    let mut curves: BTreeMap<CurveKey, (usize, CurveRows)> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(SimError::Config(format!(
                "{} row {}: expected 12 fields, got {}",
                csv_path.display(),
                n + 2,
                fields.len()
            )));
        }
        let snr: f64 = fields[0]
            .parse()
            .map_err(|_| SimError::Config(format!("bad snr_db field {:?}", fields[0])))?;
        let key = (
            fields[1].to_string(),
            fields[2].to_string(),
            fields[3].to_string(),
        );
        let slot = curves.len();
        curves
            .entry(key)
            .or_insert_with(|| (slot, Vec::new()))
            .1
            .push((snr, line.to_string()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut entries: Vec<(usize, CurveKey, CurveRows)> = curves
        .into_iter()
        .map(|(key, (order, rows))| (order, key, rows))
        .collect();
    entries.sort_by_key(|&(order, _, _)| order);
    let mut written = Vec::with_capacity(entries.len());
    for (_, (rho, s, q), mut rows) in entries {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("snr fields are finite"));
        let name = format!(
            "curve_rho{}_S{}_q{}.csv",
            curve_tag(&rho),
            curve_tag(&s),
            curve_tag(&q)
        );
        let path = out_dir.join(name);
        let mut text = String::new();
        text.push_str(CSV_HEADER);
        text.push('\n');
        for (_, line) in rows {
            text.push_str(&line);
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|source| SimError::Write {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Compact a CSV field for use inside a file name: numbers lose redundant
/// trailing zeros ("25.0000000" -> "25"), `-inf` becomes "none".
fn curve_tag(field: &str) -> String {
    if field == "-inf" {
        return "none".into();
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => {
            let s = format!("{v}");
            s.replace('-', "m")
        }
        _ => field.to_string(),
    }
}

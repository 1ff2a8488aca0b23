//! Command-line front end for the simulator: parameter sweeps, single-trial
//! inspection, quantizer constants, and plot-data extraction.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use snips::harness::{
    emit_csv, format_sig9, run_experiment, run_trial, split_curves, ExperimentConfig,
};
use snips::quantfront::{bussgang_constants, optimal_step, Resolution};

#[derive(Parser)]
#[command(name = "snips", version, about = "Jammer-resilient low-resolution massive MIMO uplink simulator", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured parameter sweep and write a results CSV.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Output CSV path (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the config's `workers`).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a single trial at the base parameters and print its metrics.
    Trial {
        #[command(flatten)]
        common: CommonArgs,
        /// Trial index (selects the random streams).
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Print the quantizer design table (step, gain, distortion per bit width).
    Constants,
    /// Split a sweep CSV into per-curve files ordered by SNR.
    Plotdata {
        /// Input CSV produced by `run`.
        #[arg(long)]
        csv: PathBuf,
        /// Directory for the per-curve files.
        #[arg(long, default_value = "curves")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of `key = value` lines (see README for the schema).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep cell (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
    /// Extra `KEY=VALUE` overrides, applied in order after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl CommonArgs {
    /// Defaults, then the config file, then `--set` pairs in order, then the
    /// explicit flags.
    fn build(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        for pair in &self.set {
            let Some((key, value)) = pair.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {pair:?}");
            };
            cfg.apply_key(key, value)
                .with_context(|| format!("--set {pair}"))?;
        }
        if let Some(seed) = self.seed {
            cfg.base.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.base.trials = trials;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            common,
            out,
            workers,
        } => {
            let mut cfg = common.build()?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(workers) = workers {
                cfg.workers = workers;
            }
            let cells = cfg.cells().len();
            eprintln!(
                "sweep: {cells} cells x {} trials (B={}, U={}, {} workers)",
                cfg.base.trials, cfg.base.antennas, cfg.base.users, cfg.workers
            );
            let result = run_experiment(&cfg)?;
            emit_csv(&result, &cfg.out)?;
            for agg in &result.cells {
                let rho = match agg.cell.rho_db {
                    Some(r) => format!("{r} dB"),
                    None => "off".into(),
                };
                eprintln!(
                    "  snr {:>6} dB | jammer {rho:>8} | S {:>3} | q {:>3} | ber {} | served {}/{}",
                    agg.cell.snr_db,
                    agg.cell.cluster_size,
                    agg.cell.adc_bits,
                    format_sig9(agg.ber_mean()),
                    agg.served_count,
                    agg.served_total,
                );
            }
            println!("wrote {}", cfg.out.display());
            if result.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in &result.failures {
                    eprintln!(
                        "failed: cell {} trial {}: {}",
                        f.cell_index, f.trial_index, f.message
                    );
                }
                eprintln!("{} trial(s) failed", result.failures.len());
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Trial { common, trial } => {
            let cfg = common.build()?;
            let result = run_trial(&cfg.base, trial)?;
            println!(
                "trial {} (seed {}): snr {} dB, jammer {}, S={}, q={}",
                result.trial_index,
                result.seed,
                result.snr_db,
                match result.rho_db {
                    Some(r) => format!("{r} dB"),
                    None => "off".into(),
                },
                result.cluster_size,
                result.resolution,
            );
            println!(
                "ber {} ({}/{} bits)",
                format_sig9(result.ber),
                result.bit_errors,
                result.bit_count
            );
            println!(
                "served {}/{} UEs (RMSSE threshold {})",
                result.served_count(),
                result.served.len(),
                snips::metrics::SERVED_RMSSE_THRESHOLD
            );
            for (u, (rmsse, served)) in result.rmsse.iter().zip(&result.served).enumerate() {
                println!(
                    "  ue {u:>2}: rmsse {} {}",
                    format_sig9(*rmsse),
                    if *served { "served" } else { "not served" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Constants => {
            println!("{:>4} {:>14} {:>14} {:>14}", "q", "step", "gain", "distortion");
            for bits in 1..=8 {
                let step = optimal_step(bits);
                let (gain, distortion) = bussgang_constants(bits, step);
                println!(
                    "{:>4} {:>14.10} {:>14.10} {:>14.10}",
                    bits, step, gain, distortion
                );
            }
            let ideal = Resolution::Infinite;
            println!("{:>4} {:>14} {:>14.10} {:>14.10}", ideal.to_string(), "-", 1.0, 0.0);
            Ok(ExitCode::SUCCESS)
        }
        Command::Plotdata { csv, out } => {
            let files = split_curves(&csv, &out)?;
            for f in &files {
                println!("{}", f.display());
            }
            eprintln!("{} curve file(s) in {}", files.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adafleet::exec::{with_threads, Exec};
use adafleet::harness::config_file::load_config;
use adafleet::harness::cpd_bench::{run_bench, BenchSettings};
use adafleet::harness::experiment::{compare, threads_from_env, Arm, DEFAULT_TOLERANCE};
use adafleet::harness::metrics::{write_changes, write_metrics};
use adafleet::qdispatch::ModelBank;
use adafleet::simcore::{run_with, RunOptions, SimConfig};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adafleet", version, about = "Ride-sharing fleet simulator with adaptive dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override `sim.ticks`.
    #[arg(long)]
    ticks: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// One simulation; writes metrics.csv and changes.csv.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Single Q-table, change detection off.
        #[arg(long)]
        baseline: bool,
        /// Write the learned Q-tables here after the run.
        #[arg(long)]
        save_q: Option<PathBuf>,
        /// Start from saved Q-tables and exploit them with minimal exploration.
        #[arg(long)]
        load_q: Option<PathBuf>,
    },
    /// Paired adaptive and baseline runs; writes report.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ticks within which a detection counts as finding a true change.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: u64,
    },
    /// Synthetic change-point recovery suite.
    CpdBench {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(common: &Common) -> anyhow::Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => SimConfig::default(),
    };
    if let Some(t) = common.ticks {
        cfg.ticks = t;
    }
    Ok(cfg)
}

fn out_dir(p: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Run { common, seed, baseline, save_q, load_q } => {
            let mut cfg = load(&common)?;
            if baseline {
                cfg = cfg.baseline();
            }
            let mut opts = RunOptions::checked();
            if let Some(p) = &load_q {
                opts.initial_bank = Some(ModelBank::load(p, cfg.rl.k)?);
                opts.exploit_only = true;
            }
            out_dir(&common.out)?;
            let out = with_threads(threads, || run_with(&cfg, seed, opts))?;
            write_metrics(&common.out.join("metrics.csv"), &out.metrics)?;
            write_changes(&common.out.join("changes.csv"), &out.changes)?;
            if let Some(p) = &save_q {
                out.bank.save(p)?;
            }
            if let Some(v) = out.violations.first() {
                bail!("invariant violated: {v}");
            }
            let s = &out.summary;
            println!(
                "seed {} ticks {} generated {} accepted {} accept_rate {:.4} profit {:.2} change_points {}",
                s.seed, s.ticks, s.generated, s.accepted, s.accept_rate, s.total_profit, s.change_points
            );
        }
        Command::Compare { common, seeds, seed, tolerance } => {
            let cfg = load(&common)?;
            out_dir(&common.out)?;
            let list: Vec<u64> = (seed..seed + seeds).collect();
            let report = compare(&cfg, &list, tolerance, Exec::Parallel, threads)?;
            report.write(&common.out.join("report.csv"))?;
            println!(
                "adaptive {:.4} baseline {:.4} delta {:+.4} precision {:.2} recall {:.2} mean_abs_dt {:.1}",
                report.mean_accept(Arm::Adaptive),
                report.mean_accept(Arm::Baseline),
                report.mean_accept(Arm::Delta),
                report.pooled.precision,
                report.pooled.recall,
                report.pooled.mean_abs_delta
            );
        }
        Command::CpdBench { trials, threshold, seed } => {
            let s = BenchSettings { trials, threshold, seed, ..Default::default() };
            let r = with_threads(threads, || run_bench(&s, Exec::Parallel))?;
            println!(
                "trials {} recall {:.2} precision {:.2} false_positive_rate {:.2} mean_latency {:.2}",
                r.trials, r.recall, r.precision, r.false_positive_rate, r.mean_latency
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

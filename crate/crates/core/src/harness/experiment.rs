//! Paired adaptive-versus-baseline runs over a set of seeds.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{with_threads, Exec};
use crate::simcore::{run, RunSummary, SimConfig};

use super::metrics::write_csv;
use super::scorecard::{changepoint_scorecard, Scorecard};

/// Environment variable capping the worker threads used for seed runs.
pub const THREADS_ENV: &str = "ADAFLEET_THREADS";

/// Tolerance in ticks for matching detections to true changes.
pub const DEFAULT_TOLERANCE: u64 = 30;

/// `ADAFLEET_THREADS` as a positive count, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(THREADS_ENV, format!("expected a positive integer, got `{v}`"))),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Adaptive,
    Baseline,
    /// Adaptive minus baseline.
    Delta,
}

/// One line of `report.csv`. `seed` is empty on the pooled rows; the
/// change-point columns are empty on delta rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub arm: Arm,
    pub seed: Option<u64>,
    pub accept_rate: f64,
    pub completed: f64,
    pub total_profit: f64,
    pub fleet_distance_km: f64,
    pub mean_utilization: f64,
    pub mean_idle_minutes: f64,
    pub change_points: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub mean_abs_delta: Option<f64>,
}

pub const REPORT_HEADER: [&str; 12] = [
    "arm",
    "seed",
    "accept_rate",
    "completed",
    "total_profit",
    "fleet_distance_km",
    "mean_utilization",
    "mean_idle_minutes",
    "change_points",
    "precision",
    "recall",
    "mean_abs_delta",
];

/// Both arms of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPair {
    pub seed: u64,
    pub adaptive: RunSummary,
    pub baseline: RunSummary,
    pub detected: Vec<u64>,
    pub scorecard: Scorecard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Sorted by seed.
    pub pairs: Vec<SeedPair>,
    pub truth: Vec<u64>,
    pub tolerance: u64,
    /// Detections from all adaptive runs scored together.
    pub pooled: Scorecard,
}

impl ExperimentReport {
    pub fn mean_accept(&self, arm: Arm) -> f64 {
        let n = self.pairs.len().max(1) as f64;
        self.pairs
            .iter()
            .map(|p| match arm {
                Arm::Adaptive => p.adaptive.accept_rate,
                Arm::Baseline => p.baseline.accept_rate,
                Arm::Delta => p.adaptive.accept_rate - p.baseline.accept_rate,
            })
            .sum::<f64>()
            / n
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::with_capacity(3 * self.pairs.len() + 3);
        for p in &self.pairs {
            rows.push(summary_row(Arm::Adaptive, Some(p.seed), &p.adaptive, Some(&p.scorecard)));
            rows.push(summary_row(Arm::Baseline, Some(p.seed), &p.baseline, None));
            rows.push(difference(Some(p.seed), &rows[rows.len() - 2], &rows[rows.len() - 1]));
        }
        if !self.pairs.is_empty() {
            let a = mean_row(Arm::Adaptive, rows.iter().filter(|r| r.arm == Arm::Adaptive), Some(&self.pooled));
            let b = mean_row(Arm::Baseline, rows.iter().filter(|r| r.arm == Arm::Baseline), None);
            let d = difference(None, &a, &b);
            rows.extend([a, b, d]);
        }
        rows
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_csv(std::fs::File::create(path)?, &REPORT_HEADER, &self.rows())
    }
}

fn summary_row(arm: Arm, seed: Option<u64>, s: &RunSummary, card: Option<&Scorecard>) -> ReportRow {
    ReportRow {
        arm,
        seed,
        accept_rate: s.accept_rate,
        completed: s.completed as f64,
        total_profit: s.total_profit,
        fleet_distance_km: s.fleet_distance_km,
        mean_utilization: s.mean_utilization,
        mean_idle_minutes: s.mean_idle_minutes,
        change_points: s.change_points as f64,
        precision: card.map(|c| c.precision),
        recall: card.map(|c| c.recall),
        mean_abs_delta: card.map(|c| c.mean_abs_delta),
    }
}

fn difference(seed: Option<u64>, a: &ReportRow, b: &ReportRow) -> ReportRow {
    ReportRow {
        arm: Arm::Delta,
        seed,
        accept_rate: a.accept_rate - b.accept_rate,
        completed: a.completed - b.completed,
        total_profit: a.total_profit - b.total_profit,
        fleet_distance_km: a.fleet_distance_km - b.fleet_distance_km,
        mean_utilization: a.mean_utilization - b.mean_utilization,
        mean_idle_minutes: a.mean_idle_minutes - b.mean_idle_minutes,
        change_points: a.change_points - b.change_points,
        precision: None,
        recall: None,
        mean_abs_delta: None,
    }
}

fn mean_row<'a>(arm: Arm, rows: impl Iterator<Item = &'a ReportRow>, card: Option<&Scorecard>) -> ReportRow {
    let rows: Vec<&ReportRow> = rows.collect();
    let n = rows.len() as f64;
    let mean = |f: fn(&ReportRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    ReportRow {
        arm,
        seed: None,
        accept_rate: mean(|r| r.accept_rate),
        completed: mean(|r| r.completed),
        total_profit: mean(|r| r.total_profit),
        fleet_distance_km: mean(|r| r.fleet_distance_km),
        mean_utilization: mean(|r| r.mean_utilization),
        mean_idle_minutes: mean(|r| r.mean_idle_minutes),
        change_points: mean(|r| r.change_points),
        precision: card.map(|c| c.precision),
        recall: card.map(|c| c.recall),
        mean_abs_delta: card.map(|c| c.mean_abs_delta),
    }
}

/// Run `cfg` and its baseline on every seed, fanning the runs out with
/// `exec` under at most `threads` workers. Any invariant violation fails
/// the whole comparison.
pub fn compare(cfg: &SimConfig, seeds: &[u64], tolerance: u64, exec: Exec, threads: Option<usize>) -> Result<ExperimentReport> {
    if tolerance == 0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let base_cfg = cfg.clone().baseline();
    let truth = cfg.schedule()?.change_ticks(cfg.ticks);
    let jobs: Vec<(u64, bool)> = seeds.iter().flat_map(|&s| [(s, true), (s, false)]).collect();
    let outputs = with_threads(threads, || {
        exec.map(&jobs, |&(seed, adaptive)| run(if adaptive { cfg } else { &base_cfg }, seed))
    });
    let mut pairs = Vec::with_capacity(seeds.len());
    let mut all_detected = Vec::new();
    let mut all_truth = Vec::new();
    let mut outputs = outputs.into_iter();
    for &seed in &seeds {
        let a = outputs.next().expect("one output per job")?;
        let b = outputs.next().expect("one output per job")?;
        for (arm, out) in [("adaptive", &a), ("baseline", &b)] {
            if let Some(v) = out.violations.first() {
                return Err(Error::Invariant(format!("seed {seed} {arm}: {v}")));
            }
        }
        let detected: Vec<u64> = a.changes.iter().map(|c| c.tick).collect();
        // offset each seed so pooled matching never crosses seeds
        let offset = seed * (cfg.ticks + 2 * tolerance + 1);
        all_detected.extend(detected.iter().map(|t| t + offset));
        all_truth.extend(truth.iter().map(|t| t + offset));
        pairs.push(SeedPair {
            seed,
            scorecard: changepoint_scorecard(&detected, &truth, tolerance),
            detected,
            adaptive: a.summary,
            baseline: b.summary,
        });
    }
    Ok(ExperimentReport {
        pooled: changepoint_scorecard(&all_detected, &all_truth, tolerance),
        pairs,
        truth,
        tolerance,
    })
}

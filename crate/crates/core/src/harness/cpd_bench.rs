//! Synthetic change-point suite: windows of 40 + 40 Dirichlet samples with
//! a known split, and windows of 80 samples with no change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cpd::{detect_change, sample_dirichlet, CompositionSample, DetectorSettings};
use crate::error::Result;
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub trials: usize,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub segment: usize,
    /// Largest `|T* - segment|` counted as a hit.
    pub tolerance: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            trials: 100,
            before: vec![8.0, 2.0],
            after: vec![2.0, 8.0],
            segment: 40,
            tolerance: 3,
            threshold: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchResult {
    pub trials: usize,
    /// Change windows flagged with `T*` inside the tolerance.
    pub hits: usize,
    /// Change windows flagged at all.
    pub flagged: usize,
    /// No-change windows flagged.
    pub false_alarms: usize,
    pub recall: f64,
    /// Hits over all flagged windows, change and no-change.
    pub precision: f64,
    pub false_positive_rate: f64,
    /// Mean `|T* - segment|` over hits.
    pub mean_latency: f64,
}

fn draw(alpha: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<CompositionSample>> {
    (0..n).map(|_| sample_dirichlet(alpha, rng)).collect()
}

/// Trial `i` of either kind draws from its own stream, so the result does
/// not depend on `exec`.
pub fn run_bench(s: &BenchSettings, exec: Exec) -> Result<BenchResult> {
    let det = DetectorSettings {
        threshold: s.threshold,
        min_segment: None,
        exec: Exec::Sequential,
    };
    let trial = |i: usize| -> Result<(Option<usize>, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(2 * i as u64);
        let mut window = draw(&s.before, s.segment, &mut rng)?;
        window.extend(draw(&s.after, s.segment, &mut rng)?);
        let change = detect_change(&window, &det)?;
        let offset = change.detected.then(|| change.change_index.abs_diff(s.segment));

        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(2 * i as u64 + 1);
        let null = draw(&s.before, 2 * s.segment, &mut rng)?;
        Ok((offset, detect_change(&null, &det)?.detected))
    };
    let outcomes = exec.map_range(s.trials, trial).into_iter().collect::<Result<Vec<_>>>()?;
    let flagged = outcomes.iter().filter(|(o, _)| o.is_some()).count();
    let latencies: Vec<usize> = outcomes
        .iter()
        .filter_map(|(o, _)| *o)
        .filter(|&o| o <= s.tolerance)
        .collect();
    let hits = latencies.len();
    let false_alarms = outcomes.iter().filter(|(_, f)| *f).count();
    let trials = s.trials.max(1) as f64;
    let raised = flagged + false_alarms;
    Ok(BenchResult {
        trials: s.trials,
        hits,
        flagged,
        false_alarms,
        recall: hits as f64 / trials,
        precision: if raised == 0 { 1.0 } else { hits as f64 / raised as f64 },
        false_positive_rate: false_alarms as f64 / trials,
        mean_latency: if hits == 0 {
            0.0
        } else {
            latencies.iter().sum::<usize>() as f64 / hits as f64
        },
    })
}

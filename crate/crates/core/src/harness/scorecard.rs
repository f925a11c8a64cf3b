//! Matching detected change points against a known schedule.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scorecard {
    pub precision: f64,
    pub recall: f64,
    /// Mean distance between matched pairs; zero when nothing matched.
    pub mean_abs_delta: f64,
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
}

/// Each detection, in order, takes the nearest still-unmatched true change
/// within `tolerance` ticks (earlier true change on ties). Empty sets score 1.
pub fn changepoint_scorecard(detected: &[u64], truth: &[u64], tolerance: u64) -> Scorecard {
    let mut used = vec![false; truth.len()];
    let mut deltas = Vec::new();
    for &d in detected {
        let best = truth
            .iter()
            .enumerate()
            .filter(|&(i, &t)| !used[i] && d.abs_diff(t) <= tolerance)
            .min_by_key(|&(i, &t)| (d.abs_diff(t), i));
        if let Some((i, &t)) = best {
            used[i] = true;
            deltas.push(d.abs_diff(t));
        }
    }
    let matched = deltas.len();
    let ratio = |n: usize| if n == 0 { 1.0 } else { matched as f64 / n as f64 };
    Scorecard {
        precision: ratio(detected.len()),
        recall: ratio(truth.len()),
        mean_abs_delta: if matched == 0 {
            0.0
        } else {
            deltas.iter().sum::<u64>() as f64 / matched as f64
        },
        matched,
        detected: detected.len(),
        truth: truth.len(),
    }
}

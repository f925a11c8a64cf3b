//! Split log-likelihood change-point test over a sample window.

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::dirichlet::{CompositionSample, SuffStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeReport {
    /// Number of samples before the change; the new regime starts at this index.
    pub change_index: usize,
    /// `Z* = LL* − LL_0`.
    pub score: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSettings {
    pub threshold: f64,
    /// Minimum samples on each side of a split; `None` means `d + 2`.
    pub min_segment: Option<usize>,
    pub exec: Exec,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        DetectorSettings {
            threshold: 10.0,
            min_segment: None,
            exec: Exec::Parallel,
        }
    }
}

impl DetectorSettings {
    pub fn min_segment_for(&self, d: usize) -> usize {
        self.min_segment.unwrap_or(d + 2).max(2)
    }
}

fn prefix_stats(samples: &[CompositionSample]) -> Result<Vec<SuffStats>> {
    let d = samples
        .first()
        .ok_or(Error::WindowTooSmall { len: 0, needed: 2 })?
        .dim();
    let mut out = Vec::with_capacity(samples.len() + 1);
    let mut acc = SuffStats::zeros(d);
    out.push(acc.clone());
    for s in samples {
        if s.dim() != d {
            return Err(Error::Domain("samples have inconsistent dimension".into()));
        }
        acc.push(s.values());
        out.push(acc.clone());
    }
    Ok(out)
}

fn segment_ll(stats: &SuffStats) -> Result<f64> {
    let params = stats.fit()?;
    Ok(stats.log_likelihood(&params))
}

/// Best two-segment split. Returns `(T*, LL*)` where `T*` is the size of
/// the first segment; ties go to the smallest `T*`.
pub fn estimate_2window(samples: &[CompositionSample], settings: &DetectorSettings) -> Result<(usize, f64)> {
    let prefix = prefix_stats(samples)?;
    let d = samples[0].dim();
    let m = settings.min_segment_for(d);
    let n = samples.len();
    if n < 2 * m {
        return Err(Error::WindowTooSmall { len: n, needed: 2 * m });
    }
    let total = &prefix[n];
    let splits: Vec<usize> = (m..=n - m).collect();
    let scores = settings.exec.map(&splits, |&t| {
        let left = &prefix[t];
        let right = total.minus(left);
        Ok::<f64, Error>(segment_ll(left)? + segment_ll(&right)?)
    });
    let mut best: Option<(usize, f64)> = None;
    let mut first_err = None;
    for (&t, score) in splits.iter().zip(scores) {
        match score {
            Ok(ll) => {
                if best.is_none_or(|(_, b)| ll > b) {
                    best = Some((t, ll));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one admissible split"),
    }
}

/// Single change-point test: fit the whole window, fit the best split, and
/// report a change when the likelihood gain exceeds the threshold.
pub fn detect_change(samples: &[CompositionSample], settings: &DetectorSettings) -> Result<ChangeReport> {
    let (t_star, ll_star) = estimate_2window(samples, settings)?;
    let whole = SuffStats::from_samples(samples)?;
    let ll0 = segment_ll(&whole)?;
    let score = ll_star - ll0;
    Ok(ChangeReport {
        change_index: t_star,
        score,
        detected: score > settings.threshold,
    })
}

//! Compositional samples and Dirichlet maximum-likelihood fitting.

use crate::error::{Error, Result};

use super::special::{digamma_unchecked, inverse_digamma, ln_gamma_unchecked};

pub const ALPHA_MIN: f64 = 1e-4;
pub const ALPHA_MAX: f64 = 1e6;
const MLE_TOL: f64 = 1e-8;
const MLE_MAX_ITER: usize = 500;

/// A strictly positive point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSample(Vec<f64>);

impl CompositionSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain(format!(
                "composition needs at least 2 parts, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("composition entries must be positive, got {v}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("composition sums to {sum}, not 1")));
        }
        Ok(CompositionSample(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl AsRef<[f64]> for CompositionSample {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Domain("dirichlet needs at least 2 components".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Domain(format!("alpha entries must be positive and finite, got {a}")));
        }
        Ok(DirichletParams { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `ln B(α) = Σ ln Γ(α_l) − ln Γ(Σ α_l)`.
    pub fn ln_beta(&self) -> f64 {
        let total: f64 = self.alpha.iter().sum();
        self.alpha.iter().map(|&a| ln_gamma_unchecked(a)).sum::<f64>() - ln_gamma_unchecked(total)
    }

    /// Log density at one point; every entry must be positive.
    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "sample has {} parts but alpha has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut acc = -self.ln_beta();
        for (&xl, &al) in x.iter().zip(&self.alpha) {
            if xl.is_nan() || xl <= 0.0 {
                return Err(Error::Domain(format!("sample entry {xl} is not positive")));
            }
            acc += (al - 1.0) * xl.ln();
        }
        Ok(acc)
    }

    /// Gradient of the per-sample objective `ln Γ(Σα) − Σ ln Γ(α_l) + Σ (α_l − 1) x̂_l`.
    pub fn objective_gradient(&self, mean_log: &[f64]) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum();
        let psi_total = digamma_unchecked(total);
        self.alpha
            .iter()
            .zip(mean_log)
            .map(|(&a, &m)| psi_total - digamma_unchecked(a) + m)
            .collect()
    }

    /// Whether component `l` sits on a clamp bound.
    pub fn is_clamped(&self, l: usize) -> bool {
        self.alpha[l] <= ALPHA_MIN || self.alpha[l] >= ALPHA_MAX
    }
}

/// Per-dimension min/max used to scale raw features into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ScaleBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() < 2 {
            return Err(Error::Domain("scale bounds need matching lengths ≥ 2".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite()) || h < l) {
            return Err(Error::Domain("scale bounds must be finite with lo ≤ hi".into()));
        }
        Ok(ScaleBounds { lo, hi })
    }

    /// Learn bounds from a window of raw rows.
    pub fn learn<R: AsRef<[f64]>>(window: &[R]) -> Result<Self> {
        let first = window
            .first()
            .ok_or_else(|| Error::DegenerateInput("empty window".into()))?
            .as_ref();
        let d = first.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in window {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Domain("ragged feature window".into()));
            }
            for (l, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("non-finite feature {v}")));
                }
                lo[l] = lo[l].min(v);
                hi[l] = hi[l].max(v);
            }
        }
        if lo.iter().zip(&hi).all(|(l, h)| l == h) {
            return Err(Error::DegenerateInput(
                "every feature is constant across the window".into(),
            ));
        }
        ScaleBounds::new(lo, hi)
    }
}

/// Min-max scale each part, add the pseudo-count `eps`, and renormalise onto
/// the simplex.
pub fn to_composition(raw: &[f64], bounds: &ScaleBounds, eps: f64) -> Result<CompositionSample> {
    if raw.len() != bounds.lo.len() {
        return Err(Error::Domain(format!(
            "feature vector has {} parts, bounds have {}",
            raw.len(),
            bounds.lo.len()
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain("pseudo-count must be positive".into()));
    }
    let mut out: Vec<f64> = raw
        .iter()
        .zip(bounds.lo.iter().zip(&bounds.hi))
        .map(|(&x, (&lo, &hi))| {
            let scaled = if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
            scaled + eps
        })
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite feature".into()));
    }
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    CompositionSample::new(out)
}

/// Learn bounds from the window and transform every row.
pub fn compose_window<R: AsRef<[f64]>>(window: &[R], eps: f64) -> Result<Vec<CompositionSample>> {
    let bounds = ScaleBounds::learn(window)?;
    window
        .iter()
        .map(|r| to_composition(r.as_ref(), &bounds, eps))
        .collect()
}

/// Additive sufficient statistics of a sample set; enough to fit and score
/// a Dirichlet without revisiting the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub n: usize,
    pub sum_log: Vec<f64>,
    pub sum_x: Vec<f64>,
    pub sum_x2: Vec<f64>,
}

impl SuffStats {
    pub fn zeros(d: usize) -> Self {
        SuffStats {
            n: 0,
            sum_log: vec![0.0; d],
            sum_x: vec![0.0; d],
            sum_x2: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum_log.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for (l, &v) in x.iter().enumerate() {
            self.sum_log[l] += v.ln();
            self.sum_x[l] += v;
            self.sum_x2[l] += v * v;
        }
    }

    pub fn from_samples(samples: &[CompositionSample]) -> Result<Self> {
        let d = samples
            .first()
            .ok_or_else(|| Error::Domain("no samples".into()))?
            .dim();
        let mut s = SuffStats::zeros(d);
        for x in samples {
            if x.dim() != d {
                return Err(Error::Domain("samples have inconsistent dimension".into()));
            }
            s.push(x.values());
        }
        Ok(s)
    }

    /// `self − other`, for prefix-sum differencing.
    pub fn minus(&self, other: &SuffStats) -> SuffStats {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        SuffStats {
            n: self.n - other.n,
            sum_log: sub(&self.sum_log, &other.sum_log),
            sum_x: sub(&self.sum_x, &other.sum_x),
            sum_x2: sub(&self.sum_x2, &other.sum_x2),
        }
    }

    pub fn mean_log(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum_log.iter().map(|s| s / n).collect()
    }

    /// Log-likelihood of the summarised samples under `params`.
    pub fn log_likelihood(&self, params: &DirichletParams) -> f64 {
        let ll_sum: f64 = params
            .alpha()
            .iter()
            .zip(&self.sum_log)
            .map(|(&a, &s)| (a - 1.0) * s)
            .sum();
        ll_sum - self.n as f64 * params.ln_beta()
    }

    /// Moment-matching starting point for the fixed-point iteration.
    fn moment_init(&self) -> Vec<f64> {
        let n = self.n as f64;
        let d = self.dim();
        let mut precisions = Vec::with_capacity(d);
        let mean: Vec<f64> = self.sum_x.iter().map(|s| s / n).collect();
        for (&m, &sq) in mean.iter().zip(&self.sum_x2) {
            let var = sq / n - m * m;
            if var > 1e-15 && m * (1.0 - m) > var {
                precisions.push(m * (1.0 - m) / var - 1.0);
            }
        }
        let s = if precisions.is_empty() {
            d as f64
        } else {
            precisions.iter().sum::<f64>() / precisions.len() as f64
        };
        let msum: f64 = mean.iter().sum();
        mean.iter()
            .map(|m| (s * m / msum).clamp(ALPHA_MIN, ALPHA_MAX))
            .collect()
    }

    /// Fixed-point MLE: `ψ(α_l) ← ψ(Σα) + x̂_l`, started from moment matching.
    pub fn fit(&self) -> Result<DirichletParams> {
        if self.n < 2 {
            return Err(Error::Domain(format!("need at least 2 samples to fit, got {}", self.n)));
        }
        let mean_log = self.mean_log();
        let mut alpha = self.moment_init();
        for _ in 0..MLE_MAX_ITER {
            let psi_total = digamma_unchecked(alpha.iter().sum());
            let mut delta: f64 = 0.0;
            for (a, &m) in alpha.iter_mut().zip(&mean_log) {
                let next = inverse_digamma(psi_total + m).clamp(ALPHA_MIN, ALPHA_MAX);
                delta = delta.max((next - *a).abs());
                *a = next;
            }
            if delta < MLE_TOL {
                break;
            }
        }
        if alpha.iter().all(|&a| a <= ALPHA_MIN || a >= ALPHA_MAX) {
            return Err(Error::NonConvergence(format!(
                "every component hit a clamp bound: {alpha:?}"
            )));
        }
        DirichletParams::new(alpha)
    }
}

/// Maximum-likelihood Dirichlet fit. Needs at least `d + 2` samples.
pub fn dirichlet_mle(samples: &[CompositionSample]) -> Result<DirichletParams> {
    let stats = SuffStats::from_samples(samples)?;
    let needed = stats.dim() + 2;
    if stats.n < needed {
        return Err(Error::Domain(format!(
            "dirichlet fit needs at least {needed} samples, got {}",
            stats.n
        )));
    }
    stats.fit()
}

/// `Σ_i ln Q(x_i)` evaluated in log space.
pub fn log_likelihood<S: AsRef<[f64]>>(samples: &[S], params: &DirichletParams) -> Result<f64> {
    let ln_beta = params.ln_beta();
    let mut total = 0.0;
    for x in samples {
        let x = x.as_ref();
        if x.len() != params.dim() {
            return Err(Error::Domain("sample dimension does not match alpha".into()));
        }
        let mut acc = -ln_beta;
        for (&xl, &al) in x.iter().zip(params.alpha()) {
            if xl.is_nan() || xl <= 0.0 {
                return Err(Error::Domain(format!("sample entry {xl} is not positive")));
            }
            acc += (al - 1.0) * xl.ln();
        }
        total += acc;
    }
    Ok(total)
}

/// Draw one Dirichlet sample as normalised gamma variates.
pub fn sample_dirichlet<R: rand::Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<CompositionSample> {
    use rand_distr::{Distribution, Gamma};
    let mut v = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let g = Gamma::new(a, 1.0).map_err(|e| Error::Domain(format!("bad gamma shape {a}: {e}")))?;
        v.push(g.sample(rng).max(f64::MIN_POSITIVE));
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x = (*x / s).max(f64::MIN_POSITIVE));
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    CompositionSample::new(v)
}

//! Learned Mahalanobis dissimilarity `s(x, x') = (x - x')ᵀ W (x - x')`.
//!
//! For a `g0` element `n` with candidates `j`, the matching probabilities are
//! `α_j = exp(-s_j) / (Σ_k exp(-s_k) + ε0)` and the element's cost is
//! `C_n = Σ_j α_j s_j`. Differentiating gives
//!
//! ```text
//! dC_n / ds_j = α_j (1 - s_j + C_n),    ds_j / dW = D_j D_jᵀ,  D_j = x_n - x_j
//! ```
//!
//! which is exact, `ε0` included. `W` is updated by plain gradient descent on
//! `C_total = Σ_n C_n`, symmetrized every step and optionally projected onto
//! the PSD cone.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;
use crate::propensity::CandidateSet;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix<T> {
    d: usize,
    w: Vec<T>,
}

impl<T: Real> MetricMatrix<T> {
    /// Wraps a row-major `d x d` matrix; rejects non-finite or asymmetric input.
    pub fn new(d: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("metric matrix has non-finite entries".into()));
        }
        let asym = linalg::asymmetry(&entries, d);
        if asym.to_f64_lossy() >= 1e-9 {
            return Err(Error::Data(format!("metric matrix is not symmetric (max |W - Wᵀ| = {asym})")));
        }
        Ok(Self { d, w: entries })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            w: linalg::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[T] {
        &self.w
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        linalg::symmetric_eigen(&self.w, self.d).0
    }

    /// `s(x, x')` without dimension checks.
    #[inline]
    pub fn eval_unchecked(&self, x: &[T], y: &[T], diff: &mut [T]) -> T {
        for ((o, a), b) in diff.iter_mut().zip(x).zip(y) {
            *o = *a - *b;
        }
        linalg::quad_form(&self.w, diff)
    }
}

/// `(x - x')ᵀ W (x - x')`.
pub fn mahalanobis<T: Real>(w: &MetricMatrix<T>, x: &[T], x2: &[T]) -> Result<T> {
    for v in [x, x2] {
        if v.len() != w.d {
            return Err(Error::DimensionMismatch {
                expected: w.d,
                got: v.len(),
            });
        }
    }
    let mut diff = vec![T::zero(); w.d];
    Ok(w.eval_unchecked(x, x2, &mut diff))
}

/// `α_m = exp(-s_m) / (Σ_k exp(-s_k) + ε0)`, evaluated after shifting by
/// `s_min`, with `ε0` rescaled to `ε0 exp(s_min)` so the value is unchanged.
pub fn probabilities_from_costs<T: Real>(s: &[T], epsilon0: T) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); s.len()];
    probabilities_into(s, epsilon0, &mut out)?;
    Ok(out)
}

fn probabilities_into<T: Real>(s: &[T], epsilon0: T, out: &mut [T]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Empty("matching probabilities need at least one candidate".into()));
    }
    let s_min = s.iter().copied().fold(T::infinity(), T::min);
    let mut z = T::zero();
    for (o, &v) in out.iter_mut().zip(s) {
        *o = (s_min - v).exp();
        z = z + *o;
    }
    let denom = z + epsilon0 * s_min.exp();
    for o in out.iter_mut() {
        *o = *o / denom;
    }
    Ok(())
}

/// Matching probabilities of `x_n` over its candidate vectors.
pub fn matching_probabilities<T: Real, R: AsRef<[T]>>(
    w: &MetricMatrix<T>,
    x_n: &[T],
    candidates: &[R],
    epsilon0: T,
) -> Result<Vec<T>> {
    let s = candidates
        .iter()
        .map(|c| mahalanobis(w, x_n, c.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    probabilities_from_costs(&s, epsilon0)
}

fn check_inputs<T: Real>(
    w: &MetricMatrix<T>,
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
) -> Result<()> {
    if g0.n_rows() != set.n0() {
        return Err(Error::DimensionMismatch {
            expected: set.n0(),
            got: g0.n_rows(),
        });
    }
    if g1.n_rows() != set.n1 {
        return Err(Error::DimensionMismatch {
            expected: set.n1,
            got: g1.n_rows(),
        });
    }
    for m in [g0, g1] {
        if m.n_cols() != w.d {
            return Err(Error::DimensionMismatch {
                expected: w.d,
                got: m.n_cols(),
            });
        }
    }
    if let Some(n) = set.lists.iter().position(Vec::is_empty) {
        return Err(Error::Empty(format!("g0 element {n} has no candidates")));
    }
    Ok(())
}

/// Per-element `(C_n, G_n)` where `G_n = Σ_j α_j (1 - s_j + C_n) D_j D_jᵀ`.
fn element_cost<T: Real>(
    w: &MetricMatrix<T>,
    xn: &[T],
    g1: &Matrix<T>,
    list: &[crate::propensity::Candidate<T>],
    epsilon0: T,
    grad: Option<&mut [T]>,
) -> T {
    let d = w.d;
    let k = list.len();
    let mut diffs = vec![T::zero(); k * d];
    let mut s = vec![T::zero(); k];
    for (j, c) in list.iter().enumerate() {
        let dj = &mut diffs[j * d..(j + 1) * d];
        s[j] = w.eval_unchecked(xn, g1.row(c.index), dj);
    }
    let mut alpha = vec![T::zero(); k];
    probabilities_into(&s, epsilon0, &mut alpha).expect("non-empty candidate list");
    let cost: T = alpha.iter().zip(&s).map(|(&a, &v)| a * v).sum();
    if let Some(g) = grad {
        for j in 0..k {
            let coef = alpha[j] * (T::one() - s[j] + cost);
            let dj = &diffs[j * d..(j + 1) * d];
            for a in 0..d {
                let ca = coef * dj[a];
                let row = &mut g[a * d..(a + 1) * d];
                for (gb, &db) in row.iter_mut().zip(dj) {
                    *gb = *gb + ca * db;
                }
            }
        }
    }
    cost
}

/// `C_total = Σ_n Σ_m α_mn s(x_n, x_m)` over every candidate list.
pub fn total_cost<T: Real>(
    w: &MetricMatrix<T>,
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
    epsilon0: T,
) -> Result<T> {
    check_inputs(w, g0, g1, set)?;
    let per: Vec<T> = (0..set.n0())
        .into_par_iter()
        .map(|n| element_cost(w, g0.row(n), g1, &set.lists[n], epsilon0, None))
        .collect();
    Ok(per.into_iter().sum())
}

/// `C_total` and its gradient with respect to the (row-major) entries of `W`.
/// Elements are evaluated in parallel and reduced in index order.
pub fn cost_and_gradient<T: Real>(
    w: &MetricMatrix<T>,
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
    epsilon0: T,
) -> Result<(T, Vec<T>)> {
    check_inputs(w, g0, g1, set)?;
    let d = w.d;
    let per: Vec<(T, Vec<T>)> = (0..set.n0())
        .into_par_iter()
        .map(|n| {
            let mut g = vec![T::zero(); d * d];
            let c = element_cost(w, g0.row(n), g1, &set.lists[n], epsilon0, Some(&mut g));
            (c, g)
        })
        .collect();
    let mut grad = vec![T::zero(); d * d];
    let mut cost = T::zero();
    for (c, g) in per {
        cost = cost + c;
        for (a, b) in grad.iter_mut().zip(g) {
            *a = *a + b;
        }
    }
    Ok((cost, grad))
}

/// Uniform average over `g0` elements of the covariance (1/k denominator) of
/// each element's candidate vectors.
pub fn neighbourhood_covariance<T: Real>(
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
) -> Result<Vec<T>> {
    let d = g1.n_cols();
    if set.n0() == 0 {
        return Err(Error::Empty("no g0 elements for the covariance".into()));
    }
    if g0.n_rows() != set.n0() {
        return Err(Error::DimensionMismatch {
            expected: set.n0(),
            got: g0.n_rows(),
        });
    }
    let mut sigma = vec![T::zero(); d * d];
    for list in &set.lists {
        if list.is_empty() {
            return Err(Error::Empty("g0 element without candidates".into()));
        }
        let k = T::from_count(list.len());
        let mut mu = vec![T::zero(); d];
        for c in list {
            for (m, &v) in mu.iter_mut().zip(g1.row(c.index)) {
                *m = *m + v;
            }
        }
        mu.iter_mut().for_each(|m| *m = *m / k);
        for c in list {
            let r = g1.row(c.index);
            for a in 0..d {
                let da = r[a] - mu[a];
                for b in 0..d {
                    sigma[a * d + b] = sigma[a * d + b] + da * (r[b] - mu[b]) / k;
                }
            }
        }
    }
    let n = T::from_count(set.n0());
    sigma.iter_mut().for_each(|v| *v = *v / n);
    Ok(sigma)
}

/// `W0 = (Σ_w + λ I)^-1` with `λ = 1e-6 trace(Σ_w) / d`.
pub fn initial_metric<T: Real>(
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
) -> Result<MetricMatrix<T>> {
    let d = g1.n_cols();
    let mut sigma = neighbourhood_covariance(g0, g1, set)?;
    let lambda = T::lit(1e-6) * linalg::trace(&sigma, d) / T::from_count(d);
    for i in 0..d {
        sigma[i * d + i] = sigma[i * d + i] + lambda;
    }
    let mut inv = linalg::invert(&sigma, d).ok_or_else(|| {
        Error::Numerical("neighbourhood covariance is singular even after the ridge".into())
    })?;
    linalg::symmetrize(&mut inv, d);
    MetricMatrix::new(d, inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub epsilon0: f64,
    pub psd_projection: bool,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_iterations: 100,
            epsilon0: 1e-6,
            psd_projection: true,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.epsilon0 > 0.0) || !self.epsilon0.is_finite() {
            return Err(Error::Config(format!(
                "epsilon0 must be positive, got {}",
                self.epsilon0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome<T> {
    pub metric: MetricMatrix<T>,
    pub initial_cost: T,
    pub best_cost: T,
    /// Iteration of the returned iterate; 0 is the initialization.
    pub best_iteration: usize,
    /// Cost after each iteration, starting with the initialization.
    pub costs: Vec<T>,
}

/// Gradient descent from [`initial_metric`]; returns the lowest-cost iterate.
pub fn learn_metric<T: Real>(
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
    config: &LearnConfig,
) -> Result<LearnOutcome<T>> {
    config.validate()?;
    let w0 = initial_metric(g0, g1, set)?;
    learn_metric_from(w0, g0, g1, set, config)
}

pub fn learn_metric_from<T: Real>(
    w0: MetricMatrix<T>,
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    set: &CandidateSet<T>,
    config: &LearnConfig,
) -> Result<LearnOutcome<T>> {
    config.validate()?;
    let d = w0.d;
    let eps = T::lit(config.epsilon0);
    let lr = T::lit(config.learning_rate);
    let (c0, mut grad) = cost_and_gradient(&w0, g0, g1, set, eps)?;
    if !c0.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    let mut best = (w0.clone(), c0, 0);
    let mut costs = vec![c0];
    let mut w = w0;
    for it in 1..=config.max_iterations {
        for (a, g) in w.w.iter_mut().zip(&grad) {
            *a = *a - lr * *g;
        }
        linalg::symmetrize(&mut w.w, d);
        if config.psd_projection {
            linalg::clip_to_psd(&mut w.w, d);
        }
        if w.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: it });
        }
        let (c, g) = cost_and_gradient(&w, g0, g1, set, eps)?;
        if !c.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: it });
        }
        costs.push(c);
        if c < best.1 {
            best = (w.clone(), c, it);
        }
        grad = g;
    }
    Ok(LearnOutcome {
        metric: best.0,
        initial_cost: c0,
        best_cost: best.1,
        best_iteration: best.2,
        costs,
    })
}

pub const METRIC_FORMAT: &str = "cfair-metric/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDocument {
    pub format: String,
    pub d: usize,
    /// Row-major entries of `W`.
    pub entries: Vec<f64>,
    pub feature_names: Vec<String>,
    pub config: LearnConfig,
    pub initial_cost: f64,
    pub best_cost: f64,
    pub best_iteration: usize,
}

impl MetricDocument {
    pub fn new<T: Real>(
        outcome: &LearnOutcome<T>,
        feature_names: Vec<String>,
        config: LearnConfig,
    ) -> Self {
        Self {
            format: METRIC_FORMAT.to_string(),
            d: outcome.metric.d,
            entries: outcome.metric.w.iter().map(|v| v.to_f64_lossy()).collect(),
            feature_names,
            config,
            initial_cost: outcome.initial_cost.to_f64_lossy(),
            best_cost: outcome.best_cost.to_f64_lossy(),
            best_iteration: outcome.best_iteration,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        artifact::write_json(path, self)
    }

    /// Loads and re-validates symmetry and finiteness.
    pub fn load(path: &Path) -> Result<(Self, MetricMatrix<f64>)> {
        let doc: Self = artifact::read_json(path)?;
        artifact::check_format(&doc.format, METRIC_FORMAT)?;
        let m = MetricMatrix::new(doc.d, doc.entries.clone())?;
        Ok((doc, m))
    }
}

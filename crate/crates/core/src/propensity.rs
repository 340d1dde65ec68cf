//! Propensity scores and caliper-filtered cross-group candidate sets.
//!
//! Indices in this module are positions within the `g0` / `g1` index lists of
//! a [`GroupSplit`](crate::tabular::GroupSplit), not table rows.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{cross_val_macro_f1, Model, TrainConfig};
use crate::rng::stream_rng;
use crate::scalar::{cmp_total, Real};
use crate::stats::percentile_in_place;

/// Probability clamp applied before the log-odds transform.
pub const PROB_CLAMP: f64 = 1e-6;

/// Pair count up to which the caliper percentile is computed exactly.
pub const EXACT_PAIR_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityScores<T> {
    pub scores: Vec<T>,
    pub clamp: T,
}

/// `log(p / (1 - p))` with `p` clamped to `[clamp, 1 - clamp]`.
#[inline]
pub fn log_odds<T: Real>(p: T, clamp: T) -> T {
    let p = p.max(clamp).min(T::one() - clamp);
    (p / (T::one() - p)).ln()
}

impl<T: Real> PropensityScores<T> {
    pub fn from_probabilities(p: &[T]) -> Self {
        let clamp = T::lit(PROB_CLAMP);
        Self {
            scores: p.iter().map(|&v| log_odds(v, clamp)).collect(),
            clamp,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            scores: idx.iter().map(|&i| self.scores[i]).collect(),
            clamp: self.clamp,
        }
    }
}

/// Scores rows with a classifier of the protected variable. The score is the
/// log-odds of class 1.
pub fn propensity_scores(
    model: &Model,
    x: &Matrix<f64>,
    protected_column: &str,
) -> Result<PropensityScores<f64>> {
    if model.feature_names().iter().any(|n| {
        n == protected_column || n.strip_prefix(protected_column).is_some_and(|r| r.starts_with('='))
    }) {
        return Err(Error::Config(format!(
            "propensity model uses the protected column `{protected_column}` as a feature"
        )));
    }
    if model.n_classes() != 2 {
        return Err(Error::Config(format!(
            "propensity model must be binary, has {} classes",
            model.n_classes()
        )));
    }
    let p = model.predict_proba(x)?.column(1);
    Ok(PropensityScores::from_probabilities(&p))
}

/// Picks the propensity model with the best out-of-fold macro F1 (first wins
/// ties) and returns its index with all scores.
pub fn select_model(
    x: &Matrix<f64>,
    z: &[usize],
    candidates: &[TrainConfig],
    k: usize,
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Config("no propensity model candidates".into()));
    }
    let scores = candidates
        .iter()
        .map(|c| cross_val_macro_f1(x, z, c, k))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

/// Caliper `δ`: the `pct` percentile of `|s0 - s1|` over all cross pairs.
///
/// Up to `pair_budget` pairs the percentile is exact; above it, `pair_budget`
/// pairs are drawn uniformly with replacement from a generator seeded by
/// `seed`.
pub fn delta_threshold<T: Real>(
    scores0: &[T],
    scores1: &[T],
    pct: T,
    pair_budget: usize,
    seed: u64,
) -> Result<T> {
    if scores0.is_empty() || scores1.is_empty() {
        return Err(Error::Empty("caliper needs scores in both groups".into()));
    }
    let n1 = scores1.len();
    let total = scores0.len().saturating_mul(n1);
    let mut gaps: Vec<T> = if total <= pair_budget {
        scores0
            .par_iter()
            .flat_map_iter(|&a| scores1.iter().map(move |&b| (a - b).abs()))
            .collect()
    } else {
        let mut rng = stream_rng(seed, "propensity/caliper", 0);
        (0..pair_budget)
            .map(|_| {
                let a = scores0[rng.random_range(0..scores0.len())];
                let b = scores1[rng.random_range(0..n1)];
                (a - b).abs()
            })
            .collect()
    };
    percentile_in_place(&mut gaps, pct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    /// Position in `g1`.
    pub index: usize,
    /// `|s0 - s1|`.
    pub gap: T,
}

/// Caliper-admissible `g1` partners of every `g0` element, each list sorted by
/// gap then index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet<T> {
    pub lists: Vec<Vec<Candidate<T>>>,
    pub n1: usize,
    pub delta: T,
}

impl<T: Real> CandidateSet<T> {
    pub fn n0(&self) -> usize {
        self.lists.len()
    }

    /// `g0` positions without any candidate.
    pub fn unmatched(&self) -> Vec<usize> {
        (0..self.lists.len())
            .filter(|&n| self.lists[n].is_empty())
            .collect()
    }

    /// Drops `g0` elements without candidates; returns the kept positions and
    /// the compacted set (list `i` belongs to `g0` position `kept[i]`).
    pub fn matched_only(&self) -> (Vec<usize>, CandidateSet<T>) {
        let kept: Vec<usize> = (0..self.lists.len())
            .filter(|&n| !self.lists[n].is_empty())
            .collect();
        let lists = kept.iter().map(|&n| self.lists[n].clone()).collect();
        (
            kept,
            CandidateSet {
                lists,
                n1: self.n1,
                delta: self.delta,
            },
        )
    }

    pub fn n_pairs(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, n: usize, m: usize) -> bool {
        self.lists
            .get(n)
            .is_some_and(|l| l.iter().any(|c| c.index == m))
    }

    /// Errors when no `g0` element has a candidate.
    pub fn require_overlap(&self) -> Result<()> {
        if self.lists.iter().all(Vec::is_empty) {
            Err(Error::NoCounterparts(self.lists.len()))
        } else {
            Ok(())
        }
    }
}

/// Candidate lists at caliper `delta` (inclusive). Fails with
/// [`Error::NoCounterparts`] when every `g0` list is empty.
pub fn build_candidates<T: Real>(scores0: &[T], scores1: &[T], delta: T) -> Result<CandidateSet<T>> {
    let set = build_candidates_unchecked(scores0, scores1, delta)?;
    set.require_overlap()?;
    Ok(set)
}

/// Same as [`build_candidates`] without the overlap requirement.
pub fn build_candidates_unchecked<T: Real>(
    scores0: &[T],
    scores1: &[T],
    delta: T,
) -> Result<CandidateSet<T>> {
    if !(delta >= T::zero()) {
        return Err(Error::Config(format!("caliper must be >= 0, got {delta}")));
    }
    if scores0.iter().chain(scores1).any(|s| !s.is_finite()) {
        return Err(Error::Data("non-finite propensity score".into()));
    }
    let mut sorted: Vec<(T, usize)> = scores1.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| cmp_total(a.0, b.0).then(a.1.cmp(&b.1)));
    let lists = scores0
        .par_iter()
        .map(|&s| {
            // first position with score >= s - delta; the window test below
            // re-checks |gap| <= delta exactly
            let lo = sorted.partition_point(|&(v, _)| v < s - delta);
            let mut l: Vec<Candidate<T>> = sorted[lo..]
                .iter()
                .take_while(|&&(v, _)| v <= s + delta)
                .filter_map(|&(v, m)| {
                    let gap = (s - v).abs();
                    (gap <= delta).then_some(Candidate { index: m, gap })
                })
                .collect();
            l.sort_by(|a, b| cmp_total(a.gap, b.gap).then(a.index.cmp(&b.index)));
            l
        })
        .collect();
    Ok(CandidateSet {
        lists,
        n1: scores1.len(),
        delta,
    })
}

pub const SCORES_FORMAT: &str = "propensity-scores/1";
pub const HISTOGRAM_FORMAT: &str = "propensity-histogram/1";

/// Writes `row_index,group,score`, with `group` 0 for `g0` and 1 for `g1`.
pub fn write_scores_csv<T: Real>(
    path: &Path,
    g0_rows: &[usize],
    scores0: &[T],
    g1_rows: &[usize],
    scores1: &[T],
) -> Result<()> {
    let mut rows: Vec<(usize, u8, f64)> = g0_rows
        .iter()
        .zip(scores0)
        .map(|(&r, &s)| (r, 0, s.to_f64_lossy()))
        .chain(g1_rows.iter().zip(scores1).map(|(&r, &s)| (r, 1, s.to_f64_lossy())))
        .collect();
    rows.sort_by_key(|r| r.0);
    let mut w = artifact::csv_writer(path, SCORES_FORMAT)?;
    w.write_record(["row_index", "group", "score"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a scores file back as `(row_index, group, score)` triples.
pub fn read_scores_csv(path: &Path) -> Result<Vec<(usize, u8, f64)>> {
    let mut r = artifact::csv_reader(path, SCORES_FORMAT)?;
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count0: usize,
    pub count1: usize,
}

/// Equal-width histogram of both groups' scores over their joint range; the
/// last bin is closed on the right.
pub fn histogram<T: Real>(scores0: &[T], scores1: &[T], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let all = || scores0.iter().chain(scores1).map(|s| s.to_f64_lossy());
    let lo = all().fold(f64::INFINITY, f64::min);
    let hi = all().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Empty("histogram of no scores".into()));
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins { hi.max(lo + width) } else { lo + (b + 1) as f64 * width },
            count0: 0,
            count1: 0,
        })
        .collect();
    let slot = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    for s in scores0 {
        out[slot(s.to_f64_lossy())].count0 += 1;
    }
    for s in scores1 {
        out[slot(s.to_f64_lossy())].count1 += 1;
    }
    Ok(out)
}

pub fn write_histogram_csv(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut w = artifact::csv_writer(path, HISTOGRAM_FORMAT)?;
    w.write_record(["bin_lo", "bin_hi", "count_g0", "count_g1"])?;
    for b in bins {
        w.serialize((b.lo, b.hi, b.count0, b.count1))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn log_odds_examples() {
        let s = PropensityScores::from_probabilities(&[0.5, 1.0, 0.25, 0.0]);
        assert_eq!(s.scores[0], 0.0);
        assert_abs_diff_eq!(s.scores[1], 13.815_509_557_963_773, epsilon = 1e-9);
        assert_abs_diff_eq!(s.scores[2], -1.098_612_288_668_109_8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.scores[3], -13.815_509_557_963_773, epsilon = 1e-9);
        let f = PropensityScores::from_probabilities(&[0.25f32]);
        assert_abs_diff_eq!(f.scores[0], -1.098_612_3f32, epsilon = 1e-6);
    }

    #[test]
    fn caliper_examples() {
        assert_eq!(delta_threshold(&[0.0], &[1.0], 37.0, EXACT_PAIR_BUDGET, 0).unwrap(), 1.0);
        assert_eq!(delta_threshold(&[0.0, 0.0], &[0.0, 0.0], 90.0, EXACT_PAIR_BUDGET, 0).unwrap(), 0.0);
        let s1: Vec<f64> = (1..=10).map(f64::from).collect();
        // exhaustive pairs are {1..10}; rank 8.1 -> 9 + 0.1 * (10 - 9)
        let d = delta_threshold(&[0.0], &s1, 90.0, EXACT_PAIR_BUDGET, 0).unwrap();
        assert_abs_diff_eq!(d, 9.1, epsilon = 1e-12);
        assert!(delta_threshold::<f64>(&[], &[1.0], 90.0, EXACT_PAIR_BUDGET, 0).is_err());
    }

    #[test]
    fn sampled_caliper_is_close_and_seeded() {
        let s0: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin()).collect();
        let s1: Vec<f64> = (0..400).map(|i| (i as f64 * 0.11).cos() * 1.5).collect();
        let exact = delta_threshold(&s0, &s1, 90.0, EXACT_PAIR_BUDGET, 0).unwrap();
        let a = delta_threshold(&s0, &s1, 90.0, 50_000, 3).unwrap();
        let b = delta_threshold(&s0, &s1, 90.0, 50_000, 3).unwrap();
        assert_eq!(a, b);
        assert!((a - exact).abs() < 0.02 * exact, "{a} vs {exact}");
    }

    #[test]
    fn candidate_examples() {
        let c = build_candidates(&[0.0], &[0.1, 0.5, 2.0], 0.6).unwrap();
        let idx: Vec<usize> = c.lists[0].iter().map(|c| c.index).collect();
        assert_eq!(idx, vec![0, 1]);
        let all = build_candidates(&[0.0, 1.0], &[0.3, -2.0, 4.0], 100.0).unwrap();
        assert!(all.lists.iter().all(|l| l.len() == 3));
        let none = build_candidates(&[0.0, 0.1], &[1.0, 2.0], 0.0);
        assert!(matches!(none, Err(Error::NoCounterparts(2))));
        assert!(build_candidates(&[0.0], &[0.0], -1.0).is_err());
    }

    #[test]
    fn leakage_is_rejected() {
        use crate::models::{train_classifier_named, TrainConfig};
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.2, 1.0], [0.9, 0.0]]).unwrap();
        let m = train_classifier_named(&x, &[0, 1, 0, 1], vec!["age".into(), "race".into()], &TrainConfig::logistic())
            .unwrap();
        assert!(matches!(propensity_scores(&m, &x, "race"), Err(Error::Config(_))));
        assert!(propensity_scores(&m, &x, "sex").is_ok());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.5, 1.0], &[0.25, 1.0], 4).unwrap();
        assert_eq!(h.iter().map(|b| b.count0).sum::<usize>(), 3);
        assert_eq!(h.iter().map(|b| b.count1).sum::<usize>(), 2);
        assert_eq!(h[3].count0, 1);
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_scores_csv(&p, &[2, 0], &[0.5, -1.0], &[1], &[3.25]).unwrap();
        let back = read_scores_csv(&p).unwrap();
        assert_eq!(back, vec![(0, 0, -1.0), (1, 1, 3.25), (2, 0, 0.5)]);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 1..12)
    }

    proptest! {
        #[test]
        fn caliper_soundness_and_sorting(s0 in scores(), s1 in scores(), delta in 0.0f64..4.0) {
            let c = build_candidates_unchecked(&s0, &s1, delta).unwrap();
            for (n, l) in c.lists.iter().enumerate() {
                for w in l.windows(2) {
                    prop_assert!(w[0].gap < w[1].gap || (w[0].gap == w[1].gap && w[0].index < w[1].index));
                }
                // exhaustive: listed iff within the caliper
                for (m, &b) in s1.iter().enumerate() {
                    let inside = (s0[n] - b).abs() <= delta;
                    prop_assert_eq!(inside, l.iter().any(|c| c.index == m));
                }
            }
        }

        #[test]
        fn larger_caliper_gives_supersets(s0 in scores(), s1 in scores(), d in 0.0f64..3.0, extra in 0.0f64..2.0) {
            let small = build_candidates_unchecked(&s0, &s1, d).unwrap();
            let big = build_candidates_unchecked(&s0, &s1, d + extra).unwrap();
            for (a, b) in small.lists.iter().zip(&big.lists) {
                for c in a {
                    prop_assert!(b.iter().any(|x| x.index == c.index));
                }
            }
            prop_assert_eq!(small.clone(), build_candidates_unchecked(&s0, &s1, d).unwrap());
        }
    }
}

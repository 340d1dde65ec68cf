//! δ-groups, greedy 1-1 counterpart selection and covariate balance.
//!
//! As in [`propensity`](crate::propensity), indices are positions within the
//! `g0` / `g1` index lists.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metric::{probabilities_from_costs, MetricMatrix};
use crate::propensity::CandidateSet;
use crate::scalar::{cmp_total, Real};
use crate::stats::{mean, sample_variance, two_sample_ttest, TTestFlavor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaGroups<T> {
    /// `g0` positions with at least one candidate, ascending.
    pub c0: Vec<usize>,
    /// `g1` positions appearing in any candidate list, ascending.
    pub c1: Vec<usize>,
    pub delta: T,
}

pub fn delta_groups<T: Real>(set: &CandidateSet<T>) -> DeltaGroups<T> {
    let c0 = (0..set.n0()).filter(|&n| !set.lists[n].is_empty()).collect();
    let c1: BTreeSet<usize> = set.lists.iter().flatten().map(|c| c.index).collect();
    DeltaGroups {
        c0,
        c1: c1.into_iter().collect(),
        delta: set.delta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair<T> {
    pub g0: usize,
    pub g1: usize,
    /// Learned dissimilarity.
    pub s: T,
    /// Propensity gap `|Δs|`.
    pub gap: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterpartPairs<T> {
    /// In acceptance order.
    pub pairs: Vec<Pair<T>>,
    /// `g0` positions left without a partner, ascending.
    pub unmatched: Vec<usize>,
}

impl<T: Real> CounterpartPairs<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_cost(&self) -> T {
        self.pairs.iter().map(|p| p.s).sum()
    }

    pub fn g0_positions(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.g0).collect()
    }

    pub fn g1_positions(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.g1).collect()
    }
}

/// Order in which admissible pairs are offered to the greedy scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyOrder {
    /// Global ascending dissimilarity.
    #[default]
    Dissimilarity,
    /// Global descending matching probability, which normalizes within each
    /// `g0` row.
    Probability,
}

/// Scans admissible pairs once in the chosen order (ties by `g0`, then `g1`)
/// and keeps a pair iff both endpoints are still free.
pub fn greedy_match<T: Real>(
    set: &CandidateSet<T>,
    w: &MetricMatrix<T>,
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    order: GreedyOrder,
    epsilon0: T,
) -> Result<CounterpartPairs<T>> {
    set.require_overlap()?;
    for m in [g0, g1] {
        if m.n_cols() != w.dim() {
            return Err(Error::DimensionMismatch {
                expected: w.dim(),
                got: m.n_cols(),
            });
        }
    }
    if g0.n_rows() != set.n0() || g1.n_rows() != set.n1 {
        return Err(Error::DimensionMismatch {
            expected: set.n0(),
            got: g0.n_rows(),
        });
    }
    let mut diff = vec![T::zero(); w.dim()];
    // (key, pair): key ascends in offer order
    let mut all: Vec<(T, Pair<T>)> = Vec::with_capacity(set.n_pairs());
    for (n, list) in set.lists.iter().enumerate() {
        let s: Vec<T> = list
            .iter()
            .map(|c| w.eval_unchecked(g0.row(n), g1.row(c.index), &mut diff))
            .collect();
        let keys = match order {
            GreedyOrder::Dissimilarity => s.clone(),
            GreedyOrder::Probability if list.is_empty() => Vec::new(),
            GreedyOrder::Probability => probabilities_from_costs(&s, epsilon0)?
                .into_iter()
                .map(|a| -a)
                .collect(),
        };
        for ((c, s), k) in list.iter().zip(s).zip(keys) {
            all.push((
                k,
                Pair {
                    g0: n,
                    g1: c.index,
                    s,
                    gap: c.gap,
                },
            ));
        }
    }
    Ok(scan(all, set.n0(), set.n1))
}

/// Greedy scan over explicit `(n, m, s)` triples; exposed for tests and tools
/// that already hold a dissimilarity table.
pub fn greedy_from_table<T: Real>(n0: usize, n1: usize, triples: &[(usize, usize, T)]) -> CounterpartPairs<T> {
    let all = triples
        .iter()
        .map(|&(n, m, s)| {
            (
                s,
                Pair {
                    g0: n,
                    g1: m,
                    s,
                    gap: T::zero(),
                },
            )
        })
        .collect();
    scan(all, n0, n1)
}

fn scan<T: Real>(mut all: Vec<(T, Pair<T>)>, n0: usize, n1: usize) -> CounterpartPairs<T> {
    all.sort_unstable_by(|a, b| {
        cmp_total(a.0, b.0)
            .then(a.1.g0.cmp(&b.1.g0))
            .then(a.1.g1.cmp(&b.1.g1))
    });
    let mut used0 = vec![false; n0];
    let mut used1 = vec![false; n1];
    let mut pairs = Vec::new();
    for (_, p) in all {
        if !used0[p.g0] && !used1[p.g1] {
            used0[p.g0] = true;
            used1[p.g1] = true;
            pairs.push(p);
        }
    }
    let unmatched = (0..n0).filter(|&n| !used0[n]).collect();
    CounterpartPairs { pairs, unmatched }
}

/// Largest `g1` side accepted by [`optimal_matching`].
pub const OPTIMAL_MAX_N1: usize = 20;

/// Exact minimum-cost matching with exactly `cardinality` pairs over the
/// admissible triples, by dynamic programming over subsets of `g1`. Returns
/// `None` when no matching of that size exists. Meant as a reference for
/// small instances.
pub fn optimal_matching<T: Real>(
    n0: usize,
    n1: usize,
    triples: &[(usize, usize, T)],
    cardinality: usize,
) -> Result<Option<(T, Vec<(usize, usize)>)>> {
    if n1 > OPTIMAL_MAX_N1 {
        return Err(Error::Config(format!(
            "exact matching supports at most {OPTIMAL_MAX_N1} g1 elements, got {n1}"
        )));
    }
    let mut by_row: Vec<Vec<(usize, T)>> = vec![Vec::new(); n0];
    for &(n, m, s) in triples {
        by_row[n].push((m, s));
    }
    let states = 1usize << n1;
    // best[r][mask]: min cost using rows < r with g1 set `mask`, and the g1
    // element row r - 1 took (if any)
    let mut best: Vec<Vec<Option<(T, Option<usize>)>>> = vec![vec![None; states]; n0 + 1];
    best[0][0] = Some((T::zero(), None));
    for r in 0..n0 {
        for mask in 0..states {
            let Some((c, _)) = best[r][mask] else { continue };
            let keep = &mut best[r + 1][mask];
            if keep.is_none_or(|(v, _)| c < v) {
                *keep = Some((c, None));
            }
            for &(m, s) in &by_row[r] {
                if mask & (1 << m) == 0 {
                    let next = &mut best[r + 1][mask | (1 << m)];
                    if next.is_none_or(|(v, _)| c + s < v) {
                        *next = Some((c + s, Some(m)));
                    }
                }
            }
        }
    }
    let target = (0..states)
        .filter(|m| m.count_ones() as usize == cardinality)
        .filter_map(|m| best[n0][m].map(|(c, _)| (c, m)))
        .min_by(|a, b| cmp_total(a.0, b.0));
    let Some((cost, mut mask)) = target else {
        return Ok(None);
    };
    let mut pairs = Vec::new();
    for r in (1..=n0).rev() {
        if let Some((_, Some(m))) = best[r][mask] {
            pairs.push((r - 1, m));
            mask ^= 1 << m;
        }
    }
    pairs.reverse();
    Ok(Some((cost, pairs)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceColumn {
    /// `|mean0 - mean1| / sqrt((var0 + var1) / 2)`; `None` when both
    /// variances are zero and the means differ.
    pub normalized_diff: Option<f64>,
    pub p_value: f64,
    /// Zero variance in both samples.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub feature: String,
    pub original: BalanceColumn,
    pub counterpart: BalanceColumn,
}

fn balance_column<T: Real>(a: &[T], b: &[T], flavor: TTestFlavor) -> Result<BalanceColumn> {
    let (ma, mb) = (mean(a), mean(b));
    let pooled = ((sample_variance(a) + sample_variance(b)) / T::lit(2.0)).sqrt();
    let diff = (ma - mb).abs();
    let t = two_sample_ttest(a, b, flavor)?;
    let normalized_diff = if pooled > T::zero() {
        Some((diff / pooled).to_f64_lossy())
    } else if diff == T::zero() {
        Some(0.0)
    } else {
        None
    };
    Ok(BalanceColumn {
        normalized_diff,
        p_value: t.p_value.to_f64_lossy(),
        degenerate: pooled == T::zero(),
    })
}

/// Per-feature balance of the original groups (all rows) and of the matched
/// counterparts (paired rows only).
pub fn balance_report<T: Real>(
    pairs: &CounterpartPairs<T>,
    g0: &Matrix<T>,
    g1: &Matrix<T>,
    feature_names: &[String],
    flavor: TTestFlavor,
) -> Result<Vec<BalanceRow>> {
    if pairs.is_empty() {
        return Err(Error::Empty("balance report needs matched pairs".into()));
    }
    if feature_names.len() != g0.n_cols() || g1.n_cols() != g0.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: feature_names.len(),
            got: g0.n_cols(),
        });
    }
    let m0 = g0.select_rows(&pairs.g0_positions());
    let m1 = g1.select_rows(&pairs.g1_positions());
    feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            Ok(BalanceRow {
                feature: name.clone(),
                original: balance_column(&g0.column(j), &g1.column(j), flavor)?,
                counterpart: balance_column(&m0.column(j), &m1.column(j), flavor)?,
            })
        })
        .collect()
}

pub const PAIRS_FORMAT: &str = "pairs/1";
pub const BALANCE_FORMAT: &str = "balance/1";

/// Writes pairs as table rows: `g0_index` / `g1_index` map the positions
/// through `g0_rows` / `g1_rows`.
pub fn write_pairs_csv<T: Real>(
    path: &Path,
    pairs: &CounterpartPairs<T>,
    g0_rows: &[usize],
    g1_rows: &[usize],
) -> Result<()> {
    let mut w = artifact::csv_writer(path, PAIRS_FORMAT)?;
    w.write_record(["g0_index", "g1_index", "s", "delta_s"])?;
    for p in &pairs.pairs {
        w.serialize((g0_rows[p.g0], g1_rows[p.g1], p.s.to_f64_lossy(), p.gap.to_f64_lossy()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `(g0_row, g1_row, s, delta_s)` records.
pub fn read_pairs_csv(path: &Path) -> Result<Vec<(usize, usize, f64, f64)>> {
    let mut r = artifact::csv_reader(path, PAIRS_FORMAT)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

pub fn write_balance_csv(path: &Path, rows: &[BalanceRow]) -> Result<()> {
    let mut w = artifact::csv_writer(path, BALANCE_FORMAT)?;
    w.write_record([
        "feature",
        "original_p",
        "counterpart_p",
        "original_norm_diff",
        "counterpart_norm_diff",
        "original_degenerate",
        "counterpart_degenerate",
    ])?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.original.p_value.to_string(),
            r.counterpart.p_value.to_string(),
            fmt(r.original.normalized_diff),
            fmt(r.counterpart.normalized_diff),
            r.original.degenerate.to_string(),
            r.counterpart.degenerate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propensity::{build_candidates_unchecked, Candidate};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn set_from(lists: Vec<Vec<usize>>, n1: usize) -> CandidateSet<f64> {
        CandidateSet {
            lists: lists
                .into_iter()
                .map(|l| l.into_iter().map(|m| Candidate { index: m, gap: 0.0 }).collect())
                .collect(),
            n1,
            delta: 1.0,
        }
    }

    #[test]
    fn delta_group_examples() {
        let g = delta_groups(&set_from(vec![vec![1], vec![0, 2]], 3));
        assert_eq!(g.c0, vec![0, 1]);
        assert_eq!(g.c1, vec![0, 1, 2]);
        let g = delta_groups(&set_from(vec![vec![], vec![]], 3));
        assert!(g.c0.is_empty() && g.c1.is_empty());
        let g = delta_groups(&set_from(vec![vec![2], vec![], vec![2]], 4));
        assert_eq!((g.c0, g.c1), (vec![0, 2], vec![2]));
    }

    #[test]
    fn single_row_takes_argmin() {
        let p = greedy_from_table(1, 3, &[(0, 0, 5.0), (0, 1, 1.0), (0, 2, 3.0)]);
        assert_eq!(p.pairs.len(), 1);
        assert_eq!(p.pairs[0].g1, 1);
    }

    #[test]
    fn shared_candidate_goes_to_smaller_s_then_lower_index() {
        let p = greedy_from_table(2, 1, &[(0, 0, 2.0), (1, 0, 1.0)]);
        assert_eq!((p.pairs.len(), p.pairs[0].g0, p.unmatched.clone()), (1, 1, vec![0]));
        let p = greedy_from_table(2, 1, &[(1, 0, 1.0), (0, 0, 1.0)]);
        assert_eq!(p.pairs[0].g0, 0);
    }

    #[test]
    fn greedy_uses_metric_and_candidates() {
        let g0 = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let g1 = Matrix::from_rows(&[[0.9, 1.0], [0.1, 0.0], [5.0, 5.0]]).unwrap();
        let set = set_from(vec![vec![0, 1], vec![0, 2]], 3);
        let w = MetricMatrix::identity(2);
        let p = greedy_match(&set, &w, &g0, &g1, GreedyOrder::Dissimilarity, 1e-6).unwrap();
        let got: Vec<(usize, usize)> = p.pairs.iter().map(|p| (p.g0, p.g1)).collect();
        assert_eq!(got, vec![(1, 0), (0, 1)]);
        assert_abs_diff_eq!(p.total_cost(), 0.01 + 0.01, epsilon = 1e-12);
        let empty = set_from(vec![vec![], vec![]], 3);
        assert!(matches!(
            greedy_match(&empty, &w, &g0, &g1, GreedyOrder::Dissimilarity, 1e-6),
            Err(Error::NoCounterparts(2))
        ));
    }

    #[test]
    fn probability_order_can_differ_from_dissimilarity_order() {
        // row 0 has a lone candidate at s = 1 (α ≈ 1); row 1 has s = 0.5 but
        // shares mass with a second candidate at s = 0.5
        let g0 = Matrix::from_rows(&[[0.0], [10.0]]).unwrap();
        let g1 = Matrix::from_rows(&[[1.0], [10.0 + 0.5f64.sqrt()], [10.0 - 0.5f64.sqrt()]]).unwrap();
        let set = set_from(vec![vec![0], vec![1, 2]], 3);
        let w = MetricMatrix::identity(1);
        let s = greedy_match(&set, &w, &g0, &g1, GreedyOrder::Dissimilarity, 1e-6).unwrap();
        let a = greedy_match(&set, &w, &g0, &g1, GreedyOrder::Probability, 1e-6).unwrap();
        assert_eq!(s.pairs[0].g0, 1);
        assert_eq!(a.pairs[0].g0, 0);
        assert_eq!(s.len(), 2);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn four_by_four_against_all_permutations() {
        let mut rng = crate::rng::rng_from_seed(44);
        for _ in 0..50 {
            let mut triples = Vec::new();
            let mut table = [[0.0; 4]; 4];
            for (n, row) in table.iter_mut().enumerate() {
                for (m, v) in row.iter_mut().enumerate() {
                    *v = rng.random_range(0.0..10.0);
                    triples.push((n, m, *v));
                }
            }
            let g = greedy_from_table(4, 4, &triples);
            assert_eq!(g.len(), 4);
            let mut best = f64::INFINITY;
            let mut perm = [0, 1, 2, 3];
            permutations(&mut perm, 0, &mut |p| {
                best = best.min((0..4).map(|i| table[i][p[i]]).sum());
            });
            let (opt, _) = optimal_matching(4, 4, &triples, 4).unwrap().unwrap();
            assert_abs_diff_eq!(opt, best, epsilon = 1e-12);
            assert!(g.total_cost() >= best - 1e-12);
        }
    }

    fn permutations(p: &mut [usize; 4], k: usize, f: &mut dyn FnMut(&[usize; 4])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permutations(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn optimal_matching_reports_pairs_and_infeasibility() {
        let t = [(0, 0, 1.0), (0, 1, 3.0), (1, 0, 1.5)];
        let (c, pairs) = optimal_matching(2, 2, &t, 2).unwrap().unwrap();
        assert_eq!((c, pairs), (4.5, vec![(0, 1), (1, 0)]));
        assert!(optimal_matching(2, 2, &t, 3).unwrap().is_none());
        assert!(optimal_matching::<f64>(1, 21, &[], 0).is_err());
    }

    #[test]
    fn balance_examples() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [3.0, 1.0]]).unwrap();
        let pairs = CounterpartPairs {
            pairs: (0..3).map(|i| Pair { g0: i, g1: i, s: 0.0, gap: 0.0 }).collect(),
            unmatched: vec![],
        };
        let names = vec!["age".to_string(), "sex".to_string()];
        let rows = balance_report(&pairs, &x, &x, &names, TTestFlavor::Welch).unwrap();
        for r in &rows {
            assert_eq!(r.counterpart.normalized_diff, Some(0.0));
            assert_eq!(r.counterpart.p_value, 1.0);
        }
        // binary feature matched exactly; other columns differ
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 2.0], [1.0, 3.0], [0.0, 4.0], [1.0, 5.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 2.0], [1.0, 4.0], [1.0, 6.0], [0.0, 8.0], [1.0, 10.0]]).unwrap();
        let pairs = CounterpartPairs {
            pairs: (0..5).map(|i| Pair { g0: i, g1: i, s: 0.0, gap: 0.0 }).collect(),
            unmatched: vec![],
        };
        let rows = balance_report(&pairs, &a, &b, &names, TTestFlavor::Student).unwrap();
        assert_eq!(rows[0].counterpart.p_value, 1.0);
        // {1..5} vs {2,4,..,10}: means 3 and 6, variances 2.5 and 10, equal
        // sizes so the pooled standard error is sqrt((2.5 + 10) / 5)
        let t = -3.0 / ((2.5 + 10.0) / 5.0f64).sqrt();
        let p = crate::stats::student_t_two_sided_p(t, 8.0);
        assert_abs_diff_eq!(rows[1].counterpart.p_value, p, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[1].counterpart.normalized_diff.unwrap(), 3.0 / 6.25f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_balance_flags() {
        let a = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let b = Matrix::from_rows(&[[2.0], [2.0]]).unwrap();
        let pairs = CounterpartPairs {
            pairs: vec![Pair { g0: 0, g1: 0, s: 0.0, gap: 0.0 }, Pair { g0: 1, g1: 1, s: 0.0, gap: 0.0 }],
            unmatched: vec![],
        };
        let r = &balance_report(&pairs, &a, &b, &["c".into()], TTestFlavor::Welch).unwrap()[0];
        assert!(r.original.degenerate);
        assert_eq!(r.original.normalized_diff, None);
        let r = &balance_report(&pairs, &a, &a, &["c".into()], TTestFlavor::Welch).unwrap()[0];
        assert_eq!((r.counterpart.p_value, r.counterpart.degenerate), (1.0, true));
    }

    #[test]
    fn pairs_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pairs = CounterpartPairs {
            pairs: vec![Pair { g0: 1, g1: 0, s: 0.5, gap: 0.25 }],
            unmatched: vec![0],
        };
        write_pairs_csv(&path, &pairs, &[10, 11], &[20]).unwrap();
        assert_eq!(read_pairs_csv(&path).unwrap(), vec![(11, 20, 0.5, 0.25)]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# cfair-format: pairs/1\n"));
    }

    fn random_instance(seed: u64, n0: usize, n1: usize) -> (CandidateSet<f64>, Matrix<f64>, Matrix<f64>) {
        let mut rng = crate::rng::rng_from_seed(seed);
        let s0: Vec<f64> = (0..n0).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s1: Vec<f64> = (0..n1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let delta = rng.random_range(0.0..2.0);
        let set = build_candidates_unchecked(&s0, &s1, delta).unwrap();
        let mut gen = |n: usize| Matrix::new(n, 2, (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (a, b) = (gen(n0), gen(n1));
        (set, a, b)
    }

    proptest! {
        #[test]
        fn greedy_is_one_to_one_sound_and_maximal(seed in 0u64..100_000, n0 in 1usize..8, n1 in 1usize..8) {
            let (set, a, b) = random_instance(seed, n0, n1);
            prop_assume!(set.require_overlap().is_ok());
            let w = MetricMatrix::identity(2);
            for order in [GreedyOrder::Dissimilarity, GreedyOrder::Probability] {
                let p = greedy_match(&set, &w, &a, &b, order, 1e-6).unwrap();
                let l: BTreeSet<usize> = p.pairs.iter().map(|x| x.g0).collect();
                let r: BTreeSet<usize> = p.pairs.iter().map(|x| x.g1).collect();
                prop_assert_eq!(l.len(), p.len());
                prop_assert_eq!(r.len(), p.len());
                for x in &p.pairs {
                    prop_assert!(set.contains(x.g0, x.g1));
                }
                // maximal: no admissible pair with both ends free
                for n in p.unmatched.iter() {
                    for c in &set.lists[*n] {
                        prop_assert!(r.contains(&c.index));
                    }
                }
                prop_assert_eq!(&p, &greedy_match(&set, &w, &a, &b, order, 1e-6).unwrap());
            }
        }

        #[test]
        fn delta_groups_ignore_list_order(seed in 0u64..100_000, n0 in 0usize..8, n1 in 1usize..8) {
            let (set, _, _) = random_instance(seed, n0, n1);
            let base = delta_groups(&set);
            let mut shuffled = set.clone();
            let mut rng = crate::rng::rng_from_seed(seed ^ 0xabc);
            for l in shuffled.lists.iter_mut() {
                l.shuffle(&mut rng);
            }
            prop_assert_eq!(&base, &delta_groups(&shuffled));
            prop_assert_eq!(&base, &delta_groups(&set));
            for &n in &base.c0 {
                prop_assert!(!set.lists[n].is_empty());
            }
        }

        #[test]
        fn greedy_ignores_list_order(seed in 0u64..100_000) {
            let (set, a, b) = random_instance(seed, 6, 6);
            prop_assume!(set.require_overlap().is_ok());
            let w = MetricMatrix::identity(2);
            let mut shuffled = set.clone();
            let mut rng = crate::rng::rng_from_seed(seed);
            for l in shuffled.lists.iter_mut() {
                l.shuffle(&mut rng);
            }
            let x = greedy_match(&set, &w, &a, &b, GreedyOrder::Dissimilarity, 1e-6).unwrap();
            let y = greedy_match(&shuffled, &w, &a, &b, GreedyOrder::Dissimilarity, 1e-6).unwrap();
            prop_assert_eq!(x, y);
        }
    }
}

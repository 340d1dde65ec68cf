//! Group fairness gaps over population slices.
//!
//! Gaps are computed one-vs-rest per class. For two classes the aggregate is
//! the value of class 1; for more it is the maximum over classes whose value
//! is defined. Rates with an empty denominator are reported as `None`, never
//! as zero.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{argmax, train_classifier_named, TrainConfig};
use crate::scalar::Real;
use crate::stats::{mean, paired_ttest, sample_variance};
use crate::tabular::FoldPlan;

/// `|mean(pred0) - mean(pred1)|`.
pub fn dp_gap<T: Real>(pred0: &[T], pred1: &[T]) -> Result<T> {
    if pred0.is_empty() || pred1.is_empty() {
        return Err(Error::Empty("DP gap needs predictions in both groups".into()));
    }
    Ok((mean(pred0) - mean(pred1)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdpGap<T> {
    pub gap: T,
    pub t: T,
    pub p_value: T,
    /// Every pair has the same difference; see [`paired_ttest`].
    pub degenerate: bool,
    pub n_pairs: usize,
}

/// DP gap over matched predictions (`pred0[i]` is paired with `pred1[i]`)
/// with a two-sided paired t-test on the differences.
pub fn cdp_gap<T: Real>(pred0: &[T], pred1: &[T]) -> Result<CdpGap<T>> {
    let test = paired_ttest(pred0, pred1)?;
    Ok(CdpGap {
        gap: dp_gap(pred0, pred1)?,
        t: test.statistic,
        p_value: test.p_value,
        degenerate: test.degenerate,
        n_pairs: pred0.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub class: usize,
    pub tpr: [Option<f64>; 2],
    pub ppv: [Option<f64>; 2],
    pub delta_tpr: Option<f64>,
    pub delta_ppv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGaps {
    pub per_class: Vec<ClassRates>,
    /// Aggregate ΔTPR.
    pub equal_opportunity: Option<f64>,
    /// Aggregate ΔPPV.
    pub sufficiency: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn abs_diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?).abs())
}

/// Class-1 value for two classes, maximum defined value otherwise.
pub fn aggregate(per_class: &[Option<f64>]) -> Option<f64> {
    if per_class.len() == 2 {
        return per_class[1];
    }
    per_class.iter().flatten().copied().reduce(f64::max)
}

/// One-vs-rest TPR and PPV per group and their absolute gaps. `group[i]` is
/// 0 or 1; rows with other codes and rows outside `restrict` are ignored.
pub fn group_rate_gaps(
    y_true: &[usize],
    y_pred: &[usize],
    group: &[u8],
    n_classes: usize,
    restrict: Option<&[usize]>,
) -> Result<RateGaps> {
    if y_true.len() != y_pred.len() || y_true.len() != group.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len().min(group.len()),
        });
    }
    let all: Vec<usize>;
    let rows = match restrict {
        Some(r) => {
            if let Some(&bad) = r.iter().find(|&&i| i >= y_true.len()) {
                return Err(Error::Data(format!("restriction index {bad} out of range")));
            }
            r
        }
        None => {
            all = (0..y_true.len()).collect();
            &all
        }
    };
    // [group][class] -> (tp, fn, fp)
    let mut counts = vec![[(0usize, 0usize, 0usize); 2]; n_classes];
    for &i in rows {
        let g = group[i] as usize;
        if g > 1 {
            continue;
        }
        let (t, p) = (y_true[i], y_pred[i]);
        if t >= n_classes || p >= n_classes {
            return Err(Error::Data(format!("label out of range at row {i}")));
        }
        if t == p {
            counts[t][g].0 += 1;
        } else {
            counts[t][g].1 += 1;
            counts[p][g].2 += 1;
        }
    }
    let per_class: Vec<ClassRates> = counts
        .iter()
        .enumerate()
        .map(|(c, cg)| {
            let tpr = [0, 1].map(|g| ratio(cg[g].0, cg[g].0 + cg[g].1));
            let ppv = [0, 1].map(|g| ratio(cg[g].0, cg[g].0 + cg[g].2));
            ClassRates {
                class: c,
                tpr,
                ppv,
                delta_tpr: abs_diff(tpr[0], tpr[1]),
                delta_ppv: abs_diff(ppv[0], ppv[1]),
            }
        })
        .collect();
    let eo: Vec<Option<f64>> = per_class.iter().map(|c| c.delta_tpr).collect();
    let su: Vec<Option<f64>> = per_class.iter().map(|c| c.delta_ppv).collect();
    Ok(RateGaps {
        equal_opportunity: aggregate(&eo),
        sufficiency: aggregate(&su),
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slice {
    Counterparts,
    Unmatched,
    Total,
}

impl Slice {
    pub const ALL: [Slice; 3] = [Slice::Counterparts, Slice::Unmatched, Slice::Total];

    pub fn name(self) -> &'static str {
        match self {
            Slice::Counterparts => "counterparts",
            Slice::Unmatched => "unmatched",
            Slice::Total => "total",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdpReport {
    /// Per class, on the predicted probability of that class.
    pub per_class: Vec<CdpGap<f64>>,
    /// Entry of `per_class` selected by the aggregation rule.
    pub aggregate: CdpGap<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub slice: Slice,
    pub n_g0: usize,
    pub n_g1: usize,
    /// Per class, on predicted probabilities.
    pub dp_gap: Vec<Option<f64>>,
    pub dp_gap_aggregate: Option<f64>,
    /// Per class, on hard predictions.
    pub dp_gap_label: Vec<Option<f64>>,
    pub dp_gap_label_aggregate: Option<f64>,
    /// Counterpart slice only.
    pub cdp: Option<CdpReport>,
    pub accuracy: [Option<f64>; 2],
    pub rates: RateGaps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub slices: Vec<SliceReport>,
}

/// Evaluates one set of predictions.
///
/// `probs` holds one row per evaluated row; `group` and `y_true` are aligned
/// with it. `pairs` are `(g0, g1)` positions within the evaluated rows.
pub fn evaluate(
    probs: &Matrix<f64>,
    y_true: &[usize],
    group: &[u8],
    pairs: &[(usize, usize)],
    fold: usize,
) -> Result<FoldReport> {
    let n = probs.n_rows();
    if y_true.len() != n || group.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_true.len().min(group.len()),
        });
    }
    let k = probs.n_cols();
    let y_pred: Vec<usize> = probs.rows().map(argmax).collect();
    let mut paired = vec![false; n];
    for &(a, b) in pairs {
        if a >= n || b >= n || group[a] != 0 || group[b] != 1 {
            return Err(Error::Data(format!("pair ({a}, {b}) does not join g0 to g1")));
        }
        if paired[a] || paired[b] {
            return Err(Error::Data(format!("pair ({a}, {b}) reuses a row")));
        }
        paired[a] = true;
        paired[b] = true;
    }
    let slices = Slice::ALL
        .iter()
        .map(|&slice| {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| group[i] <= 1)
                .filter(|&i| match slice {
                    Slice::Counterparts => paired[i],
                    Slice::Unmatched => !paired[i],
                    Slice::Total => true,
                })
                .collect();
            slice_report(slice, probs, y_true, &y_pred, group, &rows, pairs, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldReport { fold, slices })
}

#[allow(clippy::too_many_arguments)]
fn slice_report(
    slice: Slice,
    probs: &Matrix<f64>,
    y_true: &[usize],
    y_pred: &[usize],
    group: &[u8],
    rows: &[usize],
    pairs: &[(usize, usize)],
    k: usize,
) -> Result<SliceReport> {
    let by_group = |g: u8| -> Vec<usize> { rows.iter().copied().filter(|&i| group[i] == g).collect() };
    let members = [by_group(0), by_group(1)];
    let dp = |value: &dyn Fn(usize, usize) -> f64| -> Vec<Option<f64>> {
        (0..k)
            .map(|c| {
                let a: Vec<f64> = members[0].iter().map(|&i| value(i, c)).collect();
                let b: Vec<f64> = members[1].iter().map(|&i| value(i, c)).collect();
                dp_gap(&a, &b).ok()
            })
            .collect()
    };
    let dp_gap = dp(&|i, c| probs.get(i, c));
    let dp_gap_label = dp(&|i, c| f64::from(u8::from(y_pred[i] == c)));
    let cdp = if slice == Slice::Counterparts && pairs.len() >= 2 {
        let per_class = (0..k)
            .map(|c| {
                let a: Vec<f64> = pairs.iter().map(|&(i, _)| probs.get(i, c)).collect();
                let b: Vec<f64> = pairs.iter().map(|&(_, j)| probs.get(j, c)).collect();
                cdp_gap(&a, &b)
            })
            .collect::<Result<Vec<_>>>()?;
        let chosen = if k == 2 {
            1
        } else {
            (0..k).fold(0, |best, c| if per_class[c].gap > per_class[best].gap { c } else { best })
        };
        Some(CdpReport {
            aggregate: per_class[chosen],
            per_class,
        })
    } else {
        None
    };
    let accuracy = [0, 1].map(|g| {
        let m = &members[g];
        ratio(m.iter().filter(|&&i| y_true[i] == y_pred[i]).count(), m.len())
    });
    Ok(SliceReport {
        slice,
        n_g0: members[0].len(),
        n_g1: members[1].len(),
        dp_gap_aggregate: aggregate(&dp_gap),
        dp_gap,
        dp_gap_label_aggregate: aggregate(&dp_gap_label),
        dp_gap_label,
        cdp,
        accuracy,
        rates: group_rate_gaps(y_true, y_pred, group, k, Some(rows))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRow {
    pub slice: String,
    pub metric: String,
    pub class: String,
    pub value: Option<f64>,
    pub p_value: Option<f64>,
    pub fold: String,
}

impl FoldReport {
    /// One row per reported number. `class_names` label the per-class rows;
    /// aggregates use class `all`.
    pub fn flatten(&self, class_names: &[String]) -> Vec<FlatRow> {
        let fold = self.fold.to_string();
        let mut out = Vec::new();
        let mut push = |slice: Slice, metric: &str, class: &str, value: Option<f64>, p: Option<f64>| {
            out.push(FlatRow {
                slice: slice.name().to_string(),
                metric: metric.to_string(),
                class: class.to_string(),
                value,
                p_value: p,
                fold: fold.clone(),
            });
        };
        for s in &self.slices {
            let sl = s.slice;
            push(sl, "n_g0", "all", Some(s.n_g0 as f64), None);
            push(sl, "n_g1", "all", Some(s.n_g1 as f64), None);
            push(sl, "dp_gap", "all", s.dp_gap_aggregate, None);
            push(sl, "dp_gap_label", "all", s.dp_gap_label_aggregate, None);
            if let Some(c) = &s.cdp {
                push(sl, "cdp_gap", "all", Some(c.aggregate.gap), Some(c.aggregate.p_value));
                push(sl, "cdp_t", "all", Some(c.aggregate.t), None);
            }
            push(sl, "accuracy_g0", "all", s.accuracy[0], None);
            push(sl, "accuracy_g1", "all", s.accuracy[1], None);
            push(sl, "equal_opportunity", "all", s.rates.equal_opportunity, None);
            push(sl, "sufficiency", "all", s.rates.sufficiency, None);
            for (c, name) in class_names.iter().enumerate() {
                push(sl, "dp_gap", name, s.dp_gap.get(c).copied().flatten(), None);
                if let Some(cdp) = &s.cdp {
                    let g = &cdp.per_class[c];
                    push(sl, "cdp_gap", name, Some(g.gap), Some(g.p_value));
                }
                let r = &s.rates.per_class[c];
                push(sl, "delta_tpr", name, r.delta_tpr, None);
                push(sl, "delta_ppv", name, r.delta_ppv, None);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub slice: String,
    pub metric: String,
    pub class: String,
    /// Folds where the value is defined.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation across folds.
    pub std: Option<f64>,
    /// Largest p-value across folds, when the metric carries one.
    pub max_p_value: Option<f64>,
}

/// Mean ± sample standard deviation of every flat row across folds.
pub fn summarize(folds: &[Vec<FlatRow>]) -> Vec<SummaryRow> {
    let Some(first) = folds.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(idx, proto)| {
            let same = |r: &&FlatRow| r.slice == proto.slice && r.metric == proto.metric && r.class == proto.class;
            let rows: Vec<&FlatRow> = folds
                .iter()
                .filter_map(|f| f.get(idx).filter(same).or_else(|| f.iter().find(same)))
                .collect();
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
            let ps: Vec<f64> = rows.iter().filter_map(|r| r.p_value).collect();
            SummaryRow {
                slice: proto.slice.clone(),
                metric: proto.metric.clone(),
                class: proto.class.clone(),
                n: vals.len(),
                mean: (!vals.is_empty()).then(|| mean(&vals)),
                std: (vals.len() >= 2).then(|| sample_variance(&vals).sqrt()),
                max_p_value: ps.into_iter().reduce(f64::max),
            }
        })
        .collect()
}

pub const REPORT_FORMAT: &str = "cfair-fairness-report/1";
pub const REPORT_CSV_FORMAT: &str = "fairness-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub format: String,
    pub model: String,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub folds: Vec<FoldReport>,
    pub summary: Vec<SummaryRow>,
    /// Hex digest of the run configuration, filled in by callers that have one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl FairnessReport {
    pub fn new(model: String, seed: u64, class_names: Vec<String>, folds: Vec<FoldReport>) -> Self {
        let flat: Vec<Vec<FlatRow>> = folds.iter().map(|f| f.flatten(&class_names)).collect();
        Self {
            format: REPORT_FORMAT.to_string(),
            model,
            seed,
            summary: summarize(&flat),
            class_names,
            folds,
            config_hash: None,
        }
    }

    /// Looks up a summary entry.
    pub fn summary_of(&self, slice: Slice, metric: &str, class: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.slice == slice.name() && r.metric == metric && r.class == class)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        artifact::write_json(path, self)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let r: Self = artifact::read_json(path)?;
        artifact::check_format(&r.format, REPORT_FORMAT)?;
        Ok(r)
    }

    /// Per-fold rows followed by `mean` and `std` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = artifact::csv_writer(path, REPORT_CSV_FORMAT)?;
        w.write_record(["slice", "metric", "class", "value", "p_value", "fold"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for f in &self.folds {
            for r in f.flatten(&self.class_names) {
                w.write_record([r.slice, r.metric, r.class, opt(r.value), opt(r.p_value), r.fold])?;
            }
        }
        for s in &self.summary {
            for (label, v, p) in [("mean", s.mean, s.max_p_value), ("std", s.std, None)] {
                w.write_record([
                    s.slice.clone(),
                    s.metric.clone(),
                    s.class.clone(),
                    opt(v),
                    opt(p),
                    label.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Inputs shared by every fold of an audit. `pairs` are `(g0_row, g1_row)`
/// table rows; a pair is evaluated in a fold when both rows are test rows.
pub struct AuditInput<'a> {
    pub x: &'a Matrix<f64>,
    pub feature_names: &'a [String],
    pub y: &'a [usize],
    pub group: &'a [u8],
    pub pairs: &'a [(usize, usize)],
    pub plan: &'a FoldPlan,
    pub class_names: &'a [String],
}

/// Trains `config` on each fold's training rows and evaluates its test rows.
/// Folds run in parallel; the report lists them in fold order.
pub fn audit(input: &AuditInput<'_>, config: &TrainConfig) -> Result<FairnessReport> {
    let n = input.x.n_rows();
    if input.y.len() != n || input.group.len() != n || input.plan.assignments.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: input.y.len().min(input.group.len()).min(input.plan.assignments.len()),
        });
    }
    let n_classes = input.class_names.len();
    let folds = (0..input.plan.k)
        .into_par_iter()
        .map(|fold| {
            let train = input.plan.train_rows(fold);
            let test = input.plan.test_rows(fold);
            let ytr: Vec<usize> = train.iter().map(|&i| input.y[i]).collect();
            let cfg = TrainConfig {
                n_classes: Some(n_classes),
                seed: crate::rng::derive_seed(config.seed, "audit/fold", fold as u64),
                ..config.clone()
            };
            let model = train_classifier_named(&input.x.select_rows(&train), &ytr, input.feature_names.to_vec(), &cfg)?;
            let probs = model.predict_proba(&input.x.select_rows(&test))?;
            fold_report(input, &test, &probs, fold)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FairnessReport::new(
        config.kind.name().to_string(),
        config.seed,
        input.class_names.to_vec(),
        folds,
    ))
}

/// Evaluates precomputed test-row probabilities for one fold.
pub fn fold_report(input: &AuditInput<'_>, test: &[usize], probs: &Matrix<f64>, fold: usize) -> Result<FoldReport> {
    let mut pos = vec![usize::MAX; input.y.len()];
    for (p, &i) in test.iter().enumerate() {
        pos[i] = p;
    }
    let pairs: Vec<(usize, usize)> = input
        .pairs
        .iter()
        .filter(|&&(a, b)| pos[a] != usize::MAX && pos[b] != usize::MAX)
        .map(|&(a, b)| (pos[a], pos[b]))
        .collect();
    let y: Vec<usize> = test.iter().map(|&i| input.y[i]).collect();
    let g: Vec<u8> = test.iter().map(|&i| input.group[i]).collect();
    evaluate(probs, &y, &g, &pairs, fold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dp_examples() {
        assert_eq!(dp_gap(&[0.2, 0.7], &[0.7, 0.2]).unwrap(), 0.0);
        assert_eq!(dp_gap(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!(dp_gap::<f64>(&[], &[1.0]).is_err());
        assert_eq!(dp_gap(&[1.0f32, 0.0], &[1.0, 1.0]).unwrap(), 0.5f32);
    }

    #[test]
    fn cdp_examples() {
        let c = cdp_gap(&[0.3, 0.9, 0.5], &[0.3, 0.9, 0.5]).unwrap();
        assert_eq!((c.gap, c.t, c.p_value, c.degenerate), (0.0, 0.0, 1.0, true));
        let c = cdp_gap(&[1.0, 0.0, 0.5, 0.5], &[0.0, 1.0, 0.5, 0.5]).unwrap();
        assert_eq!((c.gap, c.t, c.p_value), (0.0, 0.0, 1.0));
        assert!(cdp_gap(&[1.0], &[0.0]).is_err());
    }

    fn toy() -> (Vec<usize>, Vec<usize>, Vec<u8>) {
        // group 0: rows 0..4, group 1: rows 4..8
        let y_true = vec![1, 1, 0, 0, 1, 1, 1, 0];
        let y_pred = vec![1, 0, 0, 1, 1, 1, 0, 0];
        (y_true, y_pred, vec![0, 0, 0, 0, 1, 1, 1, 1])
    }

    #[test]
    fn toy_confusion_matrices() {
        let (t, p, g) = toy();
        let r = group_rate_gaps(&t, &p, &g, 2, None).unwrap();
        // class 1: g0 TP 1 FN 1 FP 1; g1 TP 2 FN 1 FP 0
        let c1 = &r.per_class[1];
        assert_eq!(c1.tpr, [Some(0.5), Some(2.0 / 3.0)]);
        assert_eq!(c1.ppv, [Some(0.5), Some(1.0)]);
        assert_abs_diff_eq!(c1.delta_tpr.unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(r.equal_opportunity, c1.delta_tpr);
        assert_eq!(r.sufficiency, Some(0.5));
        // class 0: g0 TP 1 FN 1 FP 1; g1 TP 1 FN 0 FP 1
        let c0 = &r.per_class[0];
        assert_eq!(c0.tpr, [Some(0.5), Some(1.0)]);
        assert_eq!(c0.ppv, [Some(0.5), Some(0.5)]);
        assert_eq!(c0.delta_ppv, Some(0.0));
    }

    #[test]
    fn toy_matches_brute_force_counting() {
        let (t, p, g) = toy();
        let r = group_rate_gaps(&t, &p, &g, 2, None).unwrap();
        for c in 0..2 {
            let rate = |grp: u8, den: &dyn Fn(usize) -> bool| {
                let idx: Vec<usize> = (0..8).filter(|&i| g[i] == grp && den(i)).collect();
                let tp = idx.iter().filter(|&&i| t[i] == c && p[i] == c).count();
                tp as f64 / idx.len() as f64
            };
            let tpr = |grp| rate(grp, &|i| t[i] == c);
            let ppv = |grp| rate(grp, &|i| p[i] == c);
            assert_eq!(r.per_class[c].delta_tpr, Some((tpr(0) - tpr(1)).abs()));
            assert_eq!(r.per_class[c].delta_ppv, Some((ppv(0) - ppv(1)).abs()));
        }
    }

    #[test]
    fn perfect_predictions_have_no_gaps() {
        let t = vec![0, 1, 2, 2, 1, 0];
        let r = group_rate_gaps(&t, &t, &[0, 0, 0, 1, 1, 1], 3, None).unwrap();
        assert!(r.per_class.iter().all(|c| c.delta_tpr == Some(0.0) && c.delta_ppv == Some(0.0)));
        assert_eq!((r.equal_opportunity, r.sufficiency), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn undefined_rates_are_flagged_and_skipped() {
        // class 2 never occurs in group 1
        let t = vec![0, 2, 1, 0, 1, 1];
        let p = vec![0, 2, 0, 0, 1, 0];
        let r = group_rate_gaps(&t, &p, &[0, 0, 0, 1, 1, 1], 3, None).unwrap();
        assert_eq!(r.per_class[2].tpr[1], None);
        assert_eq!(r.per_class[2].delta_tpr, None);
        let defined: Vec<f64> = r.per_class.iter().filter_map(|c| c.delta_tpr).collect();
        assert_eq!(r.equal_opportunity, defined.into_iter().reduce(f64::max));
        let rr = group_rate_gaps(&t, &p, &[0, 0, 0, 1, 1, 1], 3, Some(&[0, 3])).unwrap();
        assert_eq!(rr.per_class[0].delta_tpr, Some(0.0));
        assert!(group_rate_gaps(&t, &p, &[0; 6], 3, Some(&[9])).is_err());
    }

    #[test]
    fn aggregate_rule() {
        assert_eq!(aggregate(&[Some(0.9), Some(0.1)]), Some(0.1));
        assert_eq!(aggregate(&[Some(0.05), None, Some(0.2)]), Some(0.2));
        assert_eq!(aggregate(&[None, None, None]), None);
    }

    fn constant_probs(n: usize, p: &[f64]) -> Matrix<f64> {
        Matrix::new(n, p.len(), (0..n).flat_map(|_| p.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn constant_model_has_zero_gaps_everywhere() {
        // equal base rates in both groups so PPV of the predicted class agrees
        let y = vec![1, 0, 1, 0, 1, 0, 1, 0];
        let g = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let probs = constant_probs(8, &[0.3, 0.7]);
        let r = evaluate(&probs, &y, &g, &[(0, 4), (1, 5)], 0).unwrap();
        for s in &r.slices {
            assert_eq!(s.dp_gap_aggregate, Some(0.0));
            assert_eq!(s.dp_gap_label_aggregate, Some(0.0));
            assert_eq!(s.rates.equal_opportunity, Some(0.0));
            assert_eq!(s.rates.sufficiency, Some(0.0));
        }
        let c = r.slices[0].cdp.as_ref().unwrap();
        assert_eq!((c.aggregate.gap, c.aggregate.p_value), (0.0, 1.0));
        assert_eq!(r.slices[0].n_g0 + r.slices[1].n_g0, r.slices[2].n_g0);
        assert_eq!(r.slices[0].n_g1 + r.slices[1].n_g1, r.slices[2].n_g1);
    }

    #[test]
    fn cdp_equals_dp_on_matched_columns() {
        let probs = Matrix::from_rows(&[[0.9, 0.1], [0.4, 0.6], [0.2, 0.8], [0.5, 0.5], [0.1, 0.9]]).unwrap();
        let g = vec![0, 0, 1, 1, 1];
        let r = evaluate(&probs, &[0, 1, 1, 0, 1], &g, &[(0, 2), (1, 4)], 3).unwrap();
        let cp = &r.slices[0];
        assert_eq!(cp.slice, Slice::Counterparts);
        assert_abs_diff_eq!(cp.cdp.as_ref().unwrap().aggregate.gap, cp.dp_gap_aggregate.unwrap(), epsilon = 1e-15);
        assert_eq!((cp.n_g0, cp.n_g1), (2, 2));
        assert_eq!(r.slices[1].n_g1, 1);
        assert!(evaluate(&probs, &[0; 5], &g, &[(2, 0)], 0).is_err());
        assert!(evaluate(&probs, &[0; 5], &g, &[(0, 2), (0, 3)], 0).is_err());
    }

    #[test]
    fn multiclass_flat_rows_carry_class_names() {
        let probs = Matrix::from_rows(&[
            [0.7, 0.2, 0.1],
            [0.1, 0.8, 0.1],
            [0.2, 0.2, 0.6],
            [0.6, 0.3, 0.1],
            [0.3, 0.3, 0.4],
            [0.1, 0.6, 0.3],
        ])
        .unwrap();
        let names: Vec<String> = ["NV", "SO", "IV"].map(String::from).to_vec();
        let r = evaluate(&probs, &[0, 1, 2, 0, 2, 1], &[0, 0, 0, 1, 1, 1], &[(0, 3), (1, 5), (2, 4)], 0).unwrap();
        let rows = r.flatten(&names);
        for c in &names {
            assert!(rows.iter().any(|x| x.metric == "delta_tpr" && &x.class == c));
            assert!(rows.iter().any(|x| x.metric == "delta_ppv" && &x.class == c));
        }
        let report = FairnessReport::new("logistic".into(), 0, names, vec![r.clone(), FoldReport { fold: 1, ..r }]);
        let s = report.summary_of(Slice::Total, "dp_gap", "SO").unwrap();
        assert_eq!((s.n, s.std), (2, Some(0.0)));
    }

    #[test]
    fn report_files_round_trip() {
        let probs = constant_probs(4, &[0.4, 0.6]);
        let r = evaluate(&probs, &[0, 1, 0, 1], &[0, 0, 1, 1], &[(0, 2), (1, 3)], 0).unwrap();
        let report = FairnessReport::new("forest".into(), 5, vec!["0".into(), "1".into()], vec![r]);
        let dir = tempfile::tempdir().unwrap();
        report.save_json(&dir.path().join("r.json")).unwrap();
        assert_eq!(FairnessReport::load_json(&dir.path().join("r.json")).unwrap(), report);
        report.write_csv(&dir.path().join("r.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(text.starts_with("# cfair-format: fairness-report/1\nslice,metric,class,value,p_value,fold\n"));
        assert!(text.contains("counterparts,cdp_gap,all,0,1,0"));
    }

    proptest! {
        #[test]
        fn dp_symmetric_bounded_and_permutation_invariant(
            a in prop::collection::vec(0.0f64..=1.0, 1..20),
            b in prop::collection::vec(0.0f64..=1.0, 1..20),
        ) {
            let g = dp_gap(&a, &b).unwrap();
            prop_assert_eq!(g, dp_gap(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&g));
            let mut r = a.clone();
            r.reverse();
            prop_assert!((dp_gap(&r, &b).unwrap() - g).abs() < 1e-12);
        }

        #[test]
        fn paired_p_invariant_to_common_shift(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..20),
            shift in -5.0f64..5.0,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let sa: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let sb: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let x = cdp_gap(&a, &b).unwrap();
            let y = cdp_gap(&sa, &sb).unwrap();
            prop_assert!((x.p_value - y.p_value).abs() < 1e-6);
        }

        #[test]
        fn binary_equal_opportunity_is_positive_class_tpr_gap(
            rows in prop::collection::vec((0usize..2, 0usize..2, 0u8..2), 1..40),
        ) {
            let t: Vec<usize> = rows.iter().map(|r| r.0).collect();
            let p: Vec<usize> = rows.iter().map(|r| r.1).collect();
            let g: Vec<u8> = rows.iter().map(|r| r.2).collect();
            let r = group_rate_gaps(&t, &p, &g, 2, None).unwrap();
            prop_assert_eq!(r.equal_opportunity, r.per_class[1].delta_tpr);
            for c in &r.per_class {
                for v in c.delta_tpr.iter().chain(&c.delta_ppv) {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
        }
    }
}

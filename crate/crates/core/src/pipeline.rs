//! End-to-end counterpart audit: propensity model, caliper, learned metric,
//! greedy matching, balance check and per-fold fairness report.
//!
//! Every stage draws its randomness from [`PipelineConfig::seed`] through a
//! named stream, so stages can be rerun separately with the same results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{audit, fold_report, AuditInput, FairnessReport};
use crate::matching::{
    balance_report, delta_groups, greedy_match, BalanceRow, CounterpartPairs, DeltaGroups, GreedyOrder,
};
use crate::matrix::Matrix;
use crate::metric::{learn_metric, LearnConfig, LearnOutcome, MetricMatrix};
use crate::models::{train_classifier_named, Encoder, ModelDocument, TrainConfig};
use crate::propensity::{
    build_candidates, build_candidates_unchecked, delta_threshold, propensity_scores, select_model, CandidateSet,
    EXACT_PAIR_BUDGET,
};
use crate::rng::derive_seed;
use crate::stats::TTestFlavor;
use crate::tabular::{make_folds, make_paired_folds, split_groups, ColumnKind, FoldPlan, GroupSplit, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropensityConfig {
    /// Models compared by out-of-fold macro F1; the best is refit on all rows.
    pub candidates: Vec<TrainConfig>,
    pub cv_folds: usize,
    /// Caliper percentile of cross-group score gaps.
    pub percentile: f64,
    /// Pair count above which the caliper is estimated from a sample.
    pub pair_budget: usize,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        Self {
            candidates: vec![TrainConfig::logistic(), TrainConfig::random_forest(), TrainConfig::adaboost()],
            cv_folds: 5,
            percentile: 90.0,
            pair_budget: EXACT_PAIR_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub protected: String,
    pub target: String,
    /// Matching and propensity features; every column except the protected
    /// and target columns when absent.
    pub features: Option<Vec<String>>,
    /// Outcome-model features; defaults to `features`.
    pub outcome_features: Option<Vec<String>>,
    pub propensity: PropensityConfig,
    pub metric: LearnConfig,
    pub greedy_order: GreedyOrder,
    pub outcome: TrainConfig,
    pub folds: usize,
    /// Match inside each test fold instead of once on all rows.
    pub rematch_per_fold: bool,
    pub balance_test: TTestFlavor,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            protected: String::new(),
            target: String::new(),
            features: None,
            outcome_features: None,
            propensity: PropensityConfig::default(),
            metric: LearnConfig::default(),
            greedy_order: GreedyOrder::Dissimilarity,
            outcome: TrainConfig::random_forest(),
            folds: 5,
            rematch_per_fold: false,
            balance_test: TTestFlavor::Welch,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, table: &Table) -> Result<()> {
        if self.protected.is_empty() || self.target.is_empty() {
            return Err(Error::Config("protected and target columns are required".into()));
        }
        table.column_index(&self.protected)?;
        table.column_index(&self.target)?;
        for f in self.feature_names(table).iter().chain(&self.outcome_feature_names(table)) {
            table.column_index(f)?;
        }
        if self.propensity.candidates.is_empty() {
            return Err(Error::Config("no propensity model candidates".into()));
        }
        if !(0.0..=100.0).contains(&self.propensity.percentile) {
            return Err(Error::Config(format!(
                "caliper percentile {} outside [0, 100]",
                self.propensity.percentile
            )));
        }
        if self.balance_test == TTestFlavor::Paired {
            return Err(Error::Config("balance test must be student or welch".into()));
        }
        self.metric.validate()?;
        self.outcome.validate()?;
        self.propensity.candidates.iter().try_for_each(TrainConfig::validate)
    }

    pub fn feature_names(&self, table: &Table) -> Vec<String> {
        self.features
            .clone()
            .unwrap_or_else(|| table.names_except(&[&self.protected, &self.target]))
    }

    pub fn outcome_feature_names(&self, table: &Table) -> Vec<String> {
        self.outcome_features
            .clone()
            .unwrap_or_else(|| self.feature_names(table))
    }
}

/// Encoded features of every row, with the group split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: GroupSplit,
    pub encoder: Encoder,
    pub x: Matrix<f64>,
    pub x0: Matrix<f64>,
    pub x1: Matrix<f64>,
}

pub fn prepare(table: &Table, config: &PipelineConfig) -> Result<Prepared> {
    config.validate(table)?;
    let split = split_groups(table, &config.protected)?;
    let encoder = Encoder::fit(table, &config.feature_names(table))?;
    let x = encoder.transform(table)?;
    Ok(Prepared {
        x0: x.select_rows(&split.g0_indices),
        x1: x.select_rows(&split.g1_indices),
        split,
        encoder,
        x,
    })
}

#[derive(Debug, Clone)]
pub struct PropensityStage {
    /// Out-of-fold macro F1 per candidate.
    pub selection: Vec<(TrainConfig, f64)>,
    pub chosen: usize,
    pub model: ModelDocument,
    /// Scores of `g0` / `g1` rows, in split order.
    pub scores0: Vec<f64>,
    pub scores1: Vec<f64>,
}

pub fn fit_propensity(table: &Table, prepared: &Prepared, config: &PipelineConfig) -> Result<PropensityStage> {
    let z: Vec<usize> = table.labels(&config.protected)?;
    let candidates: Vec<TrainConfig> = config
        .propensity
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| TrainConfig {
            n_classes: Some(2),
            seed: derive_seed(config.seed, "pipeline/propensity", i as u64),
            ..c.clone()
        })
        .collect();
    let (chosen, f1) = if candidates.len() == 1 {
        (0, vec![f64::NAN])
    } else {
        select_model(&prepared.x, &z, &candidates, config.propensity.cv_folds)?
    };
    let cfg = candidates[chosen].clone();
    let model = train_classifier_named(&prepared.x, &z, prepared.encoder.output_names(), &cfg)?;
    let scores = propensity_scores(&model, &prepared.x, &config.protected)?.scores;
    Ok(PropensityStage {
        selection: candidates.into_iter().zip(f1).collect(),
        chosen,
        model: ModelDocument::new(cfg, Some(prepared.encoder.clone()), model),
        scores0: prepared.split.g0_indices.iter().map(|&i| scores[i]).collect(),
        scores1: prepared.split.g1_indices.iter().map(|&i| scores[i]).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct MatchStage {
    pub delta: f64,
    pub candidates: CandidateSet<f64>,
    pub groups: DeltaGroups<f64>,
    pub learned: LearnOutcome<f64>,
    pub pairs: CounterpartPairs<f64>,
}

impl MatchStage {
    /// Pairs as `(g0_row, g1_row)` table rows.
    pub fn table_pairs(&self, split: &GroupSplit) -> Vec<(usize, usize)> {
        to_table_pairs(&self.pairs, split)
    }
}

fn to_table_pairs(pairs: &CounterpartPairs<f64>, split: &GroupSplit) -> Vec<(usize, usize)> {
    pairs
        .pairs
        .iter()
        .map(|p| (split.g0_indices[p.g0], split.g1_indices[p.g1]))
        .collect()
}

/// Caliper, metric learning on `g0` elements with candidates, then greedy
/// matching. Fails with [`Error::NoCounterparts`] when nothing is within
/// the caliper.
pub fn match_groups(
    prepared: &Prepared,
    scores0: &[f64],
    scores1: &[f64],
    config: &PipelineConfig,
    delta_override: Option<f64>,
) -> Result<MatchStage> {
    let delta = match delta_override {
        Some(d) => d,
        None => delta_threshold(
            scores0,
            scores1,
            config.propensity.percentile,
            config.propensity.pair_budget,
            derive_seed(config.seed, "pipeline/caliper", 0),
        )?,
    };
    let candidates = build_candidates(scores0, scores1, delta)?;
    let (kept, sub) = candidates.matched_only();
    let learned = learn_metric(&prepared.x0.select_rows(&kept), &prepared.x1, &sub, &config.metric)?;
    let pairs = greedy_match(
        &candidates,
        &learned.metric,
        &prepared.x0,
        &prepared.x1,
        config.greedy_order,
        config.metric.epsilon0,
    )?;
    Ok(MatchStage {
        delta,
        groups: delta_groups(&candidates),
        candidates,
        learned,
        pairs,
    })
}

/// Feature balance of the original groups and the matched pairs on the
/// table's feature columns.
pub fn balance(table: &Table, prepared: &Prepared, pairs: &CounterpartPairs<f64>, config: &PipelineConfig) -> Result<Vec<BalanceRow>> {
    let names = config.feature_names(table);
    let cols = table.select_columns(&names)?;
    balance_report(
        pairs,
        &cols.select_rows(&prepared.split.g0_indices),
        &cols.select_rows(&prepared.split.g1_indices),
        &names,
        config.balance_test,
    )
}

/// Class labels for the report: categorical levels, or the codes.
pub fn class_names(table: &Table, target: &str) -> Result<Vec<String>> {
    let levels = table.levels(target)?;
    if !levels.is_empty() {
        return Ok(levels.to_vec());
    }
    let k = match table.kind(target)? {
        ColumnKind::Binary => 2,
        _ => table.cardinality(target)?,
    };
    Ok((0..k).map(|c| c.to_string()).collect())
}

/// Seed of the audit's fold assignment.
pub fn fold_seed(seed: u64) -> u64 {
    derive_seed(seed, "pipeline/folds", 0)
}

/// What per-fold rematching needs: the caliper, the learned metric and the
/// propensity scores of both groups in split order.
#[derive(Debug, Clone, Copy)]
pub struct Rematch<'a> {
    pub delta: f64,
    pub metric: &'a MetricMatrix<f64>,
    pub scores0: &'a [f64],
    pub scores1: &'a [f64],
}

/// Audit with `pairs` (table rows) fixed up front so that both members share
/// a fold, or, when `rematch` is given, with pairs re-formed among each
/// fold's test rows under the same caliper and metric.
pub fn audit_pairs(
    table: &Table,
    prepared: &Prepared,
    pairs: &[(usize, usize)],
    rematch: Option<Rematch<'_>>,
    config: &PipelineConfig,
) -> Result<(FairnessReport, FoldPlan, Vec<(usize, usize)>)> {
    let split = &prepared.split;
    let y = table.labels(&config.target)?;
    let names = class_names(table, &config.target)?;
    let group = split.membership(table.n_rows());
    let out_encoder = Encoder::fit(table, &config.outcome_feature_names(table))?;
    let xo = out_encoder.transform(table)?;
    let feature_names = out_encoder.output_names();
    let fold_seed = fold_seed(config.seed);
    let outcome = TrainConfig {
        seed: derive_seed(config.seed, "pipeline/outcome", 0),
        ..config.outcome.clone()
    };
    let (plan, pairs) = match rematch {
        None => (
            make_paired_folds(table, config.folds, split, pairs, fold_seed)?,
            pairs.to_vec(),
        ),
        Some(r) => {
            if r.scores0.len() != split.g0_indices.len() || r.scores1.len() != split.g1_indices.len() {
                return Err(Error::DimensionMismatch {
                    expected: split.n_rows(),
                    got: r.scores0.len() + r.scores1.len(),
                });
            }
            let plan = make_folds(table, config.folds, split, fold_seed)?;
            let pairs = rematch_in_folds(prepared, &plan, r, config)?;
            (plan, pairs)
        }
    };
    let input = AuditInput {
        x: &xo,
        feature_names: &feature_names,
        y: &y,
        group: &group,
        pairs: &pairs,
        plan: &plan,
        class_names: &names,
    };
    Ok((audit(&input, &outcome)?, plan, pairs))
}

fn rematch_in_folds(
    prepared: &Prepared,
    plan: &FoldPlan,
    r: Rematch<'_>,
    config: &PipelineConfig,
) -> Result<Vec<(usize, usize)>> {
    let split = &prepared.split;
    let mut pairs = Vec::new();
    for fold in 0..plan.k {
        let in_fold = |rows: &[usize]| -> Vec<usize> {
            (0..rows.len()).filter(|&p| plan.assignments[rows[p]] == fold).collect()
        };
        let p0 = in_fold(&split.g0_indices);
        let p1 = in_fold(&split.g1_indices);
        let s0: Vec<f64> = p0.iter().map(|&p| r.scores0[p]).collect();
        let s1: Vec<f64> = p1.iter().map(|&p| r.scores1[p]).collect();
        let set = build_candidates_unchecked(&s0, &s1, r.delta)?;
        if set.require_overlap().is_err() {
            continue;
        }
        let local = greedy_match(
            &set,
            r.metric,
            &prepared.x0.select_rows(&p0),
            &prepared.x1.select_rows(&p1),
            config.greedy_order,
            config.metric.epsilon0,
        )?;
        pairs.extend(
            local
                .pairs
                .iter()
                .map(|p| (split.g0_indices[p0[p.g0]], split.g1_indices[p1[p.g1]])),
        );
    }
    Ok(pairs)
}

/// [`audit_pairs`] driven by the earlier stages of one run.
pub fn run_audit(
    table: &Table,
    prepared: &Prepared,
    stage: &MatchStage,
    propensity: &PropensityStage,
    config: &PipelineConfig,
) -> Result<(FairnessReport, FoldPlan, Vec<(usize, usize)>)> {
    let rematch = config.rematch_per_fold.then_some(Rematch {
        delta: stage.delta,
        metric: &stage.learned.metric,
        scores0: &propensity.scores0,
        scores1: &propensity.scores1,
    });
    audit_pairs(table, prepared, &stage.table_pairs(&prepared.split), rematch, config)
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub prepared: Prepared,
    pub propensity: PropensityStage,
    pub matching: MatchStage,
    pub balance: Vec<BalanceRow>,
    pub report: FairnessReport,
    pub plan: FoldPlan,
    /// Pairs used by the audit, as table rows.
    pub audit_pairs: Vec<(usize, usize)>,
}

pub fn run_pipeline(table: &Table, config: &PipelineConfig) -> Result<PipelineResult> {
    let prepared = prepare(table, config)?;
    let propensity = fit_propensity(table, &prepared, config)?;
    let matching = match_groups(&prepared, &propensity.scores0, &propensity.scores1, config, None)?;
    let balance = balance(table, &prepared, &matching.pairs, config)?;
    let (report, plan, audit_pairs) = run_audit(table, &prepared, &matching, &propensity, config)?;
    Ok(PipelineResult {
        prepared,
        propensity,
        matching,
        balance,
        report,
        plan,
        audit_pairs,
    })
}

/// Scores precomputed out-of-fold probabilities instead of training; used
/// when predictions come from an external model.
pub fn audit_predictions(
    input: &AuditInput<'_>,
    probs: &Matrix<f64>,
    model: &str,
    seed: u64,
) -> Result<FairnessReport> {
    if probs.n_rows() != input.y.len() {
        return Err(Error::DimensionMismatch {
            expected: input.y.len(),
            got: probs.n_rows(),
        });
    }
    let folds = (0..input.plan.k)
        .map(|f| {
            let test = input.plan.test_rows(f);
            fold_report(input, &test, &probs.select_rows(&test), f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FairnessReport::new(model.to_string(), seed, input.class_names.to_vec(), folds))
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cfair::artifact;
use cfair::fairness::AuditInput;
use cfair::matching::{read_pairs_csv, write_balance_csv, write_pairs_csv};
use cfair::metric::MetricDocument;
use cfair::models::Encoder;
use cfair::pipeline::{
    audit_pairs, audit_predictions, balance, class_names, fit_propensity, fold_seed, match_groups, prepare,
    PipelineConfig, Prepared, Rematch,
};
use cfair::propensity::{histogram, read_scores_csv, write_histogram_csv, write_scores_csv};
use cfair::stats::FoldedNormalParams;
use cfair::synth::{
    generate_clinical_like, generate_synthetic, repeat_seed, run_synthetic_experiment, CLINICAL_PROTECTED,
    CLINICAL_TARGET,
};
use cfair::tabular::{compas, load_table, make_paired_folds, preprocess, ScalingParams, Schema, Table};
use cfair::{Error, Matrix, Result};

use crate::config::RunConfig;

pub const INGEST_FORMAT: &str = "cfair-ingest/1";
pub const MATCH_FORMAT: &str = "cfair-match/1";
pub const FOLDNORM_FORMAT: &str = "foldnorm/1";
pub const FOLDNORM_CURVES_FORMAT: &str = "foldnorm-curves/1";
pub const SELECTION_FORMAT: &str = "propensity-selection/1";
pub const PREDICTIONS_FORMAT: &str = "predictions/1";
const HISTOGRAM_BINS: usize = 30;

/// Inputs shared by every dataset-driven command.
pub struct Loaded {
    pub table: Table,
    pub pipeline: PipelineConfig,
    pub prepared: Prepared,
}

struct Raw {
    table: Table,
    rows_in: usize,
    scaling: ScalingParams,
}

fn read_raw(cfg: &RunConfig) -> Result<Raw> {
    let t = &cfg.tabular;
    let raw = match t.adapter.as_deref() {
        Some("compas") => compas::load(require_path(t.path.as_deref())?)?,
        Some("clinical") => generate_clinical_like(&t.clinical)?,
        Some(other) => return Err(Error::Config(format!("unknown adapter `{other}`"))),
        None => {
            let schema = t
                .schema
                .as_deref()
                .ok_or_else(|| Error::Config("tabular.schema is required without an adapter".into()))?;
            load_table(require_path(t.path.as_deref())?, &Schema::from_json_file(schema)?)?
        }
    };
    let rows_in = raw.n_rows();
    let (table, scaling) = preprocess(&raw, &t.outlier_columns, t.lo_pct, t.hi_pct)?;
    Ok(Raw { table, rows_in, scaling })
}

fn require_path(p: Option<&Path>) -> Result<&Path> {
    p.ok_or_else(|| Error::Config("tabular.path is required".into()))
}

/// Fills the protected and target columns an adapter implies.
pub fn resolve_columns(cfg: &mut RunConfig) {
    let (p, t) = match cfg.tabular.adapter.as_deref() {
        Some("compas") => (compas::PROTECTED, compas::TARGET),
        Some("clinical") => (CLINICAL_PROTECTED, CLINICAL_TARGET),
        _ => return,
    };
    if cfg.protected.is_empty() {
        cfg.protected = p.into();
    }
    if cfg.target.is_empty() {
        cfg.target = t.into();
    }
    if cfg.features.is_none() && cfg.tabular.adapter.as_deref() == Some("compas") {
        cfg.features = Some(compas::FEATURES.iter().map(|s| s.to_string()).collect());
    }
}

pub fn load(cfg: &RunConfig) -> Result<Loaded> {
    let raw = read_raw(cfg)?;
    let pipeline = cfg.pipeline();
    let prepared = prepare(&raw.table, &pipeline)?;
    Ok(Loaded {
        table: raw.table,
        pipeline,
        prepared,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Debug, Serialize, Deserialize)]
struct IngestSummary {
    format: String,
    config_hash: String,
    rows_in: usize,
    rows_out: usize,
    schema: Schema,
    scaling: ScalingParams,
    /// `g0` / `g1` sizes when a protected column is configured.
    groups: Option<[usize; 2]>,
}

pub fn ingest(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let raw = read_raw(cfg)?;
    ensure_dir(out)?;
    let groups = if cfg.protected.is_empty() {
        None
    } else {
        let s = cfair::tabular::split_groups(&raw.table, &cfg.protected)?;
        Some([s.g0_indices.len(), s.g1_indices.len()])
    };
    let table_path = out.join("table.csv");
    // values are written back on the original scale
    raw.scaling.invert(&raw.table)?.write_csv(&table_path)?;
    let summary = IngestSummary {
        format: INGEST_FORMAT.into(),
        config_hash: cfg.hash(),
        rows_in: raw.rows_in,
        rows_out: raw.table.n_rows(),
        schema: Schema {
            columns: raw.table.columns().to_vec(),
            target: raw.table.target().map(str::to_string),
        },
        scaling: raw.scaling,
        groups,
    };
    let summary_path = out.join("ingest.json");
    artifact::write_json(&summary_path, &summary)?;
    Ok(vec![table_path, summary_path])
}

pub fn propensity(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let l = load(cfg)?;
    let stage = fit_propensity(&l.table, &l.prepared, &l.pipeline)?;
    ensure_dir(out)?;
    let split = &l.prepared.split;
    let scores = out.join("scores.csv");
    write_scores_csv(&scores, &split.g0_indices, &stage.scores0, &split.g1_indices, &stage.scores1)?;
    let hist = out.join("histogram.csv");
    write_histogram_csv(&hist, &histogram(&stage.scores0, &stage.scores1, HISTOGRAM_BINS)?)?;
    let model = out.join("propensity_model.json");
    stage.model.save(&model)?;
    let selection = out.join("model_selection.csv");
    let mut w = artifact::csv_writer(&selection, SELECTION_FORMAT)?;
    w.write_record(["model", "macro_f1", "chosen"])?;
    for (i, (c, f1)) in stage.selection.iter().enumerate() {
        let f1 = if f1.is_finite() { f1.to_string() } else { String::new() };
        w.write_record([c.kind.name().to_string(), f1, u8::from(i == stage.chosen).to_string()])?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(vec![scores, hist, model, selection])
}

/// Scores of `g0` / `g1` in split order from a scores file.
fn split_scores(path: &Path, prepared: &Prepared) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_scores_csv(path)?;
    let mut by_row = vec![None; prepared.x.n_rows()];
    for (r, g, s) in rows {
        let slot = by_row
            .get_mut(r)
            .ok_or_else(|| Error::Data(format!("score row {r} is outside the table")))?;
        *slot = Some((g, s));
    }
    let pick = |idx: &[usize], group: u8| -> Result<Vec<f64>> {
        idx.iter()
            .map(|&r| match by_row[r] {
                Some((g, s)) if g == group => Ok(s),
                Some(_) => Err(Error::Data(format!("row {r} has a different group in the scores file"))),
                None => Err(Error::Data(format!("row {r} has no propensity score"))),
            })
            .collect()
    };
    let s0 = pick(&prepared.split.g0_indices, 0)?;
    let s1 = pick(&prepared.split.g1_indices, 1)?;
    Ok((s0, s1))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchSummary {
    pub format: String,
    pub config_hash: String,
    pub delta: f64,
    pub n_candidate_pairs: usize,
    pub delta_elements_g0: usize,
    pub delta_elements_g1: usize,
    pub n_pairs: usize,
    pub unmatched_g0: usize,
    pub total_cost: f64,
}

pub fn matching(cfg: &RunConfig, out: &Path, delta: Option<f64>) -> Result<Vec<PathBuf>> {
    let l = load(cfg)?;
    let (s0, s1) = split_scores(&out.join("scores.csv"), &l.prepared)?;
    let stage = match_groups(&l.prepared, &s0, &s1, &l.pipeline, delta)?;
    let split = &l.prepared.split;
    let pairs = out.join("pairs.csv");
    write_pairs_csv(&pairs, &stage.pairs, &split.g0_indices, &split.g1_indices)?;
    let metric = out.join("metric.json");
    MetricDocument::new(&stage.learned, l.prepared.encoder.output_names(), cfg.metric).save(&metric)?;
    let bal = out.join("balance.csv");
    write_balance_csv(&bal, &balance(&l.table, &l.prepared, &stage.pairs, &l.pipeline)?)?;
    let summary = out.join("match.json");
    artifact::write_json(
        &summary,
        &MatchSummary {
            format: MATCH_FORMAT.into(),
            config_hash: cfg.hash(),
            delta: stage.delta,
            n_candidate_pairs: stage.candidates.n_pairs(),
            delta_elements_g0: stage.groups.c0.len(),
            delta_elements_g1: stage.groups.c1.len(),
            n_pairs: stage.pairs.len(),
            unmatched_g0: stage.pairs.unmatched.len(),
            total_cost: stage.pairs.total_cost(),
        },
    )?;
    Ok(vec![pairs, metric, bal, summary])
}

/// Reads `row_index,<class>...` probability rows covering every table row.
fn read_predictions(path: &Path, n_rows: usize, n_classes: usize) -> Result<Matrix<f64>> {
    let mut r = artifact::csv_reader(path, PREDICTIONS_FORMAT)?;
    let mut probs = vec![None; n_rows];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != n_classes + 1 {
            return Err(Error::Data(format!("prediction rows need {} columns", n_classes + 1)));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Data(format!("bad prediction `{s}`: {e}")));
        let row = parse(&rec[0])? as usize;
        let p: Vec<f64> = (1..=n_classes).map(|c| parse(&rec[c])).collect::<Result<_>>()?;
        *probs
            .get_mut(row)
            .ok_or_else(|| Error::Data(format!("prediction row {row} is outside the table")))? = Some(p);
    }
    let data: Vec<f64> = probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| Error::Data(format!("row {i} has no prediction"))))
        .collect::<Result<Vec<_>>>()?
        .concat();
    Matrix::new(n_rows, n_classes, data)
}

pub fn audit(cfg: &RunConfig, out: &Path, predictions: Option<&Path>) -> Result<Vec<PathBuf>> {
    let l = load(cfg)?;
    let pairs: Vec<(usize, usize)> = read_pairs_csv(&out.join("pairs.csv"))?
        .into_iter()
        .map(|(a, b, _, _)| (a, b))
        .collect();
    let mut report = match predictions {
        Some(path) => {
            let names = class_names(&l.table, &cfg.target)?;
            let probs = read_predictions(path, l.table.n_rows(), names.len())?;
            let split = &l.prepared.split;
            let plan = make_paired_folds(&l.table, l.pipeline.folds, split, &pairs, fold_seed(cfg.seed))?;
            let encoder = Encoder::fit(&l.table, &l.pipeline.outcome_feature_names(&l.table))?;
            let input = AuditInput {
                x: &encoder.transform(&l.table)?,
                feature_names: &encoder.output_names(),
                y: &l.table.labels(&cfg.target)?,
                group: &split.membership(l.table.n_rows()),
                pairs: &pairs,
                plan: &plan,
                class_names: &names,
            };
            audit_predictions(&input, &probs, "external", cfg.seed)?
        }
        None if cfg.fairness.rematch_per_fold => {
            let (s0, s1) = split_scores(&out.join("scores.csv"), &l.prepared)?;
            let (_, metric) = MetricDocument::load(&out.join("metric.json"))?;
            let summary: MatchSummary = artifact::read_json(&out.join("match.json"))?;
            artifact::check_format(&summary.format, MATCH_FORMAT)?;
            let rematch = Rematch {
                delta: summary.delta,
                metric: &metric,
                scores0: &s0,
                scores1: &s1,
            };
            audit_pairs(&l.table, &l.prepared, &pairs, Some(rematch), &l.pipeline)?.0
        }
        None => audit_pairs(&l.table, &l.prepared, &pairs, None, &l.pipeline)?.0,
    };
    report.config_hash = Some(cfg.hash());
    let json = out.join("report.json");
    report.save_json(&json)?;
    let csv = out.join("report.csv");
    report.write_csv(&csv)?;
    Ok(vec![json, csv])
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let summary = run_synthetic_experiment(&cfg.synth)?;
    ensure_dir(out)?;
    let json = out.join("synth_summary.json");
    summary.save_json(&json)?;
    let csv = out.join("synth_repeats.csv");
    summary.write_csv(&csv)?;
    let data = out.join("synth_dataset.csv");
    generate_synthetic(&cfg.synth, repeat_seed(cfg.synth.seed, 0))?.write_csv(&data)?;
    Ok(vec![json, csv, data])
}

pub fn foldnorm(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let f = &cfg.foldnorm;
    if f.points < 2 {
        return Err(Error::Config("foldnorm.points must be at least 2".into()));
    }
    let params = f
        .delta_nu
        .iter()
        .flat_map(|&dn| f.sigma1.iter().map(move |&s| FoldedNormalParams::new(dn, s)))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(out)?;
    let summary = out.join("foldnorm.csv");
    let mut w = artifact::csv_writer(&summary, FOLDNORM_FORMAT)?;
    w.write_record(["delta_nu", "sigma1", "mean", "variance", "mean_derivative"])?;
    for p in &params {
        let s = p.stats();
        w.serialize((p.delta_nu, p.sigma1, s.mean, s.variance, s.mean_derivative))?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    let curves = out.join("foldnorm_curves.csv");
    let mut w = artifact::csv_writer(&curves, FOLDNORM_CURVES_FORMAT)?;
    w.write_record(["delta_nu", "sigma1", "x", "density"])?;
    for p in &params {
        let hi = p.delta_nu.abs() + 4.0 * p.sigma1;
        for i in 0..f.points {
            let x = hi * i as f64 / (f.points - 1) as f64;
            w.serialize((p.delta_nu, p.sigma1, x, p.pdf(x)))?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(vec![summary, curves])
}

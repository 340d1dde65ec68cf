//! Synthetic data with known counterparts.
//!
//! [`generate_synthetic`] draws a two-group, two-feature Gaussian mixture in
//! which a shared component holds noisy copies of `g1` points in `g0`.
//! [`run_synthetic_experiment`] fits a logistic classifier on it and measures
//! DP and CDP gaps before and after raising the decision threshold for `g0`.
//! [`generate_clinical_like`] builds a larger multiclass table with the shape
//! of an ICU cohort, for end-to-end runs where the real data is unavailable.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::fairness::dp_gap;
use crate::linalg;
use crate::matrix::Matrix;
use crate::models::{LinearClassifier, LogisticParams};
use crate::rng::{derive_seed, rng_from_seed, stream_rng, Rng};
use crate::stats::{mean, sample_variance};
use crate::tabular::{ColumnKind, ColumnSpec, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl Gaussian2 {
    fn sampler(&self) -> Result<impl Fn(&mut Rng) -> [f64; 2] + '_> {
        let flat = [self.cov[0][0], self.cov[0][1], self.cov[1][0], self.cov[1][1]];
        if flat.iter().any(|v| !v.is_finite()) || self.cov[0][1] != self.cov[1][0] {
            return Err(Error::Config(format!("covariance {:?} is not symmetric", self.cov)));
        }
        let l = linalg::cholesky(&flat, 2)
            .ok_or_else(|| Error::Config(format!("covariance {:?} is not positive definite", self.cov)))?;
        Ok(move |rng: &mut Rng| {
            let z0: f64 = StandardNormal.sample(rng);
            let z1: f64 = StandardNormal.sample(rng);
            [
                self.mean[0] + l[0] * z0,
                self.mean[1] + l[2] * z0 + l[3] * z1,
            ]
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// `g0`-only component.
    pub g0_component: Gaussian2,
    /// Component both groups draw their counterparts from.
    pub shared_component: Gaussian2,
    /// `g1`-only component.
    pub g1_component: Gaussian2,
    pub n_g0_only: usize,
    pub n_g1_only: usize,
    pub n_pairs: usize,
    /// Variance of the isotropic noise separating a pair.
    pub noise_variance: f64,
    /// A point is labeled 1 iff `x2 - x1 - offset > 0`, with the offset of
    /// its component.
    pub g0_offset: f64,
    pub shared_offset: f64,
    pub g1_offset: f64,
    pub threshold: f64,
    /// Decision threshold for `g0` after post-processing.
    pub g0_threshold_after: f64,
    pub repeats: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            g0_component: Gaussian2 {
                mean: [-3.0, 1.5],
                cov: [[0.3, 0.2], [0.2, 0.3]],
            },
            shared_component: Gaussian2 {
                mean: [-1.0, 1.5],
                cov: [[0.1, 0.05], [0.05, 0.1]],
            },
            g1_component: Gaussian2 {
                mean: [2.5, 2.5],
                cov: [[1.0, 0.3], [0.3, 1.0]],
            },
            n_g0_only: 100,
            n_g1_only: 1000,
            n_pairs: 50,
            noise_variance: 0.01,
            g0_offset: 4.5,
            shared_offset: 2.5,
            g1_offset: 0.0,
            threshold: 0.5,
            g0_threshold_after: 0.85,
            repeats: 100,
            seed: 0,
            learning_rate: 0.1,
            max_iterations: 10_000,
            tolerance: 1e-8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_g0_only + self.n_pairs == 0 || self.n_g1_only + self.n_pairs == 0 {
            return Err(Error::Config("both groups need at least one sample".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::Config(format!("noise variance must be >= 0, got {}", self.noise_variance)));
        }
        for t in [self.threshold, self.g0_threshold_after] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
            }
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be > 0".into()));
        }
        for c in [&self.g0_component, &self.shared_component, &self.g1_component] {
            let _ = c.sampler()?;
        }
        Ok(())
    }
}

/// Which mixture component a point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    G0,
    Shared,
    G1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    /// `n x 2`; `g0` rows first.
    pub x: Matrix<f64>,
    pub labels: Vec<usize>,
    /// 0 for `g0`, 1 for `g1`.
    pub group: Vec<u8>,
    pub component: Vec<Component>,
    /// `(g0_row, g1_row)` ground-truth counterparts.
    pub pairs: Vec<(usize, usize)>,
}

fn label(x: [f64; 2], offset: f64) -> usize {
    usize::from(x[1] - x[0] - offset > 0.0)
}

/// Rows are `g0`-only, `g0` counterparts, `g1`-only, `g1` counterparts.
/// Counterparts carry the label of the noiseless shared point.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let g0 = config.g0_component.sampler()?;
    let shared = config.shared_component.sampler()?;
    let g1 = config.g1_component.sampler()?;
    let sd = config.noise_variance.sqrt();

    let g0_only: Vec<[f64; 2]> = (0..config.n_g0_only).map(|_| g0(&mut rng)).collect();
    let g1_only: Vec<[f64; 2]> = (0..config.n_g1_only).map(|_| g1(&mut rng)).collect();
    let base: Vec<[f64; 2]> = (0..config.n_pairs).map(|_| shared(&mut rng)).collect();
    let noisy: Vec<[f64; 2]> = base
        .iter()
        .map(|p| {
            let e0: f64 = StandardNormal.sample(&mut rng);
            let e1: f64 = StandardNormal.sample(&mut rng);
            [p[0] + sd * e0, p[1] + sd * e1]
        })
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut group = Vec::new();
    let mut component = Vec::new();
    let mut push = |x: [f64; 2], y: usize, g: u8, c: Component| {
        rows.push(x);
        labels.push(y);
        group.push(g);
        component.push(c);
    };
    for &p in &g0_only {
        push(p, label(p, config.g0_offset), 0, Component::G0);
    }
    for (p, b) in noisy.iter().zip(&base) {
        push(*p, label(*b, config.shared_offset), 0, Component::Shared);
    }
    for &p in &g1_only {
        push(p, label(p, config.g1_offset), 1, Component::G1);
    }
    for &b in &base {
        push(b, label(b, config.shared_offset), 1, Component::Shared);
    }
    let n0 = config.n_g0_only + config.n_pairs;
    let pairs = (0..config.n_pairs)
        .map(|k| (config.n_g0_only + k, n0 + config.n_g1_only + k))
        .collect();
    Ok(SynthDataset {
        x: Matrix::from_rows(&rows)?,
        labels,
        group,
        component,
        pairs,
    })
}

impl SynthDataset {
    pub fn g0_rows(&self) -> Vec<usize> {
        (0..self.group.len()).filter(|&i| self.group[i] == 0).collect()
    }

    pub fn g1_rows(&self) -> Vec<usize> {
        (0..self.group.len()).filter(|&i| self.group[i] == 1).collect()
    }

    /// Columns `x1, x2, group, label, pair_id`; `pair_id` is empty for rows
    /// outside the ground-truth pairs.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut pair_id = vec![None; self.group.len()];
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            pair_id[a] = Some(k);
            pair_id[b] = Some(k);
        }
        let mut w = artifact::csv_writer(path, SYNTH_DATASET_FORMAT)?;
        w.write_record(["x1", "x2", "group", "label", "pair_id"])?;
        for i in 0..self.group.len() {
            w.write_record([
                self.x.get(i, 0).to_string(),
                self.x.get(i, 1).to_string(),
                self.group[i].to_string(),
                self.labels[i].to_string(),
                pair_id[i].map(|k| k.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub const SYNTH_DATASET_FORMAT: &str = "synth-dataset/1";
pub const SYNTH_SUMMARY_FORMAT: &str = "cfair-synth-summary/1";
pub const SYNTH_REPEATS_FORMAT: &str = "synth-repeats/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    pub dp: f64,
    pub cdp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeforeAfter {
    pub before: Gaps,
    pub after: Gaps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// Gaps on 0/1 decisions: threshold 0.5 before, and the raised `g0`
    /// threshold after.
    pub thresholded: BeforeAfter,
    /// Gaps on predicted probabilities. Post-processing changes only the
    /// decisions, so `after` equals `before`.
    pub probability: BeforeAfter,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            std: if xs.len() >= 2 { sample_variance(xs).sqrt() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub dp_before: MeanStd,
    pub cdp_before: MeanStd,
    pub dp_after: MeanStd,
    pub cdp_after: MeanStd,
}

impl GapSummary {
    fn of(rows: &[BeforeAfter]) -> Self {
        let col = |f: fn(&BeforeAfter) -> f64| MeanStd::of(&rows.iter().map(f).collect::<Vec<_>>());
        Self {
            dp_before: col(|r| r.before.dp),
            cdp_before: col(|r| r.before.cdp),
            dp_after: col(|r| r.after.dp),
            cdp_after: col(|r| r.after.cdp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub format: String,
    pub config: SynthConfig,
    pub thresholded: GapSummary,
    pub probability: GapSummary,
    pub repeats: Vec<RepeatResult>,
}

impl SynthSummary {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        artifact::write_json(path, self)
    }

    /// One row per repeat.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = artifact::csv_writer(path, SYNTH_REPEATS_FORMAT)?;
        w.write_record([
            "repeat",
            "seed",
            "dp_before",
            "cdp_before",
            "dp_after",
            "cdp_after",
            "dp_before_prob",
            "cdp_before_prob",
            "iterations",
            "converged",
        ])?;
        for r in &self.repeats {
            w.serialize((
                r.repeat,
                r.seed,
                r.thresholded.before.dp,
                r.thresholded.before.cdp,
                r.thresholded.after.dp,
                r.thresholded.after.cdp,
                r.probability.before.dp,
                r.probability.before.cdp,
                r.iterations,
                r.converged,
            ))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn gaps(values: &[f64], data: &SynthDataset) -> Result<Gaps> {
    let pick = |rows: &[usize]| rows.iter().map(|&i| values[i]).collect::<Vec<_>>();
    let dp = dp_gap(&pick(&data.g0_rows()), &pick(&data.g1_rows()))?;
    let a: Vec<usize> = data.pairs.iter().map(|p| p.0).collect();
    let b: Vec<usize> = data.pairs.iter().map(|p| p.1).collect();
    let cdp = dp_gap(&pick(&a), &pick(&b))?;
    Ok(Gaps { dp, cdp })
}

/// Fits the classifier on one dataset and measures both conventions.
pub fn run_repeat(config: &SynthConfig, repeat: usize, seed: u64) -> Result<RepeatResult> {
    let data = generate_synthetic(config, seed)?;
    let params = LogisticParams {
        learning_rate: config.learning_rate,
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        l2: 0.0,
    };
    let weights = vec![1.0; data.labels.len()];
    let (model, trace) = LinearClassifier::fit(
        &data.x,
        &data.labels,
        &weights,
        2,
        vec!["x1".into(), "x2".into()],
        &params,
    );
    let mut p = [0.0; 2];
    let prob: Vec<f64> = data
        .x
        .rows()
        .map(|r| {
            model.predict_row(r, &mut p);
            p[1]
        })
        .collect();
    if prob.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            iteration: trace.iterations,
        });
    }
    let decide = |g0_threshold: f64| -> Vec<f64> {
        prob.iter()
            .zip(&data.group)
            .map(|(&v, &g)| {
                let t = if g == 0 { g0_threshold } else { config.threshold };
                f64::from(u8::from(v > t))
            })
            .collect()
    };
    let before = gaps(&decide(config.threshold), &data)?;
    let after = gaps(&decide(config.g0_threshold_after), &data)?;
    let prob_gaps = gaps(&prob, &data)?;
    Ok(RepeatResult {
        repeat,
        seed,
        thresholded: BeforeAfter { before, after },
        probability: BeforeAfter {
            before: prob_gaps,
            after: prob_gaps,
        },
        iterations: trace.iterations,
        converged: trace.converged,
    })
}

/// Seed of repeat `r` under top-level `seed`.
pub fn repeat_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, "synth/repeat", r as u64)
}

/// Runs `config.repeats` independent repeats in parallel and aggregates them
/// in repeat order.
pub fn run_synthetic_experiment(config: &SynthConfig) -> Result<SynthSummary> {
    config.validate()?;
    let repeats = (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = repeat_seed(config.seed, r);
            run_repeat(config, r, seed).map_err(|e| match e {
                Error::Diverged { iteration } => Error::Numerical(format!(
                    "synthetic classifier diverged at iteration {iteration} (repeat {r}, seed {seed})"
                )),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let th: Vec<BeforeAfter> = repeats.iter().map(|r| r.thresholded).collect();
    let pr: Vec<BeforeAfter> = repeats.iter().map(|r| r.probability).collect();
    Ok(SynthSummary {
        format: SYNTH_SUMMARY_FORMAT.to_string(),
        config: config.clone(),
        thresholded: GapSummary::of(&th),
        probability: GapSummary::of(&pr),
        repeats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClinicalConfig {
    pub n_minority: usize,
    pub n_majority: usize,
    /// Strength of the group shift in the confounded features, in standard
    /// deviations.
    pub shift: f64,
    pub seed: u64,
}

impl Default for ClinicalConfig {
    fn default() -> Self {
        Self {
            n_minority: 300,
            n_majority: 1500,
            shift: 0.5,
            seed: 0,
        }
    }
}

/// Feature columns of [`generate_clinical_like`], in order.
pub const CLINICAL_FEATURES: [&str; 16] = [
    "gender",
    "rrt",
    "gcs",
    "sofa_24h",
    "hr",
    "sbp",
    "dbp",
    "mbp",
    "rr",
    "temperature",
    "spo2",
    "glucose",
    "age",
    "cci",
    "apsiii",
    "bmi",
];
pub const CLINICAL_PROTECTED: &str = "race";
pub const CLINICAL_TARGET: &str = "ventilation";
pub const CLINICAL_CLASSES: [&str; 3] = ["NV", "SO", "IV"];

/// ICU-style cohort: 16 features, a binary protected column (1 for the
/// minority) and a three-level ventilation outcome driven by a latent
/// severity. Age, BMI, glucose and the comorbidity index are shifted between
/// groups, so the protected column is predictable from them.
pub fn generate_clinical_like(config: &ClinicalConfig) -> Result<Table> {
    if config.n_minority < 2 || config.n_majority < 2 {
        return Err(Error::Config("each group needs at least two rows".into()));
    }
    let mut rng = stream_rng(config.seed, "synth/clinical", 0);
    let n = config.n_minority + config.n_majority;
    let mut rows = Vec::with_capacity(n);
    let normal = |rng: &mut Rng| -> f64 { StandardNormal.sample(rng) };
    for i in 0..n {
        let minority = i < config.n_minority;
        let z = if minority { config.shift } else { 0.0 };
        let severity = normal(&mut rng);
        let gender = f64::from(u8::from(rng.random_bool(0.45)));
        let rrt = f64::from(u8::from(rng.random_bool((0.08 + 0.05 * severity.max(0.0)).min(0.9))));
        let gcs = (14.0 - 2.0 * severity.max(0.0) + 0.8 * normal(&mut rng)).clamp(3.0, 15.0).round();
        let sofa = (4.0 + 2.0 * severity + 1.5 * normal(&mut rng)).max(0.0).round();
        let hr = 88.0 + 8.0 * severity + 12.0 * normal(&mut rng);
        let sbp = 120.0 - 6.0 * severity + 15.0 * normal(&mut rng) + 4.0 * z;
        let dbp = 65.0 - 3.0 * severity + 10.0 * normal(&mut rng) + 2.0 * z;
        let mbp = (sbp + 2.0 * dbp) / 3.0 + 2.0 * normal(&mut rng);
        let rr = 20.0 + 3.0 * severity + 4.0 * normal(&mut rng);
        let temperature = 37.0 + 0.3 * severity + 0.5 * normal(&mut rng);
        let spo2 = (96.5 - 1.5 * severity + 1.5 * normal(&mut rng)).min(100.0);
        let glucose = 140.0 + 10.0 * severity + 35.0 * normal(&mut rng) + 25.0 * z;
        let age = 66.0 + 14.0 * normal(&mut rng) - 10.0 * z;
        let cci = (4.0 + 0.5 * severity + 2.0 * normal(&mut rng) + 1.5 * z).max(0.0).round();
        let apsiii = 50.0 + 15.0 * severity + 12.0 * normal(&mut rng);
        let bmi = 28.5 + 6.0 * normal(&mut rng) + 3.0 * z;
        // outcome logits over NV / SO / IV
        let s = severity + 0.3 * normal(&mut rng);
        let logits = [0.8 - 1.2 * s, 0.4, -0.6 + 1.4 * s + 0.5 * (rrt - 0.1)];
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let u: f64 = rng.random::<f64>() * w.iter().sum::<f64>();
        let y = if u < w[0] {
            0
        } else if u < w[0] + w[1] {
            1
        } else {
            2
        };
        rows.push(vec![
            gender,
            rrt,
            gcs,
            sofa,
            hr,
            sbp,
            dbp,
            mbp,
            rr,
            temperature,
            spo2,
            glucose,
            age,
            cci,
            apsiii,
            bmi,
            f64::from(u8::from(minority)),
            y as f64,
        ]);
    }
    let mut columns: Vec<ColumnSpec> = CLINICAL_FEATURES
        .iter()
        .map(|&c| {
            let kind = if c == "gender" || c == "rrt" {
                ColumnKind::Binary
            } else {
                ColumnKind::Numeric
            };
            ColumnSpec::new(c, kind)
        })
        .collect();
    columns.push(ColumnSpec::new(CLINICAL_PROTECTED, ColumnKind::Binary));
    columns.push(ColumnSpec::new(CLINICAL_TARGET, ColumnKind::Categorical));
    let mut levels = vec![Vec::new(); columns.len()];
    levels[columns.len() - 1] = CLINICAL_CLASSES.iter().map(|s| s.to_string()).collect();
    Table::with_levels(columns, Matrix::from_rows(&rows)?, Some(CLINICAL_TARGET.into()), levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            repeats: 3,
            max_iterations: 2000,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn sizes_and_pairs() {
        let d = generate_synthetic(&SynthConfig::default(), 1).unwrap();
        assert_eq!(d.g0_rows().len(), 150);
        assert_eq!(d.g1_rows().len(), 1050);
        assert_eq!(d.pairs.len(), 50);
        for &(a, b) in &d.pairs {
            assert_eq!((d.group[a], d.group[b]), (0, 1));
            assert_eq!(d.labels[a], d.labels[b]);
            assert_eq!((d.component[a], d.component[b]), (Component::Shared, Component::Shared));
        }
    }

    #[test]
    fn labels_follow_component_rules() {
        let c = SynthConfig::default();
        let d = generate_synthetic(&c, 2).unwrap();
        for i in 0..d.labels.len() {
            let x = [d.x.get(i, 0), d.x.get(i, 1)];
            match d.component[i] {
                Component::G0 => assert_eq!(d.labels[i], label(x, 4.5)),
                Component::G1 => assert_eq!(d.labels[i], label(x, 0.0)),
                Component::Shared if d.group[i] == 1 => assert_eq!(d.labels[i], label(x, 2.5)),
                Component::Shared => {}
            }
        }
        assert_eq!(label([-3.0, 2.0], 4.5), 1);
    }

    #[test]
    fn pair_noise_has_the_configured_scale() {
        let mut diffs = Vec::new();
        for seed in 0..40 {
            let d = generate_synthetic(&SynthConfig::default(), seed).unwrap();
            for &(a, b) in &d.pairs {
                diffs.push(d.x.get(a, 0) - d.x.get(b, 0));
                diffs.push(d.x.get(a, 1) - d.x.get(b, 1));
            }
        }
        let sd = sample_variance(&diffs).sqrt();
        assert!((sd - 0.1).abs() < 0.02, "{sd}");
    }

    #[test]
    fn same_seed_same_everything() {
        let c = small();
        assert_eq!(generate_synthetic(&c, 5).unwrap(), generate_synthetic(&c, 5).unwrap());
        assert_ne!(generate_synthetic(&c, 5).unwrap().x, generate_synthetic(&c, 6).unwrap().x);
        assert_eq!(run_synthetic_experiment(&c).unwrap(), run_synthetic_experiment(&c).unwrap());
    }

    #[test]
    fn zero_shift_leaves_gaps_unchanged() {
        let c = SynthConfig {
            g0_threshold_after: 0.5,
            ..small()
        };
        for r in run_synthetic_experiment(&c).unwrap().repeats {
            assert_eq!(r.thresholded.before, r.thresholded.after);
        }
    }

    #[test]
    fn bad_covariance_is_rejected() {
        let mut c = SynthConfig::default();
        c.shared_component.cov = [[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(generate_synthetic(&c, 0), Err(Error::Config(_))));
        c.shared_component.cov = [[1.0, 0.2], [0.1, 1.0]];
        assert!(generate_synthetic(&c, 0).is_err());
    }

    #[test]
    fn dataset_csv_has_pair_ids() {
        let d = generate_synthetic(&SynthConfig::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        d.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# cfair-format: synth-dataset/1"));
        assert_eq!(lines.next(), Some("x1,x2,group,label,pair_id"));
        let with_id = lines.filter(|l| !l.ends_with(',')).count();
        assert_eq!(with_id, 100);
    }

    #[test]
    fn clinical_table_shape() {
        let t = generate_clinical_like(&ClinicalConfig::default()).unwrap();
        assert_eq!(t.n_rows(), 1800);
        assert_eq!(t.n_cols(), 18);
        assert_eq!(t.levels(CLINICAL_TARGET).unwrap(), ["NV", "SO", "IV"]);
        let y = t.labels(CLINICAL_TARGET).unwrap();
        for c in 0..3 {
            assert!(y.iter().filter(|&&v| v == c).count() > 100);
        }
    }
}

//! From-scratch classifiers used as outcome predictors and propensity models.
//!
//! Everything trains from an explicit seed. Forest trees are grown in parallel
//! but each from its own derived seed, so fits are bitwise reproducible.

pub mod ensemble;
pub mod logistic;
pub mod metrics;
pub mod smote;
pub mod tree;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use ensemble::{EnsembleKind, TreeEnsemble};
pub use logistic::{LinearClassifier, LogisticParams};
pub use metrics::{accuracy, macro_f1, macro_f1_with_classes};
pub use smote::smote_oversample;
pub use tree::{Node, Tree, TreeParams};

use crate::artifact;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, stream_rng};
use crate::tabular::{ColumnKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    RandomForest,
    AdaBoost,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::RandomForest => "random_forest",
            ModelKind::AdaBoost => "adaboost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    None,
    /// Class `c` weighs `n_rows / (n_classes * n_c)`.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub l2: f64,
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub class_weight: ClassWeight,
    /// SMOTE neighbour count; when set, training rows are oversampled first.
    pub smote_k: Option<usize>,
    /// Class count; inferred from the labels when absent.
    pub n_classes: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::logistic()
    }
}

impl TrainConfig {
    pub fn logistic() -> Self {
        Self {
            kind: ModelKind::Logistic,
            learning_rate: 0.1,
            iterations: 10_000,
            tolerance: 1e-8,
            l2: 0.0,
            n_estimators: 200,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            class_weight: ClassWeight::None,
            smote_k: None,
            n_classes: None,
            seed: 0,
        }
    }

    pub fn random_forest() -> Self {
        Self {
            kind: ModelKind::RandomForest,
            ..Self::logistic()
        }
    }

    pub fn adaboost() -> Self {
        Self {
            kind: ModelKind::AdaBoost,
            max_depth: Some(1),
            max_features: MaxFeatures::All,
            ..Self::logistic()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.n_estimators == 0 || self.iterations == 0 || self.min_samples_leaf == 0 {
            return Err(Error::Config(
                "n_estimators, iterations and min_samples_leaf must be positive".into(),
            ));
        }
        if matches!(self.max_features, MaxFeatures::Count(0)) || self.max_depth == Some(0) && self.kind == ModelKind::AdaBoost {
            return Err(Error::Config("max_features and boosted depth must be positive".into()));
        }
        if !(self.l2 >= 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::Config("l2 and tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Maps table columns to model inputs: numeric and binary columns pass
/// through, categorical columns expand to one indicator per level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoder {
    pub inputs: Vec<EncodedInput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub name: String,
    pub kind: ColumnKind,
    pub levels: usize,
}

impl Encoder {
    pub fn fit(table: &Table, names: &[String]) -> Result<Self> {
        let inputs = names
            .iter()
            .map(|n| {
                let kind = table.kind(n)?;
                let levels = if kind == ColumnKind::Categorical {
                    table.cardinality(n)?
                } else {
                    0
                };
                Ok(EncodedInput {
                    name: n.clone(),
                    kind,
                    levels,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { inputs })
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.inputs {
            if c.kind == ColumnKind::Categorical {
                out.extend((0..c.levels).map(|l| format!("{}={l}", c.name)));
            } else {
                out.push(c.name.clone());
            }
        }
        out
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(|c| c.name.clone()).collect()
    }

    pub fn transform(&self, table: &Table) -> Result<Matrix<f64>> {
        let idx = self
            .inputs
            .iter()
            .map(|c| {
                let j = table.column_index(&c.name)?;
                if table.columns()[j].kind != c.kind {
                    return Err(Error::Data(format!("column `{}` changed kind", c.name)));
                }
                Ok(j)
            })
            .collect::<Result<Vec<_>>>()?;
        let width = self.output_names().len();
        let mut data = Vec::with_capacity(table.n_rows() * width);
        for row in table.values().rows() {
            for (c, &j) in self.inputs.iter().zip(&idx) {
                let v = row[j];
                if c.kind == ColumnKind::Categorical {
                    data.extend((0..c.levels).map(|l| if v as usize == l { 1.0 } else { 0.0 }));
                } else {
                    data.push(v);
                }
            }
        }
        Matrix::new(table.n_rows(), width, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Logistic(LinearClassifier),
    Ensemble(TreeEnsemble),
}

impl Model {
    pub fn n_classes(&self) -> usize {
        match self {
            Model::Logistic(m) => m.n_classes(),
            Model::Ensemble(m) => m.n_classes,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Logistic(m) => &m.feature_names,
            Model::Ensemble(m) => &m.feature_names,
        }
    }

    /// Class-probability rows; each sums to one.
    pub fn predict_proba(&self, x: &Matrix<f64>) -> Result<Matrix<f64>> {
        let d = self.feature_names().len();
        if x.n_cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.n_cols(),
            });
        }
        let k = self.n_classes();
        let mut out = Matrix::filled(x.n_rows(), k, 0.0);
        for i in 0..x.n_rows() {
            let (xi, o) = (x.row(i), out.row_mut(i));
            match self {
                Model::Logistic(m) => m.predict_row(xi, o),
                Model::Ensemble(m) => m.predict_row(xi, o),
            }
        }
        Ok(out)
    }

    /// Argmax class, lowest index on ties.
    pub fn predict(&self, x: &Matrix<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows().map(argmax).collect())
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn class_weights(y: &[usize], n_classes: usize, mode: ClassWeight) -> Vec<f64> {
    match mode {
        ClassWeight::None => vec![1.0; n_classes],
        ClassWeight::Balanced => {
            let mut counts = vec![0usize; n_classes];
            for &c in y {
                counts[c] += 1;
            }
            counts
                .iter()
                .map(|&n_c| {
                    if n_c == 0 {
                        0.0
                    } else {
                        y.len() as f64 / (n_classes as f64 * n_c as f64)
                    }
                })
                .collect()
        }
    }
}

/// Trains with generated feature names `x0, x1, ...`.
pub fn train_classifier(x: &Matrix<f64>, y: &[usize], config: &TrainConfig) -> Result<Model> {
    let names = (0..x.n_cols()).map(|j| format!("x{j}")).collect();
    train_classifier_named(x, y, names, config)
}

pub fn train_classifier_named(
    x: &Matrix<f64>,
    y: &[usize],
    feature_names: Vec<String>,
    config: &TrainConfig,
) -> Result<Model> {
    config.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if feature_names.len() != x.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: x.n_cols(),
            got: feature_names.len(),
        });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    let mut distinct: Vec<usize> = y.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Data(format!(
            "training labels contain {} class(es); need at least 2",
            distinct.len()
        )));
    }
    let n_classes = config.n_classes.unwrap_or(0).max(distinct[distinct.len() - 1] + 1);

    let (xs, ys);
    let (x, y) = match config.smote_k {
        Some(k) => {
            (xs, ys) = smote_oversample(x, y, k, derive_seed(config.seed, "train/smote", 0))?;
            (&xs, &ys[..])
        }
        None => (x, y),
    };
    let cw = class_weights(y, n_classes, config.class_weight);
    let d = x.n_cols();
    let max_features = match config.max_features {
        MaxFeatures::All => None,
        MaxFeatures::Sqrt => Some(((d as f64).sqrt().floor() as usize).max(1)),
        MaxFeatures::Count(m) => Some(m.min(d)),
    };
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        max_features,
    };
    Ok(match config.kind {
        ModelKind::Logistic => {
            let sw: Vec<f64> = y.iter().map(|&c| cw[c]).collect();
            let lp = LogisticParams {
                learning_rate: config.learning_rate,
                max_iterations: config.iterations,
                tolerance: config.tolerance,
                l2: config.l2,
            };
            let (m, _) = LinearClassifier::fit(x, y, &sw, n_classes, feature_names, &lp);
            if m.weights.as_slice().iter().chain(&m.bias).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "logistic regression diverged (seed {})",
                    config.seed
                )));
            }
            Model::Logistic(m)
        }
        ModelKind::RandomForest => Model::Ensemble(ensemble::fit_forest(
            x,
            y,
            &cw,
            n_classes,
            config.n_estimators,
            params,
            config.seed,
            feature_names,
        )),
        ModelKind::AdaBoost => Model::Ensemble(ensemble::fit_adaboost(
            x,
            y,
            &cw,
            n_classes,
            config.n_estimators,
            params,
            config.seed,
            feature_names,
        )),
    })
}

/// Class-stratified fold ids: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut folds = vec![0; y.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        rows.shuffle(&mut stream_rng(seed, "models/cv", c as u64));
        for i in rows {
            folds[i] = next % k;
            next += 1;
        }
    }
    folds
}

/// Out-of-fold macro F1 of `config` under `k`-fold stratified CV.
pub fn cross_val_macro_f1(x: &Matrix<f64>, y: &[usize], config: &TrainConfig, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be >= 2, got {k}")));
    }
    let n_classes = config.n_classes.unwrap_or(0).max(y.iter().max().map_or(0, |m| m + 1));
    let folds = stratified_folds(y, k, derive_seed(config.seed, "models/cv", 0));
    let mut pred = vec![0; y.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
        if test.is_empty() {
            continue;
        }
        let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let cfg = TrainConfig {
            n_classes: Some(n_classes),
            seed: derive_seed(config.seed, "models/cv-fit", f as u64),
            ..config.clone()
        };
        let m = train_classifier(&x.select_rows(&train), &ty, &cfg)?;
        for (&i, p) in test.iter().zip(m.predict(&x.select_rows(&test))?) {
            pred[i] = p;
        }
    }
    macro_f1_with_classes(y, &pred, n_classes)
}

pub const MODEL_FORMAT: &str = "cfair-model/1";

/// Versioned JSON form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub config: TrainConfig,
    pub encoder: Option<Encoder>,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(config: TrainConfig, encoder: Option<Encoder>, model: Model) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            config,
            encoder,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        artifact::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: Self = artifact::read_json(path)?;
        artifact::check_format(&doc.format, MODEL_FORMAT)?;
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> (Matrix<f64>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..80 {
            let t = i as f64;
            let a = (t * 0.61).sin() * 2.0;
            let b = (t * 0.23).cos() * 2.0;
            rows.push([a, b, a * b]);
            y.push(usize::from(a + 0.5 * b > 0.3));
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn every_kind_is_deterministic_and_normalized() {
        let (x, y) = probe();
        for cfg in [
            TrainConfig::logistic(),
            TrainConfig {
                n_estimators: 20,
                ..TrainConfig::random_forest()
            },
            TrainConfig {
                n_estimators: 20,
                ..TrainConfig::adaboost()
            },
        ] {
            let cfg = cfg.with_seed(5);
            let a = train_classifier(&x, &y, &cfg).unwrap();
            let b = train_classifier(&x, &y, &cfg).unwrap();
            assert_eq!(a, b);
            let p = a.predict_proba(&x).unwrap();
            for r in p.rows() {
                assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            let acc = accuracy(&y, &a.predict(&x).unwrap()).unwrap();
            assert!(acc > 0.85, "{:?}: {acc}", cfg.kind);
        }
    }

    #[test]
    fn rejects_single_class_and_bad_inputs() {
        let (x, _) = probe();
        let y = vec![1; 80];
        assert!(matches!(
            train_classifier(&x, &y, &TrainConfig::logistic()),
            Err(Error::Data(_))
        ));
        let mut bad = Matrix::from_rows(&[[0.0], [f64::NAN]]).unwrap();
        assert!(train_classifier(&bad, &[0, 1], &TrainConfig::logistic()).is_err());
        bad.set(1, 0, 1.0);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::logistic()
        };
        assert!(matches!(train_classifier(&bad, &[0, 1], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn schema_mismatch_on_predict() {
        let (x, y) = probe();
        let m = train_classifier(&x, &y, &TrainConfig::logistic()).unwrap();
        let narrow = x.select_columns(&[0, 1]);
        assert!(matches!(
            m.predict_proba(&narrow),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (x, y) = probe();
        let cfg = TrainConfig {
            n_estimators: 10,
            ..TrainConfig::random_forest()
        };
        let m = train_classifier(&x, &y, &cfg).unwrap();
        let doc = ModelDocument::new(cfg, None, m.clone());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        doc.save(&p).unwrap();
        let back = ModelDocument::load(&p).unwrap();
        assert_eq!(back, doc);
        assert_eq!(
            back.model.predict_proba(&x).unwrap(),
            m.predict_proba(&x).unwrap()
        );
    }

    #[test]
    fn balanced_weights() {
        let w = class_weights(&[0, 0, 0, 1], 2, ClassWeight::Balanced);
        assert_eq!(w, vec![4.0 / 6.0, 2.0]);
    }

    #[test]
    fn encoder_expands_categoricals() {
        use crate::tabular::{parse_table, ColumnSpec, Schema};
        let s = Schema {
            columns: vec![
                ColumnSpec::new("a", ColumnKind::Numeric),
                ColumnSpec::new("c", ColumnKind::Categorical),
            ],
            target: None,
        };
        let t = parse_table("a,c\n1.5,x\n2,y\n3,x\n".as_bytes(), &s).unwrap();
        let e = Encoder::fit(&t, &["a".into(), "c".into()]).unwrap();
        assert_eq!(e.output_names(), vec!["a", "c=0", "c=1"]);
        let m = e.transform(&t).unwrap();
        assert_eq!(m.row(1), &[2.0, 0.0, 1.0]);
    }

    #[test]
    fn cv_macro_f1_is_high_on_separable_data() {
        let (x, y) = probe();
        let f = cross_val_macro_f1(&x, &y, &TrainConfig::logistic(), 5).unwrap();
        assert!(f > 0.8, "{f}");
    }
}

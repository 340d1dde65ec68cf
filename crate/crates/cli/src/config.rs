use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cfair::matching::GreedyOrder;
use cfair::metric::LearnConfig;
use cfair::models::TrainConfig;
use cfair::pipeline::{PipelineConfig, PropensityConfig};
use cfair::stats::TTestFlavor;
use cfair::synth::{ClinicalConfig, SynthConfig};
use cfair::{Error, Result};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularSection {
    pub path: Option<PathBuf>,
    /// Column schema for generic CSV input.
    pub schema: Option<PathBuf>,
    /// `compas` reads the public COMPAS file; `clinical` generates the
    /// ICU-style stand-in cohort instead of reading a file.
    pub adapter: Option<String>,
    pub clinical: ClinicalConfig,
    pub outlier_columns: Vec<String>,
    pub lo_pct: f64,
    pub hi_pct: f64,
}

impl Default for TabularSection {
    fn default() -> Self {
        Self {
            path: None,
            schema: None,
            adapter: None,
            clinical: ClinicalConfig::default(),
            outlier_columns: Vec::new(),
            lo_pct: 2.5,
            hi_pct: 97.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingSection {
    pub greedy_order: GreedyOrder,
    pub balance_test: TTestFlavor,
}

impl Default for MatchingSection {
    fn default() -> Self {
        Self {
            greedy_order: GreedyOrder::Dissimilarity,
            balance_test: TTestFlavor::Welch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessSection {
    pub outcome: TrainConfig,
    pub outcome_features: Option<Vec<String>>,
    pub folds: usize,
    pub rematch_per_fold: bool,
}

impl Default for FairnessSection {
    fn default() -> Self {
        Self {
            outcome: TrainConfig::random_forest(),
            outcome_features: None,
            folds: 5,
            rematch_per_fold: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldnormSection {
    pub delta_nu: Vec<f64>,
    pub sigma1: Vec<f64>,
    /// Density samples per curve on `[0, |Δν| + 4 σ1]`.
    pub points: usize,
}

impl Default for FoldnormSection {
    fn default() -> Self {
        Self {
            delta_nu: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            sigma1: vec![0.02, 0.05, 0.1],
            points: 101,
        }
    }
}

/// Whole-run configuration. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub protected: String,
    #[serde(default)]
    pub target: String,
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub tabular: TabularSection,
    #[serde(default)]
    pub propensity: PropensityConfig,
    #[serde(default)]
    pub metric: LearnConfig,
    #[serde(default)]
    pub matching: MatchingSection,
    #[serde(default)]
    pub fairness: FairnessSection,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub foldnorm: FoldnormSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// A config with every section at its default, for subcommands that need
    /// no dataset.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            out: None,
            protected: String::new(),
            target: String::new(),
            features: None,
            tabular: TabularSection::default(),
            propensity: PropensityConfig::default(),
            metric: LearnConfig::default(),
            matching: MatchingSection::default(),
            fairness: FairnessSection::default(),
            synth: SynthConfig::default(),
            foldnorm: FoldnormSection::default(),
        }
    }

    /// Propagates the top-level seed into every section that draws random
    /// numbers.
    pub fn reseed(&mut self) {
        self.metric.seed = self.seed;
        self.synth.seed = self.seed;
        self.tabular.clinical.seed = self.seed;
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            protected: self.protected.clone(),
            target: self.target.clone(),
            features: self.features.clone(),
            outcome_features: self.fairness.outcome_features.clone(),
            propensity: self.propensity.clone(),
            metric: self.metric,
            greedy_order: self.matching.greedy_order,
            outcome: self.fairness.outcome.clone(),
            folds: self.fairness.folds,
            rematch_per_fold: self.fairness.rematch_per_fold,
            balance_test: self.matching.balance_test,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form without the output directory, hex
    /// encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&Self { out: None, ..self.clone() }).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_required() {
        let e = serde_json::from_str::<RunConfig>("{}").unwrap_err();
        assert!(e.to_string().contains("seed"));
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(c, RunConfig::with_seed(3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "sede": 2}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "metric": {"lr": 2}}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::with_seed(1);
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.propensity.percentile = 80.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn reseed_reaches_every_section() {
        let mut c = RunConfig::with_seed(9);
        c.reseed();
        assert_eq!((c.metric.seed, c.synth.seed, c.tabular.clinical.seed), (9, 9, 9));
        assert_eq!(c.pipeline().seed, 9);
    }
}

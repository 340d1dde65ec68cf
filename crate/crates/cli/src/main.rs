//! `cfair` command-line front end.
//!
//! Every subcommand reads one JSON config (`--config`), applies flag
//! overrides, and writes its artifacts under the output directory. Later
//! stages read the artifacts of earlier ones from the same directory.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cfair::{Error, ErrorKind};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "cfair", version, about = "Counterpart fairness audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, validate and preprocess the dataset.
    Ingest(Common),
    /// Fit the propensity model and write scores.
    Propensity(Common),
    /// Caliper, metric learning and greedy matching on saved scores.
    Match {
        #[command(flatten)]
        common: Common,
        /// Fixed caliper instead of the percentile rule.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Per-fold fairness report on saved pairs.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Score precomputed probabilities instead of training a model.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Synthetic before/after post-processing experiment.
    Synth(Common),
    /// Folded-normal moments and densities of the DP-gap estimator.
    Foldnorm(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long, overrides_with = "no_psd")]
    psd: bool,
    #[arg(long = "no-psd")]
    no_psd: bool,
    #[arg(long)]
    rematch_per_fold: bool,
}

impl Common {
    fn resolve(&self, needs_data: bool) -> Result<RunConfig, Error> {
        let mut cfg = match (&self.config, self.seed) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, _) if needs_data => return Err(Error::Config("--config is required".into())),
            (None, Some(seed)) => RunConfig::with_seed(seed),
            (None, None) => return Err(Error::Config("a seed is required (--seed or config)".into())),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(p) = self.percentile {
            cfg.propensity.percentile = p;
        }
        if self.psd {
            cfg.metric.psd_projection = true;
        }
        if self.no_psd {
            cfg.metric.psd_projection = false;
        }
        if self.rematch_per_fold {
            cfg.fairness.rematch_per_fold = true;
        }
        cfg.reseed();
        commands::resolve_columns(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    format: &'a str,
    kind: &'a str,
    exit_code: u8,
    message: String,
}

fn exit_code(kind: ErrorKind) -> (u8, &'static str) {
    match kind {
        ErrorKind::Config => (2, "config"),
        ErrorKind::Data => (3, "data"),
        ErrorKind::SystematicDifferences => (4, "systematic_differences"),
        ErrorKind::Numerical => (5, "numerical"),
    }
}

fn fail(e: &Error, out: Option<&Path>) -> ExitCode {
    let (code, kind) = exit_code(e.kind());
    let doc = ErrorDocument {
        format: "cfair-error/1",
        kind,
        exit_code: code,
        message: e.to_string(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("error document serializes");
    eprintln!("{text}");
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = std::fs::write(dir.join("error.json"), format!("{text}\n"));
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, needs_data) = match &cli.command {
        Command::Ingest(c) | Command::Propensity(c) => (c, true),
        Command::Match { common, .. } | Command::Audit { common, .. } => (common, true),
        Command::Synth(c) | Command::Foldnorm(c) => (c, false),
    };
    let cfg = match common.resolve(needs_data) {
        Ok(c) => c,
        Err(e) => return fail(&e, common.out.as_deref()),
    };
    let out = cfg.out_dir();
    let result = match &cli.command {
        Command::Ingest(_) => commands::ingest(&cfg, &out),
        Command::Propensity(_) => commands::propensity(&cfg, &out),
        Command::Match { delta, .. } => commands::matching(&cfg, &out, *delta),
        Command::Audit { predictions, .. } => commands::audit(&cfg, &out, predictions.as_deref()),
        Command::Synth(_) => commands::synth(&cfg, &out),
        Command::Foldnorm(_) => commands::foldnorm(&cfg, &out),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&out)),
    }
}

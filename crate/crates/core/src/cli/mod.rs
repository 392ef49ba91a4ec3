//! Command-line experiment driver.
//!
//! Every subcommand reads one resolved [`ExperimentConfig`]: defaults, then
//! the profile, then `--config FILE`, then flags and `--set KEY=VALUE`
//! overrides. Outputs land in `output_dir`; each command writes a
//! `<command>.json` report embedding the resolved config and a SHA-256 of its
//! inputs. Given the same inputs and seed, every output is byte-identical.

mod commands;
mod config;
mod dataset;

pub use commands::{
    cmd_classify, cmd_extract, cmd_perturb, cmd_retrieve, cmd_sweep, cmd_synth, ClassAuc,
    ClassifySummary, ExtractSummary, InputDigest, PerturbLevel, PerturbSummary, RetrieveSummary,
    SeriesPoint, SweepPoint, SynthSample, SCHEMA_VERSION,
};
pub use config::{
    ExperimentConfig, PerturbKind, PerturbScope, Profile, RetrievalSpace, ScheduleKind, Settings,
    DEFAULT_OUTPUT_DIR, DEFAULT_WINDOW, FEATURES_FILE,
};
pub use dataset::{
    column_name, parse_column_name, scan_dataset, Dataset, DatasetImage, FeatureTable,
};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "triprism",
    version,
    about = "Triangular prism fractal texture descriptors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split dataset images into windows and write the descriptor CSV.
    Extract(Options),
    /// Cross-validated KL + LDA accuracy for each retained component count.
    Classify(Options),
    /// Precision/recall curves and AUC with every sample as a query.
    Retrieve(Options),
    /// Accuracy obtained from each exponent on its own.
    Sweep(Options),
    /// Accuracy under Gaussian noise or rotation at several levels.
    Perturb(Options),
    /// Synthesize fBm surfaces and estimate their fractal dimension.
    Synth(Options),
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Parameter profile: brodatz or vistex.
    #[arg(long)]
    pub profile: Option<String>,
    /// Directory with one subdirectory of images per class.
    #[arg(long, value_name = "DIR")]
    pub dataset_root: Option<PathBuf>,
    /// Feature CSV (written by extract, read by the others).
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    #[arg(short, long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Window side in pixels.
    #[arg(long)]
    pub window: Option<usize>,
    /// Scale schedule: pow2 or linear.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Largest scale (cap for pow2, end for linear).
    #[arg(long)]
    pub eps_max: Option<usize>,
    /// Comma-separated exponents; overrides the profile.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_step: Option<f64>,
    /// Largest number of KL components (0 = all).
    #[arg(long)]
    pub kl_components: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// LDA ridge added to the pooled covariance diagonal.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fit the KL basis on all samples instead of per training fold.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paper_mode: Option<bool>,
    /// Retrieve on raw descriptors instead of KL projections.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub raw: Option<bool>,
    #[arg(long)]
    pub recall_points: Option<usize>,
    /// Comma-separated exponents for sweep.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_alphas: Option<String>,
    /// Perturbation kind: noise or rotation.
    #[arg(long)]
    pub perturbation: Option<String>,
    /// Comma-separated noise ratios or rotation angles in degrees.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Perturb each window or each whole image.
    #[arg(long)]
    pub perturb_scope: Option<String>,
    /// Comma-separated Hurst exponents for synth.
    #[arg(long)]
    pub hurst: Option<String>,
    #[arg(long)]
    pub fbm_size: Option<usize>,
    #[arg(long)]
    pub fbm_seeds: Option<usize>,
    /// Any setting as KEY=VALUE; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Options {
    fn flag_settings(&self) -> Result<Settings> {
        let mut s = Settings::new();
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    s.set(stringify!($field), v.to_string())?;
                })*
            };
        }
        put!(
            profile,
            schedule,
            eps_max,
            alphas,
            alpha_min,
            alpha_max,
            alpha_step,
            kl_components,
            folds,
            ridge,
            seed,
            paper_mode,
            recall_points,
            sweep_alphas,
            perturbation,
            levels,
            noise_sigma,
            perturb_scope,
            hurst,
            fbm_size,
            fbm_seeds,
            window
        );
        for (key, path) in [
            ("dataset_root", &self.dataset_root),
            ("features", &self.features),
            ("output_dir", &self.output_dir),
        ] {
            if let Some(p) = path {
                s.set(key, p.to_string_lossy())?;
            }
        }
        if let Some(raw) = self.raw {
            s.set("retrieval_space", if raw { "raw" } else { "kl" })?;
        }
        for pair in &self.overrides {
            s.set_pair(pair)?;
        }
        Ok(s)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::new(),
        };
        s.merge(&self.flag_settings()?);
        s.resolve()
    }
}

/// Runs one parsed command and returns a one-line summary.
pub fn execute(command: &Command) -> Result<String> {
    Ok(match command {
        Command::Extract(o) => {
            let s = cmd_extract(&o.resolve()?)?;
            format!(
                "wrote {} ({} samples, {} classes, {} descriptors)",
                s.features_file.display(),
                s.samples,
                s.classes,
                s.descriptors
            )
        }
        Command::Classify(o) => {
            let s = cmd_classify(&o.resolve()?)?;
            format!(
                "best accuracy {:.4} ± {:.4} (stderr) with {} components",
                s.best.accuracy, s.best.stderr, s.best.components
            )
        }
        Command::Retrieve(o) => {
            let s = cmd_retrieve(&o.resolve()?)?;
            format!("AUC {:.4} over {} queries", s.auc, s.samples)
        }
        Command::Sweep(o) => {
            let pts = cmd_sweep(&o.resolve()?)?;
            let best = pts
                .iter()
                .fold(None::<&SweepPoint>, |b, p| match b {
                    Some(q) if q.accuracy >= p.accuracy => Some(q),
                    _ => Some(p),
                })
                .expect("sweep yields at least one exponent");
            format!(
                "{} exponents swept, best alpha {} at accuracy {:.4}",
                pts.len(),
                best.alpha,
                best.accuracy
            )
        }
        Command::Perturb(o) => {
            let s = cmd_perturb(&o.resolve()?)?;
            let accs: Vec<String> = s
                .levels
                .iter()
                .map(|l| format!("{}: {:.4}", l.level, l.best.accuracy))
                .collect();
            format!("accuracy by level {}", accs.join(", "))
        }
        Command::Synth(o) => {
            let s = cmd_synth(&o.resolve()?)?;
            format!("wrote {} fBm surfaces", s.len())
        }
    })
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| crate::Error::Argument(e.to_string()))?;
    execute(&cli.command)
}

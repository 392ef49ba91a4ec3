//! Experiment configuration.
//!
//! Settings are flat `key = value` pairs. They come from built-in defaults,
//! then the selected profile, then an optional config file, then command-line
//! flags, each layer overriding the previous one. Keys match the long flag
//! names with `_` in place of `-`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::DEFAULT_NOISE_SIGMA;
use crate::prism::{ExponentRange, ScaleSchedule, DEFAULT_LINEAR_MAX_SCALE};
use crate::GrayImage;

pub const DEFAULT_WINDOW: usize = 128;
pub const DEFAULT_OUTPUT_DIR: &str = "triprism-out";
pub const FEATURES_FILE: &str = "features.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// α from 1.0 to 1.8.
    Brodatz,
    /// α from 0.4 to 1.2.
    Vistex,
}

impl Profile {
    fn alpha_bounds(self) -> (f64, f64) {
        match self {
            Profile::Brodatz => (1.0, 1.8),
            Profile::Vistex => (0.4, 1.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// ε = 2, 4, 8, … below the window side, optionally capped by `eps_max`.
    Pow2,
    /// ε = 2, 3, …, `eps_max`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalSpace {
    Kl,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    Noise,
    Rotation,
}

/// Whether perturbations hit each window or each whole image before
/// windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbScope {
    Window,
    Image,
}

/// Fully resolved settings. Every report embeds this verbatim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub dataset_root: Option<PathBuf>,
    /// Feature CSV written by `extract` and read by the other commands.
    pub features: PathBuf,
    pub output_dir: PathBuf,
    pub window: usize,
    pub schedule: ScheduleKind,
    pub eps_max: Option<usize>,
    pub alphas: Vec<f64>,
    /// Largest KL component count tried; 0 means every feature.
    pub kl_components: usize,
    pub folds: usize,
    pub ridge: Option<f64>,
    pub seed: u64,
    pub paper_mode: bool,
    pub retrieval_space: RetrievalSpace,
    pub recall_points: usize,
    pub sweep_alphas: Vec<f64>,
    pub perturbation: PerturbKind,
    pub levels: Vec<f64>,
    pub noise_sigma: f64,
    pub perturb_scope: PerturbScope,
    pub hurst: Vec<f64>,
    pub fbm_size: usize,
    pub fbm_seeds: usize,
}

const KEYS: &[&str] = &[
    "profile",
    "dataset_root",
    "features",
    "output_dir",
    "window",
    "schedule",
    "eps_max",
    "alphas",
    "alpha_min",
    "alpha_max",
    "alpha_step",
    "kl_components",
    "folds",
    "ridge",
    "seed",
    "paper_mode",
    "retrieval_space",
    "recall_points",
    "sweep_alphas",
    "sweep_min",
    "sweep_max",
    "sweep_step",
    "perturbation",
    "levels",
    "noise_sigma",
    "perturb_scope",
    "hurst",
    "fbm_size",
    "fbm_seeds",
];

/// Ordered `key → value` settings before type resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            out.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Argument(format!("unknown setting {key:?}")));
        }
        self.values.insert(key, value.into());
        Ok(())
    }

    /// Applies `KEY=VALUE`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("expected KEY=VALUE, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    /// `other` wins on shared keys.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Argument(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Argument(format!("{key} entry {s:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(Error::Argument(format!("{key} = {v:?} is not a boolean"))),
            })
            .transpose()
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)], default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => options
                .iter()
                .find(|(name, _)| name.eq_ignore_ascii_case(v))
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    Error::Argument(format!(
                        "{key} = {v:?}, expected one of {}",
                        names.join(", ")
                    ))
                }),
        }
    }

    /// Range from `<prefix>_min/_max/_step`, or `None` if none is set.
    fn stepped(&self, prefix: &str, default: (f64, f64, f64)) -> Result<Option<Vec<f64>>> {
        let min = self.parsed::<f64>(&format!("{prefix}_min"))?;
        let max = self.parsed::<f64>(&format!("{prefix}_max"))?;
        let step = self.parsed::<f64>(&format!("{prefix}_step"))?;
        if min.is_none() && max.is_none() && step.is_none() {
            return Ok(None);
        }
        let r = ExponentRange::stepped(
            min.unwrap_or(default.0),
            max.unwrap_or(default.1),
            step.unwrap_or(default.2),
        )?;
        Ok(Some(r.alphas().to_vec()))
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let profile = self.choice(
            "profile",
            &[("brodatz", Profile::Brodatz), ("vistex", Profile::Vistex)],
            Profile::Brodatz,
        )?;
        let (lo, hi) = profile.alpha_bounds();
        let alphas = match self.list("alphas")? {
            Some(list) => list,
            None => match self.stepped("alpha", (lo, hi, 0.1))? {
                Some(list) => list,
                None => ExponentRange::stepped(lo, hi, 0.1)?.alphas().to_vec(),
            },
        };
        ExponentRange::new(alphas.clone())?;

        let sweep_alphas = match self.list("sweep_alphas")? {
            Some(list) => list,
            None => match self.stepped("sweep", (-1.0, 2.0, 0.1))? {
                Some(list) => list,
                None => ExponentRange::stepped(-1.0, 2.0, 0.1)?.alphas().to_vec(),
            },
        };
        ExponentRange::new(sweep_alphas.clone())?;

        let perturbation = self.choice(
            "perturbation",
            &[
                ("noise", PerturbKind::Noise),
                ("rotation", PerturbKind::Rotation),
            ],
            PerturbKind::Noise,
        )?;
        let levels = match self.list("levels")? {
            Some(l) => l,
            None => match perturbation {
                PerturbKind::Noise => vec![0.01, 0.02, 0.03, 0.04, 0.05],
                PerturbKind::Rotation => vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0],
            },
        };

        let output_dir = self
            .get("output_dir")
            .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), PathBuf::from);
        let features = self
            .get("features")
            .map_or_else(|| output_dir.join(FEATURES_FILE), PathBuf::from);

        let cfg = ExperimentConfig {
            profile,
            dataset_root: self.get("dataset_root").map(PathBuf::from),
            features,
            output_dir,
            window: self.parsed("window")?.unwrap_or(DEFAULT_WINDOW),
            schedule: self.choice(
                "schedule",
                &[
                    ("pow2", ScheduleKind::Pow2),
                    ("linear", ScheduleKind::Linear),
                ],
                ScheduleKind::Pow2,
            )?,
            eps_max: self.parsed("eps_max")?,
            alphas,
            kl_components: self.parsed("kl_components")?.unwrap_or(0),
            folds: self.parsed("folds")?.unwrap_or(10),
            ridge: self.parsed("ridge")?,
            seed: self.parsed("seed")?.unwrap_or(0),
            paper_mode: self.flag("paper_mode")?.unwrap_or(false),
            retrieval_space: self.choice(
                "retrieval_space",
                &[("kl", RetrievalSpace::Kl), ("raw", RetrievalSpace::Raw)],
                RetrievalSpace::Kl,
            )?,
            recall_points: self.parsed("recall_points")?.unwrap_or(100),
            sweep_alphas,
            perturbation,
            levels,
            noise_sigma: self.parsed("noise_sigma")?.unwrap_or(DEFAULT_NOISE_SIGMA),
            perturb_scope: self.choice(
                "perturb_scope",
                &[
                    ("window", PerturbScope::Window),
                    ("image", PerturbScope::Image),
                ],
                PerturbScope::Window,
            )?,
            hurst: self.list("hurst")?.unwrap_or_else(|| vec![0.2, 0.5, 0.8]),
            fbm_size: self.parsed("fbm_size")?.unwrap_or(257),
            fbm_seeds: self.parsed("fbm_seeds")?.unwrap_or(5),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 3 {
            return Err(Error::Argument(format!(
                "window must be >= 3, got {}",
                self.window
            )));
        }
        if self.folds < 2 {
            return Err(Error::Argument(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        if self.recall_points == 0 {
            return Err(Error::Argument("recall_points must be positive".into()));
        }
        if self.schedule == ScheduleKind::Linear && self.eps_max.is_some_and(|e| e < 2) {
            return Err(Error::Argument("linear schedule needs eps_max >= 2".into()));
        }
        if self.fbm_seeds == 0 {
            return Err(Error::Argument("fbm_seeds must be positive".into()));
        }
        Ok(())
    }

    pub fn exponent_range(&self) -> Result<ExponentRange> {
        ExponentRange::new(self.alphas.clone())
    }

    /// Scale schedule for one window.
    pub fn schedule_for(&self, img: &GrayImage) -> Result<ScaleSchedule> {
        let s = match self.schedule {
            ScheduleKind::Pow2 => ScaleSchedule::powers_of_two(img.min_side(), self.eps_max)?,
            ScheduleKind::Linear => {
                ScaleSchedule::linear(self.eps_max.unwrap_or(DEFAULT_LINEAR_MAX_SCALE))?
            }
        };
        s.validate_for(img)?;
        Ok(s)
    }

    pub fn dataset_root(&self) -> Result<&Path> {
        self.dataset_root
            .as_deref()
            .ok_or_else(|| Error::Argument("dataset_root is not set".into()))
    }

    /// Component counts `1..=max` where `max` is `kl_components` capped at
    /// the feature count (0 selects every feature).
    pub fn component_counts(&self, features: usize) -> Vec<usize> {
        let max = match self.kl_components {
            0 => features,
            k => k.min(features),
        };
        (1..=max).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_brodatz_profile() {
        let cfg = Settings::new().resolve().unwrap();
        assert_eq!(cfg.window, 128);
        assert_eq!(cfg.folds, 10);
        assert_eq!(cfg.alphas.len(), 9);
        assert_eq!(cfg.alphas[0], 1.0);
        assert_eq!(cfg.alphas[8], 1.8);
        assert_eq!(cfg.sweep_alphas.len(), 31);
        assert_eq!(
            cfg.features,
            PathBuf::from(DEFAULT_OUTPUT_DIR).join(FEATURES_FILE)
        );
    }

    #[test]
    fn vistex_profile_and_overrides() {
        let mut s = Settings::parse("profile = vistex\n# comment\nfolds = 5 # trailing\n").unwrap();
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.alphas.first(), Some(&0.4));
        assert_eq!(cfg.alphas.last(), Some(&1.2));
        assert_eq!(cfg.folds, 5);

        let mut flags = Settings::new();
        flags.set("folds", "3").unwrap();
        flags.set("alpha-max", "0.6").unwrap();
        s.merge(&flags);
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.alphas, vec![0.4, 0.5, 0.6]);
    }

    #[test]
    fn explicit_alpha_list_wins() {
        let s = Settings::parse("alphas = 0.5, 2\nalpha_min = 1").unwrap();
        assert_eq!(s.resolve().unwrap().alphas, vec![0.5, 2.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Settings::parse("window = 64\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match Settings::parse("\n\nbogus_key = 1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let s = Settings::parse("window = big").unwrap();
        assert!(matches!(s.resolve(), Err(Error::Argument(_))));
    }

    #[test]
    fn perturbation_levels_default_by_kind() {
        let s = Settings::parse("perturbation = rotation").unwrap();
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.levels.len(), 7);
        assert_eq!(cfg.levels[1], 30.0);
    }

    #[test]
    fn component_counts_cap() {
        let mut cfg = Settings::new().resolve().unwrap();
        assert_eq!(cfg.component_counts(4), vec![1, 2, 3, 4]);
        cfg.kl_components = 2;
        assert_eq!(cfg.component_counts(4), vec![1, 2]);
        cfg.kl_components = 9;
        assert_eq!(cfg.component_counts(3), vec![1, 2, 3]);
    }
}

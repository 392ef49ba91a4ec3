use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, PerturbKind, PerturbScope, RetrievalSpace};
use super::dataset::{feature_table, scan_dataset, sha256_file, Dataset, FeatureTable};
use crate::error::{Error, Result};
use crate::eval::{
    confusion_csv, confusion_heatmap, confusion_matrix, evaluate_retrieval, pr_curves_csv,
    recall_grid, ConfusionMatrix,
};
use crate::image::{encode_pgm, save_pgm, split_windows, synth_fbm, FbmSpec, PerturbationSpec};
use crate::prism::{dimension_schedule, fractal_dimension};
use crate::seed::derive_seed;
use crate::stats::{cross_validate_series, kl_apply, kl_fit, CvConfig, CvReport, LabeledDataset};
use crate::GrayImage;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
    /// Image count for dataset directories.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub files: Option<usize>,
}

#[derive(Serialize)]
struct Report<'a, T> {
    schema_version: u32,
    command: &'static str,
    config: &'a ExperimentConfig,
    inputs: &'a [InputDigest],
    results: &'a T,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_report<T: Serialize>(
    cfg: &ExperimentConfig,
    command: &'static str,
    inputs: &[InputDigest],
    results: &T,
) -> Result<PathBuf> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command,
        config: cfg,
        inputs,
        results,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Format(format!("serializing {command} report: {e}")))?;
    json.push('\n');
    let path = cfg.output_dir.join(format!("{command}.json"));
    write_text(&path, &json)?;
    Ok(path)
}

fn dataset_input(cfg: &ExperimentConfig) -> Result<(Dataset, InputDigest)> {
    let ds = scan_dataset(cfg.dataset_root()?)?;
    let digest = InputDigest {
        path: ds.root.clone(),
        sha256: ds.content_hash()?,
        files: Some(ds.images.len()),
    };
    Ok((ds, digest))
}

fn features_input(cfg: &ExperimentConfig) -> Result<(FeatureTable, InputDigest)> {
    let table = FeatureTable::read_csv(&cfg.features)?;
    let digest = InputDigest {
        path: cfg.features.clone(),
        sha256: sha256_file(&cfg.features)?,
        files: None,
    };
    Ok((table, digest))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub features_file: PathBuf,
    pub samples: usize,
    pub classes: usize,
    pub descriptors: usize,
    pub columns: Vec<String>,
}

/// Writes the feature CSV for `dataset_root` to `features`.
pub fn cmd_extract(cfg: &ExperimentConfig) -> Result<ExtractSummary> {
    let (ds, digest) = dataset_input(cfg)?;
    let windows = ds.load_windows(cfg.window)?;
    let table = feature_table(cfg, &ds, &windows)?;
    table.write_csv(&cfg.features)?;
    let m = table.features();
    let summary = ExtractSummary {
        features_file: cfg.features.clone(),
        samples: m.rows(),
        classes: ds.classes.len(),
        descriptors: m.cols(),
        columns: m.columns().to_vec(),
    };
    write_report(cfg, "extract", &[digest], &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub components: usize,
    pub accuracy: f64,
    pub stderr: f64,
    pub pooled_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifySummary {
    pub samples: usize,
    pub descriptors: usize,
    /// Spread reported next to every accuracy.
    pub error_kind: &'static str,
    pub series: Vec<SeriesPoint>,
    pub best: SeriesPoint,
    pub fold_accuracies: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

const ERROR_KIND: &str = "standard error of the mean across folds";

fn cv_config(cfg: &ExperimentConfig) -> CvConfig {
    CvConfig {
        folds: cfg.folds,
        components: 1,
        ridge: cfg.ridge,
        seed: cfg.seed,
        paper_mode: cfg.paper_mode,
    }
}

fn point(r: &CvReport) -> SeriesPoint {
    SeriesPoint {
        components: r.components,
        accuracy: r.accuracy,
        stderr: r.stderr,
        pooled_accuracy: r.pooled_accuracy,
    }
}

/// Runs the component series and returns it with the index of the best
/// entry (highest accuracy, fewest components on ties).
fn classify_dataset(cfg: &ExperimentConfig, ds: &LabeledDataset) -> Result<(Vec<CvReport>, usize)> {
    let counts = cfg.component_counts(ds.features.cols());
    let reports = cross_validate_series(ds, &cv_config(cfg), &counts)?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.accuracy > reports[best].accuracy {
            best = i;
        }
    }
    Ok((reports, best))
}

/// Accuracy-vs-components series, best setting and its confusion matrix.
pub fn cmd_classify(cfg: &ExperimentConfig) -> Result<ClassifySummary> {
    let (table, digest) = features_input(cfg)?;
    let ds = &table.dataset;
    let (reports, best) = classify_dataset(cfg, ds)?;
    let confusion = confusion_matrix(&ds.labels, &reports[best].predictions, &ds.class_names)?;
    let summary = ClassifySummary {
        samples: ds.len(),
        descriptors: ds.features.cols(),
        error_kind: ERROR_KIND,
        series: reports.iter().map(point).collect(),
        best: point(&reports[best]),
        fold_accuracies: reports[best].fold_accuracies.clone(),
        confusion,
    };

    let mut series_csv = String::from("components,accuracy,stderr,pooled_accuracy\n");
    for p in &summary.series {
        series_csv.push_str(&format!(
            "{},{},{},{}\n",
            p.components, p.accuracy, p.stderr, p.pooled_accuracy
        ));
    }
    write_text(&cfg.output_dir.join("classify_series.csv"), &series_csv)?;
    write_text(
        &cfg.output_dir.join("confusion.csv"),
        &confusion_csv(&summary.confusion),
    )?;
    let cell = (512 / ds.class_count().max(1)).clamp(1, 32);
    let heat = confusion_heatmap(&summary.confusion, cell)?;
    save_pgm(&heat, cfg.output_dir.join("confusion.pgm"))?;
    write_report(cfg, "classify", &[digest], &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAuc {
    pub class: String,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrieveSummary {
    pub space: RetrievalSpace,
    pub dimensions: usize,
    pub samples: usize,
    pub recall_points: usize,
    pub auc: f64,
    pub class_auc: Vec<ClassAuc>,
}

/// Queries every sample against the rest; writes per-class and mean curves.
pub fn cmd_retrieve(cfg: &ExperimentConfig) -> Result<RetrieveSummary> {
    let (table, digest) = features_input(cfg)?;
    let ds = &table.dataset;
    let space = match cfg.retrieval_space {
        RetrievalSpace::Raw => ds.features.clone(),
        RetrievalSpace::Kl => {
            let k = *cfg
                .component_counts(ds.features.cols())
                .last()
                .ok_or_else(|| Error::Degenerate("no descriptor columns".into()))?;
            kl_apply(&kl_fit(&ds.features)?, &ds.features, k)?
        }
    };
    let grid = recall_grid(cfg.recall_points);
    let s = evaluate_retrieval(&space, &ds.labels, &ds.class_names, &grid)?;

    let mut curves = vec![s.mean_curve.clone().with_class("mean")];
    curves.extend(s.class_curves.iter().cloned());
    write_text(
        &cfg.output_dir.join("pr_curves.csv"),
        &pr_curves_csv(&curves),
    )?;

    let summary = RetrieveSummary {
        space: cfg.retrieval_space,
        dimensions: space.cols(),
        samples: ds.len(),
        recall_points: cfg.recall_points,
        auc: s.auc,
        class_auc: s
            .class_curves
            .iter()
            .zip(&s.class_auc)
            .map(|(c, &auc)| ClassAuc {
                class: c.class_id.clone().unwrap_or_default(),
                auc,
            })
            .collect(),
    };
    write_report(cfg, "retrieve", &[digest], &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub components: usize,
    pub accuracy: f64,
    pub stderr: f64,
}

/// Classification accuracy per single exponent.
///
/// With `dataset_root` set, features are extracted for `sweep_alphas`;
/// otherwise every exponent present in the feature CSV is swept.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let (table, digest) = if cfg.dataset_root.is_some() {
        let (ds, digest) = dataset_input(cfg)?;
        let mut sweep_cfg = cfg.clone();
        sweep_cfg.alphas = cfg.sweep_alphas.clone();
        let windows = ds.load_windows(cfg.window)?;
        (feature_table(&sweep_cfg, &ds, &windows)?, digest)
    } else {
        features_input(cfg)?
    };

    let mut points = Vec::new();
    let mut csv = String::from("alpha,components,accuracy,stderr\n");
    for alpha in table.alphas()? {
        let ds = table.for_alpha(alpha)?;
        let k = *cfg
            .component_counts(ds.features.cols())
            .last()
            .expect("at least one column");
        let mut cv = cv_config(cfg);
        cv.components = k;
        let r = &cross_validate_series(&ds, &cv, &[k])?[0];
        csv.push_str(&format!("{alpha},{k},{},{}\n", r.accuracy, r.stderr));
        points.push(SweepPoint {
            alpha,
            components: k,
            accuracy: r.accuracy,
            stderr: r.stderr,
        });
    }
    write_text(&cfg.output_dir.join("sweep.csv"), &csv)?;
    write_report(cfg, "sweep", &[digest], &points)?;
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbLevel {
    pub level: f64,
    pub directory: PathBuf,
    pub best: SeriesPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbSummary {
    pub kind: PerturbKind,
    pub scope: PerturbScope,
    pub error_kind: &'static str,
    pub levels: Vec<PerturbLevel>,
}

fn level_spec(cfg: &ExperimentConfig, level: f64, seed: u64) -> Result<Option<PerturbationSpec>> {
    if level == 0.0 {
        // identity: neither noise nor the rotation crop
        return Ok(None);
    }
    match cfg.perturbation {
        PerturbKind::Noise => PerturbationSpec::noise(level, cfg.noise_sigma, seed).map(Some),
        PerturbKind::Rotation => PerturbationSpec::rotation(level).map(Some),
    }
}

fn perturb_tiles(
    cfg: &ExperimentConfig,
    originals: &[GrayImage],
    windows: &[Vec<GrayImage>],
    level: f64,
) -> Result<Vec<Vec<GrayImage>>> {
    match cfg.perturb_scope {
        PerturbScope::Window => {
            let mut offset = 0u64;
            let jobs: Vec<(u64, &Vec<GrayImage>)> = windows
                .iter()
                .map(|tiles| {
                    let start = offset;
                    offset += tiles.len() as u64;
                    (start, tiles)
                })
                .collect();
            jobs.par_iter()
                .map(|(start, tiles)| {
                    tiles
                        .iter()
                        .enumerate()
                        .map(|(k, tile)| {
                            let seed = derive_seed(cfg.seed, "noise", start + k as u64);
                            match level_spec(cfg, level, seed)? {
                                Some(spec) => spec.apply(tile),
                                None => Ok(tile.clone()),
                            }
                        })
                        .collect()
                })
                .collect()
        }
        PerturbScope::Image => originals
            .par_iter()
            .enumerate()
            .map(|(i, img)| {
                let seed = derive_seed(cfg.seed, "noise", i as u64);
                let changed = match level_spec(cfg, level, seed)? {
                    Some(spec) => spec.apply(img)?,
                    None => img.clone(),
                };
                split_windows(&changed, cfg.window)
            })
            .collect(),
    }
}

fn level_dir_name(kind: PerturbKind, level: f64) -> String {
    match kind {
        PerturbKind::Noise => format!("noise_{level}"),
        PerturbKind::Rotation => format!("rotation_{level}"),
    }
}

/// Perturbs the dataset at each level, writes the perturbed windows as PGMs,
/// re-extracts features and classifies.
pub fn cmd_perturb(cfg: &ExperimentConfig) -> Result<PerturbSummary> {
    let (ds, digest) = dataset_input(cfg)?;
    let originals = ds.load_images()?;
    let windows = ds.split_all(&originals, cfg.window)?;

    let mut levels = Vec::new();
    let mut header = String::from("method");
    let mut acc_row = String::from("proposed");
    let mut err_row = String::from("stderr");
    for &level in &cfg.levels {
        let tiles = perturb_tiles(cfg, &originals, &windows, level)?;
        let dir = cfg
            .output_dir
            .join("perturbed")
            .join(level_dir_name(cfg.perturbation, level));
        for (i, group) in tiles.iter().enumerate() {
            let entry = &ds.images[i];
            let stem = Path::new(&entry.file_name).file_stem().map_or_else(
                || entry.file_name.clone(),
                |s| s.to_string_lossy().into_owned(),
            );
            for (k, tile) in group.iter().enumerate() {
                let path = dir
                    .join(&ds.classes[entry.class])
                    .join(format!("{stem}_w{k}.pgm"));
                write_bytes(&path, &encode_pgm(tile))?;
            }
        }
        let table = feature_table(cfg, &ds, &tiles)?;
        let (reports, best) = classify_dataset(cfg, &table.dataset)?;
        let best = point(&reports[best]);
        header.push_str(&format!(",{level}"));
        acc_row.push_str(&format!(",{}", best.accuracy));
        err_row.push_str(&format!(",{}", best.stderr));
        levels.push(PerturbLevel {
            level,
            directory: dir,
            best,
        });
    }
    write_text(
        &cfg.output_dir.join("perturb.csv"),
        &format!("{header}\n{acc_row}\n{err_row}\n"),
    )?;
    let summary = PerturbSummary {
        kind: cfg.perturbation,
        scope: cfg.perturb_scope,
        error_kind: ERROR_KIND,
        levels,
    };
    write_report(cfg, "perturb", &[digest], &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSample {
    pub hurst: f64,
    pub seed: u64,
    pub file: PathBuf,
    pub theoretical: f64,
    pub estimated: f64,
    pub scales: Vec<usize>,
}

/// fBm surfaces for every `(hurst, seed index)` and their estimated dimension.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<Vec<SynthSample>> {
    let mut jobs = Vec::new();
    for (hi, &h) in cfg.hurst.iter().enumerate() {
        for s in 0..cfg.fbm_seeds {
            let seed = derive_seed(cfg.seed, "fbm", (hi * cfg.fbm_seeds + s) as u64);
            jobs.push(FbmSpec::new(h, cfg.fbm_size, seed)?);
        }
    }
    let dir = cfg.output_dir.join("fbm");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let samples: Vec<SynthSample> = jobs
        .par_iter()
        .enumerate()
        .map(|(n, spec)| {
            let img = synth_fbm(spec)?;
            let schedule = dimension_schedule(&img)?;
            let estimated = fractal_dimension(&img, &schedule)?;
            let file = dir.join(format!("fbm_h{}_{}.pgm", spec.hurst, n % cfg.fbm_seeds));
            save_pgm(&img, &file)?;
            Ok(SynthSample {
                hurst: spec.hurst,
                seed: spec.seed,
                file,
                theoretical: spec.theoretical_dimension(),
                estimated,
                scales: schedule.scales().to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("hurst,seed,theoretical,estimated\n");
    for s in &samples {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            s.hurst, s.seed, s.theoretical, s.estimated
        ));
    }
    write_text(&cfg.output_dir.join("dimensions.csv"), &csv)?;
    write_report(cfg, "synth", &[], &samples)?;
    Ok(samples)
}

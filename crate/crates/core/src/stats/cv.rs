//! Stratified k-fold cross-validation of the KL + LDA pipeline.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kl_apply, kl_fit, lda_fit, lda_predict, KlModel, LabeledDataset, LdaModel};
use crate::error::{Error, Result};
use crate::seed::stage_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Assigns samples to `k` folds: each class is shuffled with its own seeded
/// stream, then all classes are dealt round-robin in ascending label order
/// with one running counter. Fold sizes differ by at most one and every class
/// is spread over the folds within one sample of its share. Classes smaller
/// than `k` simply miss some folds.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Split(format!("need at least 2 folds, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Split(format!(
            "{k} folds requested for {} samples",
            labels.len()
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut assignment = vec![0usize; labels.len()];
    let mut counter = 0usize;
    for (class, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut stage_rng(seed, "kfold", class as u64));
        for &i in members.iter() {
            assignment[i] = counter % k;
            counter += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}

pub fn stratified_kfold(ds: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    stratified_folds(&ds.labels, k, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    /// Retained KL components.
    pub components: usize,
    /// `None` selects the LDA default ridge.
    pub ridge: Option<f64>,
    pub seed: u64,
    /// Fit the KL basis once on every sample instead of per training fold.
    pub paper_mode: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            components: 1,
            ridge: None,
            seed: 0,
            paper_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub components: usize,
    /// Mean of the per-fold accuracies.
    pub accuracy: f64,
    /// Standard error of the mean across folds (sample std / √k).
    pub stderr: f64,
    pub fold_accuracies: Vec<f64>,
    /// Correct predictions over all samples.
    pub pooled_accuracy: f64,
    /// Out-of-fold prediction for every sample.
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldModel {
    pub kl: KlModel,
    pub lda: LdaModel,
}

/// Fits KL on `train` rows only and LDA on their first `components`
/// projected coordinates.
pub fn fit_fold(
    ds: &LabeledDataset,
    train: &[usize],
    components: usize,
    ridge: Option<f64>,
) -> Result<FoldModel> {
    let train_ds = ds.subset(train);
    let kl = kl_fit(&train_ds.features)?;
    let projected = kl_apply(&kl, &train_ds.features, components)?;
    let lda = lda_fit(&train_ds.with_features(projected)?, ridge)?;
    Ok(FoldModel { kl, lda })
}

fn check_components(ds: &LabeledDataset, counts: &[usize]) -> Result<usize> {
    let max = *counts
        .iter()
        .max()
        .ok_or_else(|| Error::Argument("no component counts given".into()))?;
    if counts.contains(&0) || max > ds.features.cols() {
        return Err(Error::Argument(format!(
            "component counts must lie in 1..={}",
            ds.features.cols()
        )));
    }
    Ok(max)
}

/// Cross-validates once per entry of `component_counts`, sharing the fold
/// split and the per-fold KL fits.
pub fn cross_validate_series(
    ds: &LabeledDataset,
    config: &CvConfig,
    component_counts: &[usize],
) -> Result<Vec<CvReport>> {
    let max = check_components(ds, component_counts)?;
    let folds = stratified_kfold(ds, config.folds, config.seed)?;
    let shared_kl = if config.paper_mode {
        Some(kl_fit(&ds.features)?)
    } else {
        None
    };

    // per fold: predictions for each component count
    let per_fold: Vec<Vec<Vec<usize>>> = folds
        .par_iter()
        .map(|fold| -> Result<Vec<Vec<usize>>> {
            let train_ds = ds.subset(&fold.train);
            let kl = match &shared_kl {
                Some(kl) => kl.clone(),
                None => kl_fit(&train_ds.features)?,
            };
            let train_z = kl_apply(&kl, &train_ds.features, max)?;
            let test_z = kl_apply(&kl, &ds.features.select_rows(&fold.test), max)?;
            component_counts
                .iter()
                .map(|&k| {
                    let lda = lda_fit(
                        &train_ds.with_features(train_z.leading_columns(k)?)?,
                        config.ridge,
                    )?;
                    (0..test_z.rows())
                        .map(|i| lda_predict(&lda, &test_z.row(i)[..k]))
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(component_counts
        .iter()
        .enumerate()
        .map(|(slot, &k)| {
            let mut predictions = vec![0usize; ds.len()];
            let mut fold_accuracies = Vec::with_capacity(folds.len());
            for (fold, preds) in folds.iter().zip(&per_fold) {
                let mut correct = 0usize;
                for (&i, &p) in fold.test.iter().zip(&preds[slot]) {
                    predictions[i] = p;
                    correct += usize::from(p == ds.labels[i]);
                }
                fold_accuracies.push(correct as f64 / fold.test.len() as f64);
            }
            let pooled = predictions
                .iter()
                .zip(&ds.labels)
                .filter(|(p, l)| p == l)
                .count() as f64
                / ds.len() as f64;
            let (accuracy, stderr) = mean_and_stderr(&fold_accuracies);
            CvReport {
                components: k,
                accuracy,
                stderr,
                fold_accuracies,
                pooled_accuracy: pooled,
                predictions,
            }
        })
        .collect())
}

pub fn cross_validate(ds: &LabeledDataset, config: &CvConfig) -> Result<CvReport> {
    let mut reports = cross_validate_series(ds, config, &[config.components])?;
    Ok(reports.remove(0))
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::FeatureMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(classes: usize, per_class: usize, spread: f64, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for _ in 0..per_class {
                rows.push(
                    (0..4)
                        .map(|j| if j == c % 4 { 20.0 * (1 + c / 4) as f64 } else { 0.0 } + noise.sample(&mut rng))
                        .collect(),
                );
                labels.push(c);
            }
        }
        LabeledDataset::with_numeric_labels(FeatureMatrix::from_rows(&rows).unwrap(), labels)
            .unwrap()
    }

    #[test]
    fn brodatz_sized_folds() {
        let labels: Vec<usize> = (0..111)
            .flat_map(|c| std::iter::repeat(c).take(16))
            .collect();
        let folds = stratified_folds(&labels, 10, 3).unwrap();
        let mut seen = vec![0usize; labels.len()];
        for f in &folds {
            assert!(
                f.test.len() == 177 || f.test.len() == 178,
                "{}",
                f.test.len()
            );
            assert_eq!(f.train.len() + f.test.len(), labels.len());
            for &i in &f.test {
                seen[i] += 1;
            }
            for c in 0..111 {
                let in_fold = f.test.iter().filter(|&&i| labels[i] == c).count();
                // 16 / 10 = 1.6 expected per fold
                assert!((1..=2).contains(&in_fold));
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn leave_one_out_limit() {
        let labels = vec![0, 0, 1, 1, 2, 2, 2];
        let folds = stratified_folds(&labels, labels.len(), 1).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 1));
    }

    #[test]
    fn split_is_seeded() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        assert_eq!(
            stratified_folds(&labels, 5, 8).unwrap(),
            stratified_folds(&labels, 5, 8).unwrap()
        );
        assert_ne!(
            stratified_folds(&labels, 5, 8).unwrap(),
            stratified_folds(&labels, 5, 9).unwrap()
        );
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            stratified_folds(&[0, 1], 3, 0),
            Err(Error::Split(_))
        ));
        assert!(matches!(
            stratified_folds(&[0, 1, 1], 1, 0),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn separable_classes_score_perfectly() {
        let ds = blobs(3, 20, 0.5, 1);
        let report = cross_validate(
            &ds,
            &CvConfig {
                folds: 5,
                components: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.stderr, 0.0);
        assert_eq!(report.pooled_accuracy, 1.0);
    }

    #[test]
    fn series_matches_single_runs() {
        let ds = blobs(4, 12, 4.0, 2);
        let cfg = CvConfig {
            folds: 4,
            components: 2,
            seed: 5,
            ..Default::default()
        };
        let series = cross_validate_series(&ds, &cfg, &[1, 2, 3]).unwrap();
        let single = cross_validate(&ds, &cfg).unwrap();
        assert_eq!(series[1], single);
        assert_eq!(series[0].components, 1);
    }

    #[test]
    fn test_rows_never_reach_the_fit() {
        let ds = blobs(3, 10, 2.0, 3);
        let folds = stratified_kfold(&ds, 5, 4).unwrap();
        let fold = &folds[2];
        let before = fit_fold(&ds, &fold.train, 2, None).unwrap();
        let mut mutated_rows: Vec<Vec<f64>> =
            (0..ds.len()).map(|i| ds.features.row(i).to_vec()).collect();
        for &i in &fold.test {
            mutated_rows[i]
                .iter_mut()
                .for_each(|v| *v = *v * -7.0 + 1e3);
        }
        let mutated = ds
            .with_features(FeatureMatrix::from_rows(&mutated_rows).unwrap())
            .unwrap();
        let after = fit_fold(&mutated, &fold.train, 2, None).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn component_bounds() {
        let ds = blobs(3, 10, 1.0, 4);
        let cfg = CvConfig {
            folds: 5,
            components: 5,
            ..Default::default()
        };
        assert!(cross_validate(&ds, &cfg).is_err());
        let cfg = CvConfig {
            components: 0,
            ..cfg
        };
        assert!(cross_validate(&ds, &cfg).is_err());
    }

    #[test]
    fn paper_mode_runs_and_is_deterministic() {
        let ds = blobs(3, 10, 3.0, 6);
        let cfg = CvConfig {
            folds: 5,
            components: 2,
            paper_mode: true,
            ..Default::default()
        };
        assert_eq!(
            cross_validate(&ds, &cfg).unwrap(),
            cross_validate(&ds, &cfg).unwrap()
        );
    }

    #[test]
    fn stderr_of_known_values() {
        let (m, se) = mean_and_stderr(&[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m, 0.5);
        // sample std = sqrt(1/3), / sqrt(4)
        assert!((se - (1.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }
}

//! Gaussian linear discriminant analysis with a shared, ridge-regularized
//! covariance.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Default ridge as a fraction of the mean pooled variance.
pub const DEFAULT_RIDGE_FRACTION: f64 = 1e-6;

/// Discriminant scores closer than this (relative) count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    /// Class labels present in training, ascending.
    pub classes: Vec<usize>,
    pub class_means: Vec<Vec<f64>>,
    pub class_priors: Vec<f64>,
    /// Pooled within-class covariance plus `ridge · I`, row-major.
    pub pooled_covariance: Vec<Vec<f64>>,
    pub ridge: f64,
    /// `Σ⁻¹ μ_c` per class.
    pub weights: Vec<Vec<f64>>,
    /// `−½ μ_cᵀ Σ⁻¹ μ_c + ln π_c` per class.
    pub biases: Vec<f64>,
}

impl LdaModel {
    pub fn dim(&self) -> usize {
        self.class_means.first().map_or(0, Vec::len)
    }

    /// Linear discriminant score of `x` for each class, in `classes` order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "model has {} features, input has {}",
                self.dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect())
    }
}

/// Fits class means, empirical priors and the pooled covariance.
///
/// `ridge = None` uses `1e-6 · trace(Σ) / n`; when every feature is constant
/// the trace is zero and a unit ridge keeps the system solvable.
pub fn lda_fit(ds: &LabeledDataset, ridge: Option<f64>) -> Result<LdaModel> {
    let p = ds.features.cols();
    if p == 0 {
        return Err(Error::Degenerate("no features".into()));
    }
    if let Some(r) = ridge {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Argument(format!(
                "ridge must be non-negative, got {r}"
            )));
        }
    }

    let mut counts = vec![0usize; ds.class_count()];
    for &l in &ds.labels {
        counts[l] += 1;
    }
    let classes: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if classes.len() < 2 {
        return Err(Error::Degenerate(format!(
            "LDA needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    if let Some(&c) = classes.iter().find(|&&c| counts[c] < 2) {
        return Err(Error::Degenerate(format!(
            "class {:?} has {} sample(s), LDA needs at least 2",
            ds.class_names[c], counts[c]
        )));
    }

    let mut slot = vec![usize::MAX; counts.len()];
    for (k, &c) in classes.iter().enumerate() {
        slot[c] = k;
    }
    let mut means = vec![vec![0.0; p]; classes.len()];
    for (i, &l) in ds.labels.iter().enumerate() {
        for (m, v) in means[slot[l]].iter_mut().zip(ds.features.row(i)) {
            *m += v;
        }
    }
    for (k, &c) in classes.iter().enumerate() {
        means[k].iter_mut().for_each(|m| *m /= counts[c] as f64);
    }

    let mut scatter = DMatrix::<f64>::zeros(p, p);
    let mut diff = DVector::<f64>::zeros(p);
    for (i, &l) in ds.labels.iter().enumerate() {
        let mu = &means[slot[l]];
        for (j, v) in ds.features.row(i).iter().enumerate() {
            diff[j] = v - mu[j];
        }
        scatter.ger(1.0, &diff, &diff, 1.0);
    }
    let dof = (ds.len() - classes.len()) as f64;
    let mut sigma = scatter / dof;
    for i in 0..p {
        for j in 0..i {
            let v = sigma[(i, j)];
            sigma[(j, i)] = v;
        }
    }

    let ridge = ridge.unwrap_or_else(|| {
        let trace = sigma.trace();
        if trace > 0.0 {
            DEFAULT_RIDGE_FRACTION * trace / p as f64
        } else {
            1.0
        }
    });
    for i in 0..p {
        sigma[(i, i)] += ridge;
    }

    let chol = Cholesky::new(sigma.clone()).ok_or_else(|| {
        Error::Numeric("pooled covariance is not positive definite; raise the ridge".into())
    })?;
    let total = ds.len() as f64;
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut priors = Vec::with_capacity(classes.len());
    for (k, &c) in classes.iter().enumerate() {
        let mu = DVector::from_column_slice(&means[k]);
        let w = chol.solve(&mu);
        let prior = counts[c] as f64 / total;
        biases.push(-0.5 * mu.dot(&w) + prior.ln());
        weights.push(w.iter().copied().collect());
        priors.push(prior);
    }

    Ok(LdaModel {
        classes,
        class_means: means,
        class_priors: priors,
        pooled_covariance: (0..p)
            .map(|i| sigma.row(i).iter().copied().collect())
            .collect(),
        ridge,
        weights,
        biases,
    })
}

/// Class with the largest discriminant; near-ties go to the earlier class.
pub fn lda_predict(model: &LdaModel, x: &[f64]) -> Result<usize> {
    let scores = model.scores(x)?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        let incumbent = scores[best];
        let margin = TIE_TOLERANCE * incumbent.abs().max(s.abs()).max(1.0);
        if s > incumbent + margin {
            best = k;
        }
    }
    Ok(model.classes[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::FeatureMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn dataset(rows: &[Vec<f64>], labels: &[usize]) -> LabeledDataset {
        LabeledDataset::with_numeric_labels(
            FeatureMatrix::from_rows(rows).unwrap(),
            labels.to_vec(),
        )
        .unwrap()
    }

    fn one_d() -> LdaModel {
        let ds = dataset(
            &[vec![0.0], vec![0.1], vec![10.0], vec![10.1]],
            &[0, 0, 1, 1],
        );
        lda_fit(&ds, None).unwrap()
    }

    #[test]
    fn means_and_priors() {
        let m = one_d();
        assert!((m.class_means[0][0] - 0.05).abs() < 1e-12);
        assert!((m.class_means[1][0] - 10.05).abs() < 1e-12);
        assert_eq!(m.class_priors, vec![0.5, 0.5]);
        assert_eq!(lda_predict(&m, &[0.05]).unwrap(), 0);
        assert_eq!(lda_predict(&m, &[10.05]).unwrap(), 1);
    }

    #[test]
    fn unequal_priors_sum_to_one() {
        let ds = dataset(
            &[vec![0.0], vec![1.0], vec![2.0], vec![5.0], vec![6.0]],
            &[0, 0, 0, 1, 1],
        );
        let m = lda_fit(&ds, None).unwrap();
        assert!((m.class_priors.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((m.class_priors[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn midpoint_tie_goes_to_first_class() {
        let ds = dataset(
            &[vec![-1.0], vec![1.0], vec![3.0], vec![5.0]],
            &[0, 0, 1, 1],
        );
        let m = lda_fit(&ds, Some(0.0)).unwrap();
        assert_eq!(lda_predict(&m, &[2.0]).unwrap(), 0);
        assert_eq!(lda_predict(&m, &[2.01]).unwrap(), 1);
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [[0.0, 0.0], [10.0, 10.0]].iter().enumerate() {
            for _ in 0..30 {
                rows.push(vec![
                    center[0] + noise.sample(&mut rng),
                    center[1] + noise.sample(&mut rng),
                ]);
                labels.push(c);
            }
        }
        let ds = dataset(&rows, &labels);
        let m = lda_fit(&ds, None).unwrap();
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(lda_predict(&m, r).unwrap(), l);
        }
    }

    #[test]
    fn translation_covariance() {
        let ds = dataset(
            &[
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![4.0, 4.0],
                vec![5.0, 3.5],
                vec![0.0, 6.0],
                vec![1.0, 7.0],
            ],
            &[0, 0, 1, 1, 2, 2],
        );
        let shift = [100.0, -40.0];
        let shifted_rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                ds.features
                    .row(i)
                    .iter()
                    .zip(shift)
                    .map(|(v, s)| v + s)
                    .collect()
            })
            .collect();
        let shifted = dataset(&shifted_rows, &ds.labels);
        let a = lda_fit(&ds, None).unwrap();
        let b = lda_fit(&shifted, None).unwrap();
        for q in [[0.5, 0.5], [2.5, 2.5], [3.0, 5.0], [0.7, 4.0]] {
            let qs = [q[0] + shift[0], q[1] + shift[1]];
            assert_eq!(lda_predict(&a, &q).unwrap(), lda_predict(&b, &qs).unwrap());
        }
    }

    #[test]
    fn degenerate_classes_rejected() {
        let ds = dataset(&[vec![0.0], vec![0.1], vec![5.0]], &[0, 0, 1]);
        assert!(matches!(lda_fit(&ds, None), Err(Error::Degenerate(_))));
        let ds = dataset(&[vec![0.0], vec![0.1]], &[0, 0]);
        assert!(lda_fit(&ds, None).is_err());
    }

    #[test]
    fn constant_features_predict_first_class() {
        let ds = dataset(&[vec![3.0], vec![3.0], vec![3.0], vec![3.0]], &[0, 0, 1, 1]);
        let m = lda_fit(&ds, None).unwrap();
        assert_eq!(m.ridge, 1.0);
        assert_eq!(lda_predict(&m, &[3.0]).unwrap(), 0);
    }

    #[test]
    fn bad_queries() {
        let m = one_d();
        assert!(matches!(
            lda_predict(&m, &[f64::NAN]),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            lda_predict(&m, &[1.0, 2.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn pooled_covariance_is_symmetric() {
        let ds = dataset(
            &[
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.5, 2.0],
                vec![4.0, 4.0, 1.0],
                vec![5.0, 3.5, 0.0],
            ],
            &[0, 0, 1, 1],
        );
        let m = lda_fit(&ds, Some(1e-3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.pooled_covariance[i][j], m.pooled_covariance[j][i]);
            }
        }
    }
}

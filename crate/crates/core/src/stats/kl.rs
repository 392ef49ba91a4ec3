//! Karhunen-Loève transform.
//!
//! The basis holds the eigenvectors of the feature covariance sorted by
//! decreasing eigenvalue. Rows are centered by the training mean before
//! projection, so the leading components carry the most variance.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{covariance_matrix, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlModel {
    pub mean: Vec<f64>,
    /// `basis[k]` is the k-th eigenvector.
    pub basis: Vec<Vec<f64>>,
    /// Descending, non-negative.
    pub eigenvalues: Vec<f64>,
    /// Column names of the fitted layout.
    pub columns: Vec<String>,
}

impl KlModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn basis_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), k, |i, c| self.basis[c][i])
    }

    fn check_layout(&self, m: &FeatureMatrix) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "model fitted on {} features, matrix has {}",
                self.dim(),
                m.cols()
            )));
        }
        Ok(())
    }
}

const MAX_SWEEPS: usize = 10_000;

pub fn kl_fit(m: &FeatureMatrix) -> Result<KlModel> {
    let cov = covariance_matrix(m)?;
    let n = cov.nrows();
    let eig = SymmetricEigen::try_new(cov, f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut basis = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    for &k in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // sign convention: the largest-magnitude entry (first on ties) is positive
        let pivot = v.iter().enumerate().fold(
            0,
            |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
        );
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        basis.push(v);
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }

    Ok(KlModel {
        mean: m.column_means(),
        basis,
        eigenvalues,
        columns: m.columns().to_vec(),
    })
}

/// Centers rows by the model mean and projects onto the first `k` components.
pub fn kl_apply(model: &KlModel, m: &FeatureMatrix, k: usize) -> Result<FeatureMatrix> {
    model.check_layout(m)?;
    if k == 0 || k > model.dim() {
        return Err(Error::Argument(format!(
            "retained components {k} outside 1..={}",
            model.dim()
        )));
    }
    let mut centered = m.to_dmatrix();
    for (j, mean) in model.mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let projected = centered * model.basis_matrix(k);
    let mut data = Vec::with_capacity(m.rows() * k);
    for i in 0..m.rows() {
        data.extend(projected.row(i).iter());
    }
    FeatureMatrix::new(
        m.rows(),
        k,
        data,
        m.row_ids().to_vec(),
        (1..=k).map(|c| format!("kl{c}")).collect(),
    )
}

/// Maps projected rows back to feature space, adding the mean.
pub fn kl_inverse(model: &KlModel, projected: &FeatureMatrix) -> Result<FeatureMatrix> {
    let k = projected.cols();
    if k == 0 || k > model.dim() {
        return Err(Error::Dimension(format!(
            "projection has {k} components, model has {}",
            model.dim()
        )));
    }
    let back = projected.to_dmatrix() * model.basis_matrix(k).transpose();
    let mut data = Vec::with_capacity(projected.rows() * model.dim());
    for i in 0..projected.rows() {
        data.extend(back.row(i).iter().zip(&model.mean).map(|(v, m)| v + m));
    }
    FeatureMatrix::new(
        projected.rows(),
        model.dim(),
        data,
        projected.row_ids().to_vec(),
        model.columns.clone(),
    )
}

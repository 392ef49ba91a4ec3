//! Feature matrices, the Karhunen-Loève transform, LDA and cross-validation.

mod cv;
mod kl;
mod lda;

pub use cv::{
    cross_validate, cross_validate_series, fit_fold, stratified_folds, stratified_kfold, CvConfig,
    CvReport, Fold, FoldModel,
};
pub use kl::{kl_apply, kl_fit, kl_inverse, KlModel};
pub use lda::{lda_fit, lda_predict, LdaModel};

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples as rows, features as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
    row_ids: Vec<String>,
    columns: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        row_ids: Vec<String>,
        columns: Vec<String>,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if row_ids.len() != rows {
            return Err(Error::Dimension(format!(
                "{} row ids for {rows} rows",
                row_ids.len()
            )));
        }
        if columns.len() != cols {
            return Err(Error::Dimension(format!(
                "{} column names for {cols} columns",
                columns.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite entry at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        let mut seen = HashSet::with_capacity(rows);
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Argument(format!("duplicate row id {id:?}")));
            }
        }
        Ok(Self {
            rows,
            cols,
            data,
            row_ids,
            columns,
        })
    }

    /// Builds a matrix from row vectors with generated ids `0, 1, …` and
    /// column names `f0, f1, …`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(
            rows.len(),
            cols,
            data,
            (0..rows.len()).map(|i| i.to_string()).collect(),
            (0..cols).map(|j| format!("f{j}")).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            columns: self.columns.clone(),
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.cols) {
            return Err(Error::Index(format!("column {bad} of {}", self.cols)));
        }
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(indices.iter().map(|&j| row[j]));
        }
        Ok(Self {
            rows: self.rows,
            cols: indices.len(),
            data,
            row_ids: self.row_ids.clone(),
            columns: indices.iter().map(|&j| self.columns[j].clone()).collect(),
        })
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        self.select_columns(&(0..k).collect::<Vec<_>>())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Sample covariance of the columns, denominator `n − 1`.
pub fn covariance_matrix(m: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if m.rows() < 2 {
        return Err(Error::Degenerate(format!(
            "covariance needs at least 2 samples, got {}",
            m.rows()
        )));
    }
    let means = m.column_means();
    let mut centered = m.to_dmatrix();
    for (j, mean) in means.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let mut cov = centered.tr_mul(&centered) / (m.rows() - 1) as f64;
    // exact symmetry regardless of summation order
    for i in 0..cov.nrows() {
        for j in 0..i {
            let v = cov[(i, j)];
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Features with one class label per row. Labels index into `class_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Label(format!(
                "label {bad} outside {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    /// Dataset whose class names are the decimal labels `0..=max`.
    pub fn with_numeric_labels(features: FeatureMatrix, labels: Vec<usize>) -> Result<Self> {
        let n = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(features, labels, (0..n).map(|c| c.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.class_names.clone())
    }
}

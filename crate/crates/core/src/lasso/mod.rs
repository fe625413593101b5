//! Coordinate-descent lasso on sparse binary designs.
//!
//! The objective is
//!
//! ```text
//! (1/(2n)) * sum_i (y_i - mu - x_i' beta)^2 + lambda * sum_j pf_j * |beta_j|
//! ```
//!
//! with the intercept `mu` unpenalized. Dividing the squared error by `n`
//! keeps `lambda` comparable between CV folds of different sizes; multiply by
//! `n` to get the unnormalized `(1/2) * RSS + lambda * |beta|_1` convention.
//! Binary columns are never centered or scaled, so the design stays sparse.

mod cv;
mod path;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{config, structural, Result};
use crate::sparse::SparseBinaryDesign;

pub use cv::{assign_folds, cross_validate, cross_validate_stratified, fit_cv, CvResult};
pub use path::{fit_path, fit_path_with_grid, lambda_grid, LassoPath};
pub use solver::{fit, fit_traced, kkt_violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub lambda_grid_size: usize,
    pub lambda_min_ratio: f64,
    pub max_iterations: usize,
    /// Largest absolute coefficient change allowed in the final sweep.
    pub tolerance: f64,
    pub cv_folds: usize,
    pub fit_intercept: bool,
    /// Multiply each penalty factor by its column's standard deviation
    /// instead of standardizing the data.
    pub standardize_penalty: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            lambda_grid_size: 100,
            lambda_min_ratio: 1e-3,
            max_iterations: 10_000,
            tolerance: 1e-7,
            cv_folds: 10,
            fit_intercept: true,
            standardize_penalty: false,
        }
    }
}

impl LassoOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(config("tolerance must be positive"));
        }
        if self.cv_folds < 2 {
            return Err(config("cv_folds must be at least 2"));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(config("lambda_min_ratio must lie in (0, 1)"));
        }
        if self.lambda_grid_size == 0 {
            return Err(config("lambda_grid_size must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Sparse coefficient vector: sorted `(index, value)` pairs with nonzero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            dim: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect(),
        }
    }

    /// Entries must be strictly increasing in index and within `dim`; zeros are dropped.
    pub fn from_pairs(dim: usize, pairs: Vec<(usize, f64)>) -> Result<Self> {
        for (k, &(j, _)) in pairs.iter().enumerate() {
            if j >= dim {
                return Err(structural(format!(
                    "coefficient index {j} out of range {dim}"
                )));
            }
            if k > 0 && pairs[k - 1].0 >= j {
                return Err(structural(
                    "coefficient indices must be strictly increasing",
                ));
            }
        }
        Ok(SparseVector {
            dim,
            entries: pairs.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, j: usize) -> f64 {
        match self.entries.binary_search_by_key(&j, |e| e.0) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(j, v) in &self.entries {
            out[j] = v;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.1.abs()))
    }

    /// Applies `f` to every stored value, dropping results that are zero.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SparseVector {
        SparseVector {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(j, v)| (j, f(v)))
                .filter(|e| e.1 != 0.0)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: SparseVector,
    /// In the per-n convention described at module level.
    pub lambda: f64,
    /// Effective penalty factors used by the solver.
    pub penalty_factors: Vec<f64>,
    /// Coordinate-descent sweeps performed (0 for short-circuited fits).
    pub sweeps: usize,
}

impl LassoFit {
    pub fn intercept_only(intercept: f64, lambda: f64, penalty_factors: Vec<f64>) -> Self {
        LassoFit {
            intercept,
            coefficients: SparseVector::zeros(penalty_factors.len()),
            lambda,
            penalty_factors,
            sweeps: 0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn active_set(&self) -> Vec<usize> {
        self.coefficients.support()
    }

    pub fn predict(&self, x: &SparseBinaryDesign) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(structural(format!(
                "fit has {} features, design has {} columns",
                self.n_features(),
                x.n_cols()
            )));
        }
        let beta = self.coefficients.to_dense();
        Ok(x.rows()
            .map(|row| self.intercept + row.iter().map(|&c| x.scale(c) * beta[c]).sum::<f64>())
            .collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(LassoFitDocument::from(self)).expect("fit document serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let doc: LassoFitDocument = serde_json::from_value(value)
            .map_err(|e| crate::Error::Data(format!("bad lasso fit document: {e}")))?;
        doc.into_fit()
    }
}

/// On-disk JSON form of a [`LassoFit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFitDocument {
    pub lambda: f64,
    pub intercept: f64,
    pub coef: Vec<(usize, f64)>,
    pub penalty_convention: String,
    pub n_features: usize,
}

impl From<&LassoFit> for LassoFitDocument {
    fn from(fit: &LassoFit) -> Self {
        LassoFitDocument {
            lambda: fit.lambda,
            intercept: fit.intercept,
            coef: fit.coefficients.iter().collect(),
            penalty_convention: "per-n".into(),
            n_features: fit.n_features(),
        }
    }
}

impl LassoFitDocument {
    pub fn into_fit(self) -> Result<LassoFit> {
        if self.penalty_convention != "per-n" {
            return Err(crate::Error::Data(format!(
                "unsupported penalty convention {:?}",
                self.penalty_convention
            )));
        }
        Ok(LassoFit {
            intercept: self.intercept,
            coefficients: SparseVector::from_pairs(self.n_features, self.coef)?,
            lambda: self.lambda,
            penalty_factors: vec![1.0; self.n_features],
            sweeps: 0,
        })
    }
}

/// `sgn(z) * max(|z| - t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn unit_penalties(p: usize) -> Vec<f64> {
    vec![1.0; p]
}

/// Smallest lambda at which the all-zero coefficient vector is optimal, for a
/// model with intercept: `max_j |sum_i x_ij (y_i - ybar)| / (n * pf_j)` over
/// penalized columns.
pub fn lambda_max(x: &SparseBinaryDesign, y: &[f64], penalty_factors: &[f64]) -> Result<f64> {
    lambda_max_with(x, y, penalty_factors, true)
}

pub(crate) fn lambda_max_with(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    fit_intercept: bool,
) -> Result<f64> {
    check_dims(x, y, penalty_factors)?;
    if !penalty_factors.iter().any(|&f| f > 0.0) {
        return Err(config(
            "lambda_max needs at least one positive penalty factor",
        ));
    }
    let n = y.len() as f64;
    let center = if fit_intercept { mean(y) } else { 0.0 };
    let centered: Vec<f64> = y.iter().map(|v| v - center).collect();
    let corr = x.transpose_dot(&centered)?;
    Ok(corr
        .iter()
        .zip(penalty_factors)
        .filter(|(_, &f)| f > 0.0)
        .map(|(c, &f)| c.abs() / (n * f))
        .fold(0.0, f64::max))
}

pub fn predict(fit: &LassoFit, x: &SparseBinaryDesign) -> Result<Vec<f64>> {
    fit.predict(x)
}

/// `(1/n) * sum_i (pred_i - y_i)^2`.
pub fn mse(pred: &[f64], y: &[f64]) -> Result<f64> {
    if pred.len() != y.len() {
        return Err(structural(format!(
            "mse: {} predictions for {} responses",
            pred.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(pred
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub(crate) fn check_dims(x: &SparseBinaryDesign, y: &[f64], pf: &[f64]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(structural(format!(
            "design has {} rows but response has {} entries",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_cols() != pf.len() {
        return Err(structural(format!(
            "design has {} columns but {} penalty factors were given",
            x.n_cols(),
            pf.len()
        )));
    }
    if pf.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(config("penalty factors must be finite and non-negative"));
    }
    Ok(())
}

/// Penalty factors after the optional column-standard-deviation scaling.
pub(crate) fn effective_penalty_factors(
    x: &SparseBinaryDesign,
    pf: &[f64],
    opts: &LassoOptions,
) -> Vec<f64> {
    if !opts.standardize_penalty {
        return pf.to_vec();
    }
    let n = x.n_rows() as f64;
    x.column_counts()
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let frac = c as f64 / n;
            pf[j] * x.scale(j).abs() * (frac * (1.0 - frac)).sqrt()
        })
        .collect()
}

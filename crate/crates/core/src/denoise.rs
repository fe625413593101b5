//! Global soft-threshold de-noising of fitted coefficients.

use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::{DslFit, GroupPredictor, GroupedDataset, SeparateFits};
use crate::error::{config, Result};
use crate::lasso::{self, soft_threshold, LassoFit, SparseVector};

/// Number of points in the gamma sweep.
pub const SWEEP_POINTS: usize = 100;
pub const GAMMA_MAX: f64 = 0.5;

/// `sqrt(2 ln n) * gamma1 * sigma / sqrt(n)`.
pub fn donoho_threshold(n: usize, gamma1: f64, sigma: f64) -> Result<f64> {
    if n < 2 {
        return Err(config(format!("threshold needs n >= 2, got {n}")));
    }
    if !(gamma1 >= 0.0) || !(sigma >= 0.0) {
        return Err(config("gamma1 and sigma must be non-negative"));
    }
    let nf = n as f64;
    Ok((2.0 * nf.ln()).sqrt() * gamma1 * sigma / nf.sqrt())
}

/// Fits whose coefficients can be soft-thresholded coordinate-wise.
pub trait Shrinkable: Sized {
    /// Copy with every coefficient soft-thresholded at `t`; intercepts untouched.
    fn shrink(&self, t: f64) -> Self;
    /// Number of nonzero coefficients across all blocks.
    fn nonzero_count(&self) -> usize;
}

fn shrink_vec(v: &SparseVector, t: f64) -> SparseVector {
    v.map_values(|b| soft_threshold(b, t))
}

impl Shrinkable for LassoFit {
    fn shrink(&self, t: f64) -> Self {
        LassoFit {
            coefficients: shrink_vec(&self.coefficients, t),
            ..self.clone()
        }
    }

    fn nonzero_count(&self) -> usize {
        self.coefficients.nnz()
    }
}

impl Shrinkable for DslFit {
    fn shrink(&self, t: f64) -> Self {
        DslFit {
            beta: shrink_vec(&self.beta, t),
            deltas: self.deltas.iter().map(|d| shrink_vec(d, t)).collect(),
            ..self.clone()
        }
    }

    fn nonzero_count(&self) -> usize {
        self.beta.nnz() + self.deltas.iter().map(|d| d.nnz()).sum::<usize>()
    }
}

impl Shrinkable for SeparateFits {
    fn shrink(&self, t: f64) -> Self {
        SeparateFits(self.0.iter().map(|f| f.shrink(t)).collect())
    }

    fn nonzero_count(&self) -> usize {
        self.0.iter().map(|f| f.nonzero_count()).sum()
    }
}

pub fn apply_threshold<F: Shrinkable>(fit: &F, t: f64) -> Result<F> {
    if !(t >= 0.0) {
        return Err(config(format!("threshold must be non-negative, got {t}")));
    }
    Ok(fit.shrink(t))
}

/// Residual standard deviation (n - 1 denominator) of `model` on `train`.
pub fn residual_sigma<P: GroupPredictor + ?Sized>(
    model: &P,
    train: &GroupedDataset,
) -> Result<f64> {
    let n = train.n_rows();
    if n < 2 {
        return Err(config("sigma estimate needs at least two rows"));
    }
    let pred = model.predict_grouped(train)?;
    let resid: Vec<f64> = pred.iter().zip(train.y()).map(|(p, y)| y - p).collect();
    let mu = resid.iter().sum::<f64>() / n as f64;
    let ss: f64 = resid.iter().map(|r| (r - mu) * (r - mu)).sum();
    Ok((ss / (n - 1) as f64).sqrt())
}

/// `SWEEP_POINTS` evenly spaced values from 0 to exactly `GAMMA_MAX`.
pub fn gamma_grid() -> Vec<f64> {
    let last = (SWEEP_POINTS - 1) as f64;
    let mut g: Vec<f64> = (0..SWEEP_POINTS)
        .map(|k| GAMMA_MAX * k as f64 / last)
        .collect();
    g[SWEEP_POINTS - 1] = GAMMA_MAX;
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseSweep {
    pub gammas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub mse: Vec<f64>,
    pub argmin_gamma: f64,
    pub min_mse: f64,
    pub sigma: f64,
    pub n: usize,
}

impl DenoiseSweep {
    /// CSV `gamma,threshold,mse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,threshold,mse\n");
        for ((g, t), m) in self.gammas.iter().zip(&self.thresholds).zip(&self.mse) {
            out.push_str(&format!("{g},{t},{m}\n"));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "argmin_gamma": self.argmin_gamma,
            "min_mse": self.min_mse,
            "sigma": self.sigma,
            "n": self.n,
        })
    }
}

/// Test MSE of the thresholded fit for every gamma on the grid. The argmin
/// breaks ties toward the smaller gamma.
pub fn sweep_gamma<F>(fit: &F, test: &GroupedDataset, sigma: f64, n: usize) -> Result<DenoiseSweep>
where
    F: Shrinkable + GroupPredictor + Sync,
{
    let gammas = gamma_grid();
    let thresholds = gammas
        .iter()
        .map(|&g| donoho_threshold(n, g, sigma))
        .collect::<Result<Vec<_>>>()?;
    let mse = thresholds
        .par_iter()
        .map(|&t| {
            let pred = fit.shrink(t).predict_grouped(test)?;
            lasso::mse(&pred, test.y())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for k in 1..mse.len() {
        if mse[k] < mse[best] {
            best = k;
        }
    }
    Ok(DenoiseSweep {
        argmin_gamma: gammas[best],
        min_mse: mse[best],
        gammas,
        thresholds,
        mse,
        sigma,
        n,
    })
}

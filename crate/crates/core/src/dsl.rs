//! Data-shared lasso over G groups.
//!
//! Each group g has coefficients `beta + delta_g`, fit by minimizing
//!
//! ```text
//! (1/(2N)) * sum_i (y_i - mu - x_i'(beta + delta_{g_i}))^2
//!     + lambda * (|beta|_1 + sum_g r_g * |delta_g|_1)
//! ```
//!
//! This is an ordinary lasso on the augmented design `Z = [X | blockdiag(X_g)]`
//! with penalty factor 1 on the shared block and `r_g` on block g. The same
//! problem is obtained by scaling block g's values by `1/r_g` under a uniform
//! penalty and dividing the fitted block coefficients by `r_g`;
//! [`BlockEncoding`] selects between the two.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, data, structural, Error, Result};
use crate::lasso::{self, LassoFit, LassoOptions, SparseVector};
use crate::sparse::SparseBinaryDesign;

/// Design, response and a group label in `1..=G` for every row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    x: SparseBinaryDesign,
    y: Vec<f64>,
    groups: Vec<usize>,
    group_names: Vec<String>,
}

impl GroupedDataset {
    pub fn new(
        x: SparseBinaryDesign,
        y: Vec<f64>,
        groups: Vec<usize>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        if x.n_rows() != y.len() || y.len() != groups.len() {
            return Err(structural(format!(
                "dataset has {} rows, {} responses and {} group labels",
                x.n_rows(),
                y.len(),
                groups.len()
            )));
        }
        let n_groups = group_names.len();
        if n_groups == 0 {
            return Err(config("a grouped dataset needs at least one group"));
        }
        let mut sizes = vec![0usize; n_groups];
        for (i, &g) in groups.iter().enumerate() {
            if g == 0 || g > n_groups {
                return Err(data(format!(
                    "row {i} has group id {g}, expected 1..={n_groups}"
                )));
            }
            sizes[g - 1] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(config(format!("group {:?} has no rows", group_names[g])));
        }
        Ok(GroupedDataset {
            x,
            y,
            groups,
            group_names,
        })
    }

    /// Single-group dataset named `name`.
    pub fn ungrouped(x: SparseBinaryDesign, y: Vec<f64>, name: &str) -> Result<Self> {
        let n = y.len();
        Self::new(x, y, vec![1; n], vec![name.to_string()])
    }

    pub fn x(&self) -> &SparseBinaryDesign {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Group id (1-based) of each row.
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        for &g in &self.groups {
            sizes[g - 1] += 1;
        }
        sizes
    }

    pub fn rows_of_group(&self, group: usize) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.groups[i] == group)
            .collect()
    }

    /// Design and response restricted to one group.
    pub fn group_data(&self, group: usize) -> Result<(SparseBinaryDesign, Vec<f64>)> {
        let rows = self.rows_of_group(group);
        let x = self.x.select_rows(&rows)?;
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Ok((x, y))
    }

    /// Gathers rows (repeats allowed); every group must stay nonempty.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(rows)?;
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let groups = rows.iter().map(|&i| self.groups[i]).collect();
        Self::new(x, y, groups, self.group_names.clone())
    }

    /// Same rows and groups over a different design with the same row count.
    pub fn with_design(&self, x: SparseBinaryDesign) -> Result<Self> {
        Self::new(
            x,
            self.y.clone(),
            self.groups.clone(),
            self.group_names.clone(),
        )
    }
}

/// Rule producing the per-group penalty weights `r_g` from the group sizes
/// `n_g` and `N = sum n_g`. Logarithms are natural.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    /// `sqrt(1/3)`
    SqrtThird,
    /// `sqrt(n_g / N)`
    SqrtShare,
    /// `sqrt(log N / log n_g)`
    SqrtLogRatioInv,
    /// `N / n_g`
    SizeRatioInv,
    /// `log N / log n_g`
    LogRatioInv,
    /// `log n_g / log N`
    LogRatio,
    /// `sqrt(log n_g / log N)`
    SqrtLogRatio,
    /// `sqrt((log n_g * N) / (log N * n_g))`
    SqrtMixed,
    Custom(Vec<f64>),
}

impl WeightScheme {
    /// The eight built-in schemes in table order.
    pub const BUILT_IN: [WeightScheme; 8] = [
        WeightScheme::SqrtThird,
        WeightScheme::SqrtShare,
        WeightScheme::SqrtLogRatioInv,
        WeightScheme::SizeRatioInv,
        WeightScheme::LogRatioInv,
        WeightScheme::LogRatio,
        WeightScheme::SqrtLogRatio,
        WeightScheme::SqrtMixed,
    ];

    /// The seven schemes of the subgroup removal study (all but `N / n_g`).
    pub const REMOVAL_STUDY: [WeightScheme; 7] = [
        WeightScheme::SqrtThird,
        WeightScheme::SqrtShare,
        WeightScheme::SqrtLogRatioInv,
        WeightScheme::SqrtLogRatio,
        WeightScheme::LogRatio,
        WeightScheme::LogRatioInv,
        WeightScheme::SqrtMixed,
    ];

    pub fn name(&self) -> String {
        match self {
            WeightScheme::SqrtThird => "sqrt_third".into(),
            WeightScheme::SqrtShare => "sqrt_share".into(),
            WeightScheme::SqrtLogRatioInv => "sqrt_log_ratio_inv".into(),
            WeightScheme::SizeRatioInv => "size_ratio_inv".into(),
            WeightScheme::LogRatioInv => "log_ratio_inv".into(),
            WeightScheme::LogRatio => "log_ratio".into(),
            WeightScheme::SqrtLogRatio => "sqrt_log_ratio".into(),
            WeightScheme::SqrtMixed => "sqrt_mixed".into(),
            WeightScheme::Custom(v) => {
                let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("custom:{}", vals.join(","))
            }
        }
    }

    /// Formula label used in report tables.
    pub fn formula(&self) -> String {
        match self {
            WeightScheme::SqrtThird => "sqrt(1/3)".into(),
            WeightScheme::SqrtShare => "sqrt(n_g/N)".into(),
            WeightScheme::SqrtLogRatioInv => "sqrt(log N/log n_g)".into(),
            WeightScheme::SizeRatioInv => "N/n_g".into(),
            WeightScheme::LogRatioInv => "log N/log n_g".into(),
            WeightScheme::LogRatio => "log n_g/log N".into(),
            WeightScheme::SqrtLogRatio => "sqrt(log n_g/log N)".into(),
            WeightScheme::SqrtMixed => "sqrt((log n_g*N)/(log N*n_g))".into(),
            WeightScheme::Custom(_) => self.name(),
        }
    }

    fn uses_logs(&self) -> bool {
        matches!(
            self,
            WeightScheme::SqrtLogRatioInv
                | WeightScheme::LogRatioInv
                | WeightScheme::LogRatio
                | WeightScheme::SqrtLogRatio
                | WeightScheme::SqrtMixed
        )
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(list) = s.strip_prefix("custom:") {
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| config(format!("bad custom weight list {list:?}")))?;
            return Ok(WeightScheme::Custom(values));
        }
        WeightScheme::BUILT_IN
            .iter()
            .find(|w| w.name() == s)
            .cloned()
            .ok_or_else(|| config(format!("unknown weight scheme {s:?}")))
    }
}

/// Computed `r_g`, one per group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupWeights {
    pub values: Vec<f64>,
}

impl GroupWeights {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `sum r_g <= 1`: sharing collapses and the model behaves like separate
    /// per-group regressions.
    pub fn is_separate_regime(&self) -> bool {
        self.sum() <= 1.0
    }
}

pub fn compute_weights(scheme: &WeightScheme, group_sizes: &[usize]) -> Result<GroupWeights> {
    let g_count = group_sizes.len();
    let values: Vec<f64> = match scheme {
        WeightScheme::Custom(v) => {
            if v.len() != g_count {
                return Err(config(format!(
                    "custom weights list {} values for {g_count} groups",
                    v.len()
                )));
            }
            if v.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
                return Err(config("custom weights must be positive and finite"));
            }
            v.clone()
        }
        builtin => {
            if g_count < 2 {
                return Err(config(format!(
                    "weight scheme {builtin} needs at least two groups"
                )));
            }
            if let Some(&small) = group_sizes.iter().find(|&&n| n < 1) {
                return Err(config(format!("group size {small} is not positive")));
            }
            if builtin.uses_logs() {
                if let Some(&small) = group_sizes.iter().find(|&&n| n < 2) {
                    return Err(config(format!(
                        "weight scheme {builtin} takes log n_g and needs every n_g >= 2, got {small}"
                    )));
                }
            }
            let total = group_sizes.iter().sum::<usize>() as f64;
            let log_total = total.ln();
            group_sizes
                .iter()
                .map(|&n| {
                    let n = n as f64;
                    match builtin {
                        WeightScheme::SqrtThird => (1.0f64 / 3.0).sqrt(),
                        WeightScheme::SqrtShare => (n / total).sqrt(),
                        WeightScheme::SqrtLogRatioInv => (log_total / n.ln()).sqrt(),
                        WeightScheme::SizeRatioInv => total / n,
                        WeightScheme::LogRatioInv => log_total / n.ln(),
                        WeightScheme::LogRatio => n.ln() / log_total,
                        WeightScheme::SqrtLogRatio => (n.ln() / log_total).sqrt(),
                        WeightScheme::SqrtMixed => ((n.ln() * total) / (log_total * n)).sqrt(),
                        WeightScheme::Custom(_) => unreachable!(),
                    }
                })
                .collect()
        }
    };
    let weights = GroupWeights { values };
    if weights.is_separate_regime() {
        log::warn!(
            "group weights {:?} sum to {} <= 1: the shared component vanishes (separate regressions)",
            weights.values,
            weights.sum()
        );
    }
    Ok(weights)
}

/// How group blocks of the augmented design realize the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockEncoding {
    /// Binary blocks with penalty factor `r_g`.
    PenaltyFactors,
    /// Block values scaled by `1/r_g`, uniform penalty.
    ScaledBlocks,
}

/// Augmented design `Z` (N x p(G+1)) with its penalty factors.
#[derive(Debug, Clone)]
pub struct AugmentedDesign {
    pub z: SparseBinaryDesign,
    pub penalty_factors: Vec<f64>,
    pub n_features: usize,
    pub n_groups: usize,
    pub encoding: BlockEncoding,
    weights: Vec<f64>,
}

impl AugmentedDesign {
    /// `(block, feature)` of augmented column `col`; block 0 is shared.
    pub fn column_origin(&self, col: usize) -> (usize, usize) {
        (col / self.n_features, col % self.n_features)
    }

    pub fn column_of(&self, block: usize, feature: usize) -> usize {
        block * self.n_features + feature
    }

    /// Splits augmented coefficients into `(beta, [delta_1..delta_G])`.
    pub fn unpack(&self, coefficients: &SparseVector) -> (SparseVector, Vec<SparseVector>) {
        let p = self.n_features;
        let mut blocks: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_groups + 1];
        for (col, v) in coefficients.iter() {
            let (block, j) = self.column_origin(col);
            let v = match (self.encoding, block) {
                (BlockEncoding::ScaledBlocks, b) if b > 0 => v / self.weights[b - 1],
                _ => v,
            };
            blocks[block].push((j, v));
        }
        let mut vectors = blocks
            .into_iter()
            .map(|pairs| SparseVector::from_pairs(p, pairs).expect("block columns are ordered"));
        let beta = vectors.next().expect("shared block");
        (beta, vectors.collect())
    }
}

pub fn build_augmented(ds: &GroupedDataset, weights: &GroupWeights) -> Result<AugmentedDesign> {
    build_augmented_with(ds, weights, BlockEncoding::PenaltyFactors)
}

pub fn build_augmented_with(
    ds: &GroupedDataset,
    weights: &GroupWeights,
    encoding: BlockEncoding,
) -> Result<AugmentedDesign> {
    let g_count = ds.n_groups();
    if weights.values.len() != g_count {
        return Err(config(format!(
            "{} weights for {g_count} groups",
            weights.values.len()
        )));
    }
    let p = ds.n_features();
    let x = ds.x();
    let mut row_offsets = Vec::with_capacity(ds.n_rows() + 1);
    row_offsets.push(0);
    let mut cols = Vec::with_capacity(2 * x.nnz());
    for (i, &g) in ds.groups().iter().enumerate() {
        let row = x.row(i);
        cols.extend_from_slice(row);
        cols.extend(row.iter().map(|&j| g * p + j));
        row_offsets.push(cols.len());
    }
    let width = p * (g_count + 1);
    let mut z = SparseBinaryDesign::from_raw_parts(ds.n_rows(), width, row_offsets, cols)?;
    let block_factor = |c: usize| -> f64 {
        match c / p.max(1) {
            0 => 1.0,
            b => weights.values[b - 1],
        }
    };
    let penalty_factors = match encoding {
        BlockEncoding::PenaltyFactors => (0..width).map(block_factor).collect(),
        BlockEncoding::ScaledBlocks => {
            z = z.with_scales((0..width).map(|c| 1.0 / block_factor(c)).collect())?;
            vec![1.0; width]
        }
    };
    Ok(AugmentedDesign {
        z,
        penalty_factors,
        n_features: p,
        n_groups: g_count,
        encoding,
        weights: weights.values.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DslFit {
    pub scheme: WeightScheme,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub intercept: f64,
    pub beta: SparseVector,
    pub deltas: Vec<SparseVector>,
    pub group_names: Vec<String>,
}

impl DslFit {
    pub fn n_features(&self) -> usize {
        self.beta.dim()
    }

    /// Dense `beta + delta_g` for 1-based group `g`.
    pub fn group_coefficients(&self, group: usize) -> Vec<f64> {
        let mut out = self.beta.to_dense();
        for (j, v) in self.deltas[group - 1].iter() {
            out[j] += v;
        }
        out
    }

    /// Original features with a nonzero coefficient in any block.
    pub fn active_features(&self) -> Vec<usize> {
        let mut feats: Vec<usize> = self
            .beta
            .support()
            .into_iter()
            .chain(self.deltas.iter().flat_map(|d| d.support()))
            .collect();
        feats.sort_unstable();
        feats.dedup();
        feats
    }

    /// Active columns of the augmented design (block-major numbering).
    pub fn active_augmented_columns(&self) -> Vec<usize> {
        let p = self.n_features();
        self.beta
            .support()
            .into_iter()
            .chain(
                self.deltas
                    .iter()
                    .enumerate()
                    .flat_map(|(g, d)| d.support().into_iter().map(move |j| (g + 1) * p + j)),
            )
            .collect()
    }

    /// Penalized objective on `ds` in the per-n convention.
    pub fn objective(&self, ds: &GroupedDataset) -> Result<f64> {
        let pred = self.predict_grouped(ds)?;
        let rss: f64 = pred
            .iter()
            .zip(ds.y())
            .map(|(p, y)| (y - p) * (y - p))
            .sum();
        let l1 = |v: &SparseVector| v.iter().map(|(_, b)| b.abs()).sum::<f64>();
        let penalty = l1(&self.beta)
            + self
                .deltas
                .iter()
                .zip(&self.weights)
                .map(|(d, r)| r * l1(d))
                .sum::<f64>();
        Ok(rss / (2.0 * ds.n_rows() as f64) + self.lambda * penalty)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &SparseVector| -> Vec<(usize, f64)> { v.iter().collect() };
        let delta: serde_json::Map<String, serde_json::Value> = self
            .group_names
            .iter()
            .zip(&self.deltas)
            .map(|(name, d)| (name.clone(), serde_json::json!(pairs(d))))
            .collect();
        serde_json::json!({
            "scheme": self.scheme.name(),
            "r": self.weights,
            "lambda": self.lambda,
            "intercept": self.intercept,
            "n_features": self.n_features(),
            "groups": self.group_names,
            "beta": pairs(&self.beta),
            "delta": delta,
        })
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            scheme: String,
            r: Vec<f64>,
            lambda: f64,
            intercept: f64,
            n_features: usize,
            groups: Vec<String>,
            beta: Vec<(usize, f64)>,
            delta: BTreeMap<String, Vec<(usize, f64)>>,
        }
        let doc: Doc = serde_json::from_value(value)
            .map_err(|e| Error::Data(format!("bad data-shared fit document: {e}")))?;
        if doc.r.len() != doc.groups.len() {
            return Err(Error::Data(format!(
                "{} weights for {} groups",
                doc.r.len(),
                doc.groups.len()
            )));
        }
        let mut delta = doc.delta;
        let deltas = doc
            .groups
            .iter()
            .map(|g| {
                let pairs = delta
                    .remove(g)
                    .ok_or_else(|| Error::Data(format!("no offsets for group {g:?}")))?;
                SparseVector::from_pairs(doc.n_features, pairs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DslFit {
            scheme: doc.scheme.parse()?,
            weights: doc.r,
            lambda: doc.lambda,
            intercept: doc.intercept,
            beta: SparseVector::from_pairs(doc.n_features, doc.beta)?,
            deltas,
            group_names: doc.groups,
        })
    }
}

/// Predictions for every row of a grouped dataset.
pub trait GroupPredictor {
    fn predict_grouped(&self, ds: &GroupedDataset) -> Result<Vec<f64>>;
}

fn check_features(expected: usize, ds: &GroupedDataset) -> Result<()> {
    if ds.n_features() != expected {
        return Err(structural(format!(
            "model has {expected} features, dataset has {}",
            ds.n_features()
        )));
    }
    Ok(())
}

impl GroupPredictor for DslFit {
    fn predict_grouped(&self, ds: &GroupedDataset) -> Result<Vec<f64>> {
        check_features(self.n_features(), ds)?;
        if ds.n_groups() > self.deltas.len() {
            return Err(data(format!(
                "dataset has {} groups, model knows {}",
                ds.n_groups(),
                self.deltas.len()
            )));
        }
        let per_group: Vec<Vec<f64>> = (1..=self.deltas.len())
            .map(|g| self.group_coefficients(g))
            .collect();
        let x = ds.x();
        Ok((0..ds.n_rows())
            .map(|i| {
                let coef = &per_group[ds.groups()[i] - 1];
                self.intercept + x.row(i).iter().map(|&c| x.scale(c) * coef[c]).sum::<f64>()
            })
            .collect())
    }
}

impl GroupPredictor for LassoFit {
    fn predict_grouped(&self, ds: &GroupedDataset) -> Result<Vec<f64>> {
        self.predict(ds.x())
    }
}

/// One lasso per group, indexed by `group - 1`.
#[derive(Debug, Clone)]
pub struct SeparateFits(pub Vec<LassoFit>);

impl GroupPredictor for SeparateFits {
    fn predict_grouped(&self, ds: &GroupedDataset) -> Result<Vec<f64>> {
        if ds.n_groups() > self.0.len() {
            return Err(data(format!(
                "dataset has {} groups, model knows {}",
                ds.n_groups(),
                self.0.len()
            )));
        }
        let preds: Vec<Vec<f64>> = self
            .0
            .iter()
            .map(|f| {
                check_features(f.n_features(), ds)?;
                Ok(f.coefficients.to_dense())
            })
            .collect::<Result<_>>()?;
        let x = ds.x();
        Ok((0..ds.n_rows())
            .map(|i| {
                let g = ds.groups()[i] - 1;
                let beta = &preds[g];
                self.0[g].intercept + x.row(i).iter().map(|&c| x.scale(c) * beta[c]).sum::<f64>()
            })
            .collect())
    }
}

/// Test-set MSE over all rows and within each group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseTable {
    pub group_names: Vec<String>,
    pub all: f64,
    pub per_group: Vec<f64>,
}

pub fn evaluate<P: GroupPredictor + ?Sized>(model: &P, test: &GroupedDataset) -> Result<MseTable> {
    let pred = model.predict_grouped(test)?;
    mse_table(&pred, test)
}

pub(crate) fn mse_table(pred: &[f64], test: &GroupedDataset) -> Result<MseTable> {
    let all = lasso::mse(pred, test.y())?;
    let g_count = test.n_groups();
    let mut sums = vec![0.0; g_count];
    let mut counts = vec![0usize; g_count];
    for ((p, y), &g) in pred.iter().zip(test.y()).zip(test.groups()) {
        sums[g - 1] += (p - y) * (p - y);
        counts[g - 1] += 1;
    }
    Ok(MseTable {
        group_names: test.group_names().to_vec(),
        all,
        per_group: sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect(),
    })
}

fn unpack_fit(
    aug: &AugmentedDesign,
    fit: &LassoFit,
    scheme: &WeightScheme,
    ds: &GroupedDataset,
) -> DslFit {
    let (beta, deltas) = aug.unpack(&fit.coefficients);
    DslFit {
        scheme: scheme.clone(),
        weights: aug.weights.clone(),
        lambda: fit.lambda,
        intercept: fit.intercept,
        beta,
        deltas,
        group_names: ds.group_names().to_vec(),
    }
}

/// Computes weights, cross-validates lambda on the augmented problem with
/// group-stratified folds, and unpacks the fit at `lambda_min`.
pub fn fit_dsl(
    ds: &GroupedDataset,
    scheme: &WeightScheme,
    opts: &LassoOptions,
    seed: u64,
) -> Result<DslFit> {
    let weights = compute_weights(scheme, &ds.group_sizes())?;
    fit_dsl_with_weights(ds, scheme, &weights, opts, seed)
}

pub fn fit_dsl_with_weights(
    ds: &GroupedDataset,
    scheme: &WeightScheme,
    weights: &GroupWeights,
    opts: &LassoOptions,
    seed: u64,
) -> Result<DslFit> {
    let aug = build_augmented(ds, weights)?;
    let (_, fit) = lasso::fit_cv(
        &aug.z,
        ds.y(),
        &aug.penalty_factors,
        opts,
        seed,
        Some(ds.groups()),
    )?;
    Ok(unpack_fit(&aug, &fit, scheme, ds))
}

/// DSL fit at a fixed lambda (no cross-validation).
pub fn fit_dsl_at_lambda(
    ds: &GroupedDataset,
    scheme: &WeightScheme,
    weights: &GroupWeights,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<DslFit> {
    let aug = build_augmented(ds, weights)?;
    let fit = lasso::fit(&aug.z, ds.y(), lambda, &aug.penalty_factors, opts, None)?;
    Ok(unpack_fit(&aug, &fit, scheme, ds))
}

/// Smallest lambda at which the DSL fit is intercept-only.
pub fn dsl_lambda_max(ds: &GroupedDataset, weights: &GroupWeights) -> Result<f64> {
    let aug = build_augmented(ds, weights)?;
    lasso::lambda_max(&aug.z, ds.y(), &aug.penalty_factors)
}

/// DSL fits along a decreasing lambda grid, using the given block encoding.
pub fn dsl_path(
    ds: &GroupedDataset,
    scheme: &WeightScheme,
    weights: &GroupWeights,
    opts: &LassoOptions,
    lambdas: &[f64],
    encoding: BlockEncoding,
) -> Result<Vec<DslFit>> {
    let aug = build_augmented_with(ds, weights, encoding)?;
    let path = lasso::fit_path_with_grid(&aug.z, ds.y(), &aug.penalty_factors, opts, lambdas)?;
    Ok(path
        .fits
        .iter()
        .map(|f| unpack_fit(&aug, f, scheme, ds))
        .collect())
}

/// One lasso on all rows, ignoring groups.
pub fn fit_pooled(ds: &GroupedDataset, opts: &LassoOptions, seed: u64) -> Result<LassoFit> {
    let pf = lasso::unit_penalties(ds.n_features());
    let (_, fit) = lasso::fit_cv(ds.x(), ds.y(), &pf, opts, seed, None)?;
    Ok(fit)
}

/// One lasso per group, each with its own cross-validated lambda. Every group
/// uses `seed` for its folds, so a single-group dataset reproduces the pooled fit.
pub fn fit_separate(ds: &GroupedDataset, opts: &LassoOptions, seed: u64) -> Result<SeparateFits> {
    for (g, &n) in ds.group_sizes().iter().enumerate() {
        if n < opts.cv_folds {
            return Err(config(format!(
                "group {:?} has {n} rows, fewer than {} CV folds",
                ds.group_names()[g],
                opts.cv_folds
            )));
        }
    }
    let pf = lasso::unit_penalties(ds.n_features());
    let fits = (1..=ds.n_groups())
        .into_par_iter()
        .map(|g| {
            let (x, y) = ds.group_data(g)?;
            lasso::fit_cv(&x, &y, &pf, opts, seed, None).map(|(_, f)| f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparateFits(fits))
}

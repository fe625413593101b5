//! Set algebra between per-group lasso supports and the data-shared lasso's
//! shared support, plus the relative test-MSE change from removing a subgroup.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::{self, DslFit, GroupedDataset, MseTable, SeparateFits, WeightScheme};
use crate::error::{structural, Result};
use crate::lasso::{LassoOptions, SparseVector};

/// Sorted, duplicate-free set of original feature ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActiveSet {
    pub label: String,
    pub features: Vec<usize>,
}

impl ActiveSet {
    pub fn new(label: impl Into<String>, mut features: Vec<usize>) -> Self {
        features.sort_unstable();
        features.dedup();
        ActiveSet {
            label: label.into(),
            features,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.features.binary_search(&j).is_ok()
    }

    pub fn intersect(&self, other: &ActiveSet, label: impl Into<String>) -> ActiveSet {
        ActiveSet::new(
            label,
            self.features
                .iter()
                .copied()
                .filter(|&j| other.contains(j))
                .collect(),
        )
    }

    pub fn minus(&self, other: &ActiveSet, label: impl Into<String>) -> ActiveSet {
        ActiveSet::new(
            label,
            self.features
                .iter()
                .copied()
                .filter(|&j| !other.contains(j))
                .collect(),
        )
    }

    pub fn union(&self, other: &ActiveSet, label: impl Into<String>) -> ActiveSet {
        ActiveSet::new(
            label,
            self.features
                .iter()
                .chain(&other.features)
                .copied()
                .collect(),
        )
    }
}

/// Per-group supports of the separate fits, and the support of the DSL fit's
/// shared coefficient vector.
pub fn extract_sets(separate: &SeparateFits, fit: &DslFit) -> Result<(Vec<ActiveSet>, ActiveSet)> {
    let p = fit.n_features();
    if separate.0.len() != fit.group_names.len() {
        return Err(structural(format!(
            "{} separate fits for {} groups",
            separate.0.len(),
            fit.group_names.len()
        )));
    }
    let per_group = separate
        .0
        .iter()
        .zip(&fit.group_names)
        .map(|(f, name)| {
            if f.n_features() != p {
                return Err(structural(format!(
                    "separate fit for {name} has {} features, shared fit has {p}",
                    f.n_features()
                )));
            }
            Ok(ActiveSet::new(name.clone(), f.active_set()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((per_group, ActiveSet::new("shared", fit.beta.support())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subgroups {
    pub all_intersection: ActiveSet,
    /// `S_g ∩ S_shared`, one per group.
    pub shared_int: Vec<ActiveSet>,
    pub additional: ActiveSet,
    /// Region label (member set labels joined by `&`) to feature count.
    pub venn: BTreeMap<String, usize>,
}

impl Subgroups {
    /// The removal candidates in table order, including the empty "no removal" set.
    pub fn removal_sets(&self) -> Vec<ActiveSet> {
        let mut out = vec![ActiveSet::new("no removal", vec![])];
        out.push(self.all_intersection.clone());
        out.extend(self.shared_int.iter().cloned());
        out.push(self.additional.clone());
        out
    }
}

pub fn subgroups(groups: &[ActiveSet], shared: &ActiveSet) -> Subgroups {
    let mut inter = shared.clone();
    for s in groups {
        inter = inter.intersect(s, "");
    }
    let all_intersection = ActiveSet::new("all intersection", inter.features);
    let shared_int = groups
        .iter()
        .map(|s| s.intersect(shared, format!("shared int {}", s.label)))
        .collect();
    let union = groups
        .iter()
        .fold(ActiveSet::new("", vec![]), |acc, s| acc.union(s, ""));
    let additional = shared.minus(&union, "additional");

    let mut all_sets: Vec<&ActiveSet> = groups.iter().collect();
    all_sets.push(shared);
    Subgroups {
        all_intersection,
        shared_int,
        additional,
        venn: venn_regions(&all_sets),
    }
}

/// Count of features in every nonempty venn region, keyed by the labels of
/// the sets containing them.
pub fn venn_regions(sets: &[&ActiveSet]) -> BTreeMap<String, usize> {
    let mut everything: Vec<usize> = sets
        .iter()
        .flat_map(|s| s.features.iter().copied())
        .collect();
    everything.sort_unstable();
    everything.dedup();
    let mut regions = BTreeMap::new();
    for j in everything {
        let key: Vec<&str> = sets
            .iter()
            .filter(|s| s.contains(j))
            .map(|s| s.label.as_str())
            .collect();
        *regions.entry(key.join("&")).or_insert(0) += 1;
    }
    regions
}

/// How the model is re-estimated once a subgroup is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RemovalMode {
    /// Drop the columns and refit with a freshly cross-validated lambda.
    #[default]
    Refit,
    /// Drop the columns and refit at the baseline lambda.
    ReuseLambda,
    /// Keep the baseline fit and zero the removed coefficients.
    ZeroOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalRow {
    pub penalty: String,
    pub removal_type: String,
    pub all_pct: f64,
    pub group_pct: Vec<f64>,
    pub coef_removed: usize,
    pub mse: MseTable,
}

pub fn relative_change(new: f64, base: f64) -> f64 {
    100.0 * (new - base) / base
}

fn zero_features(v: &SparseVector, removed: &ActiveSet) -> SparseVector {
    let pairs = v.iter().filter(|(j, _)| !removed.contains(*j)).collect();
    SparseVector::from_pairs(v.dim(), pairs).expect("subset of a valid vector")
}

/// Test MSE after removing `subgroup`, and its change relative to `baseline`
/// (the test MSE of `base_fit`).
#[allow(clippy::too_many_arguments)]
pub fn removal_effect(
    train: &GroupedDataset,
    test: &GroupedDataset,
    scheme: &WeightScheme,
    subgroup: &ActiveSet,
    base_fit: &DslFit,
    baseline: &MseTable,
    opts: &LassoOptions,
    seed: u64,
    mode: RemovalMode,
) -> Result<RemovalRow> {
    let p = train.n_features();
    if let Some(&j) = subgroup.features.iter().find(|&&j| j >= p) {
        return Err(structural(format!(
            "feature {j} outside feature space of size {p}"
        )));
    }
    let mse = match mode {
        RemovalMode::ZeroOnly => {
            let fit = DslFit {
                beta: zero_features(&base_fit.beta, subgroup),
                deltas: base_fit
                    .deltas
                    .iter()
                    .map(|d| zero_features(d, subgroup))
                    .collect(),
                ..base_fit.clone()
            };
            dsl::evaluate(&fit, test)?
        }
        RemovalMode::Refit | RemovalMode::ReuseLambda => {
            let keep: Vec<usize> = (0..p).filter(|&j| !subgroup.contains(j)).collect();
            let (xr, _) = train.x().column_slice(&keep)?;
            let (xt, _) = test.x().column_slice(&keep)?;
            let train_r = train.with_design(xr)?;
            let test_r = test.with_design(xt)?;
            let weights = dsl::compute_weights(scheme, &train.group_sizes())?;
            let fit = if mode == RemovalMode::Refit {
                dsl::fit_dsl_with_weights(&train_r, scheme, &weights, opts, seed)?
            } else {
                dsl::fit_dsl_at_lambda(&train_r, scheme, &weights, base_fit.lambda, opts)?
            };
            dsl::evaluate(&fit, &test_r)?
        }
    };
    Ok(RemovalRow {
        penalty: scheme.name(),
        removal_type: subgroup.label.clone(),
        all_pct: relative_change(mse.all, baseline.all),
        group_pct: mse
            .per_group
            .iter()
            .zip(&baseline.per_group)
            .map(|(&m, &b)| relative_change(m, b))
            .collect(),
        coef_removed: subgroup.len(),
        mse,
    })
}

/// Every removal row for one scheme, computed concurrently.
#[allow(clippy::too_many_arguments)]
pub fn removal_table(
    train: &GroupedDataset,
    test: &GroupedDataset,
    scheme: &WeightScheme,
    sets: &Subgroups,
    base_fit: &DslFit,
    opts: &LassoOptions,
    seed: u64,
    mode: RemovalMode,
) -> Result<Vec<RemovalRow>> {
    let baseline = dsl::evaluate(base_fit, test)?;
    sets.removal_sets()
        .par_iter()
        .map(|s| {
            removal_effect(
                train, test, scheme, s, base_fit, &baseline, opts, seed, mode,
            )
        })
        .collect()
}

/// CSV with header `penalty,removal_type,all_pct,<group>_pct...,coef_removed`.
pub fn removal_csv(group_names: &[String], rows: &[RemovalRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec![
        "penalty".to_string(),
        "removal_type".into(),
        "all_pct".into(),
    ];
    header.extend(
        group_names
            .iter()
            .map(|g| format!("{}_pct", g.to_lowercase())),
    );
    header.push("coef_removed".into());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.penalty.clone(),
            r.removal_type.clone(),
            r.all_pct.to_string(),
        ];
        rec.extend(r.group_pct.iter().map(|v| v.to_string()));
        rec.push(r.coef_removed.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

//! Bootstrapped lasso (per group) and bootstrapped data-shared lasso.
//!
//! Each replicate resamples rows with replacement within every group, re-selects
//! lambda by cross-validation, and records its active set. The union of the
//! active sets over replicates is a reduced feature space; per-feature counts
//! measure selection stability.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::{self, GroupedDataset, WeightScheme};
use crate::error::{config, Result};
use crate::lasso::{self, LassoOptions};
use crate::rng::{derive_seed, rng_from, stream, Rng};
use crate::sparse::ColumnMap;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub solver: LassoOptions,
    /// Rows drawn per group and replicate; `None` draws `n_g` rows.
    pub resample_size: Option<usize>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 100,
            seed: 0,
            solver: LassoOptions::default(),
            resample_size: None,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(config("bootstrap needs at least one replicate"));
        }
        if self.resample_size == Some(0) {
            return Err(config("resample size must be positive"));
        }
        self.solver.validate()
    }
}

/// How often each feature (or augmented column) was active across replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCounts {
    pub counts: Vec<u32>,
    pub replicates: usize,
    pub failures: usize,
    /// `(replicate, message)` for every failed replicate.
    pub failure_log: Vec<(usize, String)>,
}

impl StabilityCounts {
    pub fn successes(&self) -> usize {
        self.replicates - self.failures
    }

    /// Features with a positive count, ascending.
    pub fn union(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Ordered union of features selected in any replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedFeatureSet {
    pub features: Vec<usize>,
    /// Number of features contributed by each source (group or block).
    pub source_sizes: Vec<(String, usize)>,
    pub n_original: usize,
}

impl ReducedFeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.features.binary_search(&feature).is_ok()
    }

    /// Union of several reduced sets over the same feature space.
    pub fn merge(sets: &[ReducedFeatureSet]) -> ReducedFeatureSet {
        let n_original = sets.first().map_or(0, |s| s.n_original);
        let mut features: Vec<usize> = sets
            .iter()
            .flat_map(|s| s.features.iter().copied())
            .collect();
        features.sort_unstable();
        features.dedup();
        ReducedFeatureSet {
            features,
            source_sizes: sets
                .iter()
                .flat_map(|s| s.source_sizes.iter().cloned())
                .collect(),
            n_original,
        }
    }
}

/// Per-group result of the bootstrapped lasso.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBootstrap {
    pub group: String,
    pub counts: StabilityCounts,
    pub union: ReducedFeatureSet,
}

/// Result of the bootstrapped data-shared lasso.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DslBootstrap {
    /// Counts over augmented columns `p * (G + 1)`, block-major.
    pub counts: StabilityCounts,
    /// Features active in the shared block or any group block.
    pub union: ReducedFeatureSet,
}

/// `n` indices drawn uniformly from `0..n` with replacement.
pub fn resample_indices(n: usize, rng: &mut Rng) -> Vec<usize> {
    resample_indices_sized(n, n, rng)
}

pub fn resample_indices_sized(n: usize, size: usize, rng: &mut Rng) -> Vec<usize> {
    assert!(n >= 1, "cannot resample from an empty set");
    (0..size).map(|_| rng.gen_range(0..n)).collect()
}

fn tally(p: usize, outcomes: Vec<Result<Vec<usize>>>) -> StabilityCounts {
    let mut counts = vec![0u32; p];
    let mut failure_log = Vec::new();
    let replicates = outcomes.len();
    for (k, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(active) => {
                for j in active {
                    counts[j] += 1;
                }
            }
            Err(e) => {
                log::warn!("bootstrap replicate {k} failed: {e}");
                failure_log.push((k, e.to_string()));
            }
        }
    }
    StabilityCounts {
        counts,
        replicates,
        failures: failure_log.len(),
        failure_log,
    }
}

/// Bootstrapped lasso run independently in every group.
pub fn bootstrap_lasso_group(
    ds: &GroupedDataset,
    cfg: &BootstrapConfig,
) -> Result<Vec<GroupBootstrap>> {
    cfg.validate()?;
    let p = ds.n_features();
    let pf = lasso::unit_penalties(p);
    (1..=ds.n_groups())
        .map(|g| {
            let (x, y) = ds.group_data(g)?;
            let n_g = y.len();
            let size = cfg.resample_size.unwrap_or(n_g);
            let outcomes: Vec<Result<Vec<usize>>> = (0..cfg.replicates)
                .into_par_iter()
                .map(|k| {
                    let path = [stream::BOOTSTRAP, g as u64, k as u64];
                    let rows = resample_indices_sized(n_g, size, &mut rng_from(cfg.seed, &path));
                    let xb = x.select_rows(&rows)?;
                    let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
                    let cv_seed =
                        derive_seed(cfg.seed, &[stream::REPLICATE_CV, g as u64, k as u64]);
                    let (_, fit) = lasso::fit_cv(&xb, &yb, &pf, &cfg.solver, cv_seed, None)?;
                    Ok(fit.active_set())
                })
                .collect();
            let counts = tally(p, outcomes);
            let features = counts.union();
            let name = ds.group_names()[g - 1].clone();
            Ok(GroupBootstrap {
                union: ReducedFeatureSet {
                    source_sizes: vec![(name.clone(), features.len())],
                    features,
                    n_original: p,
                },
                group: name,
                counts,
            })
        })
        .collect()
}

/// Bootstrapped data-shared lasso: every replicate resamples within each group,
/// rebuilds the augmented design, and fits the DSL with CV-selected lambda.
pub fn bootstrap_dsl(
    ds: &GroupedDataset,
    scheme: &WeightScheme,
    cfg: &BootstrapConfig,
) -> Result<DslBootstrap> {
    cfg.validate()?;
    let p = ds.n_features();
    let g_count = ds.n_groups();
    // fail fast on an unusable scheme before spending replicates on it
    dsl::compute_weights(scheme, &ds.group_sizes())?;
    let group_rows: Vec<Vec<usize>> = (1..=g_count).map(|g| ds.rows_of_group(g)).collect();

    let outcomes: Vec<Result<Vec<usize>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rows = Vec::with_capacity(ds.n_rows());
            for (g, members) in group_rows.iter().enumerate() {
                let path = [stream::BOOTSTRAP, (g_count + 1 + g) as u64, k as u64];
                let size = cfg.resample_size.unwrap_or(members.len());
                let draws =
                    resample_indices_sized(members.len(), size, &mut rng_from(cfg.seed, &path));
                rows.extend(draws.into_iter().map(|d| members[d]));
            }
            let sample = ds.select_rows(&rows)?;
            let cv_seed = derive_seed(cfg.seed, &[stream::REPLICATE_CV, 0, k as u64]);
            let fit = dsl::fit_dsl(&sample, scheme, &cfg.solver, cv_seed)?;
            Ok(fit.active_augmented_columns())
        })
        .collect();
    let counts = tally(p * (g_count + 1), outcomes);

    let mut in_union = vec![false; p];
    let mut source_sizes = Vec::with_capacity(g_count + 1);
    for block in 0..=g_count {
        let label = if block == 0 {
            "shared".to_string()
        } else {
            ds.group_names()[block - 1].clone()
        };
        let mut size = 0;
        for j in 0..p {
            if counts.counts[block * p + j] > 0 {
                in_union[j] = true;
                size += 1;
            }
        }
        source_sizes.push((label, size));
    }
    let features = (0..p).filter(|&j| in_union[j]).collect();
    Ok(DslBootstrap {
        counts,
        union: ReducedFeatureSet {
            features,
            source_sizes,
            n_original: p,
        },
    })
}

/// Restricts the dataset to the reduced feature set; `y` and groups are unchanged.
pub fn reduce_dataset(
    ds: &GroupedDataset,
    set: &ReducedFeatureSet,
) -> Result<(GroupedDataset, ColumnMap)> {
    let (x, map) = ds.x().column_slice(&set.features)?;
    Ok((ds.with_design(x)?, map))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRecord {
    pub feature: usize,
    pub count: u32,
    pub proportion: f64,
}

/// Features with positive counts, most frequent first (ties by feature id).
pub fn stability_report(counts: &StabilityCounts) -> Vec<StabilityRecord> {
    let mut records: Vec<StabilityRecord> = counts
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(feature, &count)| StabilityRecord {
            feature,
            count,
            proportion: count as f64 / counts.replicates as f64,
        })
        .collect();
    records.sort_by(|a, b| b.count.cmp(&a.count).then(a.feature.cmp(&b.feature)));
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseBinaryDesign;
    use rand::SeedableRng;

    fn signal_dataset(seed: u64, sizes: &[usize], p: usize, support: &[usize]) -> GroupedDataset {
        let mut rng = Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut groups = Vec::new();
        for (g, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                rows.push((0..p).filter(|_| rng.gen_bool(0.3)).collect::<Vec<_>>());
                groups.push(g + 1);
            }
        }
        let x = SparseBinaryDesign::from_rows(&rows, p).unwrap();
        let mut beta = vec![0.0; p];
        for &j in support {
            beta[j] = 3.0;
        }
        let y = x.dot(&beta).unwrap();
        let names = (1..=sizes.len()).map(|g| format!("g{g}")).collect();
        GroupedDataset::new(x, y, groups, names).unwrap()
    }

    fn small_cfg(replicates: usize) -> BootstrapConfig {
        BootstrapConfig {
            replicates,
            seed: 17,
            solver: LassoOptions {
                lambda_grid_size: 30,
                cv_folds: 5,
                ..Default::default()
            },
            resample_size: None,
        }
    }

    #[test]
    fn resample_basics() {
        let mut rng = rng_from(1, &[]);
        assert_eq!(resample_indices(1, &mut rng), vec![0]);
        let a = resample_indices(50, &mut rng_from(5, &[1]));
        let b = resample_indices(50, &mut rng_from(5, &[1]));
        assert_eq!(a, b);
        assert!(a.iter().all(|&i| i < 50));
    }

    #[test]
    fn resample_frequencies_are_uniform() {
        // 10^4 draws of n=5, each frequency within 5 sigma of 2000.
        let mut rng = rng_from(99, &[]);
        let mut freq = [0usize; 5];
        for _ in 0..2000 {
            for i in resample_indices(5, &mut rng) {
                freq[i] += 1;
            }
        }
        let sigma = (10_000.0f64 * 0.2 * 0.8).sqrt();
        for f in freq {
            assert!((f as f64 - 2000.0).abs() < 5.0 * sigma, "{freq:?}");
        }
    }

    #[test]
    fn single_replicate_recovers_strong_support() {
        let ds = signal_dataset(1, &[40], 12, &[1, 4, 7]);
        let out = bootstrap_lasso_group(&ds, &small_cfg(1)).unwrap();
        for j in [1, 4, 7] {
            assert!(out[0].union.contains(j), "{:?}", out[0].union.features);
        }
        assert_eq!(out[0].counts.successes(), 1);
    }

    #[test]
    fn zero_response_selects_nothing() {
        let ds = signal_dataset(2, &[20, 20], 8, &[]);
        let out = bootstrap_lasso_group(&ds, &small_cfg(3)).unwrap();
        assert!(out.iter().all(|g| g.union.is_empty()));
        let out = bootstrap_dsl(&ds, &WeightScheme::SqrtThird, &small_cfg(2)).unwrap();
        assert!(out.union.is_empty());
    }

    #[test]
    fn union_matches_counts_and_prefix_is_monotone() {
        let ds = signal_dataset(3, &[30, 30], 10, &[0, 5]);
        let mut noisy_y = ds.y().to_vec();
        let mut rng = Rng::seed_from_u64(4);
        for v in &mut noisy_y {
            *v += rng.gen_range(-2.0..2.0);
        }
        let ds = GroupedDataset::new(
            ds.x().clone(),
            noisy_y,
            ds.groups().to_vec(),
            ds.group_names().to_vec(),
        )
        .unwrap();
        let short = bootstrap_lasso_group(&ds, &small_cfg(4)).unwrap();
        let long = bootstrap_lasso_group(&ds, &small_cfg(8)).unwrap();
        for (s, l) in short.iter().zip(&long) {
            for j in 0..10 {
                assert_eq!(s.counts.counts[j] >= 1, s.union.contains(j));
                assert!(s.counts.counts[j] <= 4);
                if s.union.contains(j) {
                    assert!(l.union.contains(j));
                }
            }
            assert_eq!(s.counts.successes() + s.counts.failures, 4);
        }
    }

    #[test]
    fn failures_are_counted() {
        // five rows cannot be split into ten folds
        let ds = signal_dataset(5, &[12], 6, &[2]);
        let cfg = BootstrapConfig {
            resample_size: Some(5),
            ..small_cfg(3)
        };
        let cfg = BootstrapConfig {
            solver: LassoOptions {
                cv_folds: 10,
                ..cfg.solver.clone()
            },
            ..cfg
        };
        let out = bootstrap_lasso_group(&ds, &cfg).unwrap();
        assert_eq!(out[0].counts.failures, 3);
        assert_eq!(out[0].counts.failure_log.len(), 3);
        assert!(out[0].union.is_empty());
    }

    #[test]
    fn dsl_bootstrap_is_deterministic() {
        let ds = signal_dataset(6, &[20, 20], 6, &[1, 3]);
        let a = bootstrap_dsl(&ds, &WeightScheme::SqrtThird, &small_cfg(3)).unwrap();
        let b = bootstrap_dsl(&ds, &WeightScheme::SqrtThird, &small_cfg(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.counts.len(), 18);
        assert!(a.union.contains(1) && a.union.contains(3));
        for j in 0..6 {
            let any = (0..3).any(|b| a.counts.counts[b * 6 + j] > 0);
            assert_eq!(any, a.union.contains(j));
        }
    }

    #[test]
    fn reduce_dataset_edges() {
        let ds = signal_dataset(7, &[10, 10], 5, &[1]);
        let full = ReducedFeatureSet {
            features: (0..5).collect(),
            source_sizes: vec![],
            n_original: 5,
        };
        let (same, map) = reduce_dataset(&ds, &full).unwrap();
        assert_eq!(same, ds);
        assert_eq!(map, ColumnMap::identity(5));
        let empty = ReducedFeatureSet {
            features: vec![],
            source_sizes: vec![],
            n_original: 5,
        };
        let (none, _) = reduce_dataset(&ds, &empty).unwrap();
        assert_eq!(none.n_features(), 0);
        let fit = dsl::fit_pooled(&none, &small_cfg(1).solver, 1).unwrap();
        assert_eq!(fit.coefficients.nnz(), 0);
    }

    #[test]
    fn report_ordering() {
        let counts = StabilityCounts {
            counts: vec![0, 3, 5, 3, 0],
            replicates: 5,
            failures: 0,
            failure_log: vec![],
        };
        let rep = stability_report(&counts);
        let order: Vec<usize> = rep.iter().map(|r| r.feature).collect();
        assert_eq!(order, vec![2, 1, 3]);
        assert_eq!(rep[0].proportion, 1.0);
        let none = StabilityCounts {
            counts: vec![0; 4],
            ..counts
        };
        assert!(stability_report(&none).is_empty());
    }
}

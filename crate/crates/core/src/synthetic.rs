//! Seeded grouped sparse-binary regression problems with a shared sparse
//! coefficient vector plus small per-group offsets.

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::dsl::GroupedDataset;
use crate::error::{config, Result};
use crate::rng::{rng_from, stream, Rng};
use crate::sparse::SparseBinaryDesign;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticConfig {
    /// Rows per group in each of the train and test halves.
    pub group_sizes: Vec<usize>,
    pub p: usize,
    /// Probability that a feature is present in a row.
    pub density: f64,
    pub intercept: f64,
    /// Nonzero entries of the shared coefficient vector.
    pub shared_support: usize,
    pub shared_scale: f64,
    /// Nonzero offsets per group, at uniformly chosen features.
    pub offset_support: usize,
    pub offset_scale: f64,
    pub noise_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            group_sizes: vec![200, 200, 200],
            p: 500,
            density: 0.05,
            intercept: 5.0,
            shared_support: 25,
            shared_scale: 1.0,
            offset_support: 5,
            offset_scale: 0.5,
            noise_sd: 1.0,
        }
    }
}

/// A generated problem and its true coefficients.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub train: GroupedDataset,
    pub test: GroupedDataset,
    pub beta: Vec<f64>,
    /// `deltas[g]` is the offset of group `g + 1`.
    pub deltas: Vec<Vec<f64>>,
}

impl Synthetic {
    /// Features with a nonzero coefficient in any group.
    pub fn true_support(&self) -> Vec<usize> {
        (0..self.beta.len())
            .filter(|&j| self.beta[j] != 0.0 || self.deltas.iter().any(|d| d[j] != 0.0))
            .collect()
    }
}

fn signed(rng: &mut Rng, scale: f64) -> f64 {
    let mag = scale * rng.gen_range(0.5..1.5);
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn half(
    cfg: &SyntheticConfig,
    beta: &[f64],
    deltas: &[Vec<f64>],
    rng: &mut Rng,
    noise: &Normal<f64>,
) -> Result<GroupedDataset> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut groups = Vec::new();
    for (g, &n) in cfg.group_sizes.iter().enumerate() {
        for _ in 0..n {
            let row: Vec<usize> = (0..cfg.p).filter(|_| rng.gen_bool(cfg.density)).collect();
            let signal: f64 = row.iter().map(|&j| beta[j] + deltas[g][j]).sum();
            y.push(cfg.intercept + signal + noise.sample(rng));
            rows.push(row);
            groups.push(g + 1);
        }
    }
    let x = SparseBinaryDesign::from_rows(&rows, cfg.p)?;
    let names = (1..=cfg.group_sizes.len())
        .map(|g| format!("g{g}"))
        .collect();
    GroupedDataset::new(x, y, groups, names)
}

pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Result<Synthetic> {
    if cfg.group_sizes.is_empty() || cfg.group_sizes.contains(&0) {
        return Err(config("every synthetic group needs at least one row"));
    }
    if cfg.shared_support > cfg.p || cfg.offset_support > cfg.p {
        return Err(config("support larger than the feature count"));
    }
    if !(0.0..=1.0).contains(&cfg.density) || !(cfg.noise_sd >= 0.0) {
        return Err(config(
            "density must lie in [0, 1] and noise_sd be non-negative",
        ));
    }
    let mut rng = rng_from(seed, &[stream::SYNTHETIC]);
    let mut beta = vec![0.0; cfg.p];
    let shared = sample(&mut rng, cfg.p, cfg.shared_support).into_vec();
    for &j in &shared {
        beta[j] = signed(&mut rng, cfg.shared_scale);
    }
    let deltas: Vec<Vec<f64>> = cfg
        .group_sizes
        .iter()
        .map(|_| {
            let mut d = vec![0.0; cfg.p];
            for j in sample(&mut rng, cfg.p, cfg.offset_support) {
                d[j] = signed(&mut rng, cfg.offset_scale);
            }
            d
        })
        .collect();
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| config(e.to_string()))?;
    let train = half(cfg, &beta, &deltas, &mut rng, &noise)?;
    let test = half(cfg, &beta, &deltas, &mut rng, &noise)?;
    Ok(Synthetic {
        train,
        test,
        beta,
        deltas,
    })
}

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::path::{lambda_grid, solve_grid_with};
use super::solver::Problem;
use super::{mse, LassoFit, LassoOptions};
use crate::error::{config, structural, Result};
use crate::rng::{rng_from, stream};
use crate::sparse::SparseBinaryDesign;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    /// Decreasing grid shared by every fold.
    pub lambdas: Vec<f64>,
    pub mean_mse: Vec<f64>,
    pub se_mse: Vec<f64>,
    pub lambda_min: f64,
    pub index_min: usize,
    pub seed: u64,
    pub folds: usize,
    /// Fold fits that hit the sweep limit and were scored from their last iterate.
    pub unconverged: usize,
}

/// Seeded assignment of rows to `k` folds of near-equal size. With `strata`,
/// each stratum is shuffled separately and dealt round-robin, continuing the
/// deal across strata so every fold keeps the stratum proportions.
pub fn assign_folds(n: usize, k: usize, seed: u64, strata: Option<&[usize]>) -> Vec<usize> {
    let mut rng = rng_from(seed, &[stream::CV_FOLDS]);
    let mut fold_of = vec![0; n];
    match strata {
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (pos, &i) in order.iter().enumerate() {
                fold_of[i] = pos % k;
            }
        }
        Some(labels) => {
            let mut ids: Vec<usize> = labels.to_vec();
            ids.sort_unstable();
            ids.dedup();
            let mut dealt = 0;
            for id in ids {
                let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == id).collect();
                members.shuffle(&mut rng);
                for &i in &members {
                    fold_of[i] = dealt % k;
                    dealt += 1;
                }
            }
        }
    }
    fold_of
}

pub fn cross_validate(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    opts: &LassoOptions,
    seed: u64,
) -> Result<CvResult> {
    cross_validate_stratified(x, y, penalty_factors, opts, seed, None)
}

/// K-fold CV over the lambda grid of the full data. Ties in mean MSE go to the
/// larger lambda.
pub fn cross_validate_stratified(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    opts: &LassoOptions,
    seed: u64,
    strata: Option<&[usize]>,
) -> Result<CvResult> {
    let full = Problem::new(x, y, penalty_factors, opts)?;
    let lmax = full.lambda_max().unwrap_or(0.0);
    let grid = lambda_grid(lmax, opts.lambda_grid_size, opts.lambda_min_ratio);
    cv_on_grid(x, y, penalty_factors, opts, seed, strata, grid)
}

fn cv_on_grid(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    opts: &LassoOptions,
    seed: u64,
    strata: Option<&[usize]>,
    grid: Vec<f64>,
) -> Result<CvResult> {
    let n = y.len();
    let k = opts.cv_folds;
    if n < k {
        return Err(config(format!(
            "cross-validation needs at least {k} rows, got {n}"
        )));
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(structural("strata length differs from row count"));
        }
    }
    let fold_of = assign_folds(n, k, seed, strata);

    let per_fold: Vec<(Vec<f64>, usize)> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<(Vec<f64>, usize)> {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            let x_train = x.select_rows(&train)?;
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let x_test = x.select_rows(&test)?;
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let problem = Problem::new(&x_train, &y_train, penalty_factors, opts)?;
            let (path, converged) = solve_grid_with(&problem, &grid, true)?;
            let unconverged = converged.iter().filter(|c| !**c).count();
            let errors = path
                .fits
                .iter()
                .map(|f| mse(&f.predict(&x_test)?, &y_test))
                .collect::<Result<_>>()?;
            Ok((errors, unconverged))
        })
        .collect::<Result<_>>()?;
    let unconverged: usize = per_fold.iter().map(|f| f.1).sum();
    if unconverged > 0 {
        log::warn!("cross-validation: {unconverged} fold fits stopped at the sweep limit");
    }

    let m = grid.len();
    let kf = k as f64;
    let mut mean_mse = vec![0.0; m];
    let mut se_mse = vec![0.0; m];
    for l in 0..m {
        let vals: Vec<f64> = per_fold.iter().map(|f| f.0[l]).collect();
        let mu = vals.iter().sum::<f64>() / kf;
        let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (kf - 1.0);
        mean_mse[l] = mu;
        se_mse[l] = (var / kf).sqrt();
    }
    // grid is decreasing, so the first minimum is the largest lambda
    let mut index_min = 0;
    for l in 1..m {
        if mean_mse[l] < mean_mse[index_min] {
            index_min = l;
        }
    }
    Ok(CvResult {
        lambda_min: grid[index_min],
        lambdas: grid,
        mean_mse,
        se_mse,
        index_min,
        seed,
        folds: k,
        unconverged,
    })
}

/// Cross-validates, then returns the full-data fit at `lambda_min` taken from
/// a warm-started path over the same grid. Path points before `lambda_min`
/// only serve as warm starts and may stop at the sweep limit; the returned fit
/// must converge.
pub fn fit_cv(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    opts: &LassoOptions,
    seed: u64,
    strata: Option<&[usize]>,
) -> Result<(CvResult, LassoFit)> {
    let full = Problem::new(x, y, penalty_factors, opts)?;
    let lmax = full.lambda_max().unwrap_or(0.0);
    let grid = lambda_grid(lmax, opts.lambda_grid_size, opts.lambda_min_ratio);
    let cv = cv_on_grid(x, y, penalty_factors, opts, seed, strata, grid)?;
    let k = cv.index_min;
    let (path, _) = solve_grid_with(&full, &cv.lambdas[..k], true)?;
    let warm = path.fits.last().map(|f| f.coefficients.to_dense());
    let fit = full.solve(cv.lambdas[k], warm.as_deref(), None)?;
    Ok((cv, fit))
}

#[cfg(test)]
mod tests {
    use super::super::unit_penalties;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn folds_are_near_equal_and_stratified() {
        let folds = assign_folds(23, 5, 9, None);
        let mut sizes = [0; 5];
        for f in &folds {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));

        let strata: Vec<usize> = (0..30).map(|i| if i < 20 { 1 } else { 2 }).collect();
        let folds = assign_folds(30, 5, 9, Some(&strata));
        for f in 0..5 {
            let g1 = (0..30).filter(|&i| folds[i] == f && strata[i] == 1).count();
            let g2 = (0..30).filter(|&i| folds[i] == f && strata[i] == 2).count();
            assert_eq!((g1, g2), (4, 2));
        }
    }

    #[test]
    fn too_few_rows_is_config_error() {
        let x = SparseBinaryDesign::zeros(5, 2);
        let err = cross_validate(&x, &[1.0; 5], &unit_penalties(2), &Default::default(), 1);
        assert!(matches!(err, Err(crate::Error::Config(_))));
    }

    fn noise_instance(seed: u64) -> (SparseBinaryDesign, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..60)
            .map(|_| (0..15).filter(|_| rng.gen_bool(0.3)).collect())
            .collect();
        let x = SparseBinaryDesign::from_rows(&rows, 15).unwrap();
        let y = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        (x, y)
    }

    #[test]
    fn same_seed_same_result() {
        let (x, y) = noise_instance(1);
        let opts = LassoOptions {
            lambda_grid_size: 30,
            ..Default::default()
        };
        let a = cross_validate(&x, &y, &unit_penalties(15), &opts, 42).unwrap();
        let b = cross_validate(&x, &y, &unit_penalties(15), &opts, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.lambdas.contains(&a.lambda_min));
    }

    #[test]
    fn pure_noise_prefers_heavy_shrinkage() {
        // Simulation: independent noise responses, 20 seeds.
        let opts = LassoOptions {
            lambda_grid_size: 40,
            ..Default::default()
        };
        let mut top_quartile = 0;
        for seed in 0..20 {
            let (x, y) = noise_instance(1000 + seed);
            let cv = cross_validate(&x, &y, &unit_penalties(15), &opts, seed).unwrap();
            if cv.index_min < opts.lambda_grid_size / 4 {
                top_quartile += 1;
            }
        }
        assert!(
            top_quartile >= 15,
            "only {top_quartile} of 20 in top quartile"
        );
    }

    #[test]
    fn strong_signal_beats_null_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 20;
        let beta: Vec<f64> = (0..p).map(|j| if j < 4 { 2.0 } else { 0.0 }).collect();
        let gen = |rng: &mut ChaCha8Rng, n: usize| {
            let rows: Vec<Vec<usize>> = (0..n)
                .map(|_| (0..p).filter(|_| rng.gen_bool(0.3)).collect())
                .collect();
            let x = SparseBinaryDesign::from_rows(&rows, p).unwrap();
            let y: Vec<f64> = x
                .dot(&beta)
                .unwrap()
                .into_iter()
                .map(|v| v + 0.1 * rng.gen_range(-1.0..1.0))
                .collect();
            (x, y)
        };
        let (x, y) = gen(&mut rng, 80);
        let (xt, yt) = gen(&mut rng, 80);
        let opts = LassoOptions::default();
        let (cv, best) = fit_cv(&x, &y, &unit_penalties(p), &opts, 3, None).unwrap();
        let null =
            crate::lasso::fit(&x, &y, cv.lambdas[0], &unit_penalties(p), &opts, None).unwrap();
        let m_best = mse(&best.predict(&xt).unwrap(), &yt).unwrap();
        let m_null = mse(&null.predict(&xt).unwrap(), &yt).unwrap();
        assert!(m_best <= m_null, "{m_best} > {m_null}");
        assert_eq!(best.lambda, cv.lambda_min);
    }
}

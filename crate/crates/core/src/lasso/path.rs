use super::solver::Problem;
use super::{LassoFit, LassoOptions};
use crate::error::{structural, Error, Result};
use crate::sparse::SparseBinaryDesign;

/// Fits along a decreasing lambda grid, each warm-started from the previous.
#[derive(Debug, Clone)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<LassoFit>,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Log-spaced grid from `lambda_max` down to `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, size: usize, min_ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lambda_max];
    }
    let last = (size - 1) as f64;
    (0..size)
        .map(|k| lambda_max * min_ratio.powf(k as f64 / last))
        .collect()
}

pub fn fit_path(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    opts: &LassoOptions,
) -> Result<LassoPath> {
    let problem = Problem::new(x, y, penalty_factors, opts)?;
    let lmax = problem.lambda_max().unwrap_or(0.0);
    let grid = lambda_grid(lmax, opts.lambda_grid_size, opts.lambda_min_ratio);
    solve_grid(&problem, &grid)
}

/// Path over a caller-supplied grid (must be non-increasing).
pub fn fit_path_with_grid(
    x: &SparseBinaryDesign,
    y: &[f64],
    penalty_factors: &[f64],
    opts: &LassoOptions,
    lambdas: &[f64],
) -> Result<LassoPath> {
    let problem = Problem::new(x, y, penalty_factors, opts)?;
    solve_grid(&problem, lambdas)
}

pub(crate) fn solve_grid(problem: &Problem<'_>, lambdas: &[f64]) -> Result<LassoPath> {
    solve_grid_with(problem, lambdas, false).map(|(path, _)| path)
}

/// With `lenient`, a lambda that hits the sweep limit keeps its last iterate
/// (and warm-starts the next one). Also returns which fits converged.
pub(crate) fn solve_grid_with(
    problem: &Problem<'_>,
    lambdas: &[f64],
    lenient: bool,
) -> Result<(LassoPath, Vec<bool>)> {
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(structural("lambda grid must be non-increasing"));
    }
    let mut fits: Vec<LassoFit> = Vec::with_capacity(lambdas.len());
    let mut warm: Option<Vec<f64>> = None;
    let mut converged = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = match problem.solve(lambda, warm.as_deref(), None) {
            Ok(fit) => {
                converged.push(true);
                fit
            }
            Err(Error::NotConverged { last_iterate, .. }) if lenient => {
                converged.push(false);
                *last_iterate
            }
            Err(e) => return Err(e),
        };
        warm = Some(fit.coefficients.to_dense());
        fits.push(fit);
    }
    Ok((
        LassoPath {
            lambdas: lambdas.to_vec(),
            fits,
        },
        converged,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{fit, lambda_max, unit_penalties};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, p: usize) -> (SparseBinaryDesign, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..p).filter(|_| rng.gen_bool(0.35)).collect())
            .collect();
        let x = SparseBinaryDesign::from_rows(&rows, p).unwrap();
        let y = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        (x, y)
    }

    #[test]
    fn grid_shape() {
        let g = lambda_grid(2.0, 5, 1e-2);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 2.0);
        assert!((g[4] - 0.02).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(lambda_grid(3.0, 1, 0.1), vec![3.0]);
    }

    #[test]
    fn single_point_path_is_zero_fit() {
        let (x, y) = instance(1, 20, 6);
        let opts = LassoOptions {
            lambda_grid_size: 1,
            ..Default::default()
        };
        let path = fit_path(&x, &y, &unit_penalties(6), &opts).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(
            path.lambdas[0],
            lambda_max(&x, &y, &unit_penalties(6)).unwrap()
        );
        assert_eq!(path.fits[0].coefficients.nnz(), 0);
    }

    #[test]
    fn path_has_grid_size_fits() {
        let (x, y) = instance(2, 20, 6);
        let opts = LassoOptions {
            lambda_grid_size: 17,
            ..Default::default()
        };
        let path = fit_path(&x, &y, &unit_penalties(6), &opts).unwrap();
        assert_eq!(path.fits.len(), 17);
        assert_eq!(path.fits[0].coefficients.nnz(), 0);
    }

    #[test]
    fn warm_path_matches_cold_fits() {
        let (x, y) = instance(3, 20, 10);
        let pf = unit_penalties(10);
        let opts = LassoOptions {
            lambda_grid_size: 20,
            ..Default::default()
        };
        let path = fit_path(&x, &y, &pf, &opts).unwrap();
        for (lam, warm) in path.lambdas.iter().zip(&path.fits) {
            let cold = fit(&x, &y, *lam, &pf, &opts, None).unwrap();
            for j in 0..10 {
                let d = (cold.coefficients.get(j) - warm.coefficients.get(j)).abs();
                assert!(d < 1e-6, "lambda {lam} coef {j}: {d}");
            }
        }
    }

    #[test]
    fn increasing_grid_is_rejected() {
        let (x, y) = instance(4, 10, 3);
        assert!(
            fit_path_with_grid(&x, &y, &unit_penalties(3), &Default::default(), &[0.1, 0.2])
                .is_err()
        );
    }
}

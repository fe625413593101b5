use super::{
    check_dims, effective_penalty_factors, lambda_max_with, mean, soft_threshold, LassoFit,
    LassoOptions, SparseVector,
};
use crate::error::{config, Error, Result};
use crate::sparse::{ColumnIndex, SparseBinaryDesign};

/// Active-set sweeps between extrapolation attempts.
const ANDERSON_DEPTH: usize = 5;

/// Precomputed state shared by every lambda solved on one (X, y, pf).
pub(crate) struct Problem<'a> {
    x: &'a SparseBinaryDesign,
    cols: ColumnIndex,
    y: &'a [f64],
    pf: Vec<f64>,
    opts: &'a LassoOptions,
    n: f64,
    /// Curvature of each coordinate: (1/n) * ||x_j - mean(x_j)||^2 (uncentered without intercept).
    curvature: Vec<f64>,
    lambda_max: Option<f64>,
    y_constant: bool,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(
        x: &'a SparseBinaryDesign,
        y: &'a [f64],
        penalty_factors: &[f64],
        opts: &'a LassoOptions,
    ) -> Result<Self> {
        check_dims(x, y, penalty_factors)?;
        opts.validate()?;
        if y.is_empty() {
            return Err(config("cannot fit a lasso on zero rows"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("response contains non-finite values".into()));
        }
        let pf = effective_penalty_factors(x, penalty_factors, opts);
        let cols = x.column_index();
        let n = y.len() as f64;
        let curvature = (0..x.n_cols())
            .map(|j| {
                let c = cols.count(j) as f64;
                let s = x.scale(j);
                if opts.fit_intercept {
                    s * s * c * (n - c) / (n * n)
                } else {
                    s * s * c / n
                }
            })
            .collect();
        let lambda_max = if pf.iter().any(|&f| f > 0.0) {
            Some(lambda_max_with(x, y, &pf, opts.fit_intercept)?)
        } else {
            None
        };
        let y_constant = y.iter().all(|&v| v == y[0]);
        Ok(Problem {
            x,
            cols,
            y,
            pf,
            opts,
            n,
            curvature,
            lambda_max,
            y_constant,
        })
    }

    pub(crate) fn lambda_max(&self) -> Option<f64> {
        self.lambda_max
    }

    fn zero_fit(&self, lambda: f64) -> LassoFit {
        let mu = if self.opts.fit_intercept {
            mean(self.y)
        } else {
            0.0
        };
        LassoFit::intercept_only(mu, lambda, self.pf.clone())
    }

    pub(crate) fn solve(
        &self,
        lambda: f64,
        warm_start: Option<&[f64]>,
        mut observer: Option<&mut dyn FnMut(f64)>,
    ) -> Result<LassoFit> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(config(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        if self.opts.fit_intercept && self.y_constant {
            return Ok(self.zero_fit(lambda));
        }
        if let Some(lmax) = self.lambda_max {
            if lambda >= lmax {
                return Ok(self.zero_fit(lambda));
            }
        }

        let p = self.x.n_cols();
        let mut beta = match warm_start {
            Some(w) if w.len() == p => w.to_vec(),
            Some(w) => {
                return Err(Error::Structural(format!(
                    "warm start has {} coefficients, expected {p}",
                    w.len()
                )))
            }
            None => vec![0.0; p],
        };
        for (j, b) in beta.iter_mut().enumerate() {
            if self.curvature[j] == 0.0 {
                *b = 0.0;
            }
        }
        let fitted = self.x.dot(&beta)?;
        let mut resid: Vec<f64> = self.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();

        let mut sweeps = 0;
        let all: Vec<usize> = (0..p).collect();
        let mut active: Vec<usize> = Vec::new();
        loop {
            let change = self.sweep(&all, lambda, &mut beta, &mut resid);
            sweeps += 1;
            if let Some(obs) = observer.as_mut() {
                obs(self.objective(lambda, &beta, &resid));
            }
            if change < self.opts.tolerance {
                break;
            }
            if sweeps >= self.opts.max_iterations {
                return Err(self.not_converged(sweeps, lambda, change, &beta, &resid));
            }
            active.clear();
            active.extend((0..p).filter(|&j| beta[j] != 0.0));
            let mut history: Vec<Vec<f64>> = Vec::with_capacity(ANDERSON_DEPTH + 1);
            loop {
                let change = self.sweep(&active, lambda, &mut beta, &mut resid);
                sweeps += 1;
                history.push(active.iter().map(|&j| beta[j]).collect());
                if history.len() > ANDERSON_DEPTH {
                    self.extrapolate(&active, &history, lambda, &mut beta, &mut resid);
                    history.clear();
                }
                if let Some(obs) = observer.as_mut() {
                    obs(self.objective(lambda, &beta, &resid));
                }
                if change < self.opts.tolerance {
                    break;
                }
                if sweeps >= self.opts.max_iterations {
                    return Err(self.not_converged(sweeps, lambda, change, &beta, &resid));
                }
            }
        }
        Ok(self.package(lambda, &beta, &resid, sweeps))
    }

    /// Anderson extrapolation over the last few active-set iterates. The
    /// candidate replaces the current point only if it lowers the objective.
    fn extrapolate(
        &self,
        active: &[usize],
        history: &[Vec<f64>],
        lambda: f64,
        beta: &mut [f64],
        resid: &mut [f64],
    ) {
        let k = history.len() - 1;
        let diffs: Vec<Vec<f64>> = history
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
        let mut gram = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in a..k {
                let v: f64 = diffs[a].iter().zip(&diffs[b]).map(|(x, y)| x * y).sum();
                gram[a][b] = v;
                gram[b][a] = v;
            }
        }
        let Some(z) = solve_small(gram, vec![1.0; k]) else {
            return;
        };
        let total: f64 = z.iter().sum();
        if !total.is_finite() || total.abs() < 1e-300 {
            return;
        }
        let candidate: Vec<f64> = (0..active.len())
            .map(|m| (0..k).map(|a| z[a] / total * history[a + 1][m]).sum())
            .collect();
        if candidate.iter().any(|v| !v.is_finite()) {
            return;
        }
        let mut trial = self.y.to_vec();
        for (m, &j) in active.iter().enumerate() {
            let step = candidate[m] * self.x.scale(j);
            for &i in self.cols.rows_of(j) {
                trial[i] -= step;
            }
        }
        // coefficients outside the active set are zero during these sweeps
        let current: Vec<f64> = active.iter().map(|&j| beta[j]).collect();
        if self.active_objective(lambda, active, &candidate, &trial)
            < self.active_objective(lambda, active, &current, resid)
        {
            for (m, &j) in active.iter().enumerate() {
                beta[j] = candidate[m];
            }
            resid.copy_from_slice(&trial);
        }
    }

    fn active_objective(
        &self,
        lambda: f64,
        active: &[usize],
        values: &[f64],
        resid: &[f64],
    ) -> f64 {
        let mu = if self.opts.fit_intercept {
            mean(resid)
        } else {
            0.0
        };
        let rss: f64 = resid.iter().map(|r| (r - mu) * (r - mu)).sum();
        let penalty: f64 = active
            .iter()
            .zip(values)
            .map(|(&j, b)| self.pf[j] * b.abs())
            .sum();
        rss / (2.0 * self.n) + lambda * penalty
    }

    /// One cyclic pass over `coords`; returns the largest absolute coefficient change.
    fn sweep(&self, coords: &[usize], lambda: f64, beta: &mut [f64], resid: &mut [f64]) -> f64 {
        // The intercept is profiled out: it always equals the residual mean, so
        // the gradient uses residuals centered by their current mean.
        let mut rsum: f64 = if self.opts.fit_intercept {
            resid.iter().sum()
        } else {
            0.0
        };
        let mut max_change = 0.0f64;
        for &j in coords {
            let v = self.curvature[j];
            if v == 0.0 {
                continue;
            }
            let rows = self.cols.rows_of(j);
            let s = self.x.scale(j);
            let count = rows.len() as f64;
            let row_sum: f64 = rows.iter().map(|&i| resid[i]).sum();
            let grad = s * (row_sum - count * rsum / self.n) / self.n;
            let z = grad + v * beta[j];
            let updated = soft_threshold(z, lambda * self.pf[j]) / v;
            let delta = updated - beta[j];
            if delta != 0.0 {
                beta[j] = updated;
                let step = delta * s;
                for &i in rows {
                    resid[i] -= step;
                }
                if self.opts.fit_intercept {
                    rsum -= step * count;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    fn objective(&self, lambda: f64, beta: &[f64], resid: &[f64]) -> f64 {
        let mu = if self.opts.fit_intercept {
            mean(resid)
        } else {
            0.0
        };
        let rss: f64 = resid.iter().map(|r| (r - mu) * (r - mu)).sum();
        let penalty: f64 = beta.iter().zip(&self.pf).map(|(b, f)| f * b.abs()).sum();
        rss / (2.0 * self.n) + lambda * penalty
    }

    fn package(&self, lambda: f64, beta: &[f64], resid: &[f64], sweeps: usize) -> LassoFit {
        let intercept = if self.opts.fit_intercept {
            mean(resid)
        } else {
            0.0
        };
        LassoFit {
            intercept,
            coefficients: SparseVector::from_dense(beta),
            lambda,
            penalty_factors: self.pf.clone(),
            sweeps,
        }
    }

    fn not_converged(
        &self,
        sweeps: usize,
        lambda: f64,
        last_change: f64,
        beta: &[f64],
        resid: &[f64],
    ) -> Error {
        Error::NotConverged {
            iterations: sweeps,
            lambda,
            last_change,
            last_iterate: Box::new(self.package(lambda, beta, resid, sweeps)),
        }
    }
}

/// Gaussian elimination with partial pivoting and a small ridge; `None` when
/// the system is numerically singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    let scale = (0..k).map(|i| a[i][i]).fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1e-10 * scale;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let tail: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Fits the lasso at a single `lambda`, optionally warm-started from a previous fit.
pub fn fit(
    x: &SparseBinaryDesign,
    y: &[f64],
    lambda: f64,
    penalty_factors: &[f64],
    opts: &LassoOptions,
    warm_start: Option<&LassoFit>,
) -> Result<LassoFit> {
    let problem = Problem::new(x, y, penalty_factors, opts)?;
    let warm = warm_start.map(|f| f.coefficients.to_dense());
    problem.solve(lambda, warm.as_deref(), None)
}

/// Like [`fit`] but also returns the objective value after every sweep.
pub fn fit_traced(
    x: &SparseBinaryDesign,
    y: &[f64],
    lambda: f64,
    penalty_factors: &[f64],
    opts: &LassoOptions,
) -> Result<(LassoFit, Vec<f64>)> {
    let problem = Problem::new(x, y, penalty_factors, opts)?;
    let mut trace = Vec::new();
    let fit = problem.solve(lambda, None, Some(&mut |obj| trace.push(obj)))?;
    Ok((fit, trace))
}

/// Largest violation of the lasso optimality conditions at `fit`:
/// `|g_j - lambda*pf_j*sgn(beta_j)|` on the support and `(|g_j| - lambda*pf_j)+`
/// off it, where `g = X'r / n`. Also includes `|mean(r)|` when an intercept is fit.
pub fn kkt_violation(
    x: &SparseBinaryDesign,
    y: &[f64],
    fit: &LassoFit,
    fit_intercept: bool,
) -> Result<f64> {
    let pred = fit.predict(x)?;
    let resid: Vec<f64> = y.iter().zip(&pred).map(|(y, p)| y - p).collect();
    let n = y.len() as f64;
    let grad = x.transpose_dot(&resid)?;
    let mut worst = if fit_intercept {
        mean(&resid).abs()
    } else {
        0.0
    };
    for (j, g) in grad.iter().enumerate() {
        let g = g / n;
        let bound = fit.lambda * fit.penalty_factors[j];
        let b = fit.coefficients.get(j);
        let v = if b != 0.0 {
            (g - bound * b.signum()).abs()
        } else {
            (g.abs() - bound).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

//! Weighted Lasso by cyclic coordinate descent.

use crate::error::{invalid, shape, Error, Result};
use crate::numerics::Matrix;

pub const MAX_SWEEPS: usize = 100_000;
pub const DEFAULT_TOL: f64 = 1e-10;

/// `diag(X^T X / n)`.
pub fn lasso_weights(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| (0..x.rows()).map(|i| x[(i, j)] * x[(i, j)]).sum::<f64>() / n)
        .collect()
}

/// `(1/2n) ||y − Xβ||² + lam Σ_j weights_j |β_j|`.
pub fn lasso_objective(x: &Matrix, y: &Matrix, weights: &[f64], lam: f64, beta: &[f64]) -> f64 {
    let n = x.rows() as f64;
    let mut fit = 0.0;
    for i in 0..x.rows() {
        let pred: f64 = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        let r = y[(i, 0)] - pred;
        fit += r * r;
    }
    let pen: f64 = weights.iter().zip(beta).map(|(w, b)| w * b.abs()).sum();
    fit / (2.0 * n) + lam * pen
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solves `min_β (1/2n) ||y − Xβ||² + lam Σ_j weights_j |β_j|`.
///
/// Each coordinate is minimized exactly,
/// `β_j = S(X_j^T r_j, n·lam·weights_j) / ||X_j||²`, with `r_j` the residual
/// without coordinate `j`. Sweeps stop once no coordinate moves by `tol` or
/// more; after [`MAX_SWEEPS`] the last iterate is returned inside
/// [`Error::NotConverged`].
pub fn lasso_coordinate_descent(
    x: &Matrix,
    y: &Matrix,
    weights: &[f64],
    lam: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    lasso_cd(x, y, weights, lam, tol, None)
}

/// As [`lasso_coordinate_descent`], also returning the objective after every sweep.
pub fn lasso_coordinate_descent_traced(
    x: &Matrix,
    y: &Matrix,
    weights: &[f64],
    lam: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut trace = Vec::new();
    let beta = lasso_cd(x, y, weights, lam, tol, Some(&mut trace))?;
    Ok((beta, trace))
}

fn lasso_cd(
    x: &Matrix,
    y: &Matrix,
    weights: &[f64],
    lam: f64,
    tol: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Vec<f64>> {
    let (n, d) = x.shape();
    if y.shape() != (n, 1) {
        return Err(shape(format!("y is {:?}, expected {n}x1", y.shape())));
    }
    if weights.len() != d {
        return Err(shape(format!("{} weights for {d} columns", weights.len())));
    }
    if weights.iter().any(|w| w.is_nan() || *w < 0.0)
        || lam.is_nan()
        || lam < 0.0
        || tol.is_nan()
        || tol <= 0.0
    {
        return Err(invalid("weights and lam must be >= 0, tol > 0"));
    }
    let col_sq: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)] * x[(i, j)]).sum())
        .collect();
    if let Some(j) = (0..d).find(|&j| col_sq[j] == 0.0 && weights[j] > 0.0) {
        return Err(invalid(format!(
            "column {j} is zero but carries a positive weight"
        )));
    }
    let nf = n as f64;
    let mut beta = vec![0.0; d];
    let mut resid: Vec<f64> = (0..n).map(|i| y[(i, 0)]).collect();
    let mut last_change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        last_change = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho: f64 = (0..n)
                .map(|i| x[(i, j)] * (resid[i] + x[(i, j)] * old))
                .sum();
            let new = soft_threshold(rho, nf * lam * weights[j]) / col_sq[j];
            if new != old {
                for (i, r) in resid.iter_mut().enumerate() {
                    *r -= x[(i, j)] * (new - old);
                }
                beta[j] = new;
                last_change = last_change.max((new - old).abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(lasso_objective(x, y, weights, lam, &beta));
        }
        if last_change < tol {
            return Ok(beta);
        }
    }
    Err(Error::NotConverged {
        sweeps: MAX_SWEEPS,
        last_change,
        iterate: beta,
    })
}

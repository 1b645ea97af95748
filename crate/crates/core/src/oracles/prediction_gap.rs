//! Prediction gaps between minimizers of the exact smoothed loss, the
//! effective loss, and the interpolating predictor, for the diagonal network.

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{ModelKind, ModelSpec, ParamVector};
use crate::numerics::{Matrix, RngStream};
use crate::oracles::descent::{minimize_gd, GdOptions, GdResult};
use crate::regularizers::{effective_loss_grad, exact_smoothed_diagonal_full, reg_lasso};

pub const RESTARTS: usize = 3;
pub const GRAD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionGaps {
    pub sigmas: Vec<f64>,
    /// `||Φ(w_σ) − y||²` with `w_σ` minimizing the exact smoothed loss.
    pub gaps_to_interp: Vec<f64>,
    /// `||Φ(w_eff) − Φ(w_σ)||²` with `w_eff` minimizing the effective loss.
    pub gaps_eff_vs_sigma: Vec<f64>,
    /// Per σ: some minimization stopped above the gradient tolerance.
    pub flagged: Vec<bool>,
}

fn best_of(runs: Vec<GdResult>) -> GdResult {
    runs.into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one restart")
}

fn sq_dist(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).frobenius_sq()
}

/// For each σ, minimizes the exact smoothed loss and the effective loss by
/// gradient descent from the same [`RESTARTS`] seeded starting points (at most
/// `optimizer_budget` iterations each) and reports squared prediction
/// distances. The σ points run in parallel and are independent of each other.
pub fn prediction_gap_probe(
    model: &ModelSpec,
    loss: &LossSpec,
    sigma_grid: &[f64],
    optimizer_budget: usize,
    rng: &mut RngStream,
) -> Result<PredictionGaps> {
    if *model.kind() != ModelKind::Diagonal {
        return Err(invalid("the prediction-gap probe needs the diagonal model"));
    }
    let LossSpec::Square { targets } = loss else {
        return Err(invalid("the prediction-gap probe needs the square loss"));
    };
    if targets.cols() != 1 {
        return Err(invalid(
            "the prediction-gap probe needs a single target column",
        ));
    }
    let y_row = targets.transpose();
    let inits: Vec<ParamVector> = (0..RESTARTS).map(|_| model.scaled_init(rng)).collect();
    let opts = GdOptions {
        max_iters: optimizer_budget,
        grad_tol: GRAD_TOL,
        ..GdOptions::default()
    };

    let probe = |sigma: f64| -> Result<(f64, f64, bool)> {
        let exact = |w: &ParamVector| {
            Ok((
                exact_smoothed_diagonal_full(model, loss, w, sigma)?.total(),
                effective_loss_grad(model, loss, w, sigma)?,
            ))
        };
        let eff = |w: &ParamVector| {
            Ok((
                reg_lasso(model, loss, w, sigma)?.total(),
                effective_loss_grad(model, loss, w, sigma)?,
            ))
        };
        let runs_sigma = inits
            .iter()
            .map(|w0| minimize_gd(exact, w0, &opts))
            .collect::<Result<Vec<_>>>()?;
        let runs_eff = inits
            .iter()
            .map(|w0| minimize_gd(eff, w0, &opts))
            .collect::<Result<Vec<_>>>()?;
        let (ws, we) = (best_of(runs_sigma), best_of(runs_eff));
        let phi_s = model.forward(&ws.w)?;
        let phi_e = model.forward(&we.w)?;
        Ok((
            sq_dist(&phi_s, &y_row),
            sq_dist(&phi_e, &phi_s),
            !(ws.converged && we.converged),
        ))
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<Result<(f64, f64, bool)>> = {
        use rayon::prelude::*;
        sigma_grid.par_iter().map(|&s| probe(s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<(f64, f64, bool)>> = sigma_grid.iter().map(|&s| probe(s)).collect();

    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PredictionGaps {
        sigmas: sigma_grid.to_vec(),
        gaps_to_interp: rows.iter().map(|r| r.0).collect(),
        gaps_eff_vs_sigma: rows.iter().map(|r| r.1).collect(),
        flagged: rows.iter().map(|r| r.2).collect(),
    })
}

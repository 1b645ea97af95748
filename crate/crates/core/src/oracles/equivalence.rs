//! Comparisons between minimized closed-form penalties and the convex problems
//! they are equivalent to.

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{diagonal_beta, ModelSpec, ParamVector};
use crate::numerics::{Matrix, RngStream};
use crate::oracles::descent::{minimize_gd, GdOptions};
use crate::oracles::lasso::{
    lasso_coordinate_descent, lasso_objective, lasso_weights, DEFAULT_TOL,
};
use crate::oracles::nuclear::{factored_penalty_minimize, nuclear_penalty_closed_form};
use crate::regularizers::{effective_loss_grad, reg_group_lasso, reg_lasso};

#[derive(Clone, Debug)]
pub struct LassoEquivalence {
    pub beta_gd: Vec<f64>,
    pub beta_cd: Vec<f64>,
    /// `max_j |β_GD − β_CD|`.
    pub linf: f64,
    /// `|min_w reg_lasso − lasso objective at β_CD|`.
    pub objective_gap: f64,
    /// The best restart reached the gradient tolerance.
    pub converged: bool,
}

/// Minimizes the diagonal-network effective loss by gradient descent from
/// `restarts` random starts, maps the best point to `β = w1∘w1 − w2∘w2`, and
/// compares it with the weighted Lasso solved by coordinate descent with
/// `lam = 2σ²` and weights `diag(X^T X / n)`.
pub fn lasso_equivalence(
    x: &Matrix,
    y: &Matrix,
    sigma: f64,
    restarts: usize,
    max_iters: usize,
    rng: &mut RngStream,
) -> Result<LassoEquivalence> {
    if restarts == 0 {
        return Err(invalid("need at least one restart"));
    }
    let model = ModelSpec::diagonal(x.clone())?;
    let loss = LossSpec::square(y.clone())?;
    let opts = GdOptions {
        max_iters,
        grad_tol: 1e-10,
        ..GdOptions::default()
    };
    let f = |w: &ParamVector| {
        Ok((
            reg_lasso(&model, &loss, w, sigma)?.total(),
            effective_loss_grad(&model, &loss, w, sigma)?,
        ))
    };
    let mut best = None;
    for _ in 0..restarts {
        let w0 = model.scaled_init(rng);
        let r = minimize_gd(f, &w0, &opts)?;
        if best
            .as_ref()
            .is_none_or(|b: &crate::oracles::GdResult| r.value < b.value)
        {
            best = Some(r);
        }
    }
    let best = best.expect("restarts > 0");
    let weights = lasso_weights(x);
    let lam = 2.0 * sigma * sigma;
    let beta_cd = lasso_coordinate_descent(x, y, &weights, lam, DEFAULT_TOL)?;
    let beta_gd = diagonal_beta(&best.w);
    let linf = beta_gd
        .iter()
        .zip(&beta_cd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let objective_gap = (best.value - lasso_objective(x, y, &weights, lam, &beta_cd)).abs();
    Ok(LassoEquivalence {
        beta_gd,
        beta_cd,
        linf,
        objective_gap,
        converged: best.converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuclearEquivalence {
    pub factored: f64,
    pub closed_form: f64,
    pub relative_gap: f64,
}

/// Factored-penalty minimum against `√d2 ||X||_F ||M X^T||_*` for `M` of shape `d2 x d0`.
pub fn nuclear_equivalence(
    m: &Matrix,
    x: &Matrix,
    inner_dim: usize,
    rng: &mut RngStream,
) -> Result<NuclearEquivalence> {
    let d2 = m.rows();
    let factored = factored_penalty_minimize(m, x, d2, inner_dim, rng)?;
    let closed_form = nuclear_penalty_closed_form(m, x, d2)?;
    let relative_gap = if closed_form == 0.0 {
        factored.abs()
    } else {
        (factored - closed_form).abs() / closed_form
    };
    Ok(NuclearEquivalence {
        factored,
        closed_form,
        relative_gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupEquivalence {
    /// `reg_group_lasso` penalty at the balanced point.
    pub balanced_penalty: f64,
    /// `(σ²/n) Σ_j ||X_j||_F ||X_j β_j||`.
    pub group_norm_penalty: f64,
    pub relative_gap: f64,
    /// Smallest penalty over random rescalings `v_j → t v_j`, `w_j → w_j / t`.
    pub min_rescaled_penalty: f64,
}

/// Puts `β` (stacked group coefficients) on the balanced factorization
/// `v_j² = ||X_j β_j|| / ||X_j||_F`, `w_j = β_j / v_j` and compares the
/// group-factored penalty there with the group-Lasso form. Random rescalings
/// probe that the balanced point is the minimum over factorizations.
pub fn group_equivalence(
    x: &Matrix,
    groups: usize,
    beta: &[f64],
    sigma: f64,
    rng: &mut RngStream,
) -> Result<GroupEquivalence> {
    let model = ModelSpec::group_factored(x.clone(), groups)?;
    if beta.len() != x.cols() {
        return Err(invalid(format!(
            "beta has {} entries for {} columns",
            beta.len(),
            x.cols()
        )));
    }
    let k = x.cols() / groups;
    let n = x.rows() as f64;
    let loss = LossSpec::square(Matrix::zeros(x.rows(), 1))?;
    let mut blocks = Vec::with_capacity(2 * groups);
    let mut closed = 0.0;
    for j in 0..groups {
        let xj = x.column_block(j * k, k);
        let bj = Matrix::column(&beta[j * k..(j + 1) * k]);
        let fit = xj.matmul(&bj).frobenius_sq().sqrt();
        let xn = xj.frobenius_sq().sqrt();
        closed += xn * fit;
        let v = if fit == 0.0 { 0.0 } else { (fit / xn).sqrt() };
        let wj = if v == 0.0 {
            Matrix::zeros(k, 1)
        } else {
            bj.scale(1.0 / v)
        };
        blocks.push(Matrix::from_vec(1, 1, vec![v])?);
        blocks.push(wj);
    }
    let balanced = ParamVector::new(blocks);
    let balanced_penalty = reg_group_lasso(&model, &loss, &balanced, sigma)?.penalty();
    let group_norm_penalty = sigma * sigma / n * closed;
    let relative_gap = if group_norm_penalty == 0.0 {
        balanced_penalty.abs()
    } else {
        (balanced_penalty - group_norm_penalty).abs() / group_norm_penalty
    };
    let mut min_rescaled = f64::INFINITY;
    for _ in 0..100 {
        let mut w = balanced.clone();
        for j in 0..groups {
            let t = (0.5 * rng.standard_normal()).exp();
            w.blocks_mut()[2 * j] = w.block(2 * j).scale(t);
            w.blocks_mut()[2 * j + 1] = w.block(2 * j + 1).scale(1.0 / t);
        }
        min_rescaled = min_rescaled.min(reg_group_lasso(&model, &loss, &w, sigma)?.penalty());
    }
    Ok(GroupEquivalence {
        balanced_penalty,
        group_norm_penalty,
        relative_gap,
        min_rescaled_penalty: min_rescaled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_gaussian_matrix;

    #[test]
    fn single_column_groups_reduce_to_weighted_l1() {
        let mut rng = RngStream::new(2, 0);
        let x = sample_gaussian_matrix(&mut rng, 6, 3, 1.0).unwrap();
        let beta = [0.5, -1.0, 0.0];
        let g = group_equivalence(&x, 3, &beta, 0.1, &mut rng).unwrap();
        let w = lasso_weights(&x);
        let l1: f64 = w.iter().zip(beta).map(|(a, b)| a * b.abs()).sum();
        assert!((g.group_norm_penalty - 0.01 * l1).abs() < 1e-15);
        assert!(g.relative_gap < 1e-12);
        assert!(g.min_rescaled_penalty >= g.balanced_penalty * (1.0 - 1e-12));
    }
}

//! Second-order effective regularizers and exact smoothed losses.
//!
//! The generic route evaluates `R(w) + (σ²/2) Σ_a h_a ||row_a(DΦ)||²` from the
//! materialized Jacobian and the loss Hessian diagonal `h`. The closed forms
//! below give the same quantity per model kind under the square loss, and are
//! what training logs and minimization oracles use.

use std::fmt;

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{ModelKind, ModelSpec, ParamVector};
use crate::numerics::{dot, frobenius_sq, Matrix};

/// Stable identifiers of the evaluation routes, as written to CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FormulaId {
    Generic,
    Lasso,
    Nuclear,
    Group,
    Relu1h,
    DeepLinear,
    Exact2l,
    ExactDiag,
    Margin,
    /// Monte-Carlo estimate rather than a formula.
    MonteCarlo,
}

impl FormulaId {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormulaId::Generic => "generic",
            FormulaId::Lasso => "lasso",
            FormulaId::Nuclear => "nuclear",
            FormulaId::Group => "group",
            FormulaId::Relu1h => "relu1h",
            FormulaId::DeepLinear => "deep_linear",
            FormulaId::Exact2l => "exact2l",
            FormulaId::ExactDiag => "exactdiag",
            FormulaId::Margin => "margin",
            FormulaId::MonteCarlo => "mc",
        }
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A penalty value (the part added on top of `R(w)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegValue {
    pub value: f64,
    pub formula_id: FormulaId,
    pub sigma: f64,
    /// The Jacobian was evaluated at a ReLU kink.
    pub at_kink: bool,
}

/// `R(w)` and the penalty evaluated with it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveLoss {
    pub risk: f64,
    pub reg: RegValue,
}

impl EffectiveLoss {
    pub fn total(&self) -> f64 {
        self.risk + self.reg.value
    }

    pub fn penalty(&self) -> f64 {
        self.reg.value
    }
}

fn pack(risk: f64, value: f64, formula_id: FormulaId, sigma: f64, at_kink: bool) -> EffectiveLoss {
    EffectiveLoss {
        risk,
        reg: RegValue {
            value,
            formula_id,
            sigma,
            at_kink,
        },
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(invalid(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    Ok(())
}

fn require_square(loss: &LossSpec, what: &str) -> Result<()> {
    if !loss.is_square() {
        return Err(invalid(format!("{what} is defined for the square loss")));
    }
    Ok(())
}

fn require_kind(model: &ModelSpec, ok: bool, what: &str) -> Result<()> {
    if !ok {
        return Err(invalid(format!(
            "{what} does not apply to a {} model",
            model.kind()
        )));
    }
    Ok(())
}

fn risk(model: &ModelSpec, loss: &LossSpec, w: &ParamVector) -> Result<f64> {
    loss.loss(&model.forward(w)?)
}

/// `R(w) + (σ²/2) D²L(Φ(w))[DΦ DΦ^T]` from the analytic Jacobian.
pub fn effective_loss_generic(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    check_sigma(sigma)?;
    let phi = model.forward(w)?;
    let r = loss.loss(&phi)?;
    let h = loss.loss_hess_diag(&phi)?;
    let jac = model.jacobian(w)?;
    let trace: f64 = h
        .iter()
        .enumerate()
        .map(|(a, ha)| {
            let row = jac.matrix.row(a);
            ha * dot(row, row)
        })
        .sum();
    Ok(pack(
        r,
        0.5 * sigma * sigma * trace,
        FormulaId::Generic,
        sigma,
        jac.at_kink,
    ))
}

/// Squared column norms `||X_{·j}||²`.
fn column_norms_sq(x: &Matrix) -> Vec<f64> {
    let mut c = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (cj, v) in c.iter_mut().zip(x.row(i)) {
            *cj += v * v;
        }
    }
    c
}

fn row_norms_sq(x: &Matrix) -> Vec<f64> {
    (0..x.rows()).map(|i| dot(x.row(i), x.row(i))).collect()
}

/// Diagonal network: `R + 2σ² diag(X^T X / n)^T (w1∘w1 + w2∘w2)`.
pub fn reg_lasso(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    check_sigma(sigma)?;
    require_kind(
        model,
        *model.kind() == ModelKind::Diagonal,
        "the Lasso regularizer",
    )?;
    require_square(loss, "the Lasso regularizer")?;
    let r = risk(model, loss, w)?;
    let n = model.n() as f64;
    let c = column_norms_sq(model.data());
    let (w1, w2) = (w.block(0).as_slice(), w.block(1).as_slice());
    let s: f64 = (0..c.len())
        .map(|j| c[j] / n * (w1[j] * w1[j] + w2[j] * w2[j]))
        .sum();
    Ok(pack(
        r,
        2.0 * sigma * sigma * s,
        FormulaId::Lasso,
        sigma,
        false,
    ))
}

/// Two-layer linear: `R + (σ²/2n)[d2 ||W1 X^T||² + ||W2||² ||X||²]`.
pub fn reg_nuclear_factored(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    check_sigma(sigma)?;
    require_kind(
        model,
        *model.kind() == ModelKind::TwoLayerLinear,
        "the factored nuclear regularizer",
    )?;
    require_square(loss, "the factored nuclear regularizer")?;
    let r = risk(model, loss, w)?;
    let (x, n, d2) = (model.data(), model.n() as f64, model.out_dim() as f64);
    let h = w.block(0).matmul_t(x);
    let p = d2 * h.frobenius_sq() + w.block(1).frobenius_sq() * x.frobenius_sq();
    Ok(pack(
        r,
        sigma * sigma / (2.0 * n) * p,
        FormulaId::Nuclear,
        sigma,
        false,
    ))
}

/// Group-factored: `R + (σ²/2n) Σ_j [||X_j w_j||² + v_j² ||X_j||_F²]`.
pub fn reg_group_lasso(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    check_sigma(sigma)?;
    let ModelKind::GroupFactored { groups } = *model.kind() else {
        return Err(invalid(format!(
            "the group Lasso regularizer does not apply to a {} model",
            model.kind()
        )));
    };
    require_square(loss, "the group Lasso regularizer")?;
    let r = risk(model, loss, w)?;
    let (x, n, k) = (model.data(), model.n() as f64, model.dims()[0]);
    let mut p = 0.0;
    for j in 0..groups {
        let xj = x.column_block(j * k, k);
        let v = w.block(2 * j)[(0, 0)];
        p += xj.matmul(w.block(2 * j + 1)).frobenius_sq() + v * v * xj.frobenius_sq();
    }
    Ok(pack(
        r,
        sigma * sigma / (2.0 * n) * p,
        FormulaId::Group,
        sigma,
        false,
    ))
}

/// One-hidden-layer ReLU:
/// `R + (σ²/2n)[d2 ||(W1X^T)_+||² + Σ_{j,i} ||(W2)_{·j}||² ((W1X^T)_+^0)_{ji} ||X_{i·}||²]`.
///
/// The activation pattern is frozen at `w`. With a single output (`d2 = 1`)
/// the first term is the plain `||(W1X^T)_+||²`.
pub fn reg_relu_onehidden(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    check_sigma(sigma)?;
    require_kind(
        model,
        *model.kind() == ModelKind::OneHiddenRelu,
        "the one-hidden-layer ReLU regularizer",
    )?;
    require_square(loss, "the one-hidden-layer ReLU regularizer")?;
    model.check_params(w)?;
    let r = risk(model, loss, w)?;
    let (x, n, d2) = (model.data(), model.n() as f64, model.out_dim() as f64);
    let (h, mask) = model.first_layer(w);
    let at_kink = h.as_slice().contains(&0.0);
    let active = h.map(|v| v.max(0.0)).frobenius_sq();
    let w2_cols = column_norms_sq(w.block(1));
    let x_rows = row_norms_sq(x);
    let mut cross = 0.0;
    for (j, cj) in w2_cols.iter().enumerate() {
        for (i, xi) in x_rows.iter().enumerate() {
            cross += cj * mask[(j, i)] * xi;
        }
    }
    let p = d2 * active + cross;
    Ok(pack(
        r,
        sigma * sigma / (2.0 * n) * p,
        FormulaId::Relu1h,
        sigma,
        at_kink,
    ))
}

/// `W_{to-1} ... W_from` (0-based layers), identity of width `d_from` when empty.
fn chain_product(w: &ParamVector, dims: &[usize], from: usize, to: usize) -> Matrix {
    let mut p = Matrix::identity(dims[from]);
    for j in from..to {
        p = w.block(j).matmul(&p);
    }
    p
}

struct DeepTerms {
    /// `W_M ... W_{j+1}` per layer `j`.
    after: Vec<Matrix>,
    /// `W_{j-1} ... W_1 X^T` per layer `j`.
    before: Vec<Matrix>,
}

fn deep_terms(model: &ModelSpec, w: &ParamVector) -> DeepTerms {
    let dims = model.dims();
    let m = dims.len() - 1;
    let xt = model.data().transpose();
    let after = (0..m).map(|j| chain_product(w, dims, j + 1, m)).collect();
    let before = (0..m)
        .map(|j| chain_product(w, dims, 0, j).matmul(&xt))
        .collect();
    DeepTerms { after, before }
}

/// Deep linear layer-wise regularizer:
/// `R + (σ²/2n) Σ_j ||W_M⋯W_{j+1}||² ||W_{j-1}⋯W_1 X^T||²`.
///
/// The empty product for the last layer is `I_{d_M}` (contributing `d_M`),
/// and for the first layer the trailing factor is `X^T` itself.
pub fn reg_deep_linear(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    check_sigma(sigma)?;
    require_kind(
        model,
        matches!(
            model.kind(),
            ModelKind::DeepLinear | ModelKind::TwoLayerLinear
        ),
        "the deep linear regularizer",
    )?;
    require_square(loss, "the deep linear regularizer")?;
    let r = risk(model, loss, w)?;
    let t = deep_terms(model, w);
    let p: f64 = t
        .after
        .iter()
        .zip(&t.before)
        .map(|(a, b)| a.frobenius_sq() * b.frobenius_sq())
        .sum();
    let n = model.n() as f64;
    Ok(pack(
        r,
        sigma * sigma / (2.0 * n) * p,
        FormulaId::DeepLinear,
        sigma,
        false,
    ))
}

/// Exact `E[L(Φ(w + σε))]` for the two-layer linear network under full
/// perturbation:
/// `R + (σ²/2n)[||W2||²||X||² + d2 ||X W1^T||²] + (σ⁴/2n) d1 d2 ||X||²`.
pub fn exact_smoothed_two_layer_full(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    let second = reg_nuclear_factored(model, loss, w, sigma)?;
    let (n, d1, d2) = (
        model.n() as f64,
        model.dims()[1] as f64,
        model.dims()[2] as f64,
    );
    let quartic = sigma.powi(4) / (2.0 * n) * d1 * d2 * model.data().frobenius_sq();
    Ok(pack(
        second.risk,
        second.reg.value + quartic,
        FormulaId::Exact2l,
        sigma,
        false,
    ))
}

/// Exact `E[L(Φ(w + σε))]` for the diagonal network under full perturbation:
/// `R + 2σ² diag(X^T X/n)^T (w1∘w1 + w2∘w2) + (2σ⁴/n) ||X||²`.
///
/// Per coordinate `Var((w + σe)²) = 4w²σ² + 2σ⁴`, the `σ² e²` means of the
/// two halves cancel, and the square loss only sees the second moment.
pub fn exact_smoothed_diagonal_full(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    let second = reg_lasso(model, loss, w, sigma)?;
    let n = model.n() as f64;
    let quartic = 2.0 * sigma.powi(4) / n * model.data().frobenius_sq();
    Ok(pack(
        second.risk,
        second.reg.value + quartic,
        FormulaId::ExactDiag,
        sigma,
        false,
    ))
}

/// `min_i { y_i Φ(w)_i - (σ²/2) ||DΦ(w)_i||² }` for a single-output logistic setup.
pub fn margin_objective(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    let LossSpec::Logistic { labels } = loss else {
        return Err(invalid("the margin objective needs logistic labels"));
    };
    if model.out_dim() != 1 || labels.len() != model.n() {
        return Err(invalid("the margin objective needs one output per sample"));
    }
    let phi = model.forward(w)?;
    let jac = model.jacobian(w)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let row = jac.matrix.row(i);
            y * phi[(0, i)] - 0.5 * sigma * sigma * dot(row, row)
        })
        .fold(f64::INFINITY, f64::min))
}

/// Effective loss through the closed form for the model kind when the loss is
/// square, otherwise through the Jacobian.
pub fn effective_loss(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<EffectiveLoss> {
    if !loss.is_square() {
        return effective_loss_generic(model, loss, w, sigma);
    }
    match model.kind() {
        ModelKind::Diagonal => reg_lasso(model, loss, w, sigma),
        ModelKind::TwoLayerLinear => reg_nuclear_factored(model, loss, w, sigma),
        ModelKind::DeepLinear => reg_deep_linear(model, loss, w, sigma),
        ModelKind::OneHiddenRelu => reg_relu_onehidden(model, loss, w, sigma),
        ModelKind::GroupFactored { .. } => reg_group_lasso(model, loss, w, sigma),
        ModelKind::DeepRelu => effective_loss_generic(model, loss, w, sigma),
    }
}

/// Gradient of `R(w)`.
pub fn risk_grad(model: &ModelSpec, loss: &LossSpec, w: &ParamVector) -> Result<ParamVector> {
    let phi = model.forward(w)?;
    model.vjp(w, &loss.loss_grad(&phi)?)
}

/// Gradient of the square-loss effective loss for every kind with a closed form
/// (all but `deep_relu`). ReLU kinds use the frozen activation pattern.
pub fn effective_loss_grad(
    model: &ModelSpec,
    loss: &LossSpec,
    w: &ParamVector,
    sigma: f64,
) -> Result<ParamVector> {
    check_sigma(sigma)?;
    require_square(loss, "the effective loss gradient")?;
    let mut g = risk_grad(model, loss, w)?;
    let x = model.data();
    let n = model.n() as f64;
    let s2 = sigma * sigma;
    match *model.kind() {
        ModelKind::Diagonal => {
            let c = column_norms_sq(x);
            for b in 0..2 {
                let wb = w.block(b).clone();
                let gb = &mut g.blocks_mut()[b];
                for (j, cj) in c.iter().enumerate() {
                    gb[(j, 0)] += 4.0 * s2 * cj / n * wb[(j, 0)];
                }
            }
        }
        ModelKind::GroupFactored { groups } => {
            let k = model.dims()[0];
            for j in 0..groups {
                let xj = x.column_block(j * k, k);
                let v = w.block(2 * j)[(0, 0)];
                let gw = xj.t_matmul(&xj.matmul(w.block(2 * j + 1))).scale(s2 / n);
                g.blocks_mut()[2 * j][(0, 0)] += s2 / n * v * xj.frobenius_sq();
                g.blocks_mut()[2 * j + 1].axpy(1.0, &gw);
            }
        }
        ModelKind::OneHiddenRelu => {
            let d2 = model.out_dim() as f64;
            let (h, mask) = model.first_layer(w);
            let active = h.map(|v| v.max(0.0));
            // d/dW1 of d2 ||(W1 X^T)_+||²
            let g1 = active.matmul(x).scale(s2 / n * d2);
            let x_rows = row_norms_sq(x);
            let weights: Vec<f64> = (0..mask.rows())
                .map(|j| dot(mask.row(j), &x_rows))
                .collect();
            let w2 = w.block(1);
            let g2 = Matrix::from_fn(w2.rows(), w2.cols(), |o, j| {
                s2 / n * w2[(o, j)] * weights[j]
            });
            g.blocks_mut()[0].axpy(1.0, &g1);
            g.blocks_mut()[1].axpy(1.0, &g2);
        }
        ModelKind::TwoLayerLinear | ModelKind::DeepLinear => {
            let dims = model.dims();
            let m = dims.len() - 1;
            let t = deep_terms(model, w);
            let a: Vec<f64> = t.after.iter().map(frobenius_sq).collect();
            let b: Vec<f64> = t.before.iter().map(frobenius_sq).collect();
            let scale = s2 / (2.0 * n);
            for k in 0..m {
                let mut gk = Matrix::zeros(dims[k + 1], dims[k]);
                for j in 0..m {
                    if j < k {
                        // A_j = A_k W_k P with P = W_{k-1}⋯W_{j+1}
                        let p = chain_product(w, dims, j + 1, k);
                        let d = t.after[k].t_matmul(&t.after[j]).matmul_t(&p);
                        gk.axpy(2.0 * b[j], &d);
                    } else if j > k {
                        // B_j = P W_k B_k with P = W_{j-1}⋯W_{k+1}
                        let p = chain_product(w, dims, k + 1, j);
                        let d = p.t_matmul(&t.before[j]).matmul_t(&t.before[k]);
                        gk.axpy(2.0 * a[j], &d);
                    }
                }
                g.blocks_mut()[k].axpy(scale, &gk);
            }
        }
        ModelKind::DeepRelu => {
            return Err(invalid(
                "no closed-form effective loss gradient for deep_relu",
            ));
        }
    }
    Ok(g)
}

//! Central finite differences.

use crate::error::{invalid, Result};
use crate::losses::LossSpec;
use crate::models::{ModelSpec, ParamVector};
use crate::numerics::Matrix;

/// `(Φ(w + h e_k) − Φ(w − h e_k)) / 2h` for every flattened parameter `k`,
/// laid out like [`ModelSpec::jacobian`] (row `o·n + i`).
pub fn finite_diff_jacobian(model: &ModelSpec, w: &ParamVector, h: f64) -> Result<Matrix> {
    check_h(h)?;
    model.check_params(w)?;
    let shapes = w.shapes();
    let base = w.flatten();
    let rows = model.out_dim() * model.n();
    let mut jac = Matrix::zeros(rows, base.len());
    let mut probe = base.clone();
    for k in 0..base.len() {
        probe[k] = base[k] + h;
        let plus = model.forward(&ParamVector::unflatten(&shapes, &probe)?)?;
        probe[k] = base[k] - h;
        let minus = model.forward(&ParamVector::unflatten(&shapes, &probe)?)?;
        probe[k] = base[k];
        for (a, (p, m)) in plus.as_slice().iter().zip(minus.as_slice()).enumerate() {
            jac[(a, k)] = (p - m) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Central-difference gradient of a scalar function of the parameters.
pub fn finite_diff_gradient(
    f: impl Fn(&ParamVector) -> Result<f64>,
    w: &ParamVector,
    h: f64,
) -> Result<ParamVector> {
    check_h(h)?;
    let shapes = w.shapes();
    let base = w.flatten();
    let mut probe = base.clone();
    let mut g = vec![0.0; base.len()];
    for k in 0..base.len() {
        probe[k] = base[k] + h;
        let p = f(&ParamVector::unflatten(&shapes, &probe)?)?;
        probe[k] = base[k] - h;
        let m = f(&ParamVector::unflatten(&shapes, &probe)?)?;
        probe[k] = base[k];
        g[k] = (p - m) / (2.0 * h);
    }
    ParamVector::unflatten(&shapes, &g)
}

/// Central-difference `D L(phi)`.
pub fn finite_diff_loss_grad(loss: &LossSpec, phi: &Matrix, h: f64) -> Result<Matrix> {
    check_h(h)?;
    let mut probe = phi.clone();
    let mut g = Matrix::zeros(phi.rows(), phi.cols());
    for a in 0..phi.len() {
        let v = phi.as_slice()[a];
        probe.as_mut_slice()[a] = v + h;
        let p = loss.loss(&probe)?;
        probe.as_mut_slice()[a] = v - h;
        let m = loss.loss(&probe)?;
        probe.as_mut_slice()[a] = v;
        g.as_mut_slice()[a] = (p - m) / (2.0 * h);
    }
    Ok(g)
}

/// Diagonal of `D² L(phi)` from central differences of the analytic gradient.
pub fn finite_diff_loss_hess_diag(loss: &LossSpec, phi: &Matrix, h: f64) -> Result<Vec<f64>> {
    check_h(h)?;
    let mut probe = phi.clone();
    let mut out = Vec::with_capacity(phi.len());
    for a in 0..phi.len() {
        let v = phi.as_slice()[a];
        probe.as_mut_slice()[a] = v + h;
        let p = loss.loss_grad(&probe)?.as_slice()[a];
        probe.as_mut_slice()[a] = v - h;
        let m = loss.loss_grad(&probe)?.as_slice()[a];
        probe.as_mut_slice()[a] = v;
        out.push((p - m) / (2.0 * h));
    }
    Ok(out)
}

fn check_h(h: f64) -> Result<()> {
    if !h.is_finite() || h <= 0.0 {
        return Err(invalid(format!("step h must be positive, got {h}")));
    }
    Ok(())
}

/// Largest entrywise relative error and where it occurred.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub max_rel: f64,
    /// Flat index of the worst entry.
    pub index: usize,
}

/// `max_k |a_k − b_k| / max(|a_k|, |b_k|, 1)`.
///
/// The unit floor keeps entries that are zero or nearly so from turning
/// round-off into large relative errors.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> ErrorReport {
    assert_eq!(a.len(), b.len(), "compared vectors differ in length");
    let mut rep = ErrorReport {
        max_rel: 0.0,
        index: 0,
    };
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let e = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
        if e.is_nan() || rep.max_rel.is_nan() || e > rep.max_rel {
            rep = ErrorReport {
                max_rel: e,
                index: k,
            };
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact_for_any_h() {
        // with w1 fixed the two-layer output is linear in W2
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let model = ModelSpec::two_layer_linear(x, 2, 1).unwrap();
        let w = ParamVector::new(vec![
            Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25]]).unwrap(),
            Matrix::from_rows(&[[1.5, -0.5]]).unwrap(),
        ]);
        let analytic = model.jacobian(&w).unwrap().matrix;
        for h in [1e-2, 1.0, 10.0] {
            let fd = finite_diff_jacobian(&model, &w, h).unwrap();
            // the product is bilinear, so central differences are exact up to round-off
            assert!(max_relative_error(fd.as_slice(), analytic.as_slice()).max_rel < 1e-12);
        }
    }

    #[test]
    fn relative_error_locates_worst_entry() {
        let r = max_relative_error(&[1.0, 2.0, 100.0], &[1.0, 2.5, 100.0]);
        assert_eq!(r.index, 1);
        assert!((r.max_rel - 0.2).abs() < 1e-15);
        assert!(max_relative_error(&[f64::NAN], &[0.0]).max_rel.is_nan());
    }

    #[test]
    fn loss_derivatives() {
        let loss = LossSpec::logistic(vec![1.0, -1.0]).unwrap();
        let phi = Matrix::from_rows(&[[0.3, 1.2]]).unwrap();
        let g = finite_diff_loss_grad(&loss, &phi, 1e-5).unwrap();
        let h = finite_diff_loss_hess_diag(&loss, &phi, 1e-5).unwrap();
        let ga = loss.loss_grad(&phi).unwrap();
        let ha = loss.loss_hess_diag(&phi).unwrap();
        assert!(max_relative_error(g.as_slice(), ga.as_slice()).max_rel < 1e-9);
        assert!(max_relative_error(&h, &ha).max_rel < 1e-9);
    }

    #[test]
    fn rejects_bad_step() {
        let model = ModelSpec::diagonal(Matrix::identity(1)).unwrap();
        let w = ParamVector::new(vec![Matrix::zeros(1, 1), Matrix::zeros(1, 1)]);
        assert!(finite_diff_jacobian(&model, &w, 0.0).is_err());
    }
}

//! Separable losses on `d_out x n` predictions with first and second derivatives.

use crate::error::{invalid, shape, Result};
use crate::numerics::Matrix;

/// Loss functional `L(phi)` together with its targets.
#[derive(Clone, Debug)]
pub enum LossSpec {
    /// `(1/2n) ||Y^T - phi||_F^2` with `Y` of shape `n x d_out`.
    Square { targets: Matrix },
    /// `(1/n) sum_i log(1 + exp(-y_i phi_i))` with labels in `{-1, +1}`.
    Logistic { labels: Vec<f64> },
}

impl LossSpec {
    pub fn square(targets: Matrix) -> Result<Self> {
        if targets.rows() == 0 || targets.cols() == 0 {
            return Err(invalid("targets must be non-empty"));
        }
        if !targets.is_finite() {
            return Err(invalid("targets have non-finite entries"));
        }
        Ok(LossSpec::Square { targets })
    }

    pub fn logistic(labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("labels must be non-empty"));
        }
        if let Some((i, y)) = labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y != 1.0 && y != -1.0)
        {
            return Err(invalid(format!("label {i} is {y}, expected -1 or +1")));
        }
        Ok(LossSpec::Logistic { labels })
    }

    pub fn n(&self) -> usize {
        match self {
            LossSpec::Square { targets } => targets.rows(),
            LossSpec::Logistic { labels } => labels.len(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LossSpec::Square { targets } => targets.cols(),
            LossSpec::Logistic { .. } => 1,
        }
    }

    pub fn is_square(&self) -> bool {
        matches!(self, LossSpec::Square { .. })
    }

    /// Same loss restricted to a subset of samples.
    pub fn with_rows(&self, idx: &[usize]) -> LossSpec {
        match self {
            LossSpec::Square { targets } => LossSpec::Square {
                targets: targets.select_rows(idx),
            },
            LossSpec::Logistic { labels } => LossSpec::Logistic {
                labels: idx.iter().map(|&i| labels[i]).collect(),
            },
        }
    }

    fn check(&self, phi: &Matrix) -> Result<()> {
        let want = (self.out_dim(), self.n());
        if phi.shape() != want {
            return Err(shape(format!(
                "prediction is {:?}, loss expects {}x{}",
                phi.shape(),
                want.0,
                want.1
            )));
        }
        Ok(())
    }

    pub fn loss(&self, phi: &Matrix) -> Result<f64> {
        self.check(phi)?;
        let n = self.n() as f64;
        Ok(match self {
            LossSpec::Square { targets } => {
                let mut s = 0.0;
                for o in 0..phi.rows() {
                    for i in 0..phi.cols() {
                        let r = phi[(o, i)] - targets[(i, o)];
                        s += r * r;
                    }
                }
                s / (2.0 * n)
            }
            LossSpec::Logistic { labels } => {
                labels
                    .iter()
                    .zip(phi.row(0))
                    .map(|(y, p)| softplus(-y * p))
                    .sum::<f64>()
                    / n
            }
        })
    }

    /// `D L(phi)`, shaped like `phi`.
    pub fn loss_grad(&self, phi: &Matrix) -> Result<Matrix> {
        self.check(phi)?;
        let n = self.n() as f64;
        Ok(match self {
            LossSpec::Square { targets } => Matrix::from_fn(phi.rows(), phi.cols(), |o, i| {
                (phi[(o, i)] - targets[(i, o)]) / n
            }),
            LossSpec::Logistic { labels } => Matrix::from_fn(1, phi.cols(), |_, i| {
                let y = labels[i];
                -y * sigmoid(-y * phi[(0, i)]) / n
            }),
        })
    }

    /// Diagonal of `D^2 L(phi)` in row-major prediction order.
    pub fn loss_hess_diag(&self, phi: &Matrix) -> Result<Vec<f64>> {
        self.check(phi)?;
        let n = self.n() as f64;
        Ok(match self {
            LossSpec::Square { .. } => vec![1.0 / n; phi.len()],
            LossSpec::Logistic { labels } => labels
                .iter()
                .zip(phi.row(0))
                .map(|(y, p)| {
                    let m = y * p;
                    sigmoid(m) * sigmoid(-m) / n
                })
                .collect(),
        })
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    (-x.abs()).exp().ln_1p() + x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

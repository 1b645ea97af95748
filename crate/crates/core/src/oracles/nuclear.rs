//! Nuclear norm by SVD, and the same penalty by minimizing over factorizations.

use nalgebra::DMatrix;

use crate::error::{invalid, shape, Error, Result};
use crate::numerics::{Matrix, RngStream};

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let svd = to_nalgebra(a)
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Sum of singular values.
pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

/// `√d2 · ||X||_F · ||M X^T||_*`.
pub fn nuclear_penalty_closed_form(m: &Matrix, x: &Matrix, d2: usize) -> Result<f64> {
    if m.cols() != x.cols() {
        return Err(shape(format!(
            "M is {:?} but X has {} columns",
            m.shape(),
            x.cols()
        )));
    }
    Ok((d2 as f64).sqrt() * x.frobenius_sq().sqrt() * nuclear_norm(&m.matmul_t(x))?)
}

/// Result of [`factored_penalty_minimize_with_factors`]: `W2 W1 = M`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub value: f64,
    pub w1: Matrix,
    pub w2: Matrix,
}

/// `min (1/2)[d2 ||W1 X^T||² + ||W2||² ||X||²]` over `W2 W1 = M` with inner width `inner_dim`.
pub fn factored_penalty_minimize(
    m: &Matrix,
    x: &Matrix,
    d2: usize,
    inner_dim: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    Ok(factored_penalty_minimize_with_factors(m, x, d2, inner_dim, rng)?.value)
}

pub const RESTARTS: usize = 200;

/// Builds a rank factorization `M = C R` by Gauss–Jordan elimination, then for
/// each of [`RESTARTS`] random bases `T` (`C T`, `T⁻¹ R`) balances the two
/// factors exactly: writing `W2 = C G`, `W1 = G⁻¹ R` and `P = G G^T`, the
/// objective `(1/2)[d2 tr(P⁻¹ K) + ||X||² tr(L P)]` with `K = R X^T X R^T`,
/// `L = C^T C` is convex in `P` and minimized where `P L P = (d2/||X||²) K`.
/// That equation is solved with matrix square roots from the Denman–Beavers
/// iteration. No SVD is involved. The smallest value over the bases is
/// returned together with its factors.
pub fn factored_penalty_minimize_with_factors(
    m: &Matrix,
    x: &Matrix,
    d2: usize,
    inner_dim: usize,
    rng: &mut RngStream,
) -> Result<Factorization> {
    if m.cols() != x.cols() {
        return Err(shape(format!(
            "M is {:?} but X has {} columns",
            m.shape(),
            x.cols()
        )));
    }
    if d2 == 0 {
        return Err(invalid("d2 must be positive"));
    }
    let (c, r) = rank_factorization(m);
    let rank = r.rows();
    let rank_mx = rank_factorization(&m.matmul_t(x)).1.rows();
    if inner_dim < rank_mx {
        return Err(Error::Infeasible(format!(
            "inner dimension {inner_dim} is below rank(M X^T) = {rank_mx}"
        )));
    }
    if rank == 0 {
        return Ok(Factorization {
            value: 0.0,
            w1: Matrix::zeros(inner_dim, m.cols()),
            w2: Matrix::zeros(m.rows(), inner_dim),
        });
    }
    if rank_mx < rank {
        return Err(Error::Numerical(format!(
            "rank(M X^T) = {rank_mx} < rank(M) = {rank}: the infimum is not attained"
        )));
    }
    let a = d2 as f64;
    let b = x.frobenius_sq();
    let mut best: Option<Factorization> = None;
    for _ in 0..RESTARTS {
        let t = crate::numerics::sample_gaussian_matrix(rng, rank, rank, 1.0)?;
        let Some(t_inv) = inverse(&t) else { continue };
        let ct = c.matmul(&t);
        let rt = t_inv.matmul(&r);
        let l = ct.t_matmul(&ct);
        let s = rt.matmul_t(x);
        let k = s.matmul_t(&s).scale(a / b);
        let l_half = spd_sqrt(&l)?;
        let l_half_inv = inverse(&l_half).ok_or_else(|| Error::Numerical("singular L".into()))?;
        let mid = spd_sqrt(&symmetrize(&l_half.matmul(&k).matmul(&l_half)))?;
        let p = symmetrize(&l_half_inv.matmul(&mid).matmul(&l_half_inv));
        let g = cholesky(&p)?;
        let g_inv =
            inverse(&g).ok_or_else(|| Error::Numerical("singular balance factor".into()))?;
        let w2 = ct.matmul(&g);
        let w1 = g_inv.matmul(&rt);
        let value = 0.5 * (a * w1.matmul_t(x).frobenius_sq() + b * w2.frobenius_sq());
        if best.as_ref().is_none_or(|f| value < f.value) {
            best = Some(Factorization { value, w1, w2 });
        }
    }
    let mut best = best.ok_or_else(|| Error::Numerical("no invertible random basis".into()))?;
    if inner_dim > rank {
        best.w1 = Matrix::from_fn(inner_dim, m.cols(), |i, j| {
            if i < rank {
                best.w1[(i, j)]
            } else {
                0.0
            }
        });
        best.w2 = Matrix::from_fn(m.rows(), inner_dim, |i, j| {
            if j < rank {
                best.w2[(i, j)]
            } else {
                0.0
            }
        });
    }
    Ok(best)
}

fn symmetrize(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// `M = C R` with `C` the pivot columns of `M` and `R` the nonzero rows of its
/// reduced row echelon form.
fn rank_factorization(m: &Matrix) -> (Matrix, Matrix) {
    let (rows, cols) = m.shape();
    let mut e = m.clone();
    let tol = 1e-11 * m.max_abs().max(f64::MIN_POSITIVE) * rows.max(cols) as f64;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (p, pv) = (row..rows)
            .map(|i| (i, e[(i, col)].abs()))
            .fold((row, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if pv <= tol {
            continue;
        }
        for j in 0..cols {
            let tmp = e[(row, j)];
            e[(row, j)] = e[(p, j)];
            e[(p, j)] = tmp;
        }
        let d = e[(row, col)];
        for j in 0..cols {
            e[(row, j)] /= d;
        }
        for i in 0..rows {
            if i != row {
                let f = e[(i, col)];
                if f != 0.0 {
                    for j in 0..cols {
                        e[(i, j)] -= f * e[(row, j)];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let r = Matrix::from_fn(pivots.len(), cols, |i, j| e[(i, j)]);
    let c = Matrix::from_fn(rows, pivots.len(), |i, k| m[(i, pivots[k])]);
    (c, r)
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
fn inverse(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut e = a.clone();
    let mut inv = Matrix::identity(n);
    let scale = a.max_abs();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| e[(i, col)].abs().total_cmp(&e[(j, col)].abs()))?;
        if e[(p, col)].abs() <= 1e-14 * scale {
            return None;
        }
        for j in 0..n {
            let (x, y) = (e[(col, j)], e[(p, j)]);
            e[(col, j)] = y;
            e[(p, j)] = x;
            let (x, y) = (inv[(col, j)], inv[(p, j)]);
            inv[(col, j)] = y;
            inv[(p, j)] = x;
        }
        let d = e[(col, col)];
        for j in 0..n {
            e[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = e[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        e[(i, j)] -= f * e[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Principal square root of a symmetric positive definite matrix (Denman–Beavers).
fn spd_sqrt(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let s = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Numerical(
            "square root of a non-positive matrix".into(),
        ));
    }
    let mut y = a.scale(1.0 / s);
    let mut z = Matrix::identity(n);
    for _ in 0..100 {
        let yi = inverse(&y)
            .ok_or_else(|| Error::Numerical("singular iterate in matrix square root".into()))?;
        let zi = inverse(&z)
            .ok_or_else(|| Error::Numerical("singular iterate in matrix square root".into()))?;
        let ny = y.add(&zi).scale(0.5);
        let nz = z.add(&yi).scale(0.5);
        let delta = ny.sub(&y).max_abs();
        y = ny;
        z = nz;
        if delta <= 1e-15 * y.max_abs() {
            break;
        }
    }
    Ok(symmetrize(&y).scale(s.sqrt()))
}

/// Lower-triangular `G` with `G G^T = P`.
fn cholesky(p: &Matrix) -> Result<Matrix> {
    let n = p.rows();
    let mut g = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= g[(j, k)] * g[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::Numerical(
                "balance matrix is not positive definite".into(),
            ));
        }
        g[(j, j)] = d.sqrt();
        for i in j + 1..n {
            let mut v = p[(i, j)];
            for k in 0..j {
                v -= g[(i, k)] * g[(j, k)];
            }
            g[(i, j)] = v / g[(j, j)];
        }
    }
    Ok(g)
}

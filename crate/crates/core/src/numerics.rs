//! Dense row-major matrices, seeded random streams and Gaussian sampling.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, shape, Error, Result};

/// Dense matrix of `f64` stored row by row.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries(self.data.chunks(self.cols.max(1)))
            .finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Column vector (`len x 1`).
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self * rhs`.
    ///
    /// Panics when the inner dimensions differ; callers validate shapes first.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhs^T` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_t inner dimension");
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        out
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul inner dimension");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        frobenius_sq(self)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            self.shape(),
            other.shape(),
            "elementwise op on different shapes"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "axpy on different shapes");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Contiguous block of columns `start..start + len`.
    pub fn column_block(&self, start: usize, len: usize) -> Matrix {
        Matrix::from_fn(self.rows, len, |i, j| self[(i, start + j)])
    }

    /// Reads the `rows,cols` header format followed by comma-separated rows.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Matrix> {
        let mut lines = reader
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (_, header) = lines.next().ok_or(Error::Csv {
            line: 1,
            msg: "empty input".into(),
        })?;
        let header = header?;
        let dims: Vec<&str> = header.trim().split(',').collect();
        let parse_dim = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| Error::Csv {
                line: 1,
                msg: format!("bad header {header:?}, expected \"rows,cols\""),
            })
        };
        if dims.len() != 2 {
            return Err(Error::Csv {
                line: 1,
                msg: format!("bad header {header:?}, expected \"rows,cols\""),
            });
        }
        let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        let mut data = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (lineno, line) in lines {
            let line = line?;
            let before = data.len();
            for field in line.trim().split(',') {
                let v: f64 = field.trim().parse().map_err(|_| Error::Csv {
                    line: lineno + 1,
                    msg: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        line: lineno + 1,
                        msg: "non-finite entry".into(),
                    });
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::Csv {
                    line: lineno + 1,
                    msg: format!("expected {cols} entries, found {}", data.len() - before),
                });
            }
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Csv {
                line: seen + 1,
                msg: format!("expected {rows} rows, found {seen}"),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Matrix> {
        let f = std::fs::File::open(path)?;
        Matrix::read_csv(std::io::BufReader::new(f))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum of squared entries.
pub fn frobenius_sq(m: &Matrix) -> f64 {
    m.data.iter().map(|v| v * v).sum()
}

/// Deterministic random stream identified by `(seed, stream_index)`.
///
/// Backed by ChaCha8 with the stream index mapped onto the cipher's stream
/// selector, so distinct indices under one seed never overlap. Normals come
/// from the Box–Muller transform: each pair of uniforms `(u1, u2)` yields
/// `r cos(2 pi u2)` first and `r sin(2 pi u2)` second, with `r = sqrt(-2 ln(1 - u1))`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    core: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            core,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Fresh stream with the same seed and another index.
    pub fn substream(&self, stream_index: u64) -> RngStream {
        RngStream::new(self.seed, stream_index)
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.core.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.core.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (`n > 0`).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// `k` distinct indices from `0..n`, in draw order (partial Fisher–Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// Matrix of i.i.d. `N(0, std^2)` entries drawn in row-major order.
///
/// The stream advances by the same amount whatever `std` is, so runs that
/// differ only in noise level see the same underlying draws.
pub fn sample_gaussian_matrix(
    rng: &mut RngStream,
    rows: usize,
    cols: usize,
    std: f64,
) -> Result<Matrix> {
    if !std.is_finite() || std < 0.0 {
        return Err(invalid(format!(
            "standard deviation must be finite and >= 0, got {std}"
        )));
    }
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        let z = rng.standard_normal();
        if std > 0.0 {
            *v = std * z;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(m: &Matrix) -> (f64, f64) {
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn zero_std_gives_zero_matrix() {
        let mut rng = RngStream::new(1, 0);
        let m = sample_gaussian_matrix(&mut rng, 2, 2, 0.0).unwrap();
        assert_eq!(m, Matrix::zeros(2, 2));
    }

    #[test]
    fn negative_std_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            sample_gaussian_matrix(&mut rng, 2, 2, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn empty_shapes_are_valid() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_gaussian_matrix(&mut rng, 0, 3, 1.0)
            .unwrap()
            .is_empty());
        assert!(sample_gaussian_matrix(&mut rng, 3, 0, 1.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn million_draws_have_unit_moments() {
        let mut rng = RngStream::new(1, 0);
        let m = sample_gaussian_matrix(&mut rng, 1000, 1000, 1.0).unwrap();
        let (mean, var) = moments(&m);
        assert!(mean.abs() < 4.0 / 1e3, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn moments_scale_with_std() {
        for (k, std) in [0.01, 1.0, 10.0].into_iter().enumerate() {
            let mut rng = RngStream::new(7, k as u64);
            let m = sample_gaussian_matrix(&mut rng, 500, 400, std).unwrap();
            let (mean, var) = moments(&m);
            let se = std / (m.len() as f64).sqrt();
            assert!(mean.abs() < 4.0 * se, "std {std}: mean {mean}");
            assert!(
                (var / (std * std) - 1.0).abs() < 0.01,
                "std {std}: var {var}"
            );
        }
    }

    #[test]
    fn same_stream_is_bitwise_reproducible() {
        let a = sample_gaussian_matrix(&mut RngStream::new(42, 3), 17, 5, 1.3).unwrap();
        let b = sample_gaussian_matrix(&mut RngStream::new(42, 3), 17, 5, 1.3).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 100_000;
        let mut a = RngStream::new(5, 0);
        let mut b = RngStream::new(5, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn frobenius_small_cases() {
        assert_eq!(frobenius_sq(&Matrix::identity(2)), 2.0);
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_sq(&m), 30.0);
    }

    #[test]
    fn transpose_products_agree() {
        let mut rng = RngStream::new(9, 0);
        let a = sample_gaussian_matrix(&mut rng, 4, 3, 1.0).unwrap();
        let b = sample_gaussian_matrix(&mut rng, 5, 3, 1.0).unwrap();
        let c = sample_gaussian_matrix(&mut rng, 4, 2, 1.0).unwrap();
        let ab = a.matmul_t(&b);
        let ab_ref = a.matmul(&b.transpose());
        assert!(ab.sub(&ab_ref).max_abs() < 1e-14);
        let ac = a.t_matmul(&c);
        let ac_ref = a.transpose().matmul(&c);
        assert!(ac.sub(&ac_ref).max_abs() < 1e-14);
    }

    #[test]
    fn csv_reads_header_and_rows() {
        let text = "2,3\n1,2,3\n4.5,-6,7e-1\n";
        let m = Matrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], 0.7);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(Matrix::read_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let err = Matrix::read_csv("2,2\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }), "{err}");
        let err = Matrix::read_csv("3,1\n1\n2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { .. }));
    }

    #[test]
    fn sampling_without_replacement_is_distinct() {
        let mut rng = RngStream::new(3, 0);
        let mut idx = rng.sample_without_replacement(40, 10);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 10);
        assert!(idx.iter().all(|&i| i < 40));
    }
}

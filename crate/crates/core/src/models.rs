//! The predictor zoo: forward maps, analytic Jacobians and per-layer structure.
//!
//! Every model maps parameters to a `d_out x n` prediction matrix. Jacobian
//! rows follow the row-major flattening of that matrix (`row = o * n + i`),
//! columns follow [`ParamVector::flatten`].

use std::fmt;

use crate::error::{invalid, shape, Result};
use crate::numerics::{dot, sample_gaussian_matrix, Matrix, RngStream};

/// Which member of the zoo a [`ModelSpec`] is.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// `X (w1 o w1 - w2 o w2)` with `w1, w2` in `R^d`.
    Diagonal,
    /// `W2 W1 X^T`.
    TwoLayerLinear,
    /// `W_M ... W_1 X^T`.
    DeepLinear,
    /// `W2 (W1 X^T)_+`.
    OneHiddenRelu,
    /// `W_M (... (W_1 X^T)_+ ...)_+`, ReLU after every layer but the last.
    DeepRelu,
    /// `sum_j v_j X_j w_j` over column groups `X_j` of width `k`.
    GroupFactored { groups: usize },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Diagonal => "diagonal",
            ModelKind::TwoLayerLinear => "two_layer_linear",
            ModelKind::DeepLinear => "deep_linear",
            ModelKind::OneHiddenRelu => "one_hidden_relu",
            ModelKind::DeepRelu => "deep_relu",
            ModelKind::GroupFactored { .. } => "group_factored",
        }
    }

    fn is_chain(&self) -> bool {
        matches!(
            self,
            ModelKind::TwoLayerLinear
                | ModelKind::DeepLinear
                | ModelKind::OneHiddenRelu
                | ModelKind::DeepRelu
        )
    }

    fn has_relu(&self) -> bool {
        matches!(self, ModelKind::OneHiddenRelu | ModelKind::DeepRelu)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Structured parameters: one matrix block per weight array.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    blocks: Vec<Matrix>,
}

impl ParamVector {
    pub fn new(blocks: Vec<Matrix>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Matrix] {
        &mut self.blocks
    }

    pub fn block(&self, i: usize) -> &Matrix {
        &self.blocks[i]
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(Matrix::len).sum()
    }

    /// Concatenation of the blocks, each in row-major order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.total_dim());
        for b in &self.blocks {
            v.extend_from_slice(b.as_slice());
        }
        v
    }

    /// Inverse of [`flatten`](Self::flatten) for the given block shapes.
    pub fn unflatten(shapes: &[(usize, usize)], flat: &[f64]) -> Result<Self> {
        let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
        if total != flat.len() {
            return Err(shape(format!(
                "{} values for {total} parameters",
                flat.len()
            )));
        }
        let mut off = 0;
        let blocks = shapes
            .iter()
            .map(|&(r, c)| {
                let b = Matrix::from_vec(r, c, flat[off..off + r * c].to_vec());
                off += r * c;
                b
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(Matrix::shape).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| Matrix::zeros(b.rows(), b.cols()))
                .collect(),
        }
    }

    /// `self += s * other`, blockwise.
    pub fn axpy(&mut self, s: f64, other: &ParamVector) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.axpy(s, b);
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(Matrix::frobenius_sq).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(Matrix::is_finite)
    }
}

/// Jacobian of the prediction map with a flag for ReLU kinks.
#[derive(Clone, Debug)]
pub struct Jacobian {
    pub matrix: Matrix,
    /// Some pre-activation was exactly zero; the 0 subgradient was used there.
    pub at_kink: bool,
}

/// An immutable predictor over fixed input data `X` (`n x d0`).
#[derive(Clone, Debug)]
pub struct ModelSpec {
    kind: ModelKind,
    x: Matrix,
    /// `d_0, d_1, ..., d_M` for chain kinds; `d` for diagonal; `k` for groups.
    dims: Vec<usize>,
    layer_shapes: Vec<(usize, usize)>,
}

impl ModelSpec {
    pub fn diagonal(x: Matrix) -> Result<Self> {
        let d = x.cols();
        Self::check_data(&x)?;
        Ok(Self {
            kind: ModelKind::Diagonal,
            x,
            dims: vec![d],
            layer_shapes: vec![(d, 1), (d, 1)],
        })
    }

    pub fn two_layer_linear(x: Matrix, hidden: usize, out: usize) -> Result<Self> {
        Self::chain(ModelKind::TwoLayerLinear, x, &[hidden, out])
    }

    /// Deep linear network with layer output widths `d_1, ..., d_M` (`M >= 2`).
    pub fn deep_linear(x: Matrix, widths: &[usize]) -> Result<Self> {
        Self::chain(ModelKind::DeepLinear, x, widths)
    }

    pub fn one_hidden_relu(x: Matrix, hidden: usize, out: usize) -> Result<Self> {
        Self::chain(ModelKind::OneHiddenRelu, x, &[hidden, out])
    }

    pub fn deep_relu(x: Matrix, widths: &[usize]) -> Result<Self> {
        Self::chain(ModelKind::DeepRelu, x, widths)
    }

    /// `X` is split into `groups` contiguous column blocks of equal width.
    pub fn group_factored(x: Matrix, groups: usize) -> Result<Self> {
        Self::check_data(&x)?;
        if groups == 0 || !x.cols().is_multiple_of(groups) {
            return Err(invalid(format!(
                "{} columns cannot be split into {groups} equal groups",
                x.cols()
            )));
        }
        let k = x.cols() / groups;
        let layer_shapes = (0..groups).flat_map(|_| [(1, 1), (k, 1)]).collect();
        Ok(Self {
            kind: ModelKind::GroupFactored { groups },
            x,
            dims: vec![k],
            layer_shapes,
        })
    }

    fn chain(kind: ModelKind, x: Matrix, widths: &[usize]) -> Result<Self> {
        Self::check_data(&x)?;
        if widths.len() < 2 {
            return Err(invalid(format!(
                "{kind} needs at least 2 layers, got {}",
                widths.len()
            )));
        }
        if matches!(kind, ModelKind::TwoLayerLinear | ModelKind::OneHiddenRelu) && widths.len() != 2
        {
            return Err(invalid(format!("{kind} has exactly 2 layers")));
        }
        if widths.contains(&0) {
            return Err(invalid("layer widths must be positive"));
        }
        let mut dims = vec![x.cols()];
        dims.extend_from_slice(widths);
        let layer_shapes = dims.windows(2).map(|w| (w[1], w[0])).collect();
        Ok(Self {
            kind,
            x,
            dims,
            layer_shapes,
        })
    }

    fn check_data(x: &Matrix) -> Result<()> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(invalid("input data must be non-empty"));
        }
        if !x.is_finite() {
            return Err(invalid("input data has non-finite entries"));
        }
        Ok(())
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn data(&self) -> &Matrix {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Widths `d_0, ..., d_M` of a chain model.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn out_dim(&self) -> usize {
        if self.kind.is_chain() {
            *self.dims.last().unwrap()
        } else {
            1
        }
    }

    /// Shapes of the parameter blocks, in storage order.
    pub fn layer_shapes(&self) -> &[(usize, usize)] {
        &self.layer_shapes
    }

    pub fn param_dim(&self) -> usize {
        self.layer_shapes.iter().map(|(r, c)| r * c).sum()
    }

    /// Blocks that make up each layer, in layer order.
    ///
    /// Layer-wise noise picks one of these groups. Group-factored models
    /// have two layers: all `w_j` (the block-diagonal first layer), then all `v_j`.
    pub fn layer_groups(&self) -> Vec<Vec<usize>> {
        match self.kind {
            ModelKind::GroupFactored { groups } => vec![
                (0..groups).map(|j| 2 * j + 1).collect(),
                (0..groups).map(|j| 2 * j).collect(),
            ],
            _ => (0..self.layer_shapes.len()).map(|i| vec![i]).collect(),
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layer_groups().len()
    }

    /// Same model restricted to a subset of data rows.
    pub fn with_rows(&self, idx: &[usize]) -> ModelSpec {
        ModelSpec {
            kind: self.kind.clone(),
            x: self.x.select_rows(idx),
            dims: self.dims.clone(),
            layer_shapes: self.layer_shapes.clone(),
        }
    }

    pub fn check_params(&self, w: &ParamVector) -> Result<()> {
        let got = w.shapes();
        if got != self.layer_shapes {
            return Err(shape(format!(
                "{} expects blocks {:?}, got {:?}",
                self.kind, self.layer_shapes, got
            )));
        }
        Ok(())
    }

    /// Prediction `Phi(w)` as a `d_out x n` matrix.
    pub fn forward(&self, w: &ParamVector) -> Result<Matrix> {
        self.check_params(w)?;
        Ok(match self.kind {
            ModelKind::Diagonal => {
                let beta = diagonal_beta(w);
                let mut phi = Matrix::zeros(1, self.n());
                for i in 0..self.n() {
                    phi[(0, i)] = dot(self.x.row(i), &beta);
                }
                phi
            }
            ModelKind::GroupFactored { groups } => {
                let k = self.dims[0];
                let mut phi = Matrix::zeros(1, self.n());
                for i in 0..self.n() {
                    let row = self.x.row(i);
                    phi[(0, i)] = (0..groups)
                        .map(|j| {
                            w.block(2 * j)[(0, 0)]
                                * dot(&row[j * k..(j + 1) * k], w.block(2 * j + 1).as_slice())
                        })
                        .sum();
                }
                phi
            }
            _ => self.chain_forward(w).output,
        })
    }

    fn chain_forward(&self, w: &ParamVector) -> ChainTrace {
        let relu = self.kind.has_relu();
        let m = w.blocks().len();
        let mut acts = Vec::with_capacity(m);
        let mut masks = Vec::with_capacity(m - 1);
        let mut at_kink = false;
        let mut a = self.x.transpose();
        for (j, wj) in w.blocks().iter().enumerate() {
            let z = wj.matmul(&a);
            acts.push(a);
            if j + 1 == m {
                return ChainTrace {
                    acts,
                    masks,
                    output: z,
                    at_kink,
                };
            }
            if relu {
                at_kink |= z.as_slice().contains(&0.0);
                masks.push(z.map(|v| if v > 0.0 { 1.0 } else { 0.0 }));
                a = z.map(|v| v.max(0.0));
            } else {
                a = z;
            }
        }
        unreachable!("chain models have at least two layers")
    }

    /// Analytic `D Phi(w)` with `d_out * n` rows and `m` columns.
    pub fn jacobian(&self, w: &ParamVector) -> Result<Jacobian> {
        self.check_params(w)?;
        let n = self.n();
        let mut jac = Matrix::zeros(self.out_dim() * n, self.param_dim());
        let mut at_kink = false;
        match self.kind {
            ModelKind::Diagonal => {
                let d = self.dims[0];
                let (w1, w2) = (w.block(0).as_slice(), w.block(1).as_slice());
                for i in 0..n {
                    let row = jac.row_mut(i);
                    for j in 0..d {
                        row[j] = 2.0 * self.x[(i, j)] * w1[j];
                        row[d + j] = -2.0 * self.x[(i, j)] * w2[j];
                    }
                }
            }
            ModelKind::GroupFactored { groups } => {
                let k = self.dims[0];
                for i in 0..n {
                    let xrow = self.x.row(i);
                    let row = jac.row_mut(i);
                    for j in 0..groups {
                        let xj = &xrow[j * k..(j + 1) * k];
                        let v = w.block(2 * j)[(0, 0)];
                        let off = j * (k + 1);
                        row[off] = dot(xj, w.block(2 * j + 1).as_slice());
                        for q in 0..k {
                            row[off + 1 + q] = v * xj[q];
                        }
                    }
                }
            }
            _ => {
                let trace = self.chain_forward(w);
                at_kink = trace.at_kink;
                let m = w.blocks().len();
                let offsets: Vec<usize> = self
                    .layer_shapes
                    .iter()
                    .scan(0, |acc, (r, c)| {
                        let o = *acc;
                        *acc += r * c;
                        Some(o)
                    })
                    .collect();
                let d_out = self.out_dim();
                for i in 0..n {
                    // back[o][p] = d Phi_{o,i} / d z_j[p] for the current layer j.
                    let mut back = Matrix::identity(d_out);
                    for j in (0..m).rev() {
                        let a_prev = &trace.acts[j];
                        let (rows, cols) = self.layer_shapes[j];
                        for o in 0..d_out {
                            let jrow = jac.row_mut(o * n + i);
                            for p in 0..rows {
                                let b = back[(o, p)];
                                if b == 0.0 {
                                    continue;
                                }
                                let base = offsets[j] + p * cols;
                                for q in 0..cols {
                                    jrow[base + q] = b * a_prev[(q, i)];
                                }
                            }
                        }
                        if j > 0 {
                            let mut next = back.matmul(w.block(j));
                            if let Some(mask) = trace.masks.get(j - 1) {
                                for o in 0..d_out {
                                    for q in 0..cols {
                                        next[(o, q)] *= mask[(q, i)];
                                    }
                                }
                            }
                            back = next;
                        }
                    }
                }
            }
        }
        Ok(Jacobian {
            matrix: jac,
            at_kink,
        })
    }

    /// Vector-Jacobian product `cot^T D Phi(w)` returned as parameter blocks.
    ///
    /// `cot` has the prediction's `d_out x n` shape.
    pub fn vjp(&self, w: &ParamVector, cot: &Matrix) -> Result<ParamVector> {
        self.check_params(w)?;
        if cot.shape() != (self.out_dim(), self.n()) {
            return Err(shape(format!(
                "cotangent {:?}, prediction is {}x{}",
                cot.shape(),
                self.out_dim(),
                self.n()
            )));
        }
        let mut grad = w.zeros_like();
        match self.kind {
            ModelKind::Diagonal => {
                let xtg = self.x.t_matmul(&cot.transpose());
                let d = self.dims[0];
                for j in 0..d {
                    grad.blocks[0][(j, 0)] = 2.0 * w.block(0)[(j, 0)] * xtg[(j, 0)];
                    grad.blocks[1][(j, 0)] = -2.0 * w.block(1)[(j, 0)] * xtg[(j, 0)];
                }
            }
            ModelKind::GroupFactored { groups } => {
                let k = self.dims[0];
                let xtg = self.x.t_matmul(&cot.transpose());
                for j in 0..groups {
                    let wj = w.block(2 * j + 1);
                    let xj_wj: Vec<f64> = (0..self.n())
                        .map(|i| dot(&self.x.row(i)[j * k..(j + 1) * k], wj.as_slice()))
                        .collect();
                    grad.blocks[2 * j][(0, 0)] = dot(&xj_wj, cot.row(0));
                    let v = w.block(2 * j)[(0, 0)];
                    for q in 0..k {
                        grad.blocks[2 * j + 1][(q, 0)] = v * xtg[(j * k + q, 0)];
                    }
                }
            }
            _ => {
                let trace = self.chain_forward(w);
                let m = w.blocks().len();
                let mut delta = cot.clone();
                for j in (0..m).rev() {
                    grad.blocks[j] = delta.matmul_t(&trace.acts[j]);
                    if j > 0 {
                        let mut next = w.block(j).t_matmul(&delta);
                        if let Some(mask) = trace.masks.get(j - 1) {
                            next = next.hadamard(mask);
                        }
                        delta = next;
                    }
                }
            }
        }
        Ok(grad)
    }

    /// `D^2 Phi_a(w)[I]`: trace of each output coordinate's parameter Hessian.
    ///
    /// Multilinear and piecewise-linear kinds have no squared-parameter terms,
    /// so the trace vanishes away from ReLU kinks. For the diagonal model the
    /// `+2` curvature of `w1` and the `-2` curvature of `w2` cancel per output.
    pub fn hessian_diag_trace(&self, w: &ParamVector) -> Result<Vec<f64>> {
        self.check_params(w)?;
        let len = self.out_dim() * self.n();
        Ok(vec![0.0; len])
    }

    /// Draws layer blocks with i.i.d. `N(0, 1/size)` entries, `size` being the
    /// number of weights in the layer, so `E ||W_i||_F^2 = 1` for every layer.
    pub fn scaled_init(&self, rng: &mut RngStream) -> ParamVector {
        let groups = self.layer_groups();
        let mut blocks: Vec<Option<Matrix>> = vec![None; self.layer_shapes.len()];
        for group in &groups {
            let size: usize = group
                .iter()
                .map(|&b| self.layer_shapes[b].0 * self.layer_shapes[b].1)
                .sum();
            let std = (1.0 / size as f64).sqrt();
            for &b in group {
                let (r, c) = self.layer_shapes[b];
                blocks[b] = Some(
                    sample_gaussian_matrix(rng, r, c, std).expect("std is positive and finite"),
                );
            }
        }
        ParamVector::new(blocks.into_iter().map(Option::unwrap).collect())
    }

    /// Smallest absolute hidden pre-activation; `None` for models without ReLU.
    pub fn min_preactivation_margin(&self, w: &ParamVector) -> Result<Option<f64>> {
        self.check_params(w)?;
        if !self.kind.has_relu() {
            return Ok(None);
        }
        let m = w.blocks().len();
        let mut a = self.x.transpose();
        let mut margin = f64::INFINITY;
        for wj in &w.blocks()[..m - 1] {
            let z = wj.matmul(&a);
            margin = z.as_slice().iter().fold(margin, |acc, v| acc.min(v.abs()));
            a = z.map(|v| v.max(0.0));
        }
        Ok(Some(margin))
    }

    /// Hidden activation pattern `(W1 X^T)_+^0` for the one-hidden-layer kinds.
    pub(crate) fn first_layer(&self, w: &ParamVector) -> (Matrix, Matrix) {
        let h = w.block(0).matmul_t(&self.x);
        let mask = h.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        (h, mask)
    }
}

struct ChainTrace {
    /// Input to each layer: `acts[0] = X^T`, `acts[j]` = activation after layer `j`.
    acts: Vec<Matrix>,
    /// ReLU derivative pattern of each hidden layer.
    masks: Vec<Matrix>,
    output: Matrix,
    at_kink: bool,
}

/// `beta = w1 o w1 - w2 o w2` for the diagonal model.
pub fn diagonal_beta(w: &ParamVector) -> Vec<f64> {
    w.block(0)
        .as_slice()
        .iter()
        .zip(w.block(1).as_slice())
        .map(|(a, b)| a * a - b * b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn diagonal_forward_substitution() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let model = ModelSpec::diagonal(x).unwrap();
        let w = ParamVector::new(vec![
            Matrix::column(&[1.0, 0.0]),
            Matrix::column(&[0.0, 0.0]),
        ]);
        assert_eq!(model.forward(&w).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn two_layer_scalar_forward_and_jacobian() {
        let model = ModelSpec::two_layer_linear(scalar(1.0), 1, 1).unwrap();
        let w = ParamVector::new(vec![scalar(1.0), scalar(1.0)]);
        assert_eq!(model.forward(&w).unwrap().as_slice(), &[1.0]);

        let (a, b) = (0.7, -1.3);
        let w = ParamVector::new(vec![scalar(a), scalar(b)]);
        let jac = model.jacobian(&w).unwrap();
        assert_eq!(jac.matrix.as_slice(), &[b, a]);
    }

    #[test]
    fn relu_kills_negative_unit() {
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        let model = ModelSpec::one_hidden_relu(x, 2, 1).unwrap();
        let w1 = Matrix::column(&[2.0, -3.0]);
        let w2 = Matrix::from_rows(&[[1.0, 100.0]]).unwrap();
        let w = ParamVector::new(vec![w1, w2]);
        assert_eq!(model.forward(&w).unwrap().as_slice(), &[2.0]);
    }

    #[test]
    fn diagonal_jacobian_vanishes_at_origin() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let model = ModelSpec::diagonal(x).unwrap();
        let w = ParamVector::new(vec![Matrix::zeros(2, 1), Matrix::zeros(2, 1)]);
        assert_eq!(model.jacobian(&w).unwrap().matrix.max_abs(), 0.0);
    }

    #[test]
    fn kink_is_flagged() {
        let x = Matrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let model = ModelSpec::one_hidden_relu(x, 1, 1).unwrap();
        let w = ParamVector::new(vec![Matrix::from_rows(&[[1.0, 1.0]]).unwrap(), scalar(1.0)]);
        let jac = model.jacobian(&w).unwrap();
        assert!(jac.at_kink);
        // the zero convention kills the first-layer columns
        assert_eq!(&jac.matrix.as_slice()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let model = ModelSpec::two_layer_linear(scalar(1.0), 2, 1).unwrap();
        let w = ParamVector::new(vec![scalar(1.0), scalar(1.0)]);
        assert!(model.forward(&w).is_err());
    }

    #[test]
    fn deep_kinds_need_two_layers() {
        assert!(ModelSpec::deep_linear(scalar(1.0), &[3]).is_err());
        assert!(ModelSpec::deep_relu(scalar(1.0), &[3, 2, 1]).is_ok());
    }

    #[test]
    fn diagonal_hessian_trace_cancels() {
        let x = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let model = ModelSpec::diagonal(x).unwrap();
        let w = ParamVector::new(vec![
            Matrix::column(&[0.3, 0.1]),
            Matrix::column(&[-0.2, 0.5]),
        ]);
        assert_eq!(model.hessian_diag_trace(&w).unwrap(), vec![0.0]);
    }

    #[test]
    fn unflatten_inverts_flatten() {
        let mut rng = RngStream::new(4, 0);
        let x = sample_gaussian_matrix(&mut rng, 3, 4, 1.0).unwrap();
        let model = ModelSpec::deep_linear(x, &[5, 2, 3]).unwrap();
        let w = model.scaled_init(&mut rng);
        let back = ParamVector::unflatten(model.layer_shapes(), &w.flatten()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn group_layers_split_v_and_w() {
        let x = Matrix::zeros(2, 6);
        let model = ModelSpec::group_factored(x, 3).unwrap();
        assert_eq!(model.layer_groups(), vec![vec![1, 3, 5], vec![0, 2, 4]]);
        assert_eq!(model.layer_shapes()[1], (2, 1));
        assert!(ModelSpec::group_factored(Matrix::zeros(2, 5), 3).is_err());
    }
}

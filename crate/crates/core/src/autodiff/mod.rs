//! Define-by-run reverse-mode differentiation over matrix operations.
//!
//! A [`Tape`] is built fresh for every forward pass. Each operation appends a
//! node holding its forward value and whatever it needs for the backward rule,
//! so node ids are a topological order by construction and
//! [`Tape::backward`] is a single reverse sweep. Gradients that reach a node
//! from several consumers are summed in the order the sweep visits them,
//! which keeps results bitwise reproducible.
//!
//! ```
//! use decorr_core::{DenseMatrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]).unwrap());
//! let sq = tape.mul(w, w).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).data(), &[2.0, -4.0, 6.0, 1.0]);
//! ```

pub mod gradcheck;

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{DenseMatrix, SparseCsr};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Entrywise operation kinds accepted by [`Tape::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Relu,
    Sigmoid,
    Scale(f64),
}

enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    SpMM(Arc<SparseCsr>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    Mask(Var, Vec<f64>),
    AddRow(Var, Var),
    MulRow(Var, Var),
    ScaleCols(Var, Vec<f64>),
    Shift(Var),
    GatherRows(Var, Vec<usize>),
    CenterCols(Var),
    Transpose(Var),
    Frobenius(Var),
    DivScalar(Var, Var),
    Sum(Var),
    Mean(Var),
    RowDot(Var, Var),
    LogMeanExp(Var),
    SoftmaxXent {
        logits: Var,
        probs: DenseMatrix,
        targets: Vec<(usize, usize)>,
    },
    PairNorm {
        x: Var,
        scale: f64,
        rms: f64,
    },
    Standardize {
        x: Var,
        inv_std: Vec<f64>,
    },
}

struct Node {
    value: DenseMatrix,
    op: Op,
    requires_grad: bool,
}

/// Record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not depend on it.
    pub fn get(&self, var: Var) -> DenseMatrix {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                DenseMatrix::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, var: Var) -> DenseMatrix {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[var.0];
                DenseMatrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &DenseMatrix {
        &self.nodes[var.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value.item().expect("scalar node")
    }

    fn check(&self, var: Var) -> Result<&DenseMatrix> {
        self.nodes.get(var.0).map(|n| &n.value).ok_or(Error::UnknownVar(var.0))
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> Var {
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Param => true,
            _ => op_inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Constant)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Param)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.check(a)?.matmul(self.check(b)?)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn spmm(&mut self, s: &Arc<SparseCsr>, x: Var) -> Result<Var> {
        let value = s.spmm(self.check(x)?)?;
        Ok(self.push(value, Op::SpMM(Arc::clone(s), x)))
    }

    pub fn elementwise(&mut self, kind: Elementwise, a: Var, b: Option<Var>) -> Result<Var> {
        let binary = |tape: &Self| -> Result<Var> {
            let b = b.ok_or_else(|| Error::invalid("binary elementwise op needs two operands"))?;
            tape.check(b)?;
            Ok(b)
        };
        let av = self.check(a)?;
        match kind {
            Elementwise::Add => {
                let b = binary(self)?;
                let value = av.add(&self.nodes[b.0].value)?;
                Ok(self.push(value, Op::Add(a, b)))
            }
            Elementwise::Sub => {
                let b = binary(self)?;
                let value = av.sub(&self.nodes[b.0].value)?;
                Ok(self.push(value, Op::Sub(a, b)))
            }
            Elementwise::Mul => {
                let b = binary(self)?;
                let value = av.hadamard(&self.nodes[b.0].value)?;
                Ok(self.push(value, Op::Mul(a, b)))
            }
            Elementwise::Relu => {
                let value = av.map(relu);
                Ok(self.push(value, Op::Relu(a)))
            }
            Elementwise::Sigmoid => {
                let value = av.map(sigmoid);
                Ok(self.push(value, Op::Sigmoid(a)))
            }
            Elementwise::Scale(c) => {
                let value = av.scale(c);
                Ok(self.push(value, Op::Scale(a, c)))
            }
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(Elementwise::Add, a, Some(b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(Elementwise::Sub, a, Some(b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(Elementwise::Mul, a, Some(b))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.elementwise(Elementwise::Relu, a, None)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.elementwise(Elementwise::Sigmoid, a, None)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.elementwise(Elementwise::Scale(c), a, None)
    }

    /// Inverted dropout. In training mode every entry is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; otherwise, or
    /// when `p == 0`, `x` is returned unchanged.
    pub fn dropout(&mut self, x: Var, p: f64, rng: &mut Rng, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(alloc::format!("dropout rate {p} outside [0, 1)")));
        }
        let len = self.check(x)?.data().len();
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..len).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let xv = &self.nodes[x.0].value;
        let data = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = DenseMatrix::from_vec(xv.rows(), xv.cols(), data)?;
        Ok(self.push(value, Op::Mask(x, mask)))
    }

    /// `x + 1·b` for a `1 × cols` row `b`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.check(x)?, self.check(b)?);
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::shape("add_row", xv.shape(), bv.shape()));
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for (v, &c) in value.row_mut(i).iter_mut().zip(bv.data()) {
                *v += c;
            }
        }
        Ok(self.push(value, Op::AddRow(x, b)))
    }

    /// Scales column `j` of `x` by entry `j` of the `1 × cols` row `g`.
    pub fn mul_row(&mut self, x: Var, g: Var) -> Result<Var> {
        let (xv, gv) = (self.check(x)?, self.check(g)?);
        if gv.rows() != 1 || gv.cols() != xv.cols() {
            return Err(Error::shape("mul_row", xv.shape(), gv.shape()));
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for (v, &c) in value.row_mut(i).iter_mut().zip(gv.data()) {
                *v *= c;
            }
        }
        Ok(self.push(value, Op::MulRow(x, g)))
    }

    /// Per-column affine map with constant coefficients.
    pub fn affine_cols(&mut self, x: Var, scale: &[f64], shift: &[f64]) -> Result<Var> {
        let xv = self.check(x)?;
        if scale.len() != xv.cols() || shift.len() != xv.cols() {
            return Err(Error::shape("affine_cols", xv.shape(), (1, scale.len())));
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for ((v, &a), &b) in value.row_mut(i).iter_mut().zip(scale).zip(shift) {
                *v = *v * a + b;
            }
        }
        Ok(self.push(value, Op::ScaleCols(x, scale.to_vec())))
    }

    /// `x + c` for a constant matrix `c`.
    pub fn shift(&mut self, x: Var, c: &DenseMatrix) -> Result<Var> {
        let value = self.check(x)?.add(c)?;
        Ok(self.push(value, Op::Shift(x)))
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let value = self.check(x)?.gather_rows(idx)?;
        Ok(self.push(value, Op::GatherRows(x, idx.to_vec())))
    }

    pub fn center_cols(&mut self, x: Var) -> Result<Var> {
        let value = self.check(x)?.center_columns();
        Ok(self.push(value, Op::CenterCols(x)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.check(x)?.transpose();
        Ok(self.push(value, Op::Transpose(x)))
    }

    /// Frobenius norm as a 1×1 node.
    pub fn frobenius(&mut self, x: Var) -> Result<Var> {
        let value = DenseMatrix::scalar(self.check(x)?.frobenius());
        Ok(self.push(value, Op::Frobenius(x)))
    }

    /// `x / s` for a 1×1 node `s`.
    pub fn div_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xv, sv) = (self.check(x)?, self.check(s)?);
        let denom = sv.item().ok_or(Error::NotScalar(sv.shape()))?;
        let value = xv.scale(1.0 / denom);
        Ok(self.push(value, Op::DivScalar(x, s)))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = DenseMatrix::scalar(self.check(x)?.sum());
        Ok(self.push(value, Op::Sum(x)))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.check(x)?;
        let n = xv.data().len();
        if n == 0 {
            return Err(Error::invalid("mean of an empty matrix"));
        }
        let value = DenseMatrix::scalar(xv.sum() / n as f64);
        Ok(self.push(value, Op::Mean(x)))
    }

    /// Row-wise inner products of two equally shaped matrices, as a column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        if av.shape() != bv.shape() {
            return Err(Error::shape("row_dot", av.shape(), bv.shape()));
        }
        let data = (0..av.rows()).map(|i| crate::tensor::dense_dot(av.row(i), bv.row(i))).collect();
        let value = DenseMatrix::from_vec(av.rows(), 1, data)?;
        Ok(self.push(value, Op::RowDot(a, b)))
    }

    /// `log(mean(exp(x)))` over all entries, max-shifted.
    pub fn log_mean_exp(&mut self, x: Var) -> Result<Var> {
        let xv = self.check(x)?;
        if xv.data().is_empty() {
            return Err(Error::invalid("log_mean_exp of an empty matrix"));
        }
        let value = DenseMatrix::scalar(log_mean_exp(xv.data()));
        Ok(self.push(value, Op::LogMeanExp(x)))
    }

    /// Mean over the rows in `mask` of `-log softmax(logits_i)[label_i]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[Option<usize>], mask: &[usize]) -> Result<Var> {
        let lv = self.check(logits)?;
        let targets = xent_targets(lv, labels, mask)?;
        let (loss, probs) = xent_forward(lv, &targets);
        Ok(self.push(DenseMatrix::scalar(loss), Op::SoftmaxXent { logits, probs, targets }))
    }

    /// Centers the columns of `x`, then rescales so the mean squared row norm
    /// is `scale²`. An all-zero centered matrix maps to zeros.
    pub fn pairnorm(&mut self, x: Var, scale: f64) -> Result<Var> {
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::invalid("pairnorm scale must be positive"));
        }
        let xv = self.check(x)?;
        let n = xv.rows().max(1) as f64;
        let centered = xv.center_columns();
        let rms = libm::sqrt(centered.sum_squares() / n);
        let value = if rms > 0.0 {
            centered.scale(scale / rms)
        } else {
            DenseMatrix::zeros(xv.rows(), xv.cols())
        };
        Ok(self.push(value, Op::PairNorm { x, scale, rms }))
    }

    /// Per-column standardisation with batch statistics (biased variance,
    /// floor `eps`). Returns the node and the batch means and variances.
    pub fn standardize(&mut self, x: Var, eps: f64) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let xv = self.check(x)?;
        let means = xv.column_means();
        let centered = xv.center_columns();
        let n = xv.rows().max(1) as f64;
        let mut var = vec![0.0; xv.cols()];
        for i in 0..centered.rows() {
            for (s, &v) in var.iter_mut().zip(centered.row(i)) {
                *s += v * v;
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + eps)).collect();
        let mut value = centered;
        for i in 0..value.rows() {
            for (v, s) in value.row_mut(i).iter_mut().zip(&inv_std) {
                *v *= s;
            }
        }
        let node = self.push(value, Op::Standardize { x, inv_std });
        Ok((node, means, var))
    }

    /// Reverse sweep from a 1×1 `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.check(loss)?.shape();
        if shape != (1, 1) {
            return Err(Error::NotScalar(shape));
        }
        let mut grads: Vec<Option<DenseMatrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(DenseMatrix::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.requires_grad {
                self.backward_node(node, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<DenseMatrix>], var: Var, g: DenseMatrix) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn backward_node(&self, node: &Node, g: &DenseMatrix, grads: &mut [Option<DenseMatrix>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let ga = g.matmul_nt(val(*b)).expect("shapes checked on forward");
                    self.accumulate(grads, *a, ga);
                }
                if self.needs(*b) {
                    let gb = val(*a).matmul_tn(g).expect("shapes checked on forward");
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::SpMM(s, x) => {
                if self.needs(*x) {
                    let gx = s.spmm_transpose(g).expect("shapes checked on forward");
                    self.accumulate(grads, *x, gx);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.hadamard(val(*b)).unwrap());
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, g.hadamard(val(*a)).unwrap());
                }
            }
            Op::Relu(x) => {
                let gx = zip_map(g, val(*x), |g, x| if x > 0.0 { g } else { 0.0 });
                self.accumulate(grads, *x, gx);
            }
            Op::Sigmoid(x) => {
                let gx = zip_map(g, &node.value, |g, y| g * y * (1.0 - y));
                self.accumulate(grads, *x, gx);
            }
            Op::Scale(x, c) => self.accumulate(grads, *x, g.scale(*c)),
            Op::Mask(x, mask) => {
                let data = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                self.accumulate(grads, *x, DenseMatrix::from_vec(g.rows(), g.cols(), data).unwrap());
            }
            Op::AddRow(x, b) => {
                self.accumulate(grads, *x, g.clone());
                if self.needs(*b) {
                    self.accumulate(grads, *b, column_sums(g));
                }
            }
            Op::MulRow(x, gamma) => {
                let gv = val(*gamma);
                if self.needs(*x) {
                    let mut gx = g.clone();
                    for i in 0..gx.rows() {
                        for (v, &c) in gx.row_mut(i).iter_mut().zip(gv.data()) {
                            *v *= c;
                        }
                    }
                    self.accumulate(grads, *x, gx);
                }
                if self.needs(*gamma) {
                    self.accumulate(grads, *gamma, column_sums(&g.hadamard(val(*x)).unwrap()));
                }
            }
            Op::ScaleCols(x, scale) => {
                let mut gx = g.clone();
                for i in 0..gx.rows() {
                    for (v, &c) in gx.row_mut(i).iter_mut().zip(scale) {
                        *v *= c;
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Shift(x) => self.accumulate(grads, *x, g.clone()),
            Op::GatherRows(x, idx) => {
                let xv = val(*x);
                let mut gx = DenseMatrix::zeros(xv.rows(), xv.cols());
                for (k, &i) in idx.iter().enumerate() {
                    for (o, &v) in gx.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::CenterCols(x) => self.accumulate(grads, *x, g.center_columns()),
            Op::Transpose(x) => self.accumulate(grads, *x, g.transpose()),
            Op::Frobenius(x) => {
                let norm = node.value.data()[0];
                let xv = val(*x);
                let gx = if norm > 0.0 {
                    xv.scale(g.data()[0] / norm)
                } else {
                    DenseMatrix::zeros(xv.rows(), xv.cols())
                };
                self.accumulate(grads, *x, gx);
            }
            Op::DivScalar(x, s) => {
                let sv = val(*s).data()[0];
                if self.needs(*x) {
                    self.accumulate(grads, *x, g.scale(1.0 / sv));
                }
                if self.needs(*s) {
                    let dot = crate::tensor::dense_dot(g.data(), val(*x).data());
                    self.accumulate(grads, *s, DenseMatrix::scalar(-dot / (sv * sv)));
                }
            }
            Op::Sum(x) => {
                let (r, c) = val(*x).shape();
                self.accumulate(grads, *x, DenseMatrix::filled(r, c, g.data()[0]));
            }
            Op::Mean(x) => {
                let (r, c) = val(*x).shape();
                let n = (r * c) as f64;
                self.accumulate(grads, *x, DenseMatrix::filled(r, c, g.data()[0] / n));
            }
            Op::RowDot(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let scale_rows = |m: &DenseMatrix| {
                    let mut out = m.clone();
                    for i in 0..out.rows() {
                        let gi = g.get(i, 0);
                        out.row_mut(i).iter_mut().for_each(|v| *v *= gi);
                    }
                    out
                };
                if self.needs(*a) {
                    self.accumulate(grads, *a, scale_rows(bv));
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, scale_rows(av));
                }
            }
            Op::LogMeanExp(x) => {
                let xv = val(*x);
                let max = xv.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = xv.data().iter().map(|&v| libm::exp(v - max)).collect();
                let total: f64 = weights.iter().sum();
                let g0 = g.data()[0];
                let data = weights.iter().map(|w| g0 * w / total).collect();
                self.accumulate(grads, *x, DenseMatrix::from_vec(xv.rows(), xv.cols(), data).unwrap());
            }
            Op::SoftmaxXent { logits, probs, targets } => {
                let lv = val(*logits);
                let mut gx = DenseMatrix::zeros(lv.rows(), lv.cols());
                let w = g.data()[0] / targets.len() as f64;
                for (k, &(row, label)) in targets.iter().enumerate() {
                    let out = gx.row_mut(row);
                    for (c, (o, &p)) in out.iter_mut().zip(probs.row(k)).enumerate() {
                        let y = if c == label { 1.0 } else { 0.0 };
                        *o += w * (p - y);
                    }
                }
                self.accumulate(grads, *logits, gx);
            }
            Op::PairNorm { x, scale, rms } => {
                let xv = val(*x);
                if *rms == 0.0 {
                    self.accumulate(grads, *x, DenseMatrix::zeros(xv.rows(), xv.cols()));
                    return;
                }
                let n = xv.rows() as f64;
                // centered input recovered from the output
                let centered = node.value.scale(rms / scale);
                let proj = crate::tensor::dense_dot(g.data(), centered.data()) / (n * rms * rms);
                let gc = zip_map(g, &centered, |g, c| (scale / rms) * (g - c * proj));
                self.accumulate(grads, *x, gc.center_columns());
            }
            Op::Standardize { x, inv_std } => {
                let xhat = &node.value;
                let n = xhat.rows() as f64;
                let mean_g = column_sums(g);
                let mean_gx = column_sums(&g.hadamard(xhat).unwrap());
                let mut gx = g.clone();
                for i in 0..gx.rows() {
                    let xr = xhat.row(i);
                    for (j, v) in gx.row_mut(i).iter_mut().enumerate() {
                        let mg = mean_g.data()[j] / n;
                        let mgx = mean_gx.data()[j] / n;
                        *v = inv_std[j] * (*v - mg - xr[j] * mgx);
                    }
                }
                self.accumulate(grads, *x, gx);
            }
        }
    }
}

fn op_inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Constant | Op::Param => vec![],
        Op::MatMul(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::AddRow(a, b)
        | Op::MulRow(a, b)
        | Op::DivScalar(a, b)
        | Op::RowDot(a, b) => vec![*a, *b],
        Op::SpMM(_, x)
        | Op::Relu(x)
        | Op::Sigmoid(x)
        | Op::Scale(x, _)
        | Op::Mask(x, _)
        | Op::ScaleCols(x, _)
        | Op::Shift(x)
        | Op::GatherRows(x, _)
        | Op::CenterCols(x)
        | Op::Transpose(x)
        | Op::Frobenius(x)
        | Op::Sum(x)
        | Op::Mean(x)
        | Op::LogMeanExp(x)
        | Op::SoftmaxXent { logits: x, .. }
        | Op::PairNorm { x, .. }
        | Op::Standardize { x, .. } => vec![*x],
    }
}

fn zip_map(a: &DenseMatrix, b: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    DenseMatrix::from_vec(a.rows(), a.cols(), data).unwrap()
}

fn column_sums(m: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(1, m.cols());
    for i in 0..m.rows() {
        for (o, &v) in out.data_mut().iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

/// `max(x, 0)`, propagating NaN.
pub fn relu(x: f64) -> f64 {
    if x > 0.0 || x.is_nan() {
        x
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(mean(exp(values)))` with max-shift.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = values.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(total / values.len() as f64)
}

fn xent_targets(logits: &DenseMatrix, labels: &[Option<usize>], mask: &[usize]) -> Result<Vec<(usize, usize)>> {
    if mask.is_empty() {
        return Err(Error::invalid("empty mask"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::shape("softmax_cross_entropy", logits.shape(), (labels.len(), 1)));
    }
    mask.iter()
        .map(|&i| {
            if i >= logits.rows() {
                return Err(Error::invalid(alloc::format!("masked node {i} out of range")));
            }
            match labels[i] {
                Some(c) if c < logits.cols() => Ok((i, c)),
                Some(c) => Err(Error::invalid(alloc::format!(
                    "label {c} of node {i} outside {} classes",
                    logits.cols()
                ))),
                None => Err(Error::invalid(alloc::format!("node {i} is unlabeled"))),
            }
        })
        .collect()
}

fn xent_forward(logits: &DenseMatrix, targets: &[(usize, usize)]) -> (f64, DenseMatrix) {
    let mut probs = DenseMatrix::zeros(targets.len(), logits.cols());
    let mut loss = 0.0;
    for (k, &(row, label)) in targets.iter().enumerate() {
        let z = logits.row(row);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = z.iter().map(|&v| libm::exp(v - max)).sum();
        let log_total = libm::log(total);
        loss += -(z[label] - max - log_total);
        for (p, &v) in probs.row_mut(k).iter_mut().zip(z) {
            *p = libm::exp(v - max - log_total);
        }
    }
    (loss / targets.len() as f64, probs)
}

/// Mean cross-entropy of the masked rows of `logits` against `labels`.
pub fn softmax_cross_entropy(logits: &DenseMatrix, labels: &[Option<usize>], mask: &[usize]) -> Result<f64> {
    let targets = xent_targets(logits, labels, mask)?;
    Ok(xent_forward(logits, &targets).0)
}

#[cfg(test)]
mod tests;

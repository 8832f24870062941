//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Operations are recorded in evaluation order while the forward pass runs.
//! [`Tape::backward`] then walks the tape in reverse, propagating adjoints and
//! accumulating them into the gradient slots of the [`ParamSet`] the leaves
//! were read from.
//!
//! Only the handful of operators the encoder needs are provided.
//!
//! ```
//! use sga_core::numerics::{ParamSet, Tape, Tensor};
//!
//! let mut params = ParamSet::new();
//! let w = params.add("w", Tensor::row(&[3.0]).unwrap()).unwrap();
//! let mut tape = Tape::new();
//! let wn = tape.param(&params, w);
//! let x = tape.constant(Tensor::row(&[2.0]).unwrap());
//! let wx = tape.mul(wn, x).unwrap();
//! let sq = tape.mul(wx, wx).unwrap();
//! let loss = tape.sum_all(sq);
//! tape.backward(loss, &mut params).unwrap();
//! assert_eq!(params.gradient(w).data(), &[24.0]);
//! ```

use super::params::{ParamId, ParamSet};
use super::tensor::{sigmoid, softmax_unchecked, Tensor};
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Param(ParamId),
    Const,
    MatMul(NodeId, NodeId),
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    LayerNormRows { input: NodeId, inv_std: Vec<f64> },
    GatherRows(NodeId, Vec<usize>),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SumCols(NodeId),
    SumAll(NodeId),
    Reshape(NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let requires_grad = match &op {
            Op::Param(_) => true,
            Op::Const => false,
            Op::MatMul(a, b)
            | Op::MatMulT(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::MulRow(a, b) => self.req(*a) || self.req(*b),
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::SoftmaxRows(a)
            | Op::LayerNormRows { input: a, .. }
            | Op::GatherRows(a, _)
            | Op::SliceCols(a, _, _)
            | Op::SumCols(a)
            | Op::SumAll(a)
            | Op::Reshape(a) => self.req(*a),
            Op::ConcatRows(parts) | Op::ConcatCols(parts) => parts.iter().any(|p| self.req(*p)),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn req(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(params.value(id).clone(), Op::Param(id))
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Const)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(v, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    fn broadcast_row(&self, a: NodeId, row: NodeId, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.len() != av.cols() || av.shape().len() > 2 {
            return shape_err(op, av.shape(), rv.shape());
        }
        let c = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, rv.data()[i % c]))
            .collect();
        Ok(Tensor::from_parts(av.shape().to_vec(), data))
    }

    /// Adds a row vector (length = `cols(a)`) to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = self.broadcast_row(a, row, "add_row", |x, r| x + r)?;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    /// Multiplies every row of `a` elementwise by a row vector.
    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = self.broadcast_row(a, row, "mul_row", |x, r| x * r)?;
        Ok(self.push(v, Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let c = av.cols();
        let mut data = Vec::with_capacity(av.len());
        for r in 0..av.rows() {
            data.extend(softmax_unchecked(&av.data()[r * c..(r + 1) * c]));
        }
        let v = Tensor::from_parts(av.shape().to_vec(), data);
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Normalises each row to zero mean and unit variance (no affine part).
    pub fn layer_norm_rows(&mut self, a: NodeId, eps: f64) -> NodeId {
        let av = self.value(a);
        let c = av.cols();
        let mut data = Vec::with_capacity(av.len());
        let mut inv_std = Vec::with_capacity(av.rows());
        for r in 0..av.rows() {
            let row = &av.data()[r * c..(r + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            data.extend(row.iter().map(|x| (x - mean) * inv));
            inv_std.push(inv);
        }
        let v = Tensor::from_parts(av.shape().to_vec(), data);
        self.push(v, Op::LayerNormRows { input: a, inv_std })
    }

    pub fn gather_rows(&mut self, a: NodeId, indices: Vec<usize>) -> Result<NodeId> {
        let av = self.value(a);
        let c = av.cols();
        if let Some(&bad) = indices.iter().find(|&&i| i >= av.rows()) {
            return Err(Error::Argument(format!(
                "gather_rows index {bad} out of range for {} rows",
                av.rows()
            )));
        }
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in &indices {
            data.extend_from_slice(av.row_slice(i));
        }
        let v = Tensor::from_parts(vec![indices.len(), c], data);
        Ok(self.push(v, Op::GatherRows(a, indices)))
    }

    pub fn concat_rows(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        let c = parts
            .first()
            .map(|p| self.value(*p).cols())
            .ok_or_else(|| Error::Argument("concat_rows of nothing".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in &parts {
            let v = self.value(*p);
            if v.cols() != c {
                return shape_err("concat_rows", &[rows, c], v.shape());
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let v = Tensor::from_parts(vec![rows, c], data);
        Ok(self.push(v, Op::ConcatRows(parts)))
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        let r = parts
            .first()
            .map(|p| self.value(*p).rows())
            .ok_or_else(|| Error::Argument("concat_cols of nothing".into()))?;
        let mut total = 0;
        for p in &parts {
            let v = self.value(*p);
            if v.rows() != r {
                return shape_err("concat_cols", &[r, total], v.shape());
            }
            total += v.cols();
        }
        let mut data = Vec::with_capacity(r * total);
        for row in 0..r {
            for p in &parts {
                data.extend_from_slice(self.value(*p).row_slice(row));
            }
        }
        let v = Tensor::from_parts(vec![r, total], data);
        Ok(self.push(v, Op::ConcatCols(parts)))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let av = self.value(a);
        if start > end || end > av.cols() {
            return Err(Error::Argument(format!(
                "slice_cols {start}..{end} out of range for {} columns",
                av.cols()
            )));
        }
        let mut data = Vec::with_capacity(av.rows() * (end - start));
        for r in 0..av.rows() {
            data.extend_from_slice(&av.row_slice(r)[start..end]);
        }
        let v = Tensor::from_parts(vec![av.rows(), end - start], data);
        Ok(self.push(v, Op::SliceCols(a, start, end)))
    }

    /// Sums each row: `r x c -> r x 1`, accumulating left to right from `0.0`.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let data = (0..av.rows())
            .map(|r| {
                let mut acc = 0.0;
                for x in av.row_slice(r) {
                    acc += x;
                }
                acc
            })
            .collect();
        let v = Tensor::from_parts(vec![av.rows(), 1], data);
        self.push(v, Op::SumCols(a))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).sum();
        self.push(Tensor::from_parts(vec![1, 1], vec![s]), Op::SumAll(a))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(a).reshape(shape)?;
        Ok(self.push(v, Op::Reshape(a)))
    }

    /// Propagates `d loss` back through the tape and adds the result into the
    /// gradient slot of every parameter leaf. May run once per tape.
    pub fn backward(&mut self, loss: NodeId, params: &mut ParamSet) -> Result<()> {
        if self.backward_done {
            return Err(Error::State("backward already ran on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Param(pid) => {
                    let slot = &mut params.get_mut(*pid).gradient;
                    slot.add_assign(&g)?;
                }
                Op::Const => {}
                Op::MatMul(a, b) => {
                    if self.req(*a) {
                        let da = g.matmul_t(self.value(*b))?;
                        accumulate(&mut grads, *a, da)?;
                    }
                    if self.req(*b) {
                        let db = self.value(*a).transpose().matmul(&g)?;
                        accumulate(&mut grads, *b, db)?;
                    }
                }
                Op::MatMulT(a, b) => {
                    if self.req(*a) {
                        let da = g.matmul(self.value(*b))?;
                        accumulate(&mut grads, *a, da)?;
                    }
                    if self.req(*b) {
                        let db = g.transpose().matmul(self.value(*a))?;
                        accumulate(&mut grads, *b, db)?;
                    }
                }
                Op::Add(a, b) => {
                    if self.req(*b) {
                        accumulate(&mut grads, *b, g.clone())?;
                    }
                    if self.req(*a) {
                        accumulate(&mut grads, *a, g)?;
                    }
                }
                Op::Sub(a, b) => {
                    if self.req(*b) {
                        accumulate(&mut grads, *b, g.scale(-1.0))?;
                    }
                    if self.req(*a) {
                        accumulate(&mut grads, *a, g)?;
                    }
                }
                Op::Mul(a, b) => {
                    if self.req(*a) {
                        accumulate(&mut grads, *a, g.mul(self.value(*b))?)?;
                    }
                    if self.req(*b) {
                        accumulate(&mut grads, *b, g.mul(self.value(*a))?)?;
                    }
                }
                Op::AddRow(a, row) => {
                    if self.req(*row) {
                        let dr = column_sums(&g, self.value(*row).shape());
                        accumulate(&mut grads, *row, dr)?;
                    }
                    if self.req(*a) {
                        accumulate(&mut grads, *a, g)?;
                    }
                }
                Op::MulRow(a, row) => {
                    let rv = self.value(*row);
                    if self.req(*row) {
                        let prod = g.mul(self.value(*a))?;
                        accumulate(&mut grads, *row, column_sums(&prod, rv.shape()))?;
                    }
                    if self.req(*a) {
                        let c = rv.len();
                        let data = g
                            .data()
                            .iter()
                            .enumerate()
                            .map(|(i, &x)| x * rv.data()[i % c])
                            .collect();
                        accumulate(&mut grads, *a, Tensor::from_parts(g.shape().to_vec(), data))?;
                    }
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.scale(*c))?,
                Op::Sigmoid(a) => {
                    let d = g.zip_with(&node.value, "sigmoid'", |g, y| g * y * (1.0 - y))?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Tanh(a) => {
                    let d = g.zip_with(&node.value, "tanh'", |g, y| g * (1.0 - y * y))?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Relu(a) => {
                    let d = g.zip_with(self.value(*a), "relu'", |g, x| if x > 0.0 { g } else { 0.0 })?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut data = Vec::with_capacity(y.len());
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let inner: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        data.extend(yr.iter().zip(gr).map(|(y, g)| y * (g - inner)));
                    }
                    debug_assert_eq!(data.len(), y.rows() * c);
                    accumulate(&mut grads, *a, Tensor::from_parts(y.shape().to_vec(), data))?;
                }
                Op::LayerNormRows { input, inv_std } => {
                    let y = &node.value;
                    let c = y.cols() as f64;
                    let mut data = Vec::with_capacity(y.len());
                    for (r, inv) in inv_std.iter().enumerate() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let mean_g = gr.iter().sum::<f64>() / c;
                        let mean_gy = yr.iter().zip(gr).map(|(y, g)| y * g).sum::<f64>() / c;
                        data.extend(yr.iter().zip(gr).map(|(y, g)| inv * (g - mean_g - y * mean_gy)));
                    }
                    accumulate(&mut grads, *input, Tensor::from_parts(y.shape().to_vec(), data))?;
                }
                Op::GatherRows(a, indices) => {
                    let src = self.value(*a);
                    let c = src.cols();
                    let mut d = Tensor::zeros(&[src.rows(), c]);
                    for (k, &i) in indices.iter().enumerate() {
                        let dst = &mut d.data_mut()[i * c..(i + 1) * c];
                        for (x, y) in dst.iter_mut().zip(g.row_slice(k)) {
                            *x += y;
                        }
                    }
                    let d = d.reshape(src.shape())?;
                    accumulate(&mut grads, *a, d)?;
                }
                Op::ConcatRows(parts) => {
                    let c = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let pv = self.value(*p);
                        let n = pv.rows() * c;
                        if self.req(*p) {
                            let d = Tensor::from_parts(pv.shape().to_vec(), g.data()[offset..offset + n].to_vec());
                            accumulate(&mut grads, *p, d)?;
                        }
                        offset += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let pv = self.value(*p);
                        let w = pv.cols();
                        if self.req(*p) {
                            let mut data = Vec::with_capacity(pv.len());
                            for r in 0..g.rows() {
                                data.extend_from_slice(&g.row_slice(r)[start..start + w]);
                            }
                            accumulate(&mut grads, *p, Tensor::from_parts(pv.shape().to_vec(), data))?;
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let src = self.value(*a);
                    let c = src.cols();
                    let mut d = Tensor::zeros(src.shape());
                    for r in 0..src.rows() {
                        d.data_mut()[r * c + start..r * c + end].copy_from_slice(g.row_slice(r));
                    }
                    accumulate(&mut grads, *a, d)?;
                }
                Op::SumCols(a) => {
                    let src = self.value(*a);
                    let c = src.cols();
                    let data = (0..src.len()).map(|i| g.data()[i / c]).collect();
                    accumulate(&mut grads, *a, Tensor::from_parts(src.shape().to_vec(), data))?;
                }
                Op::SumAll(a) => {
                    let src = self.value(*a);
                    accumulate(&mut grads, *a, Tensor::full(src.shape(), g.data()[0]))?;
                }
                Op::Reshape(a) => {
                    let d = g.reshape(self.value(*a).shape())?;
                    accumulate(&mut grads, *a, d)?;
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) -> Result<()> {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn column_sums(g: &Tensor, shape: &[usize]) -> Tensor {
    let c = g.cols();
    let mut out = vec![0.0; c];
    for r in 0..g.rows() {
        for (o, x) in out.iter_mut().zip(g.row_slice(r)) {
            *o += x;
        }
    }
    Tensor::from_parts(shape.to_vec(), out)
}

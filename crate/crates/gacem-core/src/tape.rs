//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A `Tape` is rebuilt for every forward pass (define-by-run). Nodes are
//! appended in execution order, so every node's parents precede it and a
//! single reverse sweep visits each node after all of its consumers.
//! Operations are tensor-granular: a masked linear layer, elementwise
//! nonlinearities, row-wise reductions and slicing — exactly what the density
//! model needs, nothing more.

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    /// `y = x . (w o mask)^T + b` with `x: [n,i]`, `w: [o,i]`, `b: [o]`.
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        mask: Option<Arc<Tensor>>,
        w_eff: Tensor,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddScalar(NodeId),
    Scale(NodeId, f64),
    /// `y = c - x`.
    ConstMinus(NodeId),
    /// `y[i,k] = col[i] + offset - x[i,k]`.
    ColShiftSub { x: NodeId, col: Arc<Vec<f64>> },
    Tanh(NodeId),
    Exp(NodeId),
    /// `y = ln(x + eps)`.
    LnPlus { x: NodeId, eps: f64 },
    NormCdf(NodeId),
    /// Row-wise softmax over a `[n,k]` tensor.
    Softmax(NodeId),
    /// Row-wise `max + ln sum exp(x - max)` over a `[n,k]` tensor -> `[n]`.
    LogSumExp(NodeId),
    /// Row-wise sum over a `[n,k]` tensor -> `[n]`.
    RowSum(NodeId),
    SliceCols {
        x: NodeId,
        start: usize,
        len: usize,
        width: usize,
    },
    Clamp {
        x: NodeId,
        lo: f64,
        hi: f64,
    },
    /// `y = sum_i x[i] * w[i]` -> scalar, with constant weights.
    Dot { x: NodeId, weights: Arc<Vec<f64>> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients per node, indexed by `NodeId`.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for `id`, zero-filled when the node never received one.
    pub fn take_or_zeros(&mut self, id: NodeId, shape: &[usize]) -> Tensor {
        self.grads[id.0].take().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Register a constant input.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Register a trainable parameter.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Masked linear layer. The mask is applied elementwise to the weights
    /// before the product, so a zero mask entry cuts both the forward
    /// contribution and the weight gradient.
    pub fn linear(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        mask: Option<Arc<Tensor>>,
    ) -> Result<NodeId> {
        let (n, in_dim) = self.value(x).dims2()?;
        let (out_dim, w_in) = self.value(w).dims2()?;
        if w_in != in_dim {
            return Err(Error::Shape(format!(
                "linear: input width {in_dim} does not match weight width {w_in}"
            )));
        }
        if self.value(b).shape() != [out_dim] {
            return Err(Error::Shape(format!(
                "linear: bias shape {:?} does not match {out_dim} outputs",
                self.value(b).shape()
            )));
        }
        if let Some(m) = &mask {
            if m.shape() != [out_dim, in_dim] {
                return Err(Error::Shape(format!(
                    "linear: mask shape {:?} does not match weights [{out_dim}, {in_dim}]",
                    m.shape()
                )));
            }
        }
        let w_eff = match &mask {
            Some(m) => {
                let mut eff = self.value(w).clone();
                for (e, mv) in eff.data_mut().iter_mut().zip(m.data()) {
                    *e *= mv;
                }
                eff
            }
            None => self.value(w).clone(),
        };
        let mut out = vec![0.0; n * out_dim];
        {
            let xv = self.value(x).data();
            let bv = self.value(b).data();
            let wv = w_eff.data();
            for r in 0..n {
                let xr = &xv[r * in_dim..(r + 1) * in_dim];
                let or = &mut out[r * out_dim..(r + 1) * out_dim];
                for o in 0..out_dim {
                    let wr = &wv[o * in_dim..(o + 1) * in_dim];
                    let mut acc = bv[o];
                    for i in 0..in_dim {
                        acc += xr[i] * wr[i];
                    }
                    or[o] = acc;
                }
            }
        }
        let requires = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(
            Tensor::new(vec![n, out_dim], out)?,
            Op::Linear { x, w, b, mask, w_eff },
            requires,
        ))
    }

    fn binary_same_shape(&mut self, a: NodeId, b: NodeId, name: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!(
                "{name}: shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "add")?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "sub")?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "mul")?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b), rg))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "div")?;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x / y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Div(a, b), rg))
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| v + c).collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::AddScalar(x), rg)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| v * c).collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::Scale(x, c), rg)
    }

    pub fn const_minus(&mut self, c: f64, x: NodeId) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| c - v).collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::ConstMinus(x), rg)
    }

    /// `y[i,k] = col[i] + offset - x[i,k]` for `x: [n,k]`.
    pub fn col_shift_sub(&mut self, col: Arc<Vec<f64>>, offset: f64, x: NodeId) -> Result<NodeId> {
        let (n, k) = self.value(x).dims2()?;
        if col.len() != n {
            return Err(Error::Shape(format!(
                "col_shift_sub: column length {} does not match {n} rows",
                col.len()
            )));
        }
        let xv = self.value(x).data();
        let mut data = vec![0.0; n * k];
        for i in 0..n {
            let base = col[i] + offset;
            for j in 0..k {
                data[i * k + j] = base - xv[i * k + j];
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(vec![n, k], data)?,
            Op::ColShiftSub { x, col },
            rg,
        ))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| math::tanh(*v)).collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::Tanh(x), rg)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> = self.value(x).data().iter().map(|v| math::exp(*v)).collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::Exp(x), rg)
    }

    /// `ln(x + eps)`; `eps = 0` is a plain logarithm.
    pub fn ln_plus(&mut self, x: NodeId, eps: f64) -> Result<NodeId> {
        for &v in self.value(x).data() {
            if v + eps <= 0.0 {
                return Err(Error::Domain(format!("ln_plus: argument {v} + {eps} <= 0")));
            }
        }
        let data: Vec<f64> = self.value(x).data().iter().map(|v| math::ln(v + eps)).collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(shape, data).unwrap(), Op::LnPlus { x, eps }, rg))
    }

    pub fn norm_cdf(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .map(|v| math::norm_cdf(*v))
            .collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::NormCdf(x), rg)
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let (n, k) = self.value(x).dims2()?;
        let xv = self.value(x).data();
        let mut data = vec![0.0; n * k];
        for i in 0..n {
            let row = &xv[i * k..(i + 1) * k];
            let lse = math::log_sum_exp(row);
            for j in 0..k {
                data[i * k + j] = math::exp(row[j] - lse);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(vec![n, k], data)?, Op::Softmax(x), rg))
    }

    pub fn log_sum_exp(&mut self, x: NodeId) -> Result<NodeId> {
        let (n, k) = self.value(x).dims2()?;
        let xv = self.value(x).data();
        let mut data = vec![0.0; n];
        for i in 0..n {
            data[i] = math::log_sum_exp(&xv[i * k..(i + 1) * k]);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(vec![n], data)?, Op::LogSumExp(x), rg))
    }

    pub fn row_sum(&mut self, x: NodeId) -> Result<NodeId> {
        let (n, k) = self.value(x).dims2()?;
        let xv = self.value(x).data();
        let mut data = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..k {
                s += xv[i * k + j];
            }
            data[i] = s;
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(vec![n], data)?, Op::RowSum(x), rg))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (n, width) = self.value(x).dims2()?;
        if start + len > width {
            return Err(Error::Shape(format!(
                "slice_cols: columns {start}..{} out of width {width}",
                start + len
            )));
        }
        let xv = self.value(x).data();
        let mut data = vec![0.0; n * len];
        for i in 0..n {
            data[i * len..(i + 1) * len]
                .copy_from_slice(&xv[i * width + start..i * width + start + len]);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(vec![n, len], data)?,
            Op::SliceCols { x, start, len, width },
            rg,
        ))
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let data: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .map(|v| v.max(lo).min(hi))
            .collect();
        let shape = self.value(x).shape().to_vec();
        let rg = self.rg(x);
        self.push(Tensor::new(shape, data).unwrap(), Op::Clamp { x, lo, hi }, rg)
    }

    /// Weighted sum of a 1-D tensor against constant weights -> scalar node.
    pub fn dot(&mut self, x: NodeId, weights: Arc<Vec<f64>>) -> Result<NodeId> {
        let xt = self.value(x);
        if xt.shape().len() != 1 || xt.len() != weights.len() {
            return Err(Error::Shape(format!(
                "dot: expected 1-D tensor of length {}, got shape {:?}",
                weights.len(),
                xt.shape()
            )));
        }
        let mut s = 0.0;
        for (v, w) in xt.data().iter().zip(weights.iter()) {
            s += v * w;
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::Dot { x, weights }, rg))
    }

    /// Reverse sweep from a scalar output. Returns a gradient per node;
    /// parameter leaves hold `d(output)/d(param)`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::Contract(format!(
                "backward: root must be scalar, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = None;
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn add_grad(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        if !self.rg(id) {
            return;
        }
        match &mut grads[id.0] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                    *e += d;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    fn accumulate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b, mask, w_eff } => {
                let (n, in_dim) = self.value(*x).dims2().unwrap();
                let (out_dim, _) = w_eff.dims2().unwrap();
                let gv = g.data();
                if self.rg(*x) {
                    let mut gx = vec![0.0; n * in_dim];
                    let wv = w_eff.data();
                    for r in 0..n {
                        let gr = &gv[r * out_dim..(r + 1) * out_dim];
                        let xr = &mut gx[r * in_dim..(r + 1) * in_dim];
                        for o in 0..out_dim {
                            let go = gr[o];
                            if go == 0.0 {
                                continue;
                            }
                            let wr = &wv[o * in_dim..(o + 1) * in_dim];
                            for i in 0..in_dim {
                                xr[i] += go * wr[i];
                            }
                        }
                    }
                    self.add_grad(grads, *x, Tensor::new(vec![n, in_dim], gx).unwrap());
                }
                if self.rg(*w) {
                    let xv = self.value(*x).data();
                    let mut gw = vec![0.0; out_dim * in_dim];
                    for r in 0..n {
                        let gr = &gv[r * out_dim..(r + 1) * out_dim];
                        let xr = &xv[r * in_dim..(r + 1) * in_dim];
                        for o in 0..out_dim {
                            let go = gr[o];
                            if go == 0.0 {
                                continue;
                            }
                            let wr = &mut gw[o * in_dim..(o + 1) * in_dim];
                            for i in 0..in_dim {
                                wr[i] += go * xr[i];
                            }
                        }
                    }
                    if let Some(m) = mask {
                        for (gwv, mv) in gw.iter_mut().zip(m.data()) {
                            *gwv *= mv;
                        }
                    }
                    self.add_grad(grads, *w, Tensor::new(vec![out_dim, in_dim], gw).unwrap());
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; out_dim];
                    for r in 0..n {
                        for o in 0..out_dim {
                            gb[o] += gv[r * out_dim + o];
                        }
                    }
                    self.add_grad(grads, *b, Tensor::vector(gb));
                }
            }
            Op::Add(a, b) => {
                self.add_grad(grads, *a, g.clone());
                self.add_grad(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.add_grad(grads, *a, g.clone());
                let neg: Vec<f64> = g.data().iter().map(|v| -v).collect();
                self.add_grad(grads, *b, Tensor::new(g.shape().to_vec(), neg).unwrap());
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let d: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.value(*b).data())
                        .map(|(gv, bv)| gv * bv)
                        .collect();
                    self.add_grad(grads, *a, Tensor::new(g.shape().to_vec(), d).unwrap());
                }
                if self.rg(*b) {
                    let d: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(gv, av)| gv * av)
                        .collect();
                    self.add_grad(grads, *b, Tensor::new(g.shape().to_vec(), d).unwrap());
                }
            }
            Op::Div(a, b) => {
                let y = node.value.data();
                if self.rg(*a) {
                    let d: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.value(*b).data())
                        .map(|(gv, bv)| gv / bv)
                        .collect();
                    self.add_grad(grads, *a, Tensor::new(g.shape().to_vec(), d).unwrap());
                }
                if self.rg(*b) {
                    let d: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.value(*b).data().iter().zip(y))
                        .map(|(gv, (bv, yv))| -gv * yv / bv)
                        .collect();
                    self.add_grad(grads, *b, Tensor::new(g.shape().to_vec(), d).unwrap());
                }
            }
            Op::AddScalar(x) => self.add_grad(grads, *x, g.clone()),
            Op::Scale(x, c) => {
                let d: Vec<f64> = g.data().iter().map(|v| v * c).collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::ConstMinus(x) | Op::ColShiftSub { x, .. } => {
                let d: Vec<f64> = g.data().iter().map(|v| -v).collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::Tanh(x) => {
                let d: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .map(|(gv, yv)| gv * (1.0 - yv * yv))
                    .collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::Exp(x) => {
                let d: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .map(|(gv, yv)| gv * yv)
                    .collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::LnPlus { x, eps } => {
                let d: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(gv, xv)| gv / (xv + eps))
                    .collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::NormCdf(x) => {
                let d: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(gv, xv)| gv * math::norm_pdf(*xv))
                    .collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::Softmax(x) => {
                let (n, k) = node.value.dims2().unwrap();
                let y = node.value.data();
                let gv = g.data();
                let mut d = vec![0.0; n * k];
                for i in 0..n {
                    let mut dot = 0.0;
                    for j in 0..k {
                        dot += gv[i * k + j] * y[i * k + j];
                    }
                    for j in 0..k {
                        d[i * k + j] = y[i * k + j] * (gv[i * k + j] - dot);
                    }
                }
                self.add_grad(grads, *x, Tensor::new(vec![n, k], d).unwrap());
            }
            Op::LogSumExp(x) => {
                let xt = self.value(*x);
                let (n, k) = xt.dims2().unwrap();
                let y = node.value.data();
                let gv = g.data();
                let mut d = vec![0.0; n * k];
                for i in 0..n {
                    for j in 0..k {
                        d[i * k + j] = gv[i] * math::exp(xt.data()[i * k + j] - y[i]);
                    }
                }
                self.add_grad(grads, *x, Tensor::new(vec![n, k], d).unwrap());
            }
            Op::RowSum(x) => {
                let (n, k) = self.value(*x).dims2().unwrap();
                let gv = g.data();
                let mut d = vec![0.0; n * k];
                for i in 0..n {
                    for j in 0..k {
                        d[i * k + j] = gv[i];
                    }
                }
                self.add_grad(grads, *x, Tensor::new(vec![n, k], d).unwrap());
            }
            Op::SliceCols { x, start, len, width } => {
                let n = g.shape()[0];
                let gv = g.data();
                let mut d = vec![0.0; n * width];
                for i in 0..n {
                    for j in 0..*len {
                        d[i * width + start + j] = gv[i * len + j];
                    }
                }
                self.add_grad(grads, *x, Tensor::new(vec![n, *width], d).unwrap());
            }
            Op::Clamp { x, lo, hi } => {
                let d: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(gv, xv)| if *xv > *lo && *xv < *hi { *gv } else { 0.0 })
                    .collect();
                self.add_grad(grads, *x, Tensor::new(g.shape().to_vec(), d).unwrap());
            }
            Op::Dot { x, weights } => {
                let g0 = g.data()[0];
                let d: Vec<f64> = weights.iter().map(|w| g0 * w).collect();
                self.add_grad(grads, *x, Tensor::vector(d));
            }
        }
    }
}

/// Log density of N(mu, sigma^2) at x, composed from tape primitives so it is
/// differentiable with respect to all three arguments.
pub fn gaussian_log_pdf(tape: &mut Tape, x: NodeId, mu: NodeId, sigma: NodeId) -> Result<NodeId> {
    for &s in tape.value(sigma).data() {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {s}")));
        }
    }
    let diff = tape.sub(x, mu)?;
    let z = tape.div(diff, sigma)?;
    let z2 = tape.mul(z, z)?;
    let quad = tape.scale(z2, -0.5);
    let ln_sigma = tape.ln_plus(sigma, 0.0)?;
    let a = tape.sub(quad, ln_sigma)?;
    Ok(tape.add_scalar(a, -math::HALF_LN_2PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::sync::Arc;

    fn ones(n: usize) -> Arc<Vec<f64>> {
        Arc::new(vec![1.0 / n as f64; n])
    }

    #[test]
    fn identity_masked_linear() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let w = tape.param(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = tape.param(Tensor::vector(vec![0.0, 0.0]));
        let mask = Arc::new(Tensor::filled(&[2, 2], 1.0));
        let y = tape.linear(x, w, b, Some(mask)).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);
    }

    #[test]
    fn all_zero_mask_passes_bias_only() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 2, vec![7.0, -3.0]).unwrap());
        let w = tape.param(Tensor::matrix(3, 2, vec![5.0; 6]).unwrap());
        let b = tape.param(Tensor::vector(vec![0.5, -1.5, 2.0]));
        let mask = Arc::new(Tensor::zeros(&[3, 2]));
        let y = tape.linear(x, w, b, Some(mask)).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, -1.5, 2.0]);
    }

    #[test]
    fn masked_linear_matches_dense_oracle() {
        // 2x3 layer against a hand-rolled dense product with mask applied.
        let wv = vec![0.3, -1.2, 0.7, 2.0, 0.1, -0.4];
        let mv = vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let xv = vec![0.5, -0.25, 1.5];
        let bv = vec![0.1, -0.2];
        let mut oracle = [0.0f64; 2];
        for o in 0..2 {
            let mut acc = bv[o];
            for i in 0..3 {
                acc += xv[i] * wv[o * 3 + i] * mv[o * 3 + i];
            }
            oracle[o] = acc;
        }
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 3, xv).unwrap());
        let w = tape.param(Tensor::matrix(2, 3, wv).unwrap());
        let b = tape.param(Tensor::vector(bv));
        let mask = Arc::new(Tensor::matrix(2, 3, mv).unwrap());
        let y = tape.linear(x, w, b, Some(mask)).unwrap();
        for (got, want) in tape.value(y).data().iter().zip(oracle.iter()) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_rejects_shape_mismatch() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 3, vec![0.0; 3]).unwrap());
        let w = tape.param(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let b = tape.param(Tensor::vector(vec![0.0; 2]));
        assert!(matches!(tape.linear(x, w, b, None), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_square() {
        // f(w) = w^2 at w = 3 has gradient 6.
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![3.0]));
        let sq = tape.mul(w, w).unwrap();
        let out = tape.dot(sq, ones(1)).unwrap();
        let grads = tape.backward(out).unwrap();
        assert!((grads.get(w).unwrap().data()[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn masked_out_weight_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap());
        let w = tape.param(Tensor::matrix(1, 2, vec![0.4, 0.6]).unwrap());
        let b = tape.param(Tensor::vector(vec![0.0]));
        let mask = Arc::new(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
        let y = tape.linear(x, w, b, Some(mask)).unwrap();
        let flat = tape.slice_cols(y, 0, 1).unwrap();
        let rs = tape.row_sum(flat).unwrap();
        let out = tape.dot(rs, ones(1)).unwrap();
        let grads = tape.backward(out).unwrap();
        let gw = grads.get(w).unwrap().data();
        assert!(gw[0] != 0.0);
        assert_eq!(gw[1], 0.0);
    }

    #[test]
    fn gaussian_log_pdf_node_matches_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.25]));
        let mu = tape.param(Tensor::vector(vec![0.5]));
        let sigma = tape.param(Tensor::vector(vec![0.3]));
        let lp = gaussian_log_pdf(&mut tape, x, mu, sigma).unwrap();
        let want = crate::math::gaussian_log_pdf(1.25, 0.5, 0.3).unwrap();
        assert!((tape.value(lp).data()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_log_pdf_node_rejects_bad_sigma() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![0.0]));
        let mu = tape.leaf(Tensor::vector(vec![0.0]));
        let sigma = tape.leaf(Tensor::vector(vec![-0.2]));
        assert!(matches!(
            gaussian_log_pdf(&mut tape, x, mu, sigma),
            Err(Error::Domain(_))
        ));
    }
}

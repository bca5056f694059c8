//! Tape-based reverse-mode differentiation over 2-D tensors.
//!
//! A [`Graph`] records every op applied to it in creation order. Each op
//! checks shapes eagerly and refuses to produce non-finite values, so a
//! numeric fault is reported at the op that caused it. [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients of trainable
//! parameters into a [`Grads`] buffer. Inputs created with
//! [`Graph::input`] are constants and never receive gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::gemm;
use super::{Grads, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// Second operand is either the same shape or a `1 x cols` row broadcast over rows.
    Add(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    Transpose(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    RowSoftmax(Var),
    MeanRows(Var),
    SumRows(Var),
    SumAll(Var),
    /// Mask already carries the `1 / (1 - rate)` survivor scale.
    Dropout(Var, Vec<f64>),
    CrossEntropy(Var, usize),
    Gather(Var, Vec<usize>),
    SliceCols(Var, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Scale(..) => "scale",
            Op::ConcatCols(_) => "concat",
            Op::Transpose(_) => "transpose",
            Op::Relu(_) => "relu",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::RowSoftmax(_) => "row_softmax",
            Op::MeanRows(_) => "mean_rows",
            Op::SumRows(_) => "sum_rows",
            Op::SumAll(_) => "sum_all",
            Op::Dropout(..) => "dropout",
            Op::CrossEntropy(..) => "cross_entropy",
            Op::Gather(..) => "gather",
            Op::SliceCols(..) => "slice_cols",
        }
    }
}

struct Node {
    /// `None` for parameters, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    rng: Option<ChaCha8Rng>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Contract(format!(
        "{op} shape mismatch: {}x{} vs {}x{}",
        a.0, a.1, b.0, b.1
    ))
}

impl<'p> Graph<'p> {
    /// An evaluation-mode graph: dropout is the identity.
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            rng: None,
        }
    }

    /// A training-mode graph whose dropout masks are drawn from `seed`.
    pub fn training(params: &'p ParamStore, seed: u64) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// Whether gradient can flow from `v` back to some trainable parameter.
    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        let needs_grad = match &op {
            Op::Input => false,
            Op::Param(id) => self.params.is_trainable(*id),
            Op::MatMul(a, b) | Op::Add(a, b) => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
            Op::ConcatCols(vs) => vs.iter().any(|v| self.nodes[v.0].needs_grad),
            Op::Scale(a, _)
            | Op::Transpose(a)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::RowSoftmax(a)
            | Op::MeanRows(a)
            | Op::SumRows(a)
            | Op::SumAll(a)
            | Op::Dropout(a, _)
            | Op::CrossEntropy(a, _)
            | Op::Gather(a, _)
            | Op::SliceCols(a, _) => self.nodes[a.0].needs_grad,
        };
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant input; it never receives gradient.
    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: self.params.is_trainable(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var> {
        let id = self.params.require(name)?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta.shape(), tb.shape()));
        }
        let out = ta.matmul(tb)?;
        self.push(out, Op::MatMul(a, b))
    }

    /// Elementwise sum; `b` may also be a `1 x cols` row added to every row of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let mut out = ta.clone();
        if ta.shape() == tb.shape() {
            out.add_assign(tb);
        } else if tb.rows() == 1 && tb.cols() == ta.cols() {
            for r in 0..out.rows() {
                for (o, x) in out.row_mut(r).iter_mut().zip(tb.data()) {
                    *o += x;
                }
            }
        } else {
            return Err(shape_err("add", ta.shape(), tb.shape()));
        }
        self.push(out, Op::Add(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    /// Horizontal concatenation; all parts must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for p in parts {
            let t = self.value(*p);
            if t.rows() != rows {
                return Err(shape_err("concat", self.value(*first).shape(), t.shape()));
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let t = self.value(*p);
            for r in 0..rows {
                out.row_mut(r)[off..off + t.cols()].copy_from_slice(t.row(r));
            }
            off += t.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(out, Op::Sigmoid(a))
    }

    /// Softmax applied independently to each row.
    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::RowSoftmax(a))
    }

    /// Column-wise mean over rows, giving `1 x cols`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rows() == 0 {
            return Err(Error::Contract(
                "mean_rows of a tensor with zero rows".into(),
            ));
        }
        let mut out = column_sums(t);
        out.scale_assign(1.0 / t.rows() as f64);
        self.push(out, Op::MeanRows(a))
    }

    /// Column-wise sum over rows, giving `1 x cols`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let out = column_sums(self.value(a));
        self.push(out, Op::SumRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    /// Inverted dropout. In evaluation mode, or with `rate == 0`, returns `a` unchanged.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Contract(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if self.rng.is_none() || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(a).len();
        let rng = self.rng.as_mut().expect("training graph");
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let t = self.value(a);
        let mut out = t.clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        self.push(out, Op::Dropout(a, mask))
    }

    /// Negative log-likelihood of `label` under `softmax(logits)`, for a `1 x k` logit row.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let t = self.value(logits);
        if t.rows() != 1 || label >= t.cols() {
            return Err(Error::Contract(format!(
                "cross_entropy expects 1 x k logits with label < k, got {}x{} and label {label}",
                t.rows(),
                t.cols()
            )));
        }
        let row = t.row(0);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        self.push(
            Tensor::scalar(lse - row[label]),
            Op::CrossEntropy(logits, label),
        )
    }

    /// Selects rows of `table` by index (embedding lookup).
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let mut out = Tensor::zeros(ids.len(), t.cols());
        for (r, &id) in ids.iter().enumerate() {
            if id >= t.rows() {
                return Err(Error::Contract(format!(
                    "gather index {id} out of range for {} rows",
                    t.rows()
                )));
            }
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(out, Op::Gather(table, ids.to_vec()))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if start + len > t.cols() {
            return Err(Error::Contract(format!(
                "slice_cols {start}..{} out of range for {} columns",
                start + len,
                t.cols()
            )));
        }
        let mut out = Tensor::zeros(t.rows(), len);
        for r in 0..t.rows() {
            out.row_mut(r)
                .copy_from_slice(&t.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    /// `x · w + b` for parameters named `{prefix}.w` and `{prefix}.b`.
    pub fn linear(&mut self, x: Var, prefix: &str) -> Result<Var> {
        let w = self.param_named(&format!("{prefix}.w"))?;
        let b = self.param_named(&format!("{prefix}.b"))?;
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Back-propagates from the scalar `loss`, adding `scale * d loss / d param`
    /// into `grads` for every trainable parameter reached.
    pub fn backward(&self, loss: Var, grads: &mut Grads, scale: f64) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Contract(format!("backward from non-scalar {r}x{c}")));
        }
        if !self.nodes[loss.0].needs_grad {
            return Err(Error::Contract(
                "loss does not depend on any trainable parameter".into(),
            ));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Contract(
                "gradient buffer does not match parameter store".into(),
            ));
        }
        let mut node_grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        node_grads.resize_with(loss.0 + 1, || None);
        node_grads[loss.0] = Some(Tensor::scalar(scale));

        for i in (0..=loss.0).rev() {
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    op: backward_name(&node.op),
                });
            }
            self.backward_node(i, &node.op, g, &mut node_grads, grads)?;
        }
        Ok(())
    }

    fn backward_node(
        &self,
        i: usize,
        op: &Op,
        g: Tensor,
        ng: &mut [Option<Tensor>],
        grads: &mut Grads,
    ) -> Result<()> {
        let out = || self.nodes[i].value.as_ref().expect("op node has a value");
        match op {
            Op::Input => {}
            Op::Param(id) => grads.accumulate(*id, &g),
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    gemm(&g, false, tb, true, &mut da, 0.0);
                    self.acc(ng, *a, da);
                }
                if self.wants(*b) {
                    let mut db = Tensor::zeros(tb.rows(), tb.cols());
                    gemm(ta, true, &g, false, &mut db, 0.0);
                    self.acc(ng, *b, db);
                }
            }
            Op::Add(a, b) => {
                if self.wants(*b) {
                    let db = if self.value(*b).shape() == g.shape() {
                        g.clone()
                    } else {
                        column_sums(&g)
                    };
                    self.acc(ng, *b, db);
                }
                if self.wants(*a) {
                    self.acc(ng, *a, g);
                }
            }
            Op::Scale(a, s) => {
                let mut da = g;
                da.scale_assign(*s);
                self.acc(ng, *a, da);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let cols = self.value(*p).cols();
                    if self.wants(*p) {
                        let mut dp = Tensor::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        self.acc(ng, *p, dp);
                    }
                    off += cols;
                }
            }
            Op::Transpose(a) => self.acc(ng, *a, g.transpose()),
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut da = g;
                for (d, &xv) in da.data_mut().iter_mut().zip(x.data()) {
                    if xv <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.acc(ng, *a, da);
            }
            Op::Tanh(a) => {
                let mut da = g;
                for (d, &y) in da.data_mut().iter_mut().zip(out().data()) {
                    *d *= 1.0 - y * y;
                }
                self.acc(ng, *a, da);
            }
            Op::Sigmoid(a) => {
                let mut da = g;
                for (d, &y) in da.data_mut().iter_mut().zip(out().data()) {
                    *d *= y * (1.0 - y);
                }
                self.acc(ng, *a, da);
            }
            Op::RowSoftmax(a) => {
                let y = out();
                let mut da = g;
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let dot: f64 = da.row(r).iter().zip(yr).map(|(d, y)| d * y).sum();
                    for (d, &yv) in da.row_mut(r).iter_mut().zip(yr) {
                        *d = yv * (*d - dot);
                    }
                }
                self.acc(ng, *a, da);
            }
            Op::MeanRows(a) | Op::SumRows(a) => {
                let (rows, cols) = self.value(*a).shape();
                let s = if matches!(op, Op::MeanRows(_)) {
                    1.0 / rows as f64
                } else {
                    1.0
                };
                let mut da = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    for (d, &gv) in da.row_mut(r).iter_mut().zip(g.data()) {
                        *d = gv * s;
                    }
                }
                self.acc(ng, *a, da);
            }
            Op::SumAll(a) => {
                let (rows, cols) = self.value(*a).shape();
                self.acc(ng, *a, Tensor::filled(rows, cols, g.item()));
            }
            Op::Dropout(a, mask) => {
                let mut da = g;
                for (d, m) in da.data_mut().iter_mut().zip(mask) {
                    *d *= m;
                }
                self.acc(ng, *a, da);
            }
            Op::CrossEntropy(a, label) => {
                let mut p = self.value(*a).clone();
                softmax_in_place(p.row_mut(0));
                p.data_mut()[*label] -= 1.0;
                p.scale_assign(g.item());
                self.acc(ng, *a, p);
            }
            Op::Gather(table, ids) => {
                if let Op::Param(pid) = self.nodes[table.0].op {
                    // Scatter straight into the parameter buffer so a large
                    // table never needs a dense per-graph gradient.
                    let dst = grads.slot_mut(pid, self.params.get(pid).shape());
                    for (r, &id) in ids.iter().enumerate() {
                        for (d, &gv) in dst.row_mut(id).iter_mut().zip(g.row(r)) {
                            *d += gv;
                        }
                    }
                } else {
                    let (rows, cols) = self.value(*table).shape();
                    let mut dt = Tensor::zeros(rows, cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (d, &gv) in dt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *d += gv;
                        }
                    }
                    self.acc(ng, *table, dt);
                }
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = self.value(*a).shape();
                let mut da = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    da.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                self.acc(ng, *a, da);
            }
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn acc(&self, ng: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut ng[v.0] {
            Some(t) => t.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

fn backward_name(op: &Op) -> &'static str {
    match op {
        Op::Input => "input backward",
        Op::Param(_) => "param backward",
        Op::MatMul(..) => "matmul backward",
        Op::Add(..) => "add backward",
        Op::Scale(..) => "scale backward",
        Op::ConcatCols(_) => "concat backward",
        Op::Transpose(_) => "transpose backward",
        Op::Relu(_) => "relu backward",
        Op::Tanh(_) => "tanh backward",
        Op::Sigmoid(_) => "sigmoid backward",
        Op::RowSoftmax(_) => "row_softmax backward",
        Op::MeanRows(_) => "mean_rows backward",
        Op::SumRows(_) => "sum_rows backward",
        Op::SumAll(_) => "sum_all backward",
        Op::Dropout(..) => "dropout backward",
        Op::CrossEntropy(..) => "cross_entropy backward",
        Op::Gather(..) => "gather backward",
        Op::SliceCols(..) => "slice_cols backward",
    }
}

fn column_sums(t: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, t.cols());
    for r in 0..t.rows() {
        for (o, x) in out.data_mut().iter_mut().zip(t.row(r)) {
            *o += x;
        }
    }
    out
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

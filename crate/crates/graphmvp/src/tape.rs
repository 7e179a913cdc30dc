//! Record-then-reverse automatic differentiation.
//!
//! A [`Tape`] owns every intermediate tensor of one forward pass. Operations
//! append nodes in topological order (inputs always precede outputs), so the
//! backward pass is a single reverse sweep that visits each node exactly
//! once. Tapes are rebuilt every training step and consumed by
//! [`Tape::backward`].
//!
//! Every forward op validates its output: NaN or Inf aborts with an error
//! naming the op instead of silently poisoning the run.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::{
    broadcast_shape, expand_to, matmul_raw, reduce_to_shape, transpose_raw, Tensor,
};

/// Handle to a tensor recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemKind {
    Add,
    Mul,
    Sub,
    Relu,
    Sigmoid,
    Exp,
    Log,
    Softplus,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    LogSumExp,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    // Input id kept so Debug output shows the full dataflow.
    #[allow(dead_code)]
    StopGrad(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Softplus(usize),
    Square(usize),
    MatMul(usize, usize),
    Transpose(usize),
    GatherRows {
        src: usize,
        idx: Vec<usize>,
    },
    ScatterAddRows {
        values: usize,
        idx: Vec<usize>,
    },
    Reduce {
        kind: Reduce,
        a: usize,
        axis: Option<usize>,
    },
    StackRows {
        parts: Vec<usize>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::StopGrad(_) => "stop_grad",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Softplus(_) => "softplus",
            Op::Square(_) => "square",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::GatherRows { .. } => "gather_rows",
            Op::ScatterAddRows { .. } => "scatter_add_rows",
            Op::Reduce { kind, .. } => match kind {
                Reduce::Sum => "sum",
                Reduce::Mean => "mean",
                Reduce::LogSumExp => "logsumexp",
            },
            Op::StackRows { .. } => "stack_rows",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients keyed by parameter name. Parameters unreachable from the loss
/// carry exact zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    by_name: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.by_name.iter()
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, usize>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    // max(x, 0) + ln(1 + exp(-|x|)) never overflows.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Record a constant. Gradients do not flow into leaves unless the
    /// tensor was marked `requires_grad`.
    pub fn leaf(&mut self, t: Tensor) -> VarId {
        let needs = t.requires_grad();
        self.push_unchecked(t, Op::Leaf, needs)
    }

    pub fn scalar(&mut self, v: f64) -> VarId {
        self.leaf(Tensor::scalar(v))
    }

    /// Lease a trainable parameter onto the tape. Repeated leases of the
    /// same name return the same node so gradient contributions accumulate.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<VarId> {
        if let Some(&id) = self.params.get(name) {
            return Ok(VarId(id));
        }
        let t = store
            .get(name)
            .ok_or_else(|| Error::Invariant(format!("unknown parameter `{name}`")))?
            .clone();
        let id = self.push_unchecked(t, Op::Leaf, true);
        self.params.insert(name.to_string(), id.0);
        Ok(id)
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op, needs_grad: bool) -> VarId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        VarId(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        shape: Vec<usize>,
        data: Vec<f64>,
        op: Op,
        needs_grad: bool,
    ) -> Result<VarId> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "op `{}` produced a non-finite value",
                op.name()
            )));
        }
        let value = Tensor::new(shape, data)?;
        Ok(self.push_unchecked(value, op, needs_grad))
    }

    fn needs(&self, id: VarId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Identity in the forward direction; blocks all gradient flow.
    pub fn stop_grad(&mut self, a: VarId) -> VarId {
        let value = self.value(a).clone();
        self.push_unchecked(value, Op::StopGrad(a.0), false)
    }

    pub fn elementwise(&mut self, kind: ElemKind, a: VarId, b: Option<VarId>) -> Result<VarId> {
        match (kind, b) {
            (ElemKind::Add, Some(b)) => self.add(a, b),
            (ElemKind::Sub, Some(b)) => self.sub(a, b),
            (ElemKind::Mul, Some(b)) => self.mul(a, b),
            (ElemKind::Relu, None) => self.relu(a),
            (ElemKind::Sigmoid, None) => self.sigmoid(a),
            (ElemKind::Exp, None) => self.exp(a),
            (ElemKind::Log, None) => self.log(a),
            (ElemKind::Softplus, None) => self.softplus(a),
            (ElemKind::Square, None) => self.square(a),
            (kind, Some(_)) => Err(Error::Shape(format!(
                "elementwise {kind:?} takes one operand"
            ))),
            (kind, None) => Err(Error::Shape(format!(
                "elementwise {kind:?} requires two operands"
            ))),
        }
    }

    fn binary(&mut self, a: VarId, b: VarId, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<VarId> {
        let out_shape = broadcast_shape(self.value(a).shape(), self.value(b).shape())?;
        let av = expand_to(self.value(a).data(), self.value(a).shape(), &out_shape);
        let bv = expand_to(self.value(b).data(), self.value(b).shape(), &out_shape);
        let data: Vec<f64> = av.iter().zip(&bv).map(|(&x, &y)| f(x, y)).collect();
        let needs = self.needs(a) || self.needs(b);
        self.push(out_shape, data, op, needs)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.binary(a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    fn unary(&mut self, a: VarId, f: impl Fn(f64) -> f64, op: Op) -> Result<VarId> {
        let data: Vec<f64> = self.value(a).data().iter().map(|&x| f(x)).collect();
        let shape = self.value(a).shape().to_vec();
        let needs = self.needs(a);
        self.push(shape, data, op, needs)
    }

    pub fn relu(&mut self, a: VarId) -> Result<VarId> {
        self.unary(a, |x| x.max(0.0), Op::Relu(a.0))
    }

    pub fn sigmoid(&mut self, a: VarId) -> Result<VarId> {
        self.unary(a, sigmoid, Op::Sigmoid(a.0))
    }

    pub fn exp(&mut self, a: VarId) -> Result<VarId> {
        self.unary(a, f64::exp, Op::Exp(a.0))
    }

    pub fn log(&mut self, a: VarId) -> Result<VarId> {
        if let Some(bad) = self.value(a).data().iter().find(|v| **v <= 0.0) {
            return Err(Error::Domain(format!("log of non-positive value {bad}")));
        }
        self.unary(a, f64::ln, Op::Log(a.0))
    }

    pub fn softplus(&mut self, a: VarId) -> Result<VarId> {
        self.unary(a, softplus, Op::Softplus(a.0))
    }

    pub fn square(&mut self, a: VarId) -> Result<VarId> {
        self.unary(a, |x| x * x, Op::Square(a.0))
    }

    /// Multiply by a compile-time constant (recorded as a scalar leaf).
    pub fn scale(&mut self, a: VarId, c: f64) -> Result<VarId> {
        let c = self.scalar(c);
        self.mul(a, c)
    }

    pub fn add_scalar(&mut self, a: VarId, c: f64) -> Result<VarId> {
        let c = self.scalar(c);
        self.add(a, c)
    }

    pub fn neg(&mut self, a: VarId) -> Result<VarId> {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let (ash, bsh) = (self.value(a).shape(), self.value(b).shape());
        if ash.len() != 2 || bsh.len() != 2 {
            return Err(Error::Shape(format!(
                "matmul requires rank-2 operands, got {ash:?} and {bsh:?}"
            )));
        }
        let (m, k, k2, n) = (ash[0], ash[1], bsh[0], bsh[1]);
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions differ: {ash:?} x {bsh:?}"
            )));
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let needs = self.needs(a) || self.needs(b);
        self.push(vec![m, n], data, Op::MatMul(a.0, b.0), needs)
    }

    pub fn transpose(&mut self, a: VarId) -> Result<VarId> {
        let sh = self.value(a).shape();
        if sh.len() != 2 {
            return Err(Error::Shape(format!(
                "transpose requires rank 2, got {sh:?}"
            )));
        }
        let (r, c) = (sh[0], sh[1]);
        let data = transpose_raw(self.value(a).data(), r, c);
        let needs = self.needs(a);
        self.push(vec![c, r], data, Op::Transpose(a.0), needs)
    }

    pub fn gather_rows(&mut self, src: VarId, idx: &[usize]) -> Result<VarId> {
        let sh = self.value(src).shape();
        if sh.len() != 2 {
            return Err(Error::Shape(format!(
                "gather_rows requires rank 2, got {sh:?}"
            )));
        }
        let (n, d) = (sh[0], sh[1]);
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Index(format!(
                "gather_rows index {bad} out of range 0..{n}"
            )));
        }
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.value(src).row(i));
        }
        let needs = self.needs(src);
        self.push(
            vec![idx.len(), d],
            data,
            Op::GatherRows {
                src: src.0,
                idx: idx.to_vec(),
            },
            needs,
        )
    }

    /// Rows of `values` are summed into `rows` output slots; slots no index
    /// points at stay zero.
    pub fn scatter_add_rows(&mut self, values: VarId, idx: &[usize], rows: usize) -> Result<VarId> {
        let sh = self.value(values).shape();
        if sh.len() != 2 {
            return Err(Error::Shape(format!(
                "scatter_add_rows requires rank 2, got {sh:?}"
            )));
        }
        let (m, d) = (sh[0], sh[1]);
        if m != idx.len() {
            return Err(Error::Shape(format!(
                "scatter_add_rows got {m} rows but {} indices",
                idx.len()
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Index(format!(
                "scatter_add_rows index {bad} out of range 0..{rows}"
            )));
        }
        let mut data = vec![0.0; rows * d];
        for (r, &dst) in idx.iter().enumerate() {
            let src_row = self.value(values).row(r);
            for c in 0..d {
                data[dst * d + c] += src_row[c];
            }
        }
        let needs = self.needs(values);
        self.push(
            vec![rows, d],
            data,
            Op::ScatterAddRows {
                values: values.0,
                idx: idx.to_vec(),
            },
            needs,
        )
    }

    /// Reduction over one axis, or over all elements when `axis` is `None`.
    /// `logsumexp` subtracts the running maximum so exp never overflows.
    pub fn reduce(&mut self, kind: Reduce, a: VarId, axis: Option<usize>) -> Result<VarId> {
        let sh = self.value(a).shape().to_vec();
        if let Some(ax) = axis {
            if ax >= sh.len() {
                return Err(Error::Shape(format!("axis {ax} out of range for {sh:?}")));
            }
        }
        let (groups, out_shape) = reduce_groups(&sh, axis)?;
        let src = self.value(a).data();
        let data: Vec<f64> = groups
            .iter()
            .map(|group| match kind {
                Reduce::Sum => group.iter().map(|&i| src[i]).sum(),
                Reduce::Mean => group.iter().map(|&i| src[i]).sum::<f64>() / group.len() as f64,
                Reduce::LogSumExp => {
                    let max = group
                        .iter()
                        .map(|&i| src[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = group.iter().map(|&i| (src[i] - max).exp()).sum();
                    max + sum.ln()
                }
            })
            .collect();
        let needs = self.needs(a);
        self.push(out_shape, data, Op::Reduce { kind, a: a.0, axis }, needs)
    }

    pub fn sum(&mut self, a: VarId, axis: Option<usize>) -> Result<VarId> {
        self.reduce(Reduce::Sum, a, axis)
    }

    pub fn mean(&mut self, a: VarId, axis: Option<usize>) -> Result<VarId> {
        self.reduce(Reduce::Mean, a, axis)
    }

    pub fn logsumexp(&mut self, a: VarId, axis: Option<usize>) -> Result<VarId> {
        self.reduce(Reduce::LogSumExp, a, axis)
    }

    /// Stack rank-1 tensors of equal length into a matrix, one per row.
    pub fn stack_rows(&mut self, parts: &[VarId]) -> Result<VarId> {
        if parts.is_empty() {
            return Err(Error::Shape("stack_rows of zero tensors".into()));
        }
        let d = match self.value(parts[0]).shape() {
            [d] => *d,
            other => {
                return Err(Error::Shape(format!(
                    "stack_rows requires rank-1 parts, got {other:?}"
                )))
            }
        };
        let mut data = Vec::with_capacity(parts.len() * d);
        let mut needs = false;
        for &p in parts {
            if self.value(p).shape() != [d] {
                return Err(Error::Shape(format!(
                    "stack_rows parts disagree: [{d}] vs {:?}",
                    self.value(p).shape()
                )));
            }
            data.extend_from_slice(self.value(p).data());
            needs |= self.needs(p);
        }
        self.push(
            vec![parts.len(), d],
            data,
            Op::StackRows {
                parts: parts.iter().map(|p| p.0).collect(),
            },
            needs,
        )
    }

    /// Reverse sweep from a scalar loss. Consumes the tape; gradients come
    /// back for every parameter in `params`, exact zeros where the loss does
    /// not depend on it (including parameters never leased onto this tape).
    pub fn backward(self, loss: VarId, params: &ParamStore) -> Result<Gradients> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.accumulate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }

        let mut by_name = BTreeMap::new();
        for (name, tensor) in params.iter() {
            let grad = match self.params.get(name).and_then(|&id| grads[id].take()) {
                Some(g) => Tensor::new(tensor.shape().to_vec(), g)?,
                None => Tensor::zeros(tensor.shape()),
            };
            by_name.insert(name.clone(), grad);
        }
        Ok(Gradients { by_name })
    }

    /// Push this node's output gradient into its inputs.
    fn accumulate(&self, id: usize, g: &[f64], grads: &mut Vec<Option<Vec<f64>>>) -> Result<()> {
        let node = &self.nodes[id];
        let out_shape = node.value.shape();
        let mut add_into = |target: usize, contribution: Vec<f64>| -> Result<()> {
            if !self.nodes[target].needs_grad {
                return Ok(());
            }
            if contribution.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of op `{}` is non-finite",
                    node.op.name()
                )));
            }
            let slot =
                grads[target].get_or_insert_with(|| vec![0.0; self.nodes[target].value.numel()]);
            for (s, c) in slot.iter_mut().zip(&contribution) {
                *s += c;
            }
            Ok(())
        };

        match &node.op {
            Op::Leaf | Op::StopGrad(_) => {}
            Op::Add(a, b) => {
                let ash = self.nodes[*a].value.shape();
                let bsh = self.nodes[*b].value.shape();
                add_into(*a, reduce_to_shape(g, out_shape, ash))?;
                add_into(*b, reduce_to_shape(g, out_shape, bsh))?;
            }
            Op::Sub(a, b) => {
                let ash = self.nodes[*a].value.shape();
                let bsh = self.nodes[*b].value.shape();
                add_into(*a, reduce_to_shape(g, out_shape, ash))?;
                let gb: Vec<f64> = reduce_to_shape(g, out_shape, bsh)
                    .into_iter()
                    .map(|v| -v)
                    .collect();
                add_into(*b, gb)?;
            }
            Op::Mul(a, b) => {
                let av = expand_to(
                    self.nodes[*a].value.data(),
                    self.nodes[*a].value.shape(),
                    out_shape,
                );
                let bv = expand_to(
                    self.nodes[*b].value.data(),
                    self.nodes[*b].value.shape(),
                    out_shape,
                );
                let ga: Vec<f64> = g.iter().zip(&bv).map(|(&gi, &b)| gi * b).collect();
                let gb: Vec<f64> = g.iter().zip(&av).map(|(&gi, &a)| gi * a).collect();
                add_into(
                    *a,
                    reduce_to_shape(&ga, out_shape, self.nodes[*a].value.shape()),
                )?;
                add_into(
                    *b,
                    reduce_to_shape(&gb, out_shape, self.nodes[*b].value.shape()),
                )?;
            }
            Op::Relu(a) => {
                let x = self.nodes[*a].value.data();
                let ga = g
                    .iter()
                    .zip(x)
                    .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                    .collect();
                add_into(*a, ga)?;
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                let ga = g
                    .iter()
                    .zip(y)
                    .map(|(&gi, &yi)| gi * yi * (1.0 - yi))
                    .collect();
                add_into(*a, ga)?;
            }
            Op::Exp(a) => {
                let y = node.value.data();
                let ga = g.iter().zip(y).map(|(&gi, &yi)| gi * yi).collect();
                add_into(*a, ga)?;
            }
            Op::Log(a) => {
                let x = self.nodes[*a].value.data();
                let ga = g.iter().zip(x).map(|(&gi, &xi)| gi / xi).collect();
                add_into(*a, ga)?;
            }
            Op::Softplus(a) => {
                let x = self.nodes[*a].value.data();
                let ga = g.iter().zip(x).map(|(&gi, &xi)| gi * sigmoid(xi)).collect();
                add_into(*a, ga)?;
            }
            Op::Square(a) => {
                let x = self.nodes[*a].value.data();
                let ga = g.iter().zip(x).map(|(&gi, &xi)| gi * 2.0 * xi).collect();
                add_into(*a, ga)?;
            }
            Op::MatMul(a, b) => {
                let ash = self.nodes[*a].value.shape();
                let bsh = self.nodes[*b].value.shape();
                let (m, k, n) = (ash[0], ash[1], bsh[1]);
                // dA = g . B^T ; dB = A^T . g
                let bt = transpose_raw(self.nodes[*b].value.data(), k, n);
                let ga = matmul_raw(g, &bt, m, n, k);
                let at = transpose_raw(self.nodes[*a].value.data(), m, k);
                let gb = matmul_raw(&at, g, k, m, n);
                add_into(*a, ga)?;
                add_into(*b, gb)?;
            }
            Op::Transpose(a) => {
                let (c, r) = (out_shape[0], out_shape[1]);
                add_into(*a, transpose_raw(g, c, r))?;
            }
            Op::GatherRows { src, idx } => {
                let sh = self.nodes[*src].value.shape();
                let (n, d) = (sh[0], sh[1]);
                let mut ga = vec![0.0; n * d];
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..d {
                        ga[i * d + c] += g[r * d + c];
                    }
                }
                add_into(*src, ga)?;
            }
            Op::ScatterAddRows { values, idx } => {
                let d = out_shape[1];
                let mut gv = vec![0.0; idx.len() * d];
                for (r, &dst) in idx.iter().enumerate() {
                    gv[r * d..(r + 1) * d].copy_from_slice(&g[dst * d..(dst + 1) * d]);
                }
                add_into(*values, gv)?;
            }
            Op::Reduce { kind, a, axis } => {
                let in_shape = self.nodes[*a].value.shape().to_vec();
                let (groups, _) = reduce_groups(&in_shape, *axis)?;
                let src = self.nodes[*a].value.data();
                let mut ga = vec![0.0; src.len()];
                for (out_i, group) in groups.iter().enumerate() {
                    match kind {
                        Reduce::Sum => {
                            for &i in group {
                                ga[i] += g[out_i];
                            }
                        }
                        Reduce::Mean => {
                            let w = 1.0 / group.len() as f64;
                            for &i in group {
                                ga[i] += g[out_i] * w;
                            }
                        }
                        Reduce::LogSumExp => {
                            let y = node.value.data()[out_i];
                            for &i in group {
                                ga[i] += g[out_i] * (src[i] - y).exp();
                            }
                        }
                    }
                }
                add_into(*a, ga)?;
            }
            Op::StackRows { parts } => {
                let d = out_shape[1];
                for (r, &p) in parts.iter().enumerate() {
                    add_into(p, g[r * d..(r + 1) * d].to_vec())?;
                }
            }
        }
        Ok(())
    }
}

/// The element-index groups a reduction collapses, plus the output shape.
/// `axis: None` groups everything into one reduction.
fn reduce_groups(shape: &[usize], axis: Option<usize>) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let numel: usize = shape.iter().product();
    match axis {
        None => {
            if numel == 0 {
                return Err(Error::Shape("reduction over an empty tensor".into()));
            }
            Ok((vec![(0..numel).collect()], vec![]))
        }
        Some(ax) => {
            let dim = shape[ax];
            if dim == 0 {
                return Err(Error::Shape(format!("reduction over empty axis {ax}")));
            }
            let inner: usize = shape[ax + 1..].iter().product();
            let outer: usize = shape[..ax].iter().product();
            let mut groups = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                for i in 0..inner {
                    let group = (0..dim).map(|m| (o * dim + m) * inner + i).collect();
                    groups.push(group);
                }
            }
            let mut out_shape = shape.to_vec();
            out_shape.remove(ax);
            Ok((groups, out_shape))
        }
    }
}

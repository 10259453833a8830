//! Tape-recorded reverse-mode differentiation.
//!
//! Every op appends a node to the tape; node indices are a topological order,
//! so [`Graph::backward`] is a single reverse sweep. Gradients arriving at a
//! node from several consumers are summed.

use super::kernels;
use super::params::{ParamId, ParamStore};
use super::tensor::{split_axis, strides, Tensor};
use crate::error::{Error, Result};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unary {
    Tanh,
    Sigmoid,
    Gelu,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    Binary(Binary, Var, Var),
    Scale(Var, f64),
    Unary(Unary, Var),
    Sum(Var, usize),
    Mean(Var, usize),
    Reshape(Var),
    /// `map[i]` is the input offset of output element `i`.
    Transpose(Var, Vec<usize>),
    Softmax(Var, usize),
    CrossEntropy(Var, usize),
    LayerNorm(Var, f64),
    NormalizeRows(Var, f64),
    InvRowNorms(Var),
    Narrow(Var, usize, usize),
    Concat(Vec<Var>, usize),
    Gather(Var, Vec<usize>),
    DepthwiseConv(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A computation tape, optionally bound to a [`ParamStore`].
#[derive(Default)]
pub struct Graph<'s> {
    nodes: Vec<Node>,
    store: Option<&'s ParamStore>,
    bound: Vec<Option<Var>>,
}

/// Gradients produced by one backward sweep.
pub struct Grads {
    per_node: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.per_node.get(v.0).and_then(|g| g.as_deref())
    }

    /// Parameter gradients in binding order. Parameters the loss does not
    /// depend on are omitted.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Vec<f64>)> {
        self.params
            .iter()
            .filter_map(|(id, v)| self.per_node[v.0].as_ref().map(|g| (*id, g)))
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.get(*v))
    }
}

impl<'s> Graph<'s> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_params(store: &'s ParamStore) -> Self {
        Self {
            nodes: Vec::with_capacity(256),
            store: Some(store),
            bound: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(
        &mut self,
        name: &'static str,
        value: Tensor,
        op: Op,
        requires_grad: bool,
    ) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A free leaf whose gradient is retained after `backward`.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds a stored parameter onto the tape (once per graph).
    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        let store = self
            .store
            .ok_or_else(|| Error::invalid("param", "graph has no parameter store"))?;
        if let Some(v) = self.bound[id.0] {
            return Ok(v);
        }
        let p = store.get(id);
        self.nodes.push(Node {
            value: p.value.clone(),
            op: Op::Leaf,
            requires_grad: p.trainable,
        });
        let v = Var(self.nodes.len() - 1);
        self.bound[id.0] = Some(v);
        Ok(v)
    }

    // ── linear algebra ──────────────────────────────────────────────

    /// `a[.., k] · b[k, n] -> [.., n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.is_empty() || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (k, n) = (sb[0], sb[1]);
        let m = self.value(a).numel() / k;
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = n;
        let mut out = vec![0.0; m * n];
        kernels::gemm(
            self.value(a).data(),
            self.value(b).data(),
            m,
            k,
            n,
            &mut out,
        );
        let rg = self.rg(&[a, b]);
        self.push("matmul", Tensor::new(shape, out)?, Op::MatMul(a, b), rg)
    }

    /// Batched `a[.., m, k] · b[.., k, n] -> [.., m, n]` with equal leading dims.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ok = sa.len() >= 2
            && sa.len() == sb.len()
            && sa[..sa.len() - 2] == sb[..sb.len() - 2]
            && sa[sa.len() - 1] == sb[sb.len() - 2];
        if !ok {
            return Err(Error::shape("bmm", sa, sb));
        }
        let r = sa.len();
        let (m, k, n) = (sa[r - 2], sa[r - 1], sb[r - 1]);
        let batch: usize = sa[..r - 2].iter().product();
        let mut shape = sa.to_vec();
        shape[r - 1] = n;
        let mut out = vec![0.0; batch * m * n];
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            kernels::gemm(
                &da[i * m * k..(i + 1) * m * k],
                &db[i * k * n..(i + 1) * k * n],
                m,
                k,
                n,
                &mut out[i * m * n..(i + 1) * m * n],
            );
        }
        let rg = self.rg(&[a, b]);
        self.push("bmm", Tensor::new(shape, out)?, Op::BatchMatMul(a, b), rg)
    }

    // ── elementwise ─────────────────────────────────────────────────

    fn binary(&mut self, kind: Binary, name: &'static str, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let shape = if sa == sb || sa.ends_with(sb) {
            sa.to_vec()
        } else if sb.ends_with(sa) {
            sb.to_vec()
        } else {
            return Err(Error::shape(name, sa, sb));
        };
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let numel = da.len().max(db.len());
        let f = match kind {
            Binary::Add => |x: f64, y: f64| x + y,
            Binary::Sub => |x: f64, y: f64| x - y,
            Binary::Mul => |x: f64, y: f64| x * y,
        };
        let out = (0..numel)
            .map(|i| f(da[i % da.len()], db[i % db.len()]))
            .collect();
        let rg = self.rg(&[a, b]);
        self.push(name, Tensor::new(shape, out)?, Op::Binary(kind, a, b), rg)
    }

    /// Elementwise sum; the smaller operand broadcasts over leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, "add", a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, "sub", a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, "mul", a, b)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let t = self.value(a);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * c).collect())?;
        let rg = self.rg(&[a]);
        self.push("scale", out, Op::Scale(a, c), rg)
    }

    fn unary(&mut self, kind: Unary, name: &'static str, a: Var) -> Result<Var> {
        let t = self.value(a);
        let f: fn(f64) -> f64 = match kind {
            Unary::Tanh => f64::tanh,
            Unary::Sigmoid => kernels::sigmoid,
            Unary::Gelu => kernels::gelu,
            Unary::Relu => |x| x.max(0.0),
        };
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())?;
        let rg = self.rg(&[a]);
        self.push(name, out, Op::Unary(kind, a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Tanh, "tanh", a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, "sigmoid", a)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Gelu, "gelu", a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Relu, "relu", a)
    }

    // ── reductions and layout ───────────────────────────────────────

    fn check_axis(&self, name: &'static str, a: Var, axis: usize) -> Result<()> {
        if axis >= self.shape(a).len() {
            return Err(Error::invalid(
                name,
                format!("axis {axis} out of range for shape {:?}", self.shape(a)),
            ));
        }
        Ok(())
    }

    fn reduce(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let name = if mean { "mean" } else { "sum" };
        self.check_axis(name, a, axis)?;
        let t = self.value(a);
        let (outer, len, inner) = split_axis(t.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        let d = t.data();
        for o in 0..outer {
            for j in 0..len {
                let row = &d[(o * len + j) * inner..(o * len + j + 1) * inner];
                for (acc, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        if mean {
            out.iter_mut().for_each(|v| *v /= len as f64);
        }
        let mut shape = t.shape().to_vec();
        shape.remove(axis);
        let op = if mean {
            Op::Mean(a, axis)
        } else {
            Op::Sum(a, axis)
        };
        let rg = self.rg(&[a]);
        self.push(name, Tensor::new(shape, out)?, op, rg)
    }

    /// Sums out `axis`, removing it from the shape.
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, false)
    }

    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, true)
    }

    /// Sum of every element, as a scalar.
    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).numel();
        let flat = self.reshape(a, &[n])?;
        self.sum(flat, 0)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let numel: usize = shape.iter().product();
        if numel != t.numel() {
            return Err(Error::shape("reshape", t.shape(), shape));
        }
        let out = Tensor::new(shape.to_vec(), t.data().to_vec())?;
        let rg = self.rg(&[a]);
        self.push("reshape", out, Op::Reshape(a), rg)
    }

    /// Permutes axes: output axis `i` is input axis `axes[i]`.
    pub fn transpose(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let rank = t.ndim();
        let mut seen = vec![false; rank];
        let valid = axes.len() == rank
            && axes
                .iter()
                .all(|&ax| ax < rank && !std::mem::replace(&mut seen[ax], true));
        if !valid {
            return Err(Error::invalid(
                "transpose",
                format!("{axes:?} is not a permutation of {rank} axes"),
            ));
        }
        let in_strides = strides(t.shape());
        let out_shape: Vec<usize> = axes.iter().map(|&ax| t.shape()[ax]).collect();
        let out_strides = strides(&out_shape);
        let map: Vec<usize> = (0..t.numel())
            .map(|i| {
                let mut rem = i;
                let mut off = 0;
                for (d, &os) in out_strides.iter().enumerate() {
                    let idx = rem / os;
                    rem %= os;
                    off += idx * in_strides[axes[d]];
                }
                off
            })
            .collect();
        let d = t.data();
        let out = Tensor::new(out_shape, map.iter().map(|&j| d[j]).collect())?;
        let rg = self.rg(&[a]);
        self.push("transpose", out, Op::Transpose(a, map), rg)
    }

    /// Swaps the last two axes.
    pub fn transpose_last(&mut self, a: Var) -> Result<Var> {
        let r = self.shape(a).len();
        if r < 2 {
            return Err(Error::invalid("transpose", "need at least two axes"));
        }
        let mut axes: Vec<usize> = (0..r).collect();
        axes.swap(r - 2, r - 1);
        self.transpose(a, &axes)
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.check_axis("narrow", a, axis)?;
        let t = self.value(a);
        let (outer, full, inner) = split_axis(t.shape(), axis);
        if len == 0 || start + len > full {
            return Err(Error::invalid(
                "narrow",
                format!(
                    "range {start}..{} exceeds axis of length {full}",
                    start + len
                ),
            ));
        }
        let d = t.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&d[(o * full + start) * inner..(o * full + start + len) * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let rg = self.rg(&[a]);
        self.push(
            "narrow",
            Tensor::new(shape, out)?,
            Op::Narrow(a, axis, start),
            rg,
        )
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::invalid("concat", "no inputs"))?;
        self.check_axis("concat", first, axis)?;
        let base = self.shape(first).to_vec();
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let same = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !same {
                return Err(Error::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let len = t.shape()[axis];
                out.extend_from_slice(&t.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let rg = self.rg(parts);
        self.push(
            "concat",
            Tensor::new(shape, out)?,
            Op::Concat(parts.to_vec(), axis),
            rg,
        )
    }

    /// Rows of `table[V, C]` selected by `ids`, giving `[ids.len(), C]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.ndim() != 2 || ids.is_empty() {
            return Err(Error::invalid(
                "gather_rows",
                "need a 2-D table and at least one id",
            ));
        }
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::Vocab(format!(
                "id {bad} outside table of {rows} rows"
            )));
        }
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            out.extend_from_slice(&t.data()[i * cols..(i + 1) * cols]);
        }
        let rg = self.rg(&[table]);
        self.push(
            "gather_rows",
            Tensor::new(vec![ids.len(), cols], out)?,
            Op::Gather(table, ids.to_vec()),
            rg,
        )
    }

    // ── normalisation and probability ───────────────────────────────

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.check_axis("softmax", a, axis)?;
        let t = self.value(a);
        let (outer, len, inner) = split_axis(t.shape(), axis);
        let d = t.data();
        let mut out = vec![0.0; d.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| (o * len + j) * inner + i;
                let max = (0..len).map(|j| d[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for j in 0..len {
                    let e = (d[at(j)] - max).exp();
                    out[at(j)] = e;
                    z += e;
                }
                for j in 0..len {
                    out[at(j)] /= z;
                }
            }
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.rg(&[a]);
        self.push("softmax", out, Op::Softmax(a, axis), rg)
    }

    /// `-log softmax(logits)[target]` for a 1-D logit vector.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = self.value(logits);
        if t.ndim() != 1 {
            return Err(Error::invalid(
                "cross_entropy",
                format!("logits must be 1-D, got {:?}", t.shape()),
            ));
        }
        if target >= t.numel() {
            return Err(Error::invalid(
                "cross_entropy",
                format!("target {target} out of range for {} classes", t.numel()),
            ));
        }
        let loss = kernels::log_sum_exp(t.data()) - t.data()[target];
        let rg = self.rg(&[logits]);
        self.push(
            "cross_entropy",
            Tensor::scalar(loss),
            Op::CrossEntropy(logits, target),
            rg,
        )
    }

    /// Zero-mean, unit-variance normalisation over the last axis (no affine).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let t = self.value(a);
        let c = *t
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("layer_norm", "scalar input"))?;
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(c) {
            let mu = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mu) * inv);
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.rg(&[a]);
        self.push("layer_norm", out, Op::LayerNorm(a, eps), rg)
    }

    /// Divides each last-axis row by `‖row‖₂ + eps`.
    pub fn normalize_rows(&mut self, a: Var, eps: f64) -> Result<Var> {
        let t = self.value(a);
        let c = *t
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("normalize_rows", "scalar input"))?;
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(c) {
            let d = kernels::norm(row) + eps;
            row.iter_mut().for_each(|v| *v /= d);
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.rg(&[a]);
        self.push("normalize_rows", out, Op::NormalizeRows(a, eps), rg)
    }

    /// `1 / ‖row‖₂` for each last-axis row, dropping that axis.
    pub fn inv_row_norms(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let c = *t
            .shape()
            .last()
            .ok_or_else(|| Error::invalid("inv_row_norms", "scalar input"))?;
        let out: Vec<f64> = t
            .data()
            .chunks(c)
            .map(|row| 1.0 / kernels::norm(row))
            .collect();
        let shape = t.shape()[..t.ndim() - 1].to_vec();
        let rg = self.rg(&[a]);
        self.push(
            "inv_row_norms",
            Tensor::new(shape, out)?,
            Op::InvRowNorms(a),
            rg,
        )
    }

    /// Depthwise convolution along axis 1 of `x[N, T, C]` with `kernel[K, C]`,
    /// odd `K`, zero padding, output length `T`.
    pub fn depthwise_conv_t(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let (sx, sk) = (self.shape(x), self.shape(kernel));
        if sx.len() != 3 || sk.len() != 2 || sk[1] != sx[2] || sk[0] % 2 == 0 {
            return Err(Error::shape("depthwise_conv_t", sx, sk));
        }
        let (n, t, c, k) = (sx[0], sx[1], sx[2], sk[0]);
        let mut out = vec![0.0; n * t * c];
        kernels::depthwise_conv(
            self.value(x).data(),
            self.value(kernel).data(),
            n,
            t,
            c,
            k,
            &mut out,
        );
        let rg = self.rg(&[x, kernel]);
        self.push(
            "depthwise_conv_t",
            Tensor::new(vec![n, t, c], out)?,
            Op::DepthwiseConv(x, kernel),
            rg,
        )
    }

    // ── backward ────────────────────────────────────────────────────

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        if self.value(loss).numel() != 1 {
            return Err(Error::invalid(
                "backward",
                format!("loss must hold one element, shape {:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            // interior gradients stay available for inspection
            grads[i] = Some(g);
        }
        let params = self
            .bound
            .iter()
            .enumerate()
            .filter_map(|(pid, v)| v.map(|v| (ParamId(pid), v)))
            .filter(|(_, v)| self.nodes[v.0].requires_grad)
            .collect();
        Ok(Grads {
            per_node: grads,
            params,
        })
    }

    fn accum(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
        f(slot);
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (k, n) = (tb.shape()[0], tb.shape()[1]);
                let m = ta.numel() / k;
                self.accum(grads, *a, |ga| kernels::gemm_nt(g, tb.data(), m, n, k, ga));
                self.accum(grads, *b, |gb| kernels::gemm_tn(ta.data(), g, m, k, n, gb));
            }
            Op::BatchMatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let r = ta.ndim();
                let (m, k, n) = (ta.shape()[r - 2], ta.shape()[r - 1], tb.shape()[r - 1]);
                let batch = ta.numel() / (m * k);
                self.accum(grads, *a, |ga| {
                    for i in 0..batch {
                        kernels::gemm_nt(
                            &g[i * m * n..(i + 1) * m * n],
                            &tb.data()[i * k * n..(i + 1) * k * n],
                            m,
                            n,
                            k,
                            &mut ga[i * m * k..(i + 1) * m * k],
                        );
                    }
                });
                self.accum(grads, *b, |gb| {
                    for i in 0..batch {
                        kernels::gemm_tn(
                            &ta.data()[i * m * k..(i + 1) * m * k],
                            &g[i * m * n..(i + 1) * m * n],
                            m,
                            k,
                            n,
                            &mut gb[i * k * n..(i + 1) * k * n],
                        );
                    }
                });
            }
            Op::Binary(kind, a, b) => {
                let (da, db) = (val(*a).data(), val(*b).data());
                let (na, nb) = (da.len(), db.len());
                match kind {
                    Binary::Add | Binary::Sub => {
                        let sign = if *kind == Binary::Sub { -1.0 } else { 1.0 };
                        self.accum(grads, *a, |ga| {
                            g.iter().enumerate().for_each(|(i, gi)| ga[i % na] += gi)
                        });
                        self.accum(grads, *b, |gb| {
                            g.iter()
                                .enumerate()
                                .for_each(|(i, gi)| gb[i % nb] += sign * gi)
                        });
                    }
                    Binary::Mul => {
                        self.accum(grads, *a, |ga| {
                            g.iter()
                                .enumerate()
                                .for_each(|(i, gi)| ga[i % na] += gi * db[i % nb])
                        });
                        self.accum(grads, *b, |gb| {
                            g.iter()
                                .enumerate()
                                .for_each(|(i, gi)| gb[i % nb] += gi * da[i % na])
                        });
                    }
                }
            }
            Op::Scale(a, c) => self.accum(grads, *a, |ga| {
                ga.iter_mut().zip(g).for_each(|(x, gi)| *x += c * gi)
            }),
            Op::Unary(kind, a) => {
                let (x, y) = (val(*a).data(), node.value.data());
                self.accum(grads, *a, |ga| {
                    for i in 0..ga.len() {
                        let d = match kind {
                            Unary::Tanh => 1.0 - y[i] * y[i],
                            Unary::Sigmoid => y[i] * (1.0 - y[i]),
                            Unary::Gelu => kernels::gelu_grad(x[i]),
                            Unary::Relu => {
                                if x[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        };
                        ga[i] += d * g[i];
                    }
                });
            }
            Op::Sum(a, axis) | Op::Mean(a, axis) => {
                let (outer, len, inner) = split_axis(val(*a).shape(), *axis);
                let c = if matches!(node.op, Op::Mean(..)) {
                    1.0 / len as f64
                } else {
                    1.0
                };
                self.accum(grads, *a, |ga| {
                    for o in 0..outer {
                        for j in 0..len {
                            for i in 0..inner {
                                ga[(o * len + j) * inner + i] += c * g[o * inner + i];
                            }
                        }
                    }
                });
            }
            Op::Reshape(a) => self.accum(grads, *a, |ga| {
                ga.iter_mut().zip(g).for_each(|(x, gi)| *x += gi)
            }),
            Op::Transpose(a, map) => self.accum(grads, *a, |ga| {
                map.iter().zip(g).for_each(|(&j, gi)| ga[j] += gi)
            }),
            Op::Softmax(a, axis) => {
                let y = node.value.data();
                let (outer, len, inner) = split_axis(node.value.shape(), *axis);
                self.accum(grads, *a, |ga| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |j: usize| (o * len + j) * inner + i;
                            let dot: f64 = (0..len).map(|j| g[at(j)] * y[at(j)]).sum();
                            for j in 0..len {
                                ga[at(j)] += y[at(j)] * (g[at(j)] - dot);
                            }
                        }
                    }
                });
            }
            Op::CrossEntropy(a, target) => {
                let x = val(*a).data();
                let lse = kernels::log_sum_exp(x);
                self.accum(grads, *a, |ga| {
                    for (j, gj) in ga.iter_mut().enumerate() {
                        let p = (x[j] - lse).exp();
                        *gj += g[0] * (p - if j == *target { 1.0 } else { 0.0 });
                    }
                });
            }
            Op::LayerNorm(a, eps) => {
                let x = val(*a);
                let c = *x.shape().last().unwrap();
                let y = node.value.data();
                self.accum(grads, *a, |ga| {
                    for (r, row) in x.data().chunks(c).enumerate() {
                        let mu = row.iter().sum::<f64>() / c as f64;
                        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
                        let inv = 1.0 / (var + eps).sqrt();
                        let gr = &g[r * c..(r + 1) * c];
                        let yr = &y[r * c..(r + 1) * c];
                        let mg = gr.iter().sum::<f64>() / c as f64;
                        let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for j in 0..c {
                            ga[r * c + j] += inv * (gr[j] - mg - yr[j] * mgy);
                        }
                    }
                });
            }
            Op::NormalizeRows(a, eps) => {
                let x = val(*a);
                let c = *x.shape().last().unwrap();
                self.accum(grads, *a, |ga| {
                    for (r, row) in x.data().chunks(c).enumerate() {
                        let n = kernels::norm(row);
                        let d = n + eps;
                        let gr = &g[r * c..(r + 1) * c];
                        let gx: f64 = gr.iter().zip(row).map(|(a, b)| a * b).sum();
                        let k = if n > 0.0 { gx / (n * d * d) } else { 0.0 };
                        for j in 0..c {
                            ga[r * c + j] += gr[j] / d - row[j] * k;
                        }
                    }
                });
            }
            Op::InvRowNorms(a) => {
                let x = val(*a);
                let c = *x.shape().last().unwrap();
                let y = node.value.data();
                self.accum(grads, *a, |ga| {
                    for (r, row) in x.data().chunks(c).enumerate() {
                        let k = -g[r] * y[r] * y[r] * y[r];
                        for j in 0..c {
                            ga[r * c + j] += k * row[j];
                        }
                    }
                });
            }
            Op::Narrow(a, axis, start) => {
                let (outer, full, inner) = split_axis(val(*a).shape(), *axis);
                let len = node.value.shape()[*axis];
                self.accum(grads, *a, |ga| {
                    for o in 0..outer {
                        let dst =
                            &mut ga[(o * full + start) * inner..(o * full + start + len) * inner];
                        let src = &g[o * len * inner..(o + 1) * len * inner];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                });
            }
            Op::Concat(parts, axis) => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let len = val(p).shape()[*axis];
                    self.accum(grads, p, |gp| {
                        for o in 0..outer {
                            let src = &g
                                [(o * total + offset) * inner..(o * total + offset + len) * inner];
                            let dst = &mut gp[o * len * inner..(o + 1) * len * inner];
                            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                        }
                    });
                    offset += len;
                }
            }
            Op::Gather(table, ids) => {
                let cols = val(*table).shape()[1];
                self.accum(grads, *table, |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..cols {
                            gt[id * cols + j] += g[r * cols + j];
                        }
                    }
                });
            }
            Op::DepthwiseConv(x, kernel) => {
                let (tx, tk) = (val(*x), val(*kernel));
                let (n, t, c) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
                let k = tk.shape()[0];
                self.accum(grads, *x, |gx| {
                    kernels::depthwise_conv_grad_input(g, tk.data(), n, t, c, k, gx)
                });
                self.accum(grads, *kernel, |gk| {
                    kernels::depthwise_conv_grad_kernel(g, tx.data(), n, t, c, k, gk)
                });
            }
        }
    }
}

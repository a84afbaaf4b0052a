use alloc::vec;
use alloc::vec::Vec;
use core::mem;

use super::kernels::{self, GELU_C};
use super::{gelu, Tensor};
use crate::math;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Tanh(Var),
    Softmax {
        x: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    Sum(Var),
    Mean(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        scored: Vec<bool>,
        probs: Vec<f64>,
        count: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Append-only record of a differentiable computation.
///
/// Nodes are pushed in evaluation order, so every op's inputs precede it and
/// [`Tape::backward`] only needs one reverse sweep. Calling `backward` a
/// second time without [`Tape::zero_grad`] is an error.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass w.r.t. `v`, or `None` if no
    /// gradient reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| Tensor {
            shape: node.value.shape.clone(),
            data: g.clone(),
        })
    }

    /// Like [`Tape::grad`] but zeros when nothing flowed into `v`.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .unwrap_or_else(|| Tensor::zeros(&self.nodes[v.0].value.shape))
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            left: self.nodes[a.0].value.shape.clone(),
            right: self.nodes[b.0].value.shape.clone(),
        }
    }

    fn mat_dims(&self, op: &'static str, a: Var, other: Var) -> Result<(usize, usize)> {
        match self.nodes[a.0].value.shape.as_slice() {
            [m, n] => Ok((*m, *n)),
            _ => Err(self.shape_err(op, a, other)),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat_dims("matmul", a, b)?;
        let (k2, n) = self.mat_dims("matmul", b, a)?;
        if k != k2 {
            return Err(self.shape_err("matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_nn(&mut out, self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor { shape: vec![m, n], data: out }, rg, Op::MatMul(a, b)))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat_dims("matmul_bt", a, b)?;
        let (n, k2) = self.mat_dims("matmul_bt", b, a)?;
        if k != k2 {
            return Err(self.shape_err("matmul_bt", a, b));
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_nt_acc(&mut out, self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor { shape: vec![m, n], data: out }, rg, Op::MatMulBt(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).transpose()?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(t, rg, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape != self.value(b).shape {
            return Err(self.shape_err("add", a, b));
        }
        let data = self.zip_values(a, b, |x, y| x + y);
        let shape = self.value(a).shape.clone();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor { shape, data }, rg, Op::Add(a, b)))
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.value(a).dims2();
        if self.value(bias).len() != n {
            return Err(self.shape_err("add_row", a, bias));
        }
        let b = self.value(bias).data().to_vec();
        let mut data = self.value(a).data.clone();
        for row in data.chunks_exact_mut(n) {
            for (x, y) in row.iter_mut().zip(&b) {
                *x += y;
            }
        }
        let shape = self.value(a).shape.clone();
        let rg = self.any_grad(&[a, bias]);
        Ok(self.push(Tensor { shape, data }, rg, Op::AddRow(a, bias)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape != self.value(b).shape {
            return Err(self.shape_err("mul", a, b));
        }
        let data = self.zip_values(a, b, |x, y| x * y);
        let shape = self.value(a).shape.clone();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor { shape, data }, rg, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.map_value(a, |x| x * s);
        let rg = self.any_grad(&[a]);
        self.push(t, rg, Op::Scale(a, s))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let t = self.map_value(a, gelu);
        let rg = self.any_grad(&[a]);
        self.push(t, rg, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.map_value(a, math::tanh);
        let rg = self.any_grad(&[a]);
        self.push(t, rg, Op::Tanh(a))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = super::softmax(self.value(x), axis)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(t, rg, Op::Softmax { x, axis }))
    }

    /// Layer normalization over the last axis with learned gain and offset.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let n = *xv.shape.last().unwrap_or(&0);
        if self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(self.shape_err("layer_norm", x, gamma));
        }
        let rows = xv.len() / n;
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut out = vec![0.0; xv.len()];
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        for r in 0..rows {
            let row = &xv.data[r * n..(r + 1) * n];
            let (mean, rs) = kernels::moments(row, eps);
            rstd[r] = rs;
            for j in 0..n {
                let h = (row[j] - mean) * rs;
                xhat[r * n + j] = h;
                out[r * n + j] = h * g[j] + b[j];
            }
        }
        let shape = xv.shape.clone();
        let rg = self.any_grad(&[x, gamma, beta]);
        Ok(self.push(
            Tensor { shape, data: out },
            rg,
            Op::LayerNorm { x, gamma, beta, xhat, rstd },
        ))
    }

    /// Selects rows of a `V×d` table.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.mat_dims("gather", table, table)?;
        if ids.is_empty() {
            return Err(Error::EmptyInput("gather ids"));
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::IndexOutOfRange { what: "row", index: id, len: v });
            }
            data.extend_from_slice(self.value(table).row(id));
        }
        let rg = self.any_grad(&[table]);
        Ok(self.push(
            Tensor { shape: vec![ids.len(), d], data },
            rg,
            Op::Gather { table, ids: ids.to_vec() },
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.mat_dims("slice_cols", x, x)?;
        if len == 0 || start + len > n {
            return Err(Error::IndexOutOfRange { what: "column", index: start + len, len: n });
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(m * len);
        for i in 0..m {
            data.extend_from_slice(&src[i * n + start..i * n + start + len]);
        }
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor { shape: vec![m, len], data }, rg, Op::SliceCols { x, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput("concat_cols"))?;
        let (m, _) = self.mat_dims("concat_cols", first, first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pm, pn) = self.mat_dims("concat_cols", p, first)?;
            if pm != m {
                return Err(self.shape_err("concat_cols", first, p));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.any_grad(parts);
        Ok(self.push(
            Tensor { shape: vec![m, total], data },
            rg,
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.any_grad(&[a]);
        self.push(Tensor::scalar(s), rg, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.any_grad(&[a]);
        self.push(Tensor::scalar(s), rg, Op::Mean(a))
    }

    /// Mean over scored rows of `-log softmax(logits)[target]`.
    ///
    /// `scored` selects contributing rows (all rows when `None`); targets of
    /// unscored rows are ignored and may be anything.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        scored: Option<&[bool]>,
    ) -> Result<Var> {
        let (rows, vocab) = self.mat_dims("cross_entropy", logits, logits)?;
        let scored: Vec<bool> = match scored {
            Some(s) => s.to_vec(),
            None => vec![true; rows],
        };
        if targets.len() != rows || scored.len() != rows {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: self.value(logits).shape.clone(),
                right: vec![targets.len(), scored.len()],
            });
        }
        let lv = self.value(logits).data();
        let mut probs = vec![0.0; rows * vocab];
        let mut total = 0.0;
        let mut count = 0;
        for r in 0..rows {
            if !scored[r] {
                continue;
            }
            let t = targets[r];
            if t >= vocab {
                return Err(Error::IndexOutOfRange { what: "target", index: t, len: vocab });
            }
            let row = &lv[r * vocab..(r + 1) * vocab];
            let lse = kernels::log_sum_exp(row);
            total += lse - row[t];
            for j in 0..vocab {
                probs[r * vocab + j] = math::exp(row[j] - lse);
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyInput("cross_entropy: no scored positions"));
        }
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            Tensor::scalar(total / count as f64),
            rg,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                scored,
                probs,
                count,
            },
        ))
    }

    fn zip_values(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    fn map_value(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let v = self.value(a);
        Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Runs `f` against the (lazily zeroed) gradient buffer of `v` while
    /// giving it read access to every node value.
    fn with_grad(&mut self, v: Var, f: impl FnOnce(&[Node], &mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let n = self.nodes[v.0].value.len();
        let mut g = self.nodes[v.0].grad.take().unwrap_or_else(|| vec![0.0; n]);
        f(&self.nodes, &mut g);
        self.nodes[v.0].grad = Some(g);
    }

    /// Reverse sweep from a scalar `loss`, accumulating into every node that
    /// requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        let lv = &self.nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss { shape: lv.shape.clone() });
        }
        self.backward_done = true;
        self.with_grad(loss, |_, g| g[0] += 1.0);
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            let op = mem::replace(&mut self.nodes[idx].op, Op::Leaf);
            self.propagate(idx, &op, &g);
            self.nodes[idx].op = op;
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, op: &Op, g: &[f64]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2();
                let (_, n) = self.value(*b).dims2();
                let (av, bv) = (*a, *b);
                self.with_grad(av, |nodes, da| {
                    kernels::gemm_nt_acc(da, g, &nodes[bv.0].value.data, m, n, k);
                });
                self.with_grad(bv, |nodes, db| {
                    kernels::gemm_tn_acc(db, &nodes[av.0].value.data, g, k, m, n);
                });
            }
            Op::MatMulBt(a, b) => {
                let (m, k) = self.value(*a).dims2();
                let (n, _) = self.value(*b).dims2();
                let (av, bv) = (*a, *b);
                self.with_grad(av, |nodes, da| {
                    kernels::gemm_nn_acc(da, g, &nodes[bv.0].value.data, m, n, k);
                });
                self.with_grad(bv, |nodes, db| {
                    kernels::gemm_tn_acc(db, g, &nodes[av.0].value.data, n, m, k);
                });
            }
            Op::Transpose(a) => {
                let (m, n) = self.value(*a).dims2();
                self.with_grad(*a, |_, da| {
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] += g[j * m + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    self.with_grad(v, |_, d| add_into(d, g));
                }
            }
            Op::AddRow(a, bias) => {
                self.with_grad(*a, |_, d| add_into(d, g));
                let n = self.value(*bias).len();
                self.with_grad(*bias, |_, db| {
                    for row in g.chunks_exact(n) {
                        add_into(db, row);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (*a, *b);
                self.with_grad(av, |nodes, d| {
                    for ((x, gi), y) in d.iter_mut().zip(g).zip(&nodes[bv.0].value.data) {
                        *x += gi * y;
                    }
                });
                self.with_grad(bv, |nodes, d| {
                    for ((x, gi), y) in d.iter_mut().zip(g).zip(&nodes[av.0].value.data) {
                        *x += gi * y;
                    }
                });
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.with_grad(*a, |_, d| {
                    for (x, gi) in d.iter_mut().zip(g) {
                        *x += s * gi;
                    }
                });
            }
            Op::Gelu(a) => {
                let av = *a;
                self.with_grad(av, |nodes, d| {
                    for ((x, gi), &u) in d.iter_mut().zip(g).zip(&nodes[av.0].value.data) {
                        *x += gi * gelu_grad(u);
                    }
                });
            }
            Op::Tanh(a) => {
                self.with_grad(*a, |nodes, d| {
                    for ((x, gi), y) in d.iter_mut().zip(g).zip(&nodes[idx].value.data) {
                        *x += gi * (1.0 - y * y);
                    }
                });
            }
            Op::Softmax { x, axis } => {
                let (outer, n, inner) = self
                    .value(*x)
                    .axis_split(*axis)
                    .expect("axis validated at construction");
                self.with_grad(*x, |nodes, d| {
                    let y = &nodes[idx].value.data;
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * n * inner + i;
                            let mut dot = 0.0;
                            for j in 0..n {
                                dot += y[base + j * inner] * g[base + j * inner];
                            }
                            for j in 0..n {
                                let k = base + j * inner;
                                d[k] += y[k] * (g[k] - dot);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let n = self.value(*gamma).len();
                let gv = *gamma;
                self.with_grad(*beta, |_, db| {
                    for row in g.chunks_exact(n) {
                        add_into(db, row);
                    }
                });
                self.with_grad(gv, |_, dg| {
                    for (grow, hrow) in g.chunks_exact(n).zip(xhat.chunks_exact(n)) {
                        for j in 0..n {
                            dg[j] += grow[j] * hrow[j];
                        }
                    }
                });
                self.with_grad(*x, |nodes, dx| {
                    let gamma = &nodes[gv.0].value.data;
                    let nf = n as f64;
                    let mut dxhat = vec![0.0; n];
                    for (r, &rs) in rstd.iter().enumerate() {
                        let grow = &g[r * n..(r + 1) * n];
                        let hrow = &xhat[r * n..(r + 1) * n];
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for j in 0..n {
                            dxhat[j] = grow[j] * gamma[j];
                            s1 += dxhat[j];
                            s2 += dxhat[j] * hrow[j];
                        }
                        for j in 0..n {
                            dx[r * n + j] += rs / nf * (nf * dxhat[j] - s1 - hrow[j] * s2);
                        }
                    }
                });
            }
            Op::Gather { table, ids } => {
                let d = self.value(*table).dims2().1;
                self.with_grad(*table, |_, dt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let (m, n) = self.value(*x).dims2();
                let len = g.len() / m;
                let start = *start;
                self.with_grad(*x, |_, dx| {
                    for i in 0..m {
                        add_into(
                            &mut dx[i * n + start..i * n + start + len],
                            &g[i * len..(i + 1) * len],
                        );
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = self.nodes[idx].value.dims2().1;
                let m = self.nodes[idx].value.dims2().0;
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).dims2().1;
                    self.with_grad(p, |_, dp| {
                        for i in 0..m {
                            add_into(
                                &mut dp[i * w..(i + 1) * w],
                                &g[i * total + offset..i * total + offset + w],
                            );
                        }
                    });
                    offset += w;
                }
            }
            Op::Sum(a) => {
                let s = g[0];
                self.with_grad(*a, |_, d| d.iter_mut().for_each(|x| *x += s));
            }
            Op::Mean(a) => {
                let s = g[0] / self.value(*a).len() as f64;
                self.with_grad(*a, |_, d| d.iter_mut().for_each(|x| *x += s));
            }
            Op::CrossEntropy { logits, targets, scored, probs, count } => {
                let vocab = self.value(*logits).dims2().1;
                let s = g[0] / *count as f64;
                self.with_grad(*logits, |_, d| {
                    for (r, (&t, &on)) in targets.iter().zip(scored).enumerate() {
                        if !on {
                            continue;
                        }
                        let row = &mut d[r * vocab..(r + 1) * vocab];
                        for (x, p) in row.iter_mut().zip(&probs[r * vocab..(r + 1) * vocab]) {
                            *x += s * p;
                        }
                        row[t] -= s;
                    }
                });
            }
        }
    }
}

#[inline]
fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[inline]
fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = math::tanh(inner);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap());
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn product_of_scalars() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.param(Tensor::scalar(-4.0));
        let p = tape.mul(x, y).unwrap();
        tape.backward(p).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[-4.0]);
        assert_eq!(tape.grad(y).unwrap().data(), &[3.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = x*x + x  =>  d/dx = 2x + 1
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.5));
        let sq = tape.mul(x, x).unwrap();
        let l = tape.add(sq, x).unwrap();
        tape.backward(l).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn second_backward_errors_until_reset() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        let s = tape.scale(x, 3.0);
        tape.backward(s).unwrap();
        assert_eq!(tape.backward(s), Err(Error::BackwardTwice));
        tape.zero_grad();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[3.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn constants_get_no_grad() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0));
        let c = tape.constant(Tensor::scalar(5.0));
        let p = tape.mul(x, c).unwrap();
        tape.backward(p).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(x).unwrap().data(), &[5.0]);
    }

    #[test]
    fn cross_entropy_reference_values() {
        let mut tape = Tape::new();
        let v = 30000;
        let l = tape.constant(Tensor::zeros(&[1, v]));
        let ce = tape.cross_entropy(l, &[17], None).unwrap();
        assert!((tape.value(ce).data()[0] - math::ln(30000.0)).abs() < 1e-12);
        assert!((math::ln(30000.0) - 10.309).abs() < 1e-3);

        let l2 = tape.constant(Tensor::zeros(&[2, 2]));
        let ce2 = tape.cross_entropy(l2, &[0, 1], None).unwrap();
        assert!((tape.value(ce2).data()[0] - math::ln(2.0)).abs() < 1e-15);

        let peaked = tape.constant(Tensor::new(vec![1, 3], vec![0.0, 80.0, 0.0]).unwrap());
        let ce3 = tape.cross_entropy(peaked, &[1], None).unwrap();
        assert!(tape.value(ce3).data()[0] < 1e-30);
    }

    #[test]
    fn cross_entropy_errors() {
        let mut tape = Tape::new();
        let l = tape.constant(Tensor::zeros(&[2, 4]));
        assert!(matches!(
            tape.cross_entropy(l, &[0, 4], None),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            tape.cross_entropy(l, &[0, 0], Some(&[false, false])),
            Err(Error::EmptyInput(_))
        ));
        // unscored rows may carry any target
        assert!(tape.cross_entropy(l, &[0, 99], Some(&[true, false])).is_ok());
    }
}

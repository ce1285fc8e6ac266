//! Reverse-mode automatic differentiation over batched matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters enter
//! through [`Tape::param`]; those whose owner is in the tape's trainable mask
//! become differentiable leaves, everything else is a constant. A node that
//! depends on no differentiable leaf is never visited by the backward pass,
//! so constant subgraphs (e.g. a frozen world model during imagination) cost
//! only their forward evaluation.
//!
//! [`Tape::stop_gradient`] is an explicit graph node: its value equals its
//! input but the backward pass does not propagate through it.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{GradTable, OwnerMask, ParamId, ParameterSet};
use super::softmax::stable_sum;
use super::tensor::Matrix;
use crate::error::{contract, Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, T),
    Shift(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Softplus(Var),
    Clamp(Var, T, T),
    MaxScalar(Var, T),
    Concat(Vec<Var>),
    Slice(Var, usize),
    SumCols(Var),
    Sum(Var),
    StopGrad,
    SoftmaxRows(Var),
    Mixture(Var, Var, usize),
    RowNorm(Var),
    LogSech2(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
    param: Option<ParamId>,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    bound: BTreeMap<ParamId, Var>,
    trainable: OwnerMask,
}

impl<T: Real> Tape<T> {
    /// A tape that differentiates parameters whose owner is in `trainable`.
    pub fn new(trainable: OwnerMask) -> Self {
        Tape { nodes: Vec::with_capacity(256), bound: BTreeMap::new(), trainable }
    }

    /// A tape with no differentiable parameters (pure evaluation).
    pub fn frozen() -> Self {
        Self::new(OwnerMask::NONE)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.idx()].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.idx()].value.data[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.idx()].value.shape()
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.idx()].needs_grad
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        let id = Var(self.nodes.len() as u32);
        self.nodes.push(Node { value, op, needs_grad, param: None });
        id
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.idx()].needs_grad
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_f64(&mut self, rows: usize, cols: usize, data: &[f64]) -> Var {
        self.constant(Matrix::from_f64(rows, cols, data))
    }

    pub fn scalar_const(&mut self, v: f64) -> Var {
        self.constant(Matrix::scalar(T::from_f64(v)))
    }

    /// Bind parameter `id`. Repeated binds of the same parameter return the same node.
    pub fn param(&mut self, params: &ParameterSet<T>, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let e = params.entry(id);
        let (r, c) = e.matrix_shape();
        let value = Matrix::from_vec(r, c, e.data.clone());
        let trainable = self.trainable.contains(e.owner);
        let v = self.push(value, Op::Leaf, trainable);
        self.nodes[v.idx()].param = Some(id);
        self.bound.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::MatMul(a, b), ng)
    }

    /// `a + b` with `b` a `1 × n` row broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (ma, bv) = (self.value(a), self.value(b));
        assert_eq!(bv.rows, 1, "add_row expects a row vector");
        assert_eq!(ma.cols, bv.cols, "add_row column mismatch");
        let mut value = ma.clone();
        for r in 0..value.rows {
            for (x, &y) in value.row_mut(r).iter_mut().zip(&bv.data) {
                *x += y;
            }
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::AddRow(a, b), ng)
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(ma.shape(), mb.shape(), "elementwise shape mismatch");
        let data = ma.data.iter().zip(&mb.data).map(|(&x, &y)| f(x, y)).collect();
        let value = Matrix::from_vec(ma.rows, ma.cols, data);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Multiply each row of `a` by the matching entry of column vector `c` (`rows × 1`).
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let (ma, mc) = (self.value(a), self.value(c));
        assert_eq!(mc.cols, 1, "mul_col expects a column vector");
        assert_eq!(ma.rows, mc.rows, "mul_col row mismatch");
        let mut value = ma.clone();
        for r in 0..value.rows {
            let s = mc.data[r];
            for x in value.row_mut(r) {
                *x *= s;
            }
        }
        let ng = self.ng(a) || self.ng(c);
        self.push(value, Op::MulCol(a, c), ng)
    }

    fn map(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let ma = self.value(a);
        let data = ma.data.iter().map(|&x| f(x)).collect();
        let value = Matrix::from_vec(ma.rows, ma.cols, data);
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        self.map(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn shift(&mut self, a: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        self.map(a, |x| x + s, Op::Shift(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| x.sigmoid(), Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, |x| x.exp(), Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, |x| x.ln(), Op::Ln(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |x| x * x, Op::Square(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, |x| x.softplus(), Op::Softplus(a))
    }

    /// Elementwise clamp; gradient passes only strictly inside `(lo, hi)`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let (l, h) = (T::from_f64(lo), T::from_f64(hi));
        self.map(a, |x| x.max(l).min(h), Op::Clamp(a, l, h))
    }

    /// Elementwise `max(a, floor)`; gradient passes only where `a > floor`.
    pub fn max_scalar(&mut self, a: Var, floor: f64) -> Var {
        let f = T::from_f64(floor);
        self.map(a, |x| x.max(f), Op::MaxScalar(a, f))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut value = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows, rows, "concat row mismatch");
            for r in 0..rows {
                value.data[r * cols + off..r * cols + off + m.cols].copy_from_slice(m.row(r));
            }
            off += m.cols;
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(value, Op::Concat(parts.to_vec()), ng)
    }

    /// Columns `start..start + len`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        assert!(start + len <= m.cols, "slice out of range");
        let mut value = Matrix::zeros(m.rows, len);
        for r in 0..m.rows {
            value.row_mut(r).copy_from_slice(&m.row(r)[start..start + len]);
        }
        let ng = self.ng(a);
        self.push(value, Op::Slice(a, start), ng)
    }

    /// Row sums, `rows × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let data = (0..m.rows).map(|r| m.row(r).iter().fold(T::ZERO, |s, &x| s + x)).collect();
        let value = Matrix::from_vec(m.rows, 1, data);
        let ng = self.ng(a);
        self.push(value, Op::SumCols(a), ng)
    }

    /// Sum of all entries, `1 × 1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let s = m.data.iter().fold(T::ZERO, |s, &x| s + x);
        let ng = self.ng(a);
        self.push(Matrix::scalar(s), Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).data.len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Same value, no gradient flows back through this node.
    pub fn stop_gradient(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.push(value, Op::StopGrad, false)
    }

    /// Row-wise softmax. Sums are permutation invariant (see [`stable_sum`]).
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut value = Matrix::zeros(m.rows, m.cols);
        let mut buf = Vec::with_capacity(m.cols);
        for r in 0..m.rows {
            let row = m.row(r);
            let mx = row.iter().fold(row[0], |a, &b| a.max(b));
            buf.clear();
            buf.extend(row.iter().map(|&x| (x - mx).exp()));
            let z = stable_sum(&buf);
            for (o, &e) in value.row_mut(r).iter_mut().zip(&buf) {
                *o = e / z;
            }
        }
        let ng = self.ng(a);
        self.push(value, Op::SoftmaxRows(a), ng)
    }

    /// Weighted combination of `M` components laid side by side.
    ///
    /// `comps` is `rows × (M·d)` (component `i` in columns `i·d..(i+1)·d`),
    /// `weights` is `rows × M`; the result is `rows × d` with
    /// `out[r, j] = Σ_i weights[r, i] · comps[r, i·d + j]`, summed in a
    /// permutation-invariant order.
    pub fn mixture(&mut self, comps: Var, weights: Var, d: usize) -> Var {
        let (c, w) = (self.value(comps), self.value(weights));
        let m = w.cols;
        assert_eq!(c.cols, m * d, "mixture component layout mismatch");
        assert_eq!(c.rows, w.rows, "mixture row mismatch");
        let mut value = Matrix::zeros(c.rows, d);
        let mut terms = vec![T::ZERO; m];
        for r in 0..c.rows {
            for j in 0..d {
                for (i, t) in terms.iter_mut().enumerate() {
                    *t = w.at(r, i) * c.at(r, i * d + j);
                }
                value.set(r, j, stable_sum(&terms));
            }
        }
        let ng = self.ng(comps) || self.ng(weights);
        self.push(value, Op::Mixture(comps, weights, d), ng)
    }

    /// Euclidean norm of each row, `rows × 1`. The gradient at a zero row is zero.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let data = (0..m.rows)
            .map(|r| m.row(r).iter().fold(T::ZERO, |s, &x| s + x * x).sqrt())
            .collect();
        let value = Matrix::from_vec(m.rows, 1, data);
        let ng = self.ng(a);
        self.push(value, Op::RowNorm(a), ng)
    }

    /// Elementwise `ln(1 − tanh²(x))`, the log-Jacobian of a tanh squash.
    pub fn log_sech2(&mut self, a: Var) -> Var {
        let ln2 = T::from_f64(core::f64::consts::LN_2);
        let two = T::from_f64(2.0);
        self.map(a, |x| two * (ln2 - x - (-two * x).softplus()), Op::LogSech2(a))
    }

    /// Gradients of the scalar `loss` with respect to every differentiable parameter.
    pub fn gradients(&self, loss: Var) -> Result<GradTable<T>> {
        let (r, c) = self.shape(loss);
        contract!(r == 1 && c == 1, "loss must be a 1 × 1 scalar, got {r} × {c}");
        let mut table = GradTable::new();
        if !self.ng(loss) {
            return Ok(table);
        }
        let adj = self.backward(loss);
        for (node, g) in self.nodes.iter().zip(&adj) {
            if let (Some(id), Some(g)) = (node.param, g.as_ref()) {
                if node.needs_grad {
                    table.accumulate(id, &g.data);
                }
            }
        }
        Ok(table)
    }

    /// Gradient of `loss` with respect to an arbitrary node (zero when unreachable).
    pub fn gradient_wrt(&self, loss: Var, wrt: Var) -> Result<Matrix<T>> {
        let (r, c) = self.shape(loss);
        contract!(r == 1 && c == 1, "loss must be a 1 × 1 scalar, got {r} × {c}");
        let (wr, wc) = self.shape(wrt);
        if !self.ng(loss) {
            return Ok(Matrix::zeros(wr, wc));
        }
        let mut adj = self.backward(loss);
        Ok(adj[wrt.idx()].take().unwrap_or_else(|| Matrix::zeros(wr, wc)))
    }

    /// Mark a constant node as differentiable so [`Tape::gradient_wrt`] can target it.
    pub fn watch(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    fn backward(&self, loss: Var) -> Vec<Option<Matrix<T>>> {
        let n = loss.idx() + 1;
        let mut adj: Vec<Option<Matrix<T>>> = vec![None; n];
        adj[loss.idx()] = Some(Matrix::scalar(T::ONE));
        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut adj);
            adj[i] = Some(g);
        }
        adj
    }

    fn acc(&self, adj: &mut [Option<Matrix<T>>], v: Var, f: impl FnOnce(&mut Matrix<T>)) {
        if !self.ng(v) {
            return;
        }
        let slot = &mut adj[v.idx()];
        if slot.is_none() {
            let (r, c) = self.shape(v);
            *slot = Some(Matrix::zeros(r, c));
        }
        f(slot.as_mut().unwrap());
    }

    fn acc_elementwise(&self, adj: &mut [Option<Matrix<T>>], v: Var, g: &Matrix<T>, d: impl Fn(usize) -> T) {
        self.acc(adj, v, |m| {
            for (k, (a, &gk)) in m.data.iter_mut().zip(&g.data).enumerate() {
                *a += gk * d(k);
            }
        });
    }

    fn propagate(&self, node: &Node<T>, g: &Matrix<T>, adj: &mut [Option<Matrix<T>>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf | Op::StopGrad => {}
            &Op::MatMul(a, b) => {
                let (ma, mb) = (self.value(a), self.value(b));
                let (m, k, n) = (ma.rows, ma.cols, mb.cols);
                self.acc(adj, a, |da| {
                    for i in 0..m {
                        let grow = &g.data[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &mb.data[p * n..(p + 1) * n];
                            da.data[i * k + p] += dot(grow, brow);
                        }
                    }
                });
                self.acc(adj, b, |db| {
                    for i in 0..m {
                        let grow = &g.data[i * n..(i + 1) * n];
                        for p in 0..k {
                            let x = ma.data[i * k + p];
                            let drow = &mut db.data[p * n..(p + 1) * n];
                            for (d, &y) in drow.iter_mut().zip(grow) {
                                *d += x * y;
                            }
                        }
                    }
                });
            }
            &Op::AddRow(a, b) => {
                self.acc(adj, a, |da| da.add_assign(g));
                self.acc(adj, b, |db| {
                    for r in 0..g.rows {
                        for (d, &x) in db.data.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                });
            }
            &Op::Add(a, b) => {
                self.acc(adj, a, |da| da.add_assign(g));
                self.acc(adj, b, |db| db.add_assign(g));
            }
            &Op::Sub(a, b) => {
                self.acc(adj, a, |da| da.add_assign(g));
                self.acc(adj, b, |db| {
                    for (d, &x) in db.data.iter_mut().zip(&g.data) {
                        *d -= x;
                    }
                });
            }
            &Op::Mul(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                self.acc_elementwise(adj, a, g, |k| vb.data[k]);
                self.acc_elementwise(adj, b, g, |k| va.data[k]);
            }
            &Op::MulCol(a, c) => {
                let (va, vc) = (self.value(a), self.value(c));
                let cols = va.cols;
                self.acc_elementwise(adj, a, g, |k| vc.data[k / cols]);
                self.acc(adj, c, |dc| {
                    for r in 0..va.rows {
                        let mut s = T::ZERO;
                        for (&x, &y) in g.row(r).iter().zip(va.row(r)) {
                            s += x * y;
                        }
                        dc.data[r] += s;
                    }
                });
            }
            &Op::Scale(a, s) => self.acc_elementwise(adj, a, g, |_| s),
            &Op::Shift(a) => self.acc(adj, a, |da| da.add_assign(g)),
            &Op::Tanh(a) => self.acc_elementwise(adj, a, g, |k| T::ONE - out.data[k] * out.data[k]),
            &Op::Sigmoid(a) => self.acc_elementwise(adj, a, g, |k| out.data[k] * (T::ONE - out.data[k])),
            &Op::Exp(a) => self.acc_elementwise(adj, a, g, |k| out.data[k]),
            &Op::Ln(a) => {
                let va = self.value(a);
                self.acc_elementwise(adj, a, g, |k| T::ONE / va.data[k]);
            }
            &Op::Square(a) => {
                let va = self.value(a);
                let two = T::from_f64(2.0);
                self.acc_elementwise(adj, a, g, |k| two * va.data[k]);
            }
            &Op::Softplus(a) => {
                let va = self.value(a);
                self.acc_elementwise(adj, a, g, |k| va.data[k].sigmoid());
            }
            &Op::Clamp(a, lo, hi) => {
                let va = self.value(a);
                self.acc_elementwise(adj, a, g, |k| {
                    let x = va.data[k];
                    if x > lo && x < hi { T::ONE } else { T::ZERO }
                });
            }
            &Op::MaxScalar(a, f) => {
                let va = self.value(a);
                self.acc_elementwise(adj, a, g, |k| if va.data[k] > f { T::ONE } else { T::ZERO });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.shape(p).1;
                    self.acc(adj, p, |dp| {
                        for r in 0..g.rows {
                            for (d, &x) in dp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + pc]) {
                                *d += x;
                            }
                        }
                    });
                    off += pc;
                }
            }
            &Op::Slice(a, start) => {
                self.acc(adj, a, |da| {
                    for r in 0..g.rows {
                        for (d, &x) in da.row_mut(r)[start..start + g.cols].iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                });
            }
            &Op::SumCols(a) => {
                let cols = self.shape(a).1;
                self.acc_elementwise(adj, a, &expand_cols(g, cols), |_| T::ONE);
            }
            &Op::Sum(a) => {
                let s = g.data[0];
                self.acc(adj, a, |da| {
                    for d in da.data.iter_mut() {
                        *d += s;
                    }
                });
            }
            &Op::SoftmaxRows(a) => {
                self.acc(adj, a, |da| {
                    for r in 0..out.rows {
                        let (y, gy) = (out.row(r), g.row(r));
                        let dot = y.iter().zip(gy).fold(T::ZERO, |s, (&p, &q)| s + p * q);
                        for (d, (&p, &q)) in da.row_mut(r).iter_mut().zip(y.iter().zip(gy)) {
                            *d += p * (q - dot);
                        }
                    }
                });
            }
            &Op::Mixture(comps, weights, d) => {
                let (c, w) = (self.value(comps), self.value(weights));
                let m = w.cols;
                self.acc(adj, comps, |dc| {
                    for r in 0..c.rows {
                        for i in 0..m {
                            let wi = w.at(r, i);
                            for j in 0..d {
                                dc.data[r * c.cols + i * d + j] += wi * g.at(r, j);
                            }
                        }
                    }
                });
                self.acc(adj, weights, |dw| {
                    for r in 0..c.rows {
                        for i in 0..m {
                            let mut s = T::ZERO;
                            for j in 0..d {
                                s += g.at(r, j) * c.at(r, i * d + j);
                            }
                            dw.data[r * m + i] += s;
                        }
                    }
                });
            }
            &Op::RowNorm(a) => {
                let va = self.value(a);
                let cols = va.cols;
                self.acc_elementwise(adj, a, &expand_cols(g, cols), |k| {
                    let n = out.data[k / cols];
                    if n > T::ZERO { va.data[k] / n } else { T::ZERO }
                });
            }
            &Op::LogSech2(a) => {
                let va = self.value(a);
                let two = T::from_f64(2.0);
                self.acc_elementwise(adj, a, g, |k| -two * va.data[k].tanh());
            }
        }
    }
}

/// Broadcast an `rows × 1` column to `rows × cols`.
/// Dot product with four running sums, so the loop is not one long
/// dependency chain.
fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::ZERO; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for j in 0..4 {
            acc[j] += a[j] * b[j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (&a, &b) in xr.iter().zip(yr) {
        s += a * b;
    }
    s
}

fn expand_cols<T: Real>(g: &Matrix<T>, cols: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(g.rows, cols);
    for r in 0..g.rows {
        let v = g.data[r];
        for x in m.row_mut(r) {
            *x = v;
        }
    }
    m
}

impl<T: Real> Tape<T> {
    /// Fail with the given head name if a node holds a non-finite value.
    pub fn check_finite(&self, v: Var, what: &str) -> Result<()> {
        if self.value(v).all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what: alloc::string::String::from(what) })
        }
    }
}

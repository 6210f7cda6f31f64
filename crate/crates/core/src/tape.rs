//! Eager reverse-mode automatic differentiation on a Wengert list.
//!
//! Every operation evaluates immediately and records enough to replay the
//! chain rule backwards. Values are `f64` tensors; the op set is exactly what
//! the models in this crate need, nothing speculative.
//!
//! In checked mode (the default) each op validates result finiteness and
//! shapes, so a NaN or a divide-by-zero surfaces at the op that produced it
//! instead of three modules later.

use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_tb, Tensor};

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Exp(usize),
    Ln(usize),
    Matmul(usize, usize),
    MatmulTb(usize, usize),
    AddRow(usize, usize),
    ConcatCols(Vec<usize>),
    SliceCols { src: usize, start: usize, end: usize },
    SliceRows { src: usize, start: usize, end: usize },
    GatherRows { table: usize, indices: Vec<usize> },
    SliceAxis0 { src: usize, index: usize },
    SliceAxis2 { src: usize, index: usize },
    Sum(usize),
    ColSums(usize),
    Dot(usize, usize),
    Norm2(usize),
    DivScalar { x: usize, s: usize },
    MaskedSoftmaxRows { src: usize, valid: usize },
    LayerNormRows { x: usize, gamma: usize, beta: usize, eps: f64 },
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    checked: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), checked: true }
    }

    pub fn new_unchecked() -> Self {
        Tape { nodes: Vec::new(), checked: false }
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

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if self.checked && !value.all_finite() {
            return Err(Error::NonFinite(format!(
                "op produced a non-finite value at node {}",
                self.nodes.len()
            )));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Register a leaf value. Leaves are the only nodes whose gradients are
    /// usually read back, but every node gets one.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    fn binary_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape {
                op,
                details: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b)?;
        let mut out = self.value(a).clone();
        out.axpy(1.0, self.value(b));
        self.push(out, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b)?;
        let mut out = self.value(a).clone();
        out.axpy(-1.0, self.value(b));
        self.push(out, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b)?;
        let data =
            self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        self.push(out, Op::Mul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * c);
        self.push(out, Op::Scale(a.0, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v + c);
        self.push(out, Op::AddScalar(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(out, Op::Relu(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Ln(a.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = matmul(self.value(a), self.value(b))?;
        self.push(out, Op::Matmul(a.0, b.0))
    }

    /// `a @ b^T`.
    pub fn matmul_tb(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = matmul_tb(self.value(a), self.value(b))?;
        self.push(out, Op::MatmulTb(a.0, b.0))
    }

    /// Add a `[1, n]` row to every row of an `[m, n]` tensor.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if av.rank() != 2 || rv.shape() != [1, av.shape()[1]] {
            return Err(Error::Shape {
                op: "add-row",
                details: format!("{:?} + {:?}", av.shape(), rv.shape()),
            });
        }
        let n = av.shape()[1];
        let mut out = av.clone();
        for i in 0..av.shape()[0] {
            for j in 0..n {
                let v = out.at2(i, j) + rv.at2(0, j);
                out.set2(i, j, v);
            }
        }
        self.push(out, Op::AddRow(a.0, row.0))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape { op: "concat-cols", details: "no parts".into() });
        }
        let m = self.value(parts[0]).shape()[0];
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 2 || v.shape()[0] != m {
                return Err(Error::Shape {
                    op: "concat-cols",
                    details: format!("part shape {:?}", v.shape()),
                });
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).shape()[1]).sum();
        let mut out = Tensor::zeros(&[m, total]);
        let mut col = 0;
        for &p in parts {
            let v = self.value(p);
            let c = v.shape()[1];
            for i in 0..m {
                for j in 0..c {
                    out.set2(i, col + j, v.at2(i, j));
                }
            }
            col += c;
        }
        self.push(out, Op::ConcatCols(parts.iter().map(|p| p.0).collect()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 || end > v.shape()[1] || start >= end {
            return Err(Error::Shape {
                op: "slice-cols",
                details: format!("{:?}[:, {}..{}]", v.shape(), start, end),
            });
        }
        let m = v.shape()[0];
        let mut out = Tensor::zeros(&[m, end - start]);
        for i in 0..m {
            for j in start..end {
                out.set2(i, j - start, v.at2(i, j));
            }
        }
        self.push(out, Op::SliceCols { src: a.0, start, end })
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 || end > v.shape()[0] || start >= end {
            return Err(Error::Shape {
                op: "slice-rows",
                details: format!("{:?}[{}..{}, :]", v.shape(), start, end),
            });
        }
        let c = v.shape()[1];
        let mut data = Vec::with_capacity((end - start) * c);
        for i in start..end {
            data.extend_from_slice(v.row(i));
        }
        let out = Tensor::new(vec![end - start, c], data)?;
        self.push(out, Op::SliceRows { src: a.0, start, end })
    }

    /// Row lookup: out[i, :] = table[indices[i], :]. Backward scatter-adds,
    /// so repeated indices accumulate.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(Error::Shape {
                op: "gather-rows",
                details: format!("table shape {:?}", t.shape()),
            });
        }
        let rows = t.shape()[0];
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Contract(format!(
                "gather-rows index {} out of range for {} rows",
                bad, rows
            )));
        }
        let c = t.shape()[1];
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(vec![indices.len(), c], data)?;
        self.push(out, Op::GatherRows { table: table.0, indices: indices.to_vec() })
    }

    /// `[s, a, b]` -> `[a, b]` slice along the first axis.
    pub fn slice_axis0(&mut self, t: Var, index: usize) -> Result<Var> {
        let v = self.value(t);
        if v.rank() != 3 || index >= v.shape()[0] {
            return Err(Error::Shape {
                op: "slice-axis0",
                details: format!("{:?}[{}]", v.shape(), index),
            });
        }
        let (a, b) = (v.shape()[1], v.shape()[2]);
        let base = index * a * b;
        let out = Tensor::new(vec![a, b], v.data()[base..base + a * b].to_vec())?;
        self.push(out, Op::SliceAxis0 { src: t.0, index })
    }

    /// `[m, m, s]` -> `[m, m]` slice along the last axis.
    pub fn slice_axis2(&mut self, t: Var, index: usize) -> Result<Var> {
        let v = self.value(t);
        if v.rank() != 3 || index >= v.shape()[2] {
            return Err(Error::Shape {
                op: "slice-axis2",
                details: format!("{:?}[.., {}]", v.shape(), index),
            });
        }
        let (m, n, s) = (v.shape()[0], v.shape()[1], v.shape()[2]);
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                out.set2(i, j, v.data()[(i * n + j) * s + index]);
            }
        }
        self.push(out, Op::SliceAxis2 { src: t.0, index })
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total: f64 = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a.0))
    }

    /// `[m, n]` -> `[1, n]` column sums.
    pub fn col_sums(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 {
            return Err(Error::Shape {
                op: "col-sums",
                details: format!("shape {:?}", v.shape()),
            });
        }
        let (m, n) = (v.shape()[0], v.shape()[1]);
        let mut out = Tensor::zeros(&[1, n]);
        for i in 0..m {
            for j in 0..n {
                out.set2(0, j, out.at2(0, j) + v.at2(i, j));
            }
        }
        self.push(out, Op::ColSums(a.0))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("dot", a, b)?;
        let total: f64 =
            self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).sum();
        self.push(Tensor::scalar(total), Op::Dot(a.0, b.0))
    }

    /// Euclidean norm of all entries, as a scalar node.
    pub fn norm2(&mut self, a: Var) -> Result<Var> {
        let sq: f64 = self.value(a).data().iter().map(|x| x * x).sum();
        self.push(Tensor::scalar(sq.sqrt()), Op::Norm2(a.0))
    }

    /// Divide a tensor by a scalar node, broadcasting.
    pub fn div_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let sv = self.value(s).scalar_value()?;
        let out = self.value(x).map(|v| v / sv);
        self.push(out, Op::DivScalar { x: x.0, s: s.0 })
    }

    /// Row-wise softmax over the first `valid` columns; the rest get
    /// probability zero. Rows are shifted by their max for stability.
    pub fn masked_softmax_rows(&mut self, a: Var, valid: usize) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 || valid == 0 || valid > v.shape()[1] {
            return Err(Error::Shape {
                op: "masked-softmax-rows",
                details: format!("{:?} with {} valid columns", v.shape(), valid),
            });
        }
        let (m, n) = (v.shape()[0], v.shape()[1]);
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            let row = v.row(i);
            let max = row[..valid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..valid {
                denom += (row[j] - max).exp();
            }
            for j in 0..valid {
                out.set2(i, j, (row[j] - max).exp() / denom);
            }
        }
        self.push(out, Op::MaskedSoftmaxRows { src: a.0, valid })
    }

    /// Row-wise layer normalization with learned scale and shift
    /// (`gamma`, `beta` of shape `[1, n]`).
    pub fn layer_norm_rows(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let v = self.value(x);
        if v.rank() != 2 {
            return Err(Error::Shape {
                op: "layer-norm-rows",
                details: format!("shape {:?}", v.shape()),
            });
        }
        let n = v.shape()[1];
        if self.value(gamma).shape() != [1, n] || self.value(beta).shape() != [1, n] {
            return Err(Error::Shape {
                op: "layer-norm-rows",
                details: "gamma/beta must be [1, n]".into(),
            });
        }
        let m = v.shape()[0];
        let (gv, bv) = (self.value(gamma).clone(), self.value(beta).clone());
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            let row = self.value(x).row(i);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..n {
                out.set2(i, j, gv.at2(0, j) * (row[j] - mean) * inv + bv.at2(0, j));
            }
        }
        self.push(out, Op::LayerNormRows { x: x.0, gamma: gamma.0, beta: beta.0, eps })
    }

    /// Smallest |input| feeding any ReLU on this tape; `None` when no ReLU was
    /// recorded. Finite-difference checks use it to reject sample points that
    /// sit on (or numerically near) a kink.
    pub fn min_abs_relu_input(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for node in &self.nodes {
            if let Op::Relu(src) = node.op {
                for &v in self.nodes[src].value.data() {
                    let a = v.abs();
                    if best.is_none_or(|b| a < b) {
                        best = Some(a);
                    }
                }
            }
        }
        best
    }

    /// Reverse pass from a scalar loss node. Returns one gradient slot per
    /// tape node; untouched slots stay `None` (identically zero).
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.accumulate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }

        if self.checked {
            for (id, g) in grads.iter().enumerate() {
                if let Some(t) = g {
                    if !t.all_finite() {
                        return Err(Error::NonFinite(format!(
                            "non-finite gradient at node {}",
                            id
                        )));
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let add_to = |grads: &mut [Option<Tensor>], target: usize, delta: Tensor| {
            match &mut grads[target] {
                Some(acc) => acc.axpy(1.0, &delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let ga = elementwise_product(g, &self.nodes[*b].value);
                let gb = elementwise_product(g, &self.nodes[*a].value);
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::Scale(a, c) => add_to(grads, *a, g.map(|v| v * c)),
            Op::AddScalar(a) => add_to(grads, *a, g.clone()),
            Op::Relu(a) => {
                let x = &self.nodes[*a].value;
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                add_to(grads, *a, Tensor::new(x.shape().to_vec(), data)?);
            }
            Op::Exp(a) => add_to(grads, *a, elementwise_product(g, &self.nodes[id].value)),
            Op::Ln(a) => {
                let x = &self.nodes[*a].value;
                let data = g.data().iter().zip(x.data()).map(|(&gv, &xv)| gv / xv).collect();
                add_to(grads, *a, Tensor::new(x.shape().to_vec(), data)?);
            }
            Op::Matmul(a, b) => {
                let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                add_to(grads, *a, matmul_tb(g, bv)?);
                add_to(grads, *b, matmul_ta(av, g)?);
            }
            Op::MatmulTb(a, b) => {
                let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                add_to(grads, *a, matmul(g, bv)?);
                add_to(grads, *b, matmul_ta(g, av)?);
            }
            Op::AddRow(a, row) => {
                add_to(grads, *a, g.clone());
                let n = g.shape()[1];
                let mut gr = Tensor::zeros(&[1, n]);
                for i in 0..g.shape()[0] {
                    for j in 0..n {
                        gr.set2(0, j, gr.at2(0, j) + g.at2(i, j));
                    }
                }
                add_to(grads, *row, gr);
            }
            Op::ConcatCols(parts) => {
                let m = g.shape()[0];
                let mut col = 0;
                for &p in parts {
                    let c = self.nodes[p].value.shape()[1];
                    let mut gp = Tensor::zeros(&[m, c]);
                    for i in 0..m {
                        for j in 0..c {
                            gp.set2(i, j, g.at2(i, col + j));
                        }
                    }
                    add_to(grads, p, gp);
                    col += c;
                }
            }
            Op::SliceCols { src, start, end } => {
                let full = self.nodes[*src].value.shape();
                let mut gs = Tensor::zeros(full);
                for i in 0..g.shape()[0] {
                    for j in *start..*end {
                        gs.set2(i, j, g.at2(i, j - start));
                    }
                }
                add_to(grads, *src, gs);
            }
            Op::SliceRows { src, start, end } => {
                let full = self.nodes[*src].value.shape();
                let mut gs = Tensor::zeros(full);
                for i in *start..*end {
                    for j in 0..g.shape()[1] {
                        gs.set2(i, j, g.at2(i - start, j));
                    }
                }
                add_to(grads, *src, gs);
            }
            Op::GatherRows { table, indices } => {
                let full = self.nodes[*table].value.shape();
                let mut gt = Tensor::zeros(full);
                for (out_row, &src_row) in indices.iter().enumerate() {
                    for j in 0..full[1] {
                        gt.set2(src_row, j, gt.at2(src_row, j) + g.at2(out_row, j));
                    }
                }
                add_to(grads, *table, gt);
            }
            Op::SliceAxis0 { src, index } => {
                let full = self.nodes[*src].value.shape().to_vec();
                let mut gs = Tensor::zeros(&full);
                let (a, b) = (full[1], full[2]);
                let base = index * a * b;
                gs.data_mut()[base..base + a * b].copy_from_slice(g.data());
                add_to(grads, *src, gs);
            }
            Op::SliceAxis2 { src, index } => {
                let full = self.nodes[*src].value.shape().to_vec();
                let mut gs = Tensor::zeros(&full);
                let (m, n, s) = (full[0], full[1], full[2]);
                for i in 0..m {
                    for j in 0..n {
                        gs.data_mut()[(i * n + j) * s + index] = g.at2(i, j);
                    }
                }
                add_to(grads, *src, gs);
            }
            Op::Sum(a) => {
                let gv = g.scalar_value()?;
                let shape = self.nodes[*a].value.shape().to_vec();
                add_to(grads, *a, Tensor::zeros(&shape).map(|_| gv));
            }
            Op::ColSums(a) => {
                let shape = self.nodes[*a].value.shape().to_vec();
                let mut ga = Tensor::zeros(&shape);
                for i in 0..shape[0] {
                    for j in 0..shape[1] {
                        ga.set2(i, j, g.at2(0, j));
                    }
                }
                add_to(grads, *a, ga);
            }
            Op::Dot(a, b) => {
                let gv = g.scalar_value()?;
                add_to(grads, *a, self.nodes[*b].value.map(|v| gv * v));
                add_to(grads, *b, self.nodes[*a].value.map(|v| gv * v));
            }
            Op::Norm2(a) => {
                let gv = g.scalar_value()?;
                let norm = self.nodes[id].value.scalar_value()?;
                add_to(grads, *a, self.nodes[*a].value.map(|v| gv * v / norm));
            }
            Op::DivScalar { x, s } => {
                let sv = self.nodes[*s].value.scalar_value()?;
                add_to(grads, *x, g.map(|v| v / sv));
                let num: f64 =
                    g.data().iter().zip(self.nodes[*x].value.data()).map(|(gv, xv)| gv * xv).sum();
                add_to(grads, *s, Tensor::scalar(-num / (sv * sv)));
            }
            Op::MaskedSoftmaxRows { src, valid } => {
                let y = &self.nodes[id].value;
                let (m, n) = (y.shape()[0], y.shape()[1]);
                let mut gs = Tensor::zeros(&[m, n]);
                for i in 0..m {
                    let mut inner = 0.0;
                    for j in 0..*valid {
                        inner += g.at2(i, j) * y.at2(i, j);
                    }
                    for j in 0..*valid {
                        gs.set2(i, j, y.at2(i, j) * (g.at2(i, j) - inner));
                    }
                }
                add_to(grads, *src, gs);
            }
            Op::LayerNormRows { x, gamma, beta, eps } => {
                let xv = &self.nodes[*x].value;
                let gv = &self.nodes[*gamma].value;
                let (m, n) = (xv.shape()[0], xv.shape()[1]);
                let nf = n as f64;
                let mut gx = Tensor::zeros(&[m, n]);
                let mut ggamma = Tensor::zeros(&[1, n]);
                let mut gbeta = Tensor::zeros(&[1, n]);
                for i in 0..m {
                    let row = xv.row(i);
                    let mean = row.iter().sum::<f64>() / nf;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                    let inv = 1.0 / (var + eps).sqrt();
                    // dg = gamma .* upstream; gx per row:
                    // inv * (dg - mean(dg) - xhat * mean(dg .* xhat))
                    let mut mean_dg = 0.0;
                    let mut mean_dg_xhat = 0.0;
                    for j in 0..n {
                        let xhat = (row[j] - mean) * inv;
                        let dg = gv.at2(0, j) * g.at2(i, j);
                        mean_dg += dg;
                        mean_dg_xhat += dg * xhat;
                        ggamma.set2(0, j, ggamma.at2(0, j) + g.at2(i, j) * xhat);
                        gbeta.set2(0, j, gbeta.at2(0, j) + g.at2(i, j));
                    }
                    mean_dg /= nf;
                    mean_dg_xhat /= nf;
                    for j in 0..n {
                        let xhat = (row[j] - mean) * inv;
                        let dg = gv.at2(0, j) * g.at2(i, j);
                        gx.set2(i, j, inv * (dg - mean_dg - xhat * mean_dg_xhat));
                    }
                }
                add_to(grads, *x, gx);
                add_to(grads, *gamma, ggamma);
                add_to(grads, *beta, gbeta);
            }
        }
        Ok(())
    }
}

/// `a^T @ b`, used only by backward passes.
fn matmul_ta(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[0] != b.shape()[0] {
        return Err(Error::Shape {
            op: "matmul-ta",
            details: format!("{:?}^T x {:?}", a.shape(), b.shape()),
        });
    }
    let (k, m, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = Tensor::zeros(&[m, n]);
    for p in 0..k {
        for i in 0..m {
            let apk = a.at2(p, i);
            if apk == 0.0 {
                continue;
            }
            for j in 0..n {
                out.set2(i, j, out.at2(i, j) + apk * b.at2(p, j));
            }
        }
    }
    Ok(out)
}

fn elementwise_product(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes already checked")
}

/// Gradients from one reverse pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` when `v` never
    /// influenced the loss (gradient identically zero).
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn wrt_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.grads[v.0].clone().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

/// Outcome of a central finite-difference comparison.
#[derive(Clone, Debug)]
pub struct FdReport {
    pub max_abs_diff: f64,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Compare analytic gradients against central finite differences of a
/// re-runnable scalar function.
///
/// `f` must rebuild its computation from scratch on every call (fresh tape)
/// so each perturbed evaluation is independent. `analytic[i]` is the claimed
/// gradient with respect to `inputs[i]`. The relative error of a coordinate
/// uses `max(|a|, |b|, 1e-4)` as denominator so near-zero gradients are
/// compared absolutely.
pub fn finite_difference_check(
    f: &mut dyn FnMut(&[Tensor]) -> Result<f64>,
    inputs: &[Tensor],
    analytic: &[Tensor],
    step: f64,
    tol: f64,
) -> Result<FdReport> {
    if inputs.len() != analytic.len() {
        return Err(Error::Contract(format!(
            "{} inputs but {} analytic gradients",
            inputs.len(),
            analytic.len()
        )));
    }
    let mut max_abs_diff = 0.0f64;
    let mut max_rel_err = 0.0f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        if grad.shape() != inputs[which].shape() {
            return Err(Error::Contract(format!(
                "gradient {} has shape {:?}, input has {:?}",
                which,
                grad.shape(),
                inputs[which].shape()
            )));
        }
        for coord in 0..inputs[which].numel() {
            let orig = inputs[which].data()[coord];
            work[which].data_mut()[coord] = orig + step;
            let plus = f(&work)?;
            work[which].data_mut()[coord] = orig - step;
            let minus = f(&work)?;
            work[which].data_mut()[coord] = orig;
            let fd = (plus - minus) / (2.0 * step);
            let an = grad.data()[coord];
            let abs_diff = (fd - an).abs();
            let rel = abs_diff / fd.abs().max(an.abs()).max(1e-4);
            max_abs_diff = max_abs_diff.max(abs_diff);
            max_rel_err = max_rel_err.max(rel);
        }
    }
    Ok(FdReport { max_abs_diff, max_rel_err, pass: max_rel_err < tol })
}

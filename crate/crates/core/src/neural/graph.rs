//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] records one forward computation. Parameters are read from a
//! borrowed [`ParamStore`] and their gradients are accumulated into a
//! [`GradStore`] by [`Graph::backward`].

use super::params::{GradStore, ParamId, ParamStore};
use super::tensor::{dot, Matrix};

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Matrix),
    Scale(Var, f64),
    Sum(Var),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, normalized: Matrix, rstd: Vec<f64> },
    GatherRows { table: Var, ids: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    SliceRows { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    GatherCols { x: Var, index: Vec<usize> },
    Transpose(Var),
    MaskedMeanRows { x: Var, mask: Vec<bool>, count: usize },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Matrix },
    SoftTargetKl { logits: Var, temperature: f64, target: Matrix, probs: Matrix },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Gradients of non-parameter nodes after a backward pass.
#[derive(Debug)]
pub struct NodeGrads(Vec<Option<Matrix>>);

impl NodeGrads {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.0[v.0].as_ref()
    }
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Graph { store, nodes: Vec::new(), params: vec![None; store.len()] }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        match &self.nodes[v.0].op {
            Op::Param(id) => self.store.get(*id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "not a scalar");
        m.data[0]
    }

    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.params[id.0] {
            return v;
        }
        let v = self.push(Matrix::zeros(0, 0), Op::Param(id));
        self.params[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_bt(self.value(b));
        self.push(value, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    /// Adds a `1 × d` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!((r.rows, r.cols), (1, self.value(x).cols), "add_row shape mismatch");
        let mut value = self.value(x).clone();
        for i in 0..value.rows {
            for (v, b) in value.row_mut(i).iter_mut().zip(&self.value(row).data) {
                *v += b;
            }
        }
        self.push(value, Op::AddRow(x, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    /// Elementwise product with a constant (dropout masks, probes).
    pub fn mul_const(&mut self, a: Var, c: Matrix) -> Var {
        let value = self.value(a).zip_map(&c, |x, y| x * y);
        self.push(value, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data.iter().sum();
        self.push(Matrix::from_vec(1, 1, vec![total]), Op::Sum(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()));
        self.push(value, Op::Gelu(a))
    }

    /// Row-wise softmax with an optional column mask (`true` = allowed).
    /// Masked columns get exactly zero probability; a row with no allowed
    /// column is all zeros.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Var {
        let x = self.value(a);
        if let Some(m) = mask {
            assert_eq!(m.len(), x.cols, "softmax mask length mismatch");
        }
        let allowed = |j: usize| mask.is_none_or(|m| m[j]);
        let mut value = Matrix::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let row = x.row(i);
            let max = (0..x.cols).filter(|&j| allowed(j)).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let out = value.row_mut(i);
            let mut z = 0.0;
            for j in 0..row.len() {
                if allowed(j) {
                    out[j] = (row[j] - max).exp();
                    z += out[j];
                }
            }
            out.iter_mut().for_each(|p| *p /= z);
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Per-row normalization followed by `gamma ⊙ x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.shape();
        let mut normalized = Matrix::zeros(n, d);
        let mut rstd = Vec::with_capacity(n);
        for i in 0..n {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, v) in normalized.row_mut(i).iter_mut().zip(row) {
                *o = (v - mean) * r;
            }
            rstd.push(r);
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        assert_eq!((g.len(), b.len()), (d, d), "layer norm parameter shape mismatch");
        let mut value = normalized.clone();
        for i in 0..n {
            for (j, v) in value.row_mut(i).iter_mut().enumerate() {
                *v = *v * g.data[j] + b.data[j];
            }
        }
        self.push(value, Op::LayerNorm { x, gamma, beta, normalized, rstd })
    }

    /// Stacks `table[ids[r]]` as row `r`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut value = Matrix::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            value.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(value, Op::GatherRows { table, ids: ids.to_vec() })
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let xv = self.value(x);
        assert!(start + width <= xv.cols, "slice_cols out of range");
        let mut value = Matrix::zeros(xv.rows, width);
        for i in 0..xv.rows {
            value.row_mut(i).copy_from_slice(&xv.row(i)[start..start + width]);
        }
        self.push(value, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut at = 0;
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows, rows, "concat_cols row mismatch");
                value.row_mut(i)[at..at + pv.cols].copy_from_slice(pv.row(i));
                at += pv.cols;
            }
        }
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, count: usize) -> Var {
        let xv = self.value(x);
        assert!(start + count <= xv.rows, "slice_rows out of range");
        let value = Matrix::from_vec(count, xv.cols, xv.data[start * xv.cols..(start + count) * xv.cols].to_vec());
        self.push(value, Op::SliceRows { x, start })
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&pv.data);
            rows += pv.rows;
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// `out[i][j] = x[i][index[i·m + j]]` for an `n × m` result.
    pub fn gather_cols(&mut self, x: Var, index: &[usize], m: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(index.len(), xv.rows * m, "gather_cols index length mismatch");
        let mut value = Matrix::zeros(xv.rows, m);
        for i in 0..xv.rows {
            for j in 0..m {
                value.data[i * m + j] = xv.get(i, index[i * m + j]);
            }
        }
        self.push(value, Op::GatherCols { x, index: index.to_vec() })
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.push(value, Op::Transpose(x))
    }

    /// Mean of the rows whose mask entry is `true`, as a `1 × d` row.
    pub fn masked_mean_rows(&mut self, x: Var, mask: &[bool]) -> Var {
        let xv = self.value(x);
        assert_eq!(mask.len(), xv.rows, "mask length mismatch");
        let count = mask.iter().filter(|&&m| m).count();
        assert!(count > 0, "masked mean over no rows");
        let mut value = Matrix::zeros(1, xv.cols);
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for (o, v) in value.data.iter_mut().zip(xv.row(i)) {
                *o += v;
            }
        }
        value.data.iter_mut().for_each(|v| *v /= count as f64);
        self.push(value, Op::MaskedMeanRows { x, mask: mask.to_vec(), count })
    }

    /// Mean cross-entropy of row-wise logits against class indices.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows, targets.len(), "cross_entropy target count mismatch");
        let probs = softmax_matrix(lv, 1.0);
        let loss =
            targets.iter().enumerate().map(|(i, &t)| -log_softmax_at(lv.row(i), t)).sum::<f64>() / targets.len() as f64;
        self.push(Matrix::from_vec(1, 1, vec![loss]), Op::CrossEntropy { logits, targets: targets.to_vec(), probs })
    }

    /// Mean over rows of `KL(target ‖ softmax(logits / T))`; `target` holds
    /// probability rows.
    pub fn soft_target_kl(&mut self, logits: Var, target: &Matrix, temperature: f64) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.shape(), target.shape(), "soft target shape mismatch");
        let probs = softmax_matrix(lv, temperature);
        let mut total = 0.0;
        for i in 0..lv.rows {
            let scaled: Vec<f64> = lv.row(i).iter().map(|z| z / temperature).collect();
            for (c, &q) in target.row(i).iter().enumerate() {
                if q > 0.0 {
                    total += q * (q.ln() - log_softmax_at(&scaled, c));
                }
            }
        }
        let loss = total / lv.rows as f64;
        self.push(
            Matrix::from_vec(1, 1, vec![loss]),
            Op::SoftTargetKl { logits, temperature, target: target.clone(), probs },
        )
    }

    /// Back-propagates from the scalar `loss`, adding parameter gradients
    /// into `grads` and returning gradients of the other nodes.
    pub fn backward(&self, loss: Var, grads: &mut GradStore) -> NodeGrads {
        assert_eq!(self.value(loss).shape(), (1, 1), "backward needs a scalar loss");
        let mut g: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        g[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        for i in (0..=loss.0).rev() {
            let Some(up) = g[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {
                    g[i] = Some(up);
                }
                Op::Param(id) => grads.get_mut(*id).add_assign(&up),
                Op::MatMul(a, b) => {
                    let da = up.matmul_bt(self.value(*b));
                    let db = self.value(*a).matmul_at(&up);
                    self.send(*a, da, &mut g, grads);
                    self.send(*b, db, &mut g, grads);
                }
                Op::MatMulBt(a, b) => {
                    let da = up.matmul(self.value(*b));
                    let db = up.matmul_at(self.value(*a));
                    self.send(*a, da, &mut g, grads);
                    self.send(*b, db, &mut g, grads);
                }
                Op::Add(a, b) => {
                    self.send(*a, up.clone(), &mut g, grads);
                    self.send(*b, up, &mut g, grads);
                }
                Op::AddRow(x, row) => {
                    let mut dr = Matrix::zeros(1, up.cols);
                    for r in 0..up.rows {
                        for (d, u) in dr.data.iter_mut().zip(up.row(r)) {
                            *d += u;
                        }
                    }
                    self.send(*row, dr, &mut g, grads);
                    self.send(*x, up, &mut g, grads);
                }
                Op::Mul(a, b) => {
                    let da = up.zip_map(self.value(*b), |u, y| u * y);
                    let db = up.zip_map(self.value(*a), |u, x| u * x);
                    self.send(*a, da, &mut g, grads);
                    self.send(*b, db, &mut g, grads);
                }
                Op::MulConst(a, c) => {
                    let da = up.zip_map(c, |u, y| u * y);
                    self.send(*a, da, &mut g, grads);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    self.send(*a, up.map(|u| u * s), &mut g, grads);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    self.send(*a, Matrix::filled(r, c, up.data[0]), &mut g, grads);
                }
                Op::Sigmoid(a) => {
                    let da = up.zip_map(&node.value, |u, y| u * y * (1.0 - y));
                    self.send(*a, da, &mut g, grads);
                }
                Op::Tanh(a) => {
                    let da = up.zip_map(&node.value, |u, y| u * (1.0 - y * y));
                    self.send(*a, da, &mut g, grads);
                }
                Op::Gelu(a) => {
                    let da = up.zip_map(self.value(*a), |u, x| u * gelu_grad(x));
                    self.send(*a, da, &mut g, grads);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut da = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let inner = dot(y.row(r), up.row(r));
                        for ((d, &p), &u) in da.row_mut(r).iter_mut().zip(y.row(r)).zip(up.row(r)) {
                            *d = p * (u - inner);
                        }
                    }
                    self.send(*a, da, &mut g, grads);
                }
                Op::LayerNorm { x, gamma, beta, normalized, rstd } => {
                    let (n, d) = normalized.shape();
                    let gv = self.value(*gamma);
                    let mut dgamma = Matrix::zeros(1, d);
                    let mut dbeta = Matrix::zeros(1, d);
                    let mut dx = Matrix::zeros(n, d);
                    for r in 0..n {
                        let xh = normalized.row(r);
                        let u = up.row(r);
                        let dxh: Vec<f64> = (0..d).map(|j| u[j] * gv.data[j]).collect();
                        for j in 0..d {
                            dgamma.data[j] += u[j] * xh[j];
                            dbeta.data[j] += u[j];
                        }
                        let mean_dxh = dxh.iter().sum::<f64>() / d as f64;
                        let mean_dxh_xh = dot(&dxh, xh) / d as f64;
                        for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
                            *o = rstd[r] * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
                        }
                    }
                    self.send(*gamma, dgamma, &mut g, grads);
                    self.send(*beta, dbeta, &mut g, grads);
                    self.send(*x, dx, &mut g, grads);
                }
                Op::GatherRows { table, ids } => {
                    if let Op::Param(pid) = self.nodes[table.0].op {
                        let dt = grads.get_mut(pid);
                        for (r, &id) in ids.iter().enumerate() {
                            for (d, u) in dt.row_mut(id).iter_mut().zip(up.row(r)) {
                                *d += u;
                            }
                        }
                    } else {
                        let (tr, tc) = self.value(*table).shape();
                        let mut dt = Matrix::zeros(tr, tc);
                        for (r, &id) in ids.iter().enumerate() {
                            for (d, u) in dt.row_mut(id).iter_mut().zip(up.row(r)) {
                                *d += u;
                            }
                        }
                        self.send(*table, dt, &mut g, grads);
                    }
                }
                Op::SliceCols { x, start } => {
                    let (r, c) = self.value(*x).shape();
                    let mut dx = Matrix::zeros(r, c);
                    for i in 0..r {
                        dx.row_mut(i)[*start..*start + up.cols].copy_from_slice(up.row(i));
                    }
                    self.send(*x, dx, &mut g, grads);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (r, c) = self.value(p).shape();
                        let mut dp = Matrix::zeros(r, c);
                        for i in 0..r {
                            dp.row_mut(i).copy_from_slice(&up.row(i)[at..at + c]);
                        }
                        at += c;
                        self.send(p, dp, &mut g, grads);
                    }
                }
                Op::SliceRows { x, start } => {
                    let (r, c) = self.value(*x).shape();
                    let mut dx = Matrix::zeros(r, c);
                    dx.data[start * c..start * c + up.len()].copy_from_slice(&up.data);
                    self.send(*x, dx, &mut g, grads);
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (r, c) = self.value(p).shape();
                        let dp = Matrix::from_vec(r, c, up.data[at..at + r * c].to_vec());
                        at += r * c;
                        self.send(p, dp, &mut g, grads);
                    }
                }
                Op::GatherCols { x, index } => {
                    let (r, c) = self.value(*x).shape();
                    let m = up.cols;
                    let mut dx = Matrix::zeros(r, c);
                    for i in 0..r {
                        for j in 0..m {
                            dx.data[i * c + index[i * m + j]] += up.data[i * m + j];
                        }
                    }
                    self.send(*x, dx, &mut g, grads);
                }
                Op::Transpose(x) => {
                    self.send(*x, up.transpose(), &mut g, grads);
                }
                Op::MaskedMeanRows { x, mask, count } => {
                    let (r, c) = self.value(*x).shape();
                    let mut dx = Matrix::zeros(r, c);
                    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                        for (d, u) in dx.row_mut(i).iter_mut().zip(&up.data) {
                            *d = u / *count as f64;
                        }
                    }
                    self.send(*x, dx, &mut g, grads);
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let scale = up.data[0] / targets.len() as f64;
                    let mut dl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        dl.data[r * dl.cols + t] -= 1.0;
                    }
                    dl.data.iter_mut().for_each(|v| *v *= scale);
                    self.send(*logits, dl, &mut g, grads);
                }
                Op::SoftTargetKl { logits, temperature, target, probs } => {
                    let scale = up.data[0] / (temperature * probs.rows as f64);
                    let dl = probs.zip_map(target, |p, q| (p - q) * scale);
                    self.send(*logits, dl, &mut g, grads);
                }
            }
        }
        NodeGrads(g)
    }

    fn send(&self, v: Var, grad: Matrix, g: &mut [Option<Matrix>], grads: &mut GradStore) {
        if let Op::Param(id) = self.nodes[v.0].op {
            grads.get_mut(id).add_assign(&grad);
            return;
        }
        match &mut g[v.0] {
            Some(existing) => existing.add_assign(&grad),
            slot => *slot = Some(grad),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn log_softmax_at(row: &[f64], index: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    row[index] - lse
}

/// Row-wise `softmax(x / temperature)`.
pub fn softmax_matrix(x: &Matrix, temperature: f64) -> Matrix {
    let mut out = Matrix::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        let row = x.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let o = out.row_mut(r);
        for (p, z) in o.iter_mut().zip(row) {
            *p = ((z - max) / temperature).exp();
        }
        let s: f64 = o.iter().sum();
        o.iter_mut().for_each(|p| *p /= s);
    }
    out
}

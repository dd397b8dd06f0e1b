//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Values are `f64` throughout and stored row-major. A [`Tape`] records every
//! differentiable operation of one forward pass (define-by-run); [`Tape::backward`]
//! replays the record in reverse and accumulates gradients into each node that
//! requires them. Graphs are rebuilt per forward pass, so a tape never outlives
//! the pass that created it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A plain (non-recorded) dense tensor. Used for constants such as embedded
/// input matrices and for parameter values held outside any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != values.len() {
            return Err(Error::Contract(format!(
                "tensor shape {:?} implies {} values, got {}",
                shape,
                numel,
                values.len()
            )));
        }
        check_finite("Tensor::new", &values)?;
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, values: vec![0.0; numel] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], values: vec![v] }
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }
}

fn check_finite(op: &'static str, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                op,
                detail: format!("element {i} is {v}"),
            });
        }
    }
    Ok(())
}

/// Handle to a node on a [`Tape`].
pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    MaskedSoftmax(NodeId, Vec<bool>),
    Concat(NodeId, NodeId),
    StackRows(Vec<NodeId>),
    Bilinear { u: NodeId, t: NodeId, v: NodeId },
    Transpose(NodeId),
    Reshape(NodeId),
    Sum(NodeId),
    CrossEntropy { logits: NodeId, labels: Vec<usize> },
}

struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
    /// Index of the external parameter this leaf mirrors, if any.
    param: Option<usize>,
}

/// Recorded computation graph of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(
        &mut self,
        shape: Vec<usize>,
        values: Vec<f64>,
        requires_grad: bool,
        op: Op,
        param: Option<usize>,
    ) -> NodeId {
        self.nodes.push(Node { shape, values, grad: None, requires_grad, op, param });
        self.nodes.len() - 1
    }

    /// Record a constant leaf (no gradient).
    pub fn constant(&mut self, t: Tensor) -> Result<NodeId> {
        check_finite("constant", &t.values)?;
        Ok(self.push(t.shape, t.values, false, Op::Leaf, None))
    }

    /// Record a differentiable leaf.
    pub fn variable(&mut self, t: Tensor) -> Result<NodeId> {
        check_finite("variable", &t.values)?;
        Ok(self.push(t.shape, t.values, true, Op::Leaf, None))
    }

    /// Record a differentiable leaf mirroring external parameter `param_idx`.
    pub fn param(&mut self, shape: &[usize], values: &[f64], param_idx: usize) -> Result<NodeId> {
        check_finite("param", values)?;
        Ok(self.push(shape.to_vec(), values.to_vec(), true, Op::Leaf, Some(param_idx)))
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].shape
    }

    pub fn values(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].values
    }

    /// Gradient of the last backward pass w.r.t. node `id`, if populated.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id].grad.as_deref()
    }

    /// Iterate `(param_idx, grad)` over all parameter leaves with gradients.
    pub fn param_grads(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.nodes.iter().filter_map(|n| match (n.param, n.grad.as_deref()) {
            (Some(p), Some(g)) => Some((p, g)),
            _ => None,
        })
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    fn finish(&mut self, shape: Vec<usize>, values: Vec<f64>, rg: bool, op: Op) -> Result<NodeId> {
        check_finite(op_name(&op), &values)?;
        Ok(self.push(shape, values, rg, op, None))
    }

    // ── differentiable operations ────────────────────────────────────

    /// Matrix product of two rank-2 nodes.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::DimMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(self.values(a), self.values(b), m, k, n);
        let rg = self.requires(a) || self.requires(b);
        self.finish(vec![m, n], out, rg, Op::MatMul(a, b))
    }

    /// Elementwise sum of two same-shape nodes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::DimMismatch {
                op: "add",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> =
            self.values(a).iter().zip(self.values(b)).map(|(x, y)| x + y).collect();
        let rg = self.requires(a) || self.requires(b);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::Add(a, b))
    }

    /// Broadcast a length-n bias row against an m×n matrix.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(bias).to_vec();
        let n = *sa.last().unwrap_or(&0);
        if sa.len() != 2 || sb != [n] {
            return Err(Error::DimMismatch { op: "add_row", lhs: sa, rhs: sb });
        }
        let bv = self.values(bias).to_vec();
        let out: Vec<f64> =
            self.values(a).iter().enumerate().map(|(i, x)| x + bv[i % n]).collect();
        let rg = self.requires(a) || self.requires(bias);
        self.finish(sa, out, rg, Op::AddRow(a, bias))
    }

    /// Elementwise product of two same-shape nodes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::DimMismatch {
                op: "mul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> =
            self.values(a).iter().zip(self.values(b)).map(|(x, y)| x * y).collect();
        let rg = self.requires(a) || self.requires(b);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let out: Vec<f64> = self.values(a).iter().map(|x| x * c).collect();
        let rg = self.requires(a);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let out: Vec<f64> = self.values(a).iter().map(|x| x + c).collect();
        let rg = self.requires(a);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let out: Vec<f64> = self.values(a).iter().map(|&x| libm::tanh(x)).collect();
        let rg = self.requires(a);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let out: Vec<f64> = self.values(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let rg = self.requires(a);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let out: Vec<f64> = self.values(a).iter().map(|&x| sigmoid_raw(x)).collect();
        let rg = self.requires(a);
        let shape = self.shape(a).to_vec();
        self.finish(shape, out, rg, Op::Sigmoid(a))
    }

    /// Row-wise softmax over the last axis (rank 1 or 2), with max-subtraction.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::DimMismatch { op: "softmax", lhs: shape, rhs: vec![] });
        }
        let n = *shape.last().unwrap();
        let mut out = self.values(a).to_vec();
        for row in out.chunks_mut(n) {
            softmax_row_raw(row);
        }
        let rg = self.requires(a);
        self.finish(shape, out, rg, Op::Softmax(a))
    }

    /// Softmax over a length-L vector (rank 1 or 1×L) with masked positions
    /// forced to exactly zero weight. At least one position must be unmasked.
    pub fn masked_softmax(&mut self, a: NodeId, mask: &[bool]) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        let n = self.values(a).len();
        if mask.len() != n || shape.iter().filter(|&&e| e > 1).count() > 1 {
            return Err(Error::DimMismatch {
                op: "masked_softmax",
                lhs: shape,
                rhs: vec![mask.len()],
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Contract("masked_softmax: all positions masked".into()));
        }
        let vals = self.values(a);
        let max = vals
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out = vec![0.0; n];
        let mut denom = 0.0;
        for i in 0..n {
            if mask[i] {
                out[i] = libm::exp(vals[i] - max);
                denom += out[i];
            }
        }
        for o in &mut out {
            *o /= denom;
        }
        let rg = self.requires(a);
        self.finish(shape, out, rg, Op::MaskedSoftmax(a, mask.to_vec()))
    }

    /// Concatenate two rank-1 vectors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 1 || sb.len() != 1 {
            return Err(Error::DimMismatch { op: "concat", lhs: sa, rhs: sb });
        }
        let mut out = self.values(a).to_vec();
        out.extend_from_slice(self.values(b));
        let rg = self.requires(a) || self.requires(b);
        self.finish(vec![sa[0] + sb[0]], out, rg, Op::Concat(a, b))
    }

    /// Stack L rows (each [d] or [1×d]) into an L×d matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        if rows.is_empty() {
            return Err(Error::Contract("stack_rows: no rows".into()));
        }
        let d = self.values(rows[0]).len();
        let mut out = Vec::with_capacity(rows.len() * d);
        let mut rg = false;
        for &r in rows {
            if self.values(r).len() != d {
                return Err(Error::DimMismatch {
                    op: "stack_rows",
                    lhs: vec![d],
                    rhs: self.shape(r).to_vec(),
                });
            }
            out.extend_from_slice(self.values(r));
            rg |= self.requires(r);
        }
        self.finish(vec![rows.len(), d], out, rg, Op::StackRows(rows.to_vec()))
    }

    /// Bilinear tensor product: out[i] = uᵀ·T[i]·v for each k slice of T[k×d×d].
    pub fn bilinear(&mut self, u: NodeId, t: NodeId, v: NodeId) -> Result<NodeId> {
        let (su, st, sv) = (self.shape(u).to_vec(), self.shape(t).to_vec(), self.shape(v).to_vec());
        if su.len() != 1 || sv.len() != 1 || st.len() != 3 {
            return Err(Error::DimMismatch { op: "bilinear", lhs: su, rhs: st });
        }
        let d = su[0];
        if sv[0] != d || st[1] != d || st[2] != d {
            return Err(Error::DimMismatch { op: "bilinear", lhs: st, rhs: vec![d] });
        }
        let k = st[0];
        let (uv, tv, vv) = (self.values(u), self.values(t), self.values(v));
        let mut out = vec![0.0; k];
        for i in 0..k {
            let slice = &tv[i * d * d..(i + 1) * d * d];
            let mut acc = 0.0;
            for a in 0..d {
                let mut inner = 0.0;
                for b in 0..d {
                    inner += slice[a * d + b] * vv[b];
                }
                acc += uv[a] * inner;
            }
            out[i] = acc;
        }
        let rg = self.requires(u) || self.requires(t) || self.requires(v);
        self.finish(vec![k], out, rg, Op::Bilinear { u, t, v })
    }

    /// Transpose of a rank-2 node.
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 {
            return Err(Error::DimMismatch { op: "transpose", lhs: s, rhs: vec![] });
        }
        let (m, n) = (s[0], s[1]);
        let vals = self.values(a);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = vals[i * n + j];
            }
        }
        let rg = self.requires(a);
        self.finish(vec![n, m], out, rg, Op::Transpose(a))
    }

    /// Reinterpret a node with a new shape of equal element count.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.values(a).len() {
            return Err(Error::DimMismatch {
                op: "reshape",
                lhs: self.shape(a).to_vec(),
                rhs: shape,
            });
        }
        let out = self.values(a).to_vec();
        let rg = self.requires(a);
        self.finish(shape, out, rg, Op::Reshape(a))
    }

    /// Sum of all elements, producing a scalar node.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let total: f64 = self.values(a).iter().sum();
        let rg = self.requires(a);
        self.finish(vec![1], vec![total], rg, Op::Sum(a))
    }

    /// Mean categorical cross-entropy computed from logits via log-sum-exp.
    /// `logits` is N×C (or a length-C vector treated as one row).
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let shape = self.shape(logits).to_vec();
        let (n, c) = match shape.len() {
            1 => (1, shape[0]),
            2 => (shape[0], shape[1]),
            _ => return Err(Error::DimMismatch { op: "cross_entropy", lhs: shape, rhs: vec![] }),
        };
        if labels.len() != n {
            return Err(Error::Input(format!(
                "cross_entropy: {} labels for {} rows",
                labels.len(),
                n
            )));
        }
        let vals = self.values(logits);
        let mut total = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            if label >= c {
                return Err(Error::Input(format!(
                    "cross_entropy: label {label} out of range for {c} classes (row {i})"
                )));
            }
            let row = &vals[i * c..(i + 1) * c];
            total += log_sum_exp(row) - row[label];
        }
        let rg = self.requires(logits);
        self.finish(
            vec![1],
            vec![total / n as f64],
            rg,
            Op::CrossEntropy { logits, labels: labels.to_vec() },
        )
    }

    // ── backward pass ────────────────────────────────────────────────

    fn accumulate(&mut self, id: NodeId, contrib: &[f64]) {
        if !self.nodes[id].requires_grad {
            return;
        }
        let len = self.nodes[id].values.len();
        let grad = self.nodes[id].grad.get_or_insert_with(|| vec![0.0; len]);
        for (g, c) in grad.iter_mut().zip(contrib) {
            *g += c;
        }
    }

    /// Reverse sweep from a scalar loss node: populates `grad` on every node
    /// that requires gradients and is reachable from the loss.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss].values.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss].shape
            )));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss].grad = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            let grad = match self.nodes[id].grad.clone() {
                Some(g) => g,
                None => continue,
            };
            check_finite("backward", &grad).map_err(|_| Error::NonFinite {
                op: "backward",
                detail: format!("gradient of node {id} ({})", op_name(&self.nodes[id].op)),
            })?;
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let sa = self.shape(a).to_vec();
                    let sb = self.shape(b).to_vec();
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    // dA = dC·Bᵀ
                    let bv = self.values(b).to_vec();
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += grad[i * n + j] * bv[p * n + j];
                            }
                            da[i * k + p] = s;
                        }
                    }
                    self.accumulate(a, &da);
                    // dB = Aᵀ·dC
                    let av = self.values(a).to_vec();
                    let mut db = vec![0.0; k * n];
                    for p in 0..k {
                        for j in 0..n {
                            let mut s = 0.0;
                            for i in 0..m {
                                s += av[i * k + p] * grad[i * n + j];
                            }
                            db[p * n + j] = s;
                        }
                    }
                    self.accumulate(b, &db);
                }
                Op::Add(a, b) => {
                    self.accumulate(a, &grad);
                    self.accumulate(b, &grad);
                }
                Op::AddRow(a, bias) => {
                    self.accumulate(a, &grad);
                    let n = self.values(bias).len();
                    let mut db = vec![0.0; n];
                    for (i, g) in grad.iter().enumerate() {
                        db[i % n] += g;
                    }
                    self.accumulate(bias, &db);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> =
                        grad.iter().zip(self.values(b)).map(|(g, y)| g * y).collect();
                    let db: Vec<f64> =
                        grad.iter().zip(self.values(a)).map(|(g, x)| g * x).collect();
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Scale(a, c) => {
                    let da: Vec<f64> = grad.iter().map(|g| g * c).collect();
                    self.accumulate(a, &da);
                }
                Op::AddScalar(a) => {
                    self.accumulate(a, &grad);
                }
                Op::Tanh(a) => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(self.values(id))
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    self.accumulate(a, &da);
                }
                Op::Relu(a) => {
                    // relu'(0) = 0 by convention
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(self.values(a))
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    self.accumulate(a, &da);
                }
                Op::Sigmoid(a) => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(self.values(id))
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    self.accumulate(a, &da);
                }
                Op::Softmax(a) => {
                    let n = *self.shape(id).last().unwrap();
                    let y = self.values(id).to_vec();
                    let mut da = vec![0.0; y.len()];
                    for r in 0..y.len() / n {
                        let (ys, gs) = (&y[r * n..(r + 1) * n], &grad[r * n..(r + 1) * n]);
                        let dot: f64 = ys.iter().zip(gs).map(|(y, g)| y * g).sum();
                        for j in 0..n {
                            da[r * n + j] = ys[j] * (gs[j] - dot);
                        }
                    }
                    self.accumulate(a, &da);
                }
                Op::MaskedSoftmax(a, mask) => {
                    let y = self.values(id).to_vec();
                    let dot: f64 = y
                        .iter()
                        .zip(&grad)
                        .zip(&mask)
                        .filter(|(_, &m)| m)
                        .map(|((y, g), _)| y * g)
                        .sum();
                    let da: Vec<f64> = y
                        .iter()
                        .zip(&grad)
                        .zip(&mask)
                        .map(|((y, g), &m)| if m { y * (g - dot) } else { 0.0 })
                        .collect();
                    self.accumulate(a, &da);
                }
                Op::Concat(a, b) => {
                    let na = self.values(a).len();
                    self.accumulate(a, &grad[..na]);
                    self.accumulate(b, &grad[na..]);
                }
                Op::StackRows(rows) => {
                    let d = self.values(id).len() / rows.len();
                    for (r, &row) in rows.iter().enumerate() {
                        self.accumulate(row, &grad[r * d..(r + 1) * d]);
                    }
                }
                Op::Bilinear { u, t, v } => {
                    let d = self.values(u).len();
                    let k = self.values(id).len();
                    let uv = self.values(u).to_vec();
                    let vv = self.values(v).to_vec();
                    let tv = self.values(t).to_vec();
                    let mut du = vec![0.0; d];
                    let mut dv = vec![0.0; d];
                    let mut dt = vec![0.0; k * d * d];
                    for i in 0..k {
                        let g = grad[i];
                        let slice = &tv[i * d * d..(i + 1) * d * d];
                        for a in 0..d {
                            for b in 0..d {
                                du[a] += g * slice[a * d + b] * vv[b];
                                dv[b] += g * uv[a] * slice[a * d + b];
                                dt[i * d * d + a * d + b] = g * uv[a] * vv[b];
                            }
                        }
                    }
                    self.accumulate(u, &du);
                    self.accumulate(v, &dv);
                    self.accumulate(t, &dt);
                }
                Op::Transpose(a) => {
                    let s = self.shape(id).to_vec();
                    let (n, m) = (s[0], s[1]);
                    let mut da = vec![0.0; m * n];
                    for i in 0..n {
                        for j in 0..m {
                            da[j * n + i] = grad[i * m + j];
                        }
                    }
                    self.accumulate(a, &da);
                }
                Op::Reshape(a) => {
                    self.accumulate(a, &grad);
                }
                Op::Sum(a) => {
                    let da = vec![grad[0]; self.values(a).len()];
                    self.accumulate(a, &da);
                }
                Op::CrossEntropy { logits, labels } => {
                    let c = self.values(logits).len() / labels.len();
                    let n = labels.len() as f64;
                    let vals = self.values(logits).to_vec();
                    let mut da = vec![0.0; vals.len()];
                    for (i, &label) in labels.iter().enumerate() {
                        let mut row = vals[i * c..(i + 1) * c].to_vec();
                        softmax_row_raw(&mut row);
                        for j in 0..c {
                            let y = if j == label { 1.0 } else { 0.0 };
                            da[i * c + j] = grad[0] * (row[j] - y) / n;
                        }
                    }
                    self.accumulate(logits, &da);
                }
            }
        }
        Ok(())
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Add(..) => "add",
        Op::AddRow(..) => "add_row",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::AddScalar(..) => "add_scalar",
        Op::Tanh(..) => "tanh",
        Op::Relu(..) => "relu",
        Op::Sigmoid(..) => "sigmoid",
        Op::Softmax(..) => "softmax",
        Op::MaskedSoftmax(..) => "masked_softmax",
        Op::Concat(..) => "concat",
        Op::StackRows(..) => "stack_rows",
        Op::Bilinear { .. } => "bilinear",
        Op::Transpose(..) => "transpose",
        Op::Reshape(..) => "reshape",
        Op::Sum(..) => "sum",
        Op::CrossEntropy { .. } => "cross_entropy",
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += av * b[p * n + j];
            }
        }
    }
    out
}

pub(crate) fn sigmoid_raw(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// In-place stable softmax of one row.
pub(crate) fn softmax_row_raw(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut denom = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        denom += *v;
    }
    for v in row.iter_mut() {
        *v /= denom;
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Argmax with ties broken toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

//! Define-by-run recording of array operations with reverse-mode gradients.
//!
//! Every operation appends a node whose parents were created earlier, so the
//! node list is already a topological order and the backward pass is a single
//! reverse sweep. The tape is rebuilt from scratch every training step.

use std::collections::BTreeMap;

use crate::error::{Result, TensorError};
use crate::kernels::{mm_nn_acc, mm_nt_acc, mm_tn_acc};
use crate::ndarray::NdArray;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// Non-differentiable leaf (targets, straight-through corrections).
    Const,
    /// Differentiable leaf without a name (grad_check points).
    Input,
    /// Differentiable leaf bound to a named parameter.
    Param(String),
    Matmul(NodeId, NodeId),
    /// a @ b^T with b stored row-major as [n, k].
    MatmulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Log(NodeId),
    SumAxis(NodeId, usize),
    MeanAxis(NodeId, usize),
    SumAll(NodeId),
    MeanAll(NodeId),
    /// Row-wise softmax (last axis).
    Softmax(NodeId),
    Concat(Vec<NodeId>, usize),
    GatherRows(NodeId, Vec<usize>),
    GatherCols(NodeId, Vec<usize>),
    /// Elementwise product with a constant mask.
    Mask(NodeId),
    /// Mean of squared differences, scalar output.
    SquaredError(NodeId, NodeId),
    /// Mean over rows of -log softmax(row)[target].
    CrossEntropyLogits(NodeId, Vec<usize>),
    Reshape(NodeId),
}

#[derive(Debug)]
struct Node {
    value: NdArray,
    op: Op,
    /// Saved constant payload for Mask (the mask itself).
    aux: Option<Vec<f64>>,
}

/// How two operand shapes line up for an elementwise op.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Broadcast {
    None,
    LhsScalar,
    RhsScalar,
    /// lhs is a single row [1, n] against [m, n].
    LhsRow,
    RhsRow,
    /// lhs is a single column [m, 1] against [m, n].
    LhsCol,
    RhsCol,
}

fn broadcast_kind(op: &'static str, a: &NdArray, b: &NdArray) -> Result<(Vec<usize>, Broadcast)> {
    if a.shape() == b.shape() {
        return Ok((a.shape().to_vec(), Broadcast::None));
    }
    if a.is_scalar() {
        return Ok((b.shape().to_vec(), Broadcast::LhsScalar));
    }
    if b.is_scalar() {
        return Ok((a.shape().to_vec(), Broadcast::RhsScalar));
    }
    let (ar, ac) = a.rows_cols();
    let (br, bc) = b.rows_cols();
    if ar == 1 && ac == bc {
        return Ok((b.shape().to_vec(), Broadcast::LhsRow));
    }
    if br == 1 && bc == ac {
        return Ok((a.shape().to_vec(), Broadcast::RhsRow));
    }
    if ac == 1 && ar == br {
        return Ok((b.shape().to_vec(), Broadcast::LhsCol));
    }
    if bc == 1 && br == ar {
        return Ok((a.shape().to_vec(), Broadcast::RhsCol));
    }
    Err(TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })
}

fn apply_broadcast(
    a: &NdArray,
    b: &NdArray,
    out_shape: &[usize],
    kind: Broadcast,
    f: impl Fn(f64, f64) -> f64,
) -> NdArray {
    let numel: usize = out_shape.iter().product();
    let ad = a.data();
    let bd = b.data();
    let mut out = Vec::with_capacity(numel);
    match kind {
        Broadcast::None => out.extend(ad.iter().zip(bd).map(|(&x, &y)| f(x, y))),
        Broadcast::LhsScalar => {
            let s = ad[0];
            out.extend(bd.iter().map(|&y| f(s, y)));
        }
        Broadcast::RhsScalar => {
            let s = bd[0];
            out.extend(ad.iter().map(|&x| f(x, s)));
        }
        Broadcast::LhsRow | Broadcast::RhsRow => {
            let cols = *out_shape.last().unwrap();
            let rows = numel / cols;
            for r in 0..rows {
                for c in 0..cols {
                    let (x, y) = if kind == Broadcast::LhsRow {
                        (ad[c], bd[r * cols + c])
                    } else {
                        (ad[r * cols + c], bd[c])
                    };
                    out.push(f(x, y));
                }
            }
        }
        Broadcast::LhsCol | Broadcast::RhsCol => {
            let cols = *out_shape.last().unwrap();
            let rows = numel / cols;
            for r in 0..rows {
                for c in 0..cols {
                    let (x, y) = if kind == Broadcast::LhsCol {
                        (ad[r], bd[r * cols + c])
                    } else {
                        (ad[r * cols + c], bd[r])
                    };
                    out.push(f(x, y));
                }
            }
        }
    }
    NdArray::from_vec(out_shape, out).expect("broadcast output shape consistent")
}

/// Reduce an adjoint on the output shape back onto an operand that was
/// broadcast, accumulating into `into`.
fn reduce_broadcast(adj: &[f64], out_shape: &[usize], lhs_side: bool, kind: Broadcast, into: &mut [f64]) {
    let cols = *out_shape.last().unwrap();
    let rows = adj.len() / cols.max(1);
    let scalar_side = matches!(
        (kind, lhs_side),
        (Broadcast::LhsScalar, true) | (Broadcast::RhsScalar, false)
    );
    let row_side = matches!(
        (kind, lhs_side),
        (Broadcast::LhsRow, true) | (Broadcast::RhsRow, false)
    );
    let col_side = matches!(
        (kind, lhs_side),
        (Broadcast::LhsCol, true) | (Broadcast::RhsCol, false)
    );
    if scalar_side {
        into[0] += adj.iter().sum::<f64>();
    } else if row_side {
        for r in 0..rows {
            for c in 0..cols {
                into[c] += adj[r * cols + c];
            }
        }
    } else if col_side {
        for r in 0..rows {
            for c in 0..cols {
                into[r] += adj[r * cols + c];
            }
        }
    } else {
        for (t, &g) in into.iter_mut().zip(adj) {
            *t += g;
        }
    }
}

/// Gradients produced by a backward sweep.
pub struct Gradients {
    adjoints: Vec<Option<NdArray>>,
    by_param: BTreeMap<String, NdArray>,
}

impl Gradients {
    /// Adjoint of an arbitrary node; None when no gradient reached it.
    pub fn wrt(&self, id: NodeId) -> Option<&NdArray> {
        self.adjoints[id.0].as_ref()
    }

    /// Gradient for every parameter bound on the tape; unreached parameters
    /// hold zeros.
    pub fn by_param(&self) -> &BTreeMap<String, NdArray> {
        &self.by_param
    }

    pub fn into_param_map(self) -> BTreeMap<String, NdArray> {
        self.by_param
    }
}

/// Recorded computation graph.
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

    pub fn value(&self, id: NodeId) -> &NdArray {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: NdArray, op: Op) -> NodeId {
        self.nodes.push(Node { value, op, aux: None });
        NodeId(self.nodes.len() - 1)
    }

    // ── Leaves ──────────────────────────────────────────────────────

    /// Non-differentiable constant.
    pub fn constant(&mut self, value: NdArray) -> NodeId {
        self.push(value, Op::Const)
    }

    /// Differentiable unnamed leaf.
    pub fn input(&mut self, value: NdArray) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Differentiable leaf bound to a parameter name.
    pub fn param(&mut self, name: &str, value: NdArray) -> NodeId {
        self.push(value, Op::Param(name.to_string()))
    }

    // ── Linear algebra ──────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).rows_cols();
        let (k2, n) = self.value(b).rows_cols();
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.value(a).shape().to_vec(),
                rhs: self.value(b).shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        mm_nn_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = NdArray::from_vec(&[m, n], out)?;
        Ok(self.push(value, Op::Matmul(a, b)))
    }

    /// a @ b^T where b is stored row-major as [n, k].
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).rows_cols();
        let (n, k2) = self.value(b).rows_cols();
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.value(a).shape().to_vec(),
                rhs: self.value(b).shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        mm_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = NdArray::from_vec(&[m, n], out)?;
        Ok(self.push(value, Op::MatmulNT(a, b)))
    }

    // ── Elementwise ─────────────────────────────────────────────────

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(NodeId, NodeId) -> Op,
    ) -> Result<NodeId> {
        let (shape, kind) = broadcast_kind(op_name, self.value(a), self.value(b))?;
        let value = apply_broadcast(self.value(a), self.value(b), &shape, kind, f);
        Ok(self.push(value, make(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).map(|v| v * c);
        self.push(value, Op::Scale(x, c))
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.scale(x, -1.0)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.value(x).map(|v| v + c);
        self.push(value, Op::AddScalar(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::tanh);
        self.push(value, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(value, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::exp);
        self.push(value, Op::Exp(x))
    }

    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        if let Some(&bad) = self.value(x).data().iter().find(|v| **v <= 0.0) {
            return Err(TensorError::LogDomain { value: bad });
        }
        let value = self.value(x).map(f64::ln);
        Ok(self.push(value, Op::Log(x)))
    }

    // ── Reductions ──────────────────────────────────────────────────

    pub fn sum_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.reduce_axis(x, axis, false)
    }

    pub fn mean_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.reduce_axis(x, axis, true)
    }

    fn reduce_axis(&mut self, x: NodeId, axis: usize, mean: bool) -> Result<NodeId> {
        if axis > 1 {
            return Err(TensorError::InvalidShape {
                op: "reduce_axis",
                shape: self.value(x).shape().to_vec(),
                reason: format!("axis {axis} unsupported (2-D view)"),
            });
        }
        let (rows, cols) = self.value(x).rows_cols();
        let data = self.value(x).data();
        let value = if axis == 0 {
            let mut out = vec![0.0; cols];
            for r in 0..rows {
                for c in 0..cols {
                    out[c] += data[r * cols + c];
                }
            }
            if mean {
                for v in &mut out {
                    *v /= rows as f64;
                }
            }
            NdArray::from_vec(&[1, cols], out)?
        } else {
            let mut out = vec![0.0; rows];
            for r in 0..rows {
                out[r] = data[r * cols..(r + 1) * cols].iter().sum();
                if mean {
                    out[r] /= cols as f64;
                }
            }
            NdArray::from_vec(&[rows, 1], out)?
        };
        let op = if mean { Op::MeanAxis(x, axis) } else { Op::SumAxis(x, axis) };
        Ok(self.push(value, op))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(NdArray::scalar(s), Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).numel() as f64;
        let s = self.value(x).data().iter().sum::<f64>() / n;
        self.push(NdArray::scalar(s), Op::MeanAll(x))
    }

    /// Numerically stable softmax along the last axis.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let (rows, cols) = self.value(x).rows_cols();
        let data = self.value(x).data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                *o = (v - max).exp();
                sum += *o;
            }
            for o in &mut out[r * cols..(r + 1) * cols] {
                *o /= sum;
            }
        }
        let shape = self.value(x).shape().to_vec();
        let value = NdArray::from_vec(&shape, out).expect("softmax preserves shape");
        self.push(value, Op::Softmax(x))
    }

    // ── Structure ───────────────────────────────────────────────────

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        if parts.is_empty() || axis > 1 {
            return Err(TensorError::InvalidShape {
                op: "concat",
                shape: vec![],
                reason: format!("needs parts and axis in {{0,1}}, got axis {axis}"),
            });
        }
        let dims: Vec<(usize, usize)> = parts.iter().map(|&p| self.value(p).rows_cols()).collect();
        let (r0, c0) = dims[0];
        if axis == 1 {
            if dims.iter().any(|&(r, _)| r != r0) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat(axis=1)",
                    lhs: vec![r0, c0],
                    rhs: vec![dims.iter().find(|&&(r, _)| r != r0).unwrap().0],
                });
            }
            let total_c: usize = dims.iter().map(|&(_, c)| c).sum();
            let mut out = Vec::with_capacity(r0 * total_c);
            for r in 0..r0 {
                for (&p, &(_, c)) in parts.iter().zip(&dims) {
                    out.extend_from_slice(&self.value(p).data()[r * c..(r + 1) * c]);
                }
            }
            let value = NdArray::from_vec(&[r0, total_c], out)?;
            Ok(self.push(value, Op::Concat(parts.to_vec(), 1)))
        } else {
            if dims.iter().any(|&(_, c)| c != c0) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat(axis=0)",
                    lhs: vec![r0, c0],
                    rhs: vec![dims.iter().find(|&&(_, c)| c != c0).unwrap().1],
                });
            }
            let total_r: usize = dims.iter().map(|&(r, _)| r).sum();
            let mut out = Vec::with_capacity(total_r * c0);
            for &p in parts {
                out.extend_from_slice(self.value(p).data());
            }
            let value = NdArray::from_vec(&[total_r, c0], out)?;
            Ok(self.push(value, Op::Concat(parts.to_vec(), 0)))
        }
    }

    pub fn gather_rows(&mut self, x: NodeId, idx: &[usize]) -> Result<NodeId> {
        let (rows, cols) = self.value(x).rows_cols();
        for &i in idx {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: i, len: rows });
            }
        }
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            out.extend_from_slice(&data[i * cols..(i + 1) * cols]);
        }
        let value = NdArray::from_vec(&[idx.len(), cols], out)?;
        Ok(self.push(value, Op::GatherRows(x, idx.to_vec())))
    }

    pub fn gather_cols(&mut self, x: NodeId, idx: &[usize]) -> Result<NodeId> {
        let (rows, cols) = self.value(x).rows_cols();
        for &i in idx {
            if i >= cols {
                return Err(TensorError::IndexOutOfRange { op: "gather_cols", index: i, len: cols });
            }
        }
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(rows * idx.len());
        for r in 0..rows {
            for &i in idx {
                out.push(data[r * cols + i]);
            }
        }
        let value = NdArray::from_vec(&[rows, idx.len()], out)?;
        Ok(self.push(value, Op::GatherCols(x, idx.to_vec())))
    }

    /// Elementwise product with a constant mask of the same shape.
    pub fn mask(&mut self, x: NodeId, mask: &[f64]) -> Result<NodeId> {
        if mask.len() != self.value(x).numel() {
            return Err(TensorError::ShapeMismatch {
                op: "mask",
                lhs: self.value(x).shape().to_vec(),
                rhs: vec![mask.len()],
            });
        }
        let shape = self.value(x).shape().to_vec();
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let value = NdArray::from_vec(&shape, data)?;
        let id = self.push(value, Op::Mask(x));
        self.nodes[id.0].aux = Some(mask.to_vec());
        Ok(id)
    }

    /// Mean of squared differences; scalar output.
    pub fn squared_error(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(TensorError::ShapeMismatch {
                op: "squared_error",
                lhs: self.value(a).shape().to_vec(),
                rhs: self.value(b).shape().to_vec(),
            });
        }
        let n = self.value(a).numel() as f64;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        Ok(self.push(NdArray::scalar(s), Op::SquaredError(a, b)))
    }

    /// Mean over rows of -log softmax(row)[target]; scalar output.
    pub fn cross_entropy_logits(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (rows, cols) = self.value(logits).rows_cols();
        if targets.len() != rows {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy_logits",
                lhs: vec![rows, cols],
                rhs: vec![targets.len()],
            });
        }
        for &t in targets {
            if t >= cols {
                return Err(TensorError::IndexOutOfRange { op: "cross_entropy_logits", index: t, len: cols });
            }
        }
        let data = self.value(logits).data();
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = &data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let value = NdArray::scalar(total / rows as f64);
        Ok(self.push(value, Op::CrossEntropyLogits(logits, targets.to_vec())))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).reshaped(shape)?;
        Ok(self.push(value, Op::Reshape(x)))
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Reverse sweep from a scalar root. Returns adjoints for every reached
    /// node and a per-parameter gradient map (zeros for bound parameters the
    /// root does not depend on).
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if !self.value(root).is_scalar() {
            return Err(TensorError::NonScalarRoot {
                shape: self.value(root).shape().to_vec(),
            });
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(grad) = adj[i].take() else { continue };
            self.backward_node(i, &grad, &mut adj);
            adj[i] = Some(grad);
        }

        let mut by_param: BTreeMap<String, NdArray> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(name) = &node.op {
                let entry = by_param
                    .entry(name.clone())
                    .or_insert_with(|| NdArray::zeros(node.value.shape()));
                if let Some(g) = &adj[i] {
                    for (t, &v) in entry.data_mut().iter_mut().zip(g) {
                        *t += v;
                    }
                }
            }
        }

        let adjoints = self
            .nodes
            .iter()
            .zip(adj)
            .map(|(node, a)| {
                a.map(|data| NdArray::from_vec(node.value.shape(), data).expect("adjoint shape"))
            })
            .collect();
        Ok(Gradients { adjoints, by_param })
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], target: NodeId, grad: &[f64]) {
        let slot = &mut adj[target.0];
        match slot {
            Some(existing) => {
                for (t, &g) in existing.iter_mut().zip(grad) {
                    *t += g;
                }
            }
            None => *slot = Some(grad.to_vec()),
        }
    }

    fn accumulate_with(
        &self,
        adj: &mut [Option<Vec<f64>>],
        target: NodeId,
        len: usize,
        fill: impl Fn(&mut [f64]),
    ) {
        let slot = &mut adj[target.0];
        if slot.is_none() {
            *slot = Some(vec![0.0; len]);
        }
        fill(slot.as_mut().unwrap());
    }

    #[allow(clippy::too_many_lines)]
    fn backward_node(&self, i: usize, grad: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Const | Op::Input | Op::Param(_) => {}

            Op::Matmul(a, b) => {
                let (m, k) = self.value(*a).rows_cols();
                let (_, n) = self.value(*b).rows_cols();
                let (bd, ad) = (self.value(*b).data(), self.value(*a).data());
                self.accumulate_with(adj, *a, m * k, |da| {
                    mm_nt_acc(grad, bd, da, m, n, k);
                });
                self.accumulate_with(adj, *b, k * n, |db| {
                    mm_tn_acc(ad, grad, db, m, k, n);
                });
            }

            Op::MatmulNT(a, b) => {
                let (m, k) = self.value(*a).rows_cols();
                let (n, _) = self.value(*b).rows_cols();
                let (bd, ad) = (self.value(*b).data(), self.value(*a).data());
                self.accumulate_with(adj, *a, m * k, |da| {
                    mm_nn_acc(grad, bd, da, m, n, k);
                });
                self.accumulate_with(adj, *b, n * k, |db| {
                    mm_tn_acc(grad, ad, db, m, n, k);
                });
            }

            Op::Add(a, b) | Op::Sub(a, b) => {
                let negate = matches!(node.op, Op::Sub(..));
                let out_shape = node.value.shape().to_vec();
                let kind = broadcast_kind("bw", self.value(*a), self.value(*b))
                    .expect("validated at forward")
                    .1;
                self.accumulate_with(adj, *a, self.value(*a).numel(), |da| {
                    reduce_broadcast(grad, &out_shape, true, kind, da);
                });
                let neg_grad: Vec<f64>;
                let g: &[f64] = if negate {
                    neg_grad = grad.iter().map(|v| -v).collect();
                    &neg_grad
                } else {
                    grad
                };
                self.accumulate_with(adj, *b, self.value(*b).numel(), |db| {
                    reduce_broadcast(g, &out_shape, false, kind, db);
                });
            }

            Op::Mul(a, b) => {
                let out_shape = node.value.shape().to_vec();
                let kind = broadcast_kind("bw", self.value(*a), self.value(*b))
                    .expect("validated at forward")
                    .1;
                // d_a = reduce(grad * broadcast(b)); d_b = reduce(grad * broadcast(a))
                let a_arr = self.value(*a);
                let b_arr = self.value(*b);
                let grad_arr = NdArray::from_vec(&out_shape, grad.to_vec()).unwrap();
                let kind_b = broadcast_kind("bw", &grad_arr, b_arr).expect("bw").1;
                let prod_b = apply_broadcast(&grad_arr, b_arr, &out_shape, kind_b, |g, b| g * b);
                self.accumulate_with(adj, *a, a_arr.numel(), |da| {
                    reduce_broadcast(prod_b.data(), &out_shape, true, kind, da);
                });
                let kind_a = broadcast_kind("bw", &grad_arr, a_arr).expect("bw").1;
                let prod_a = apply_broadcast(&grad_arr, a_arr, &out_shape, kind_a, |g, a| g * a);
                self.accumulate_with(adj, *b, b_arr.numel(), |db| {
                    reduce_broadcast(prod_a.data(), &out_shape, false, kind, db);
                });
            }

            Op::Scale(x, c) => {
                let scaled: Vec<f64> = grad.iter().map(|g| g * c).collect();
                self.accumulate(adj, *x, &scaled);
            }

            Op::AddScalar(x) => self.accumulate(adj, *x, grad),

            Op::Tanh(x) => {
                let y = node.value.data();
                let g: Vec<f64> = grad.iter().zip(y).map(|(&g, &y)| g * (1.0 - y * y)).collect();
                self.accumulate(adj, *x, &g);
            }

            Op::Sigmoid(x) => {
                let y = node.value.data();
                let g: Vec<f64> = grad.iter().zip(y).map(|(&g, &y)| g * y * (1.0 - y)).collect();
                self.accumulate(adj, *x, &g);
            }

            Op::Relu(x) => {
                let xin = self.value(*x).data();
                let g: Vec<f64> = grad
                    .iter()
                    .zip(xin)
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                self.accumulate(adj, *x, &g);
            }

            Op::Exp(x) => {
                let y = node.value.data();
                let g: Vec<f64> = grad.iter().zip(y).map(|(&g, &y)| g * y).collect();
                self.accumulate(adj, *x, &g);
            }

            Op::Log(x) => {
                let xin = self.value(*x).data();
                let g: Vec<f64> = grad.iter().zip(xin).map(|(&g, &x)| g / x).collect();
                self.accumulate(adj, *x, &g);
            }

            Op::SumAxis(x, axis) | Op::MeanAxis(x, axis) => {
                let (rows, cols) = self.value(*x).rows_cols();
                let mean = matches!(node.op, Op::MeanAxis(..));
                let denom = if *axis == 0 { rows as f64 } else { cols as f64 };
                let scale = if mean { 1.0 / denom } else { 1.0 };
                self.accumulate_with(adj, *x, rows * cols, |dx| {
                    for r in 0..rows {
                        for c in 0..cols {
                            let g = if *axis == 0 { grad[c] } else { grad[r] };
                            dx[r * cols + c] += g * scale;
                        }
                    }
                });
            }

            Op::SumAll(x) | Op::MeanAll(x) => {
                let n = self.value(*x).numel();
                let mean = matches!(node.op, Op::MeanAll(..));
                let g = grad[0] * if mean { 1.0 / n as f64 } else { 1.0 };
                self.accumulate_with(adj, *x, n, |dx| {
                    for v in dx.iter_mut() {
                        *v += g;
                    }
                });
            }

            Op::Softmax(x) => {
                let (rows, cols) = node.value.rows_cols();
                let y = node.value.data();
                self.accumulate_with(adj, *x, rows * cols, |dx| {
                    for r in 0..rows {
                        let y_row = &y[r * cols..(r + 1) * cols];
                        let g_row = &grad[r * cols..(r + 1) * cols];
                        let dot: f64 = y_row.iter().zip(g_row).map(|(&y, &g)| y * g).sum();
                        for c in 0..cols {
                            dx[r * cols + c] += y_row[c] * (g_row[c] - dot);
                        }
                    }
                });
            }

            Op::Concat(parts, axis) => {
                if *axis == 1 {
                    let rows = node.value.rows_cols().0;
                    let total_c = node.value.rows_cols().1;
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.value(p).rows_cols().1;
                        self.accumulate_with(adj, p, rows * c, |dp| {
                            for r in 0..rows {
                                for j in 0..c {
                                    dp[r * c + j] += grad[r * total_c + offset + j];
                                }
                            }
                        });
                        offset += c;
                    }
                } else {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).numel();
                        self.accumulate(adj, p, &grad[offset..offset + n]);
                        offset += n;
                    }
                }
            }

            Op::GatherRows(x, idx) => {
                let (rows, cols) = self.value(*x).rows_cols();
                self.accumulate_with(adj, *x, rows * cols, |dx| {
                    for (r, &src) in idx.iter().enumerate() {
                        for c in 0..cols {
                            dx[src * cols + c] += grad[r * cols + c];
                        }
                    }
                });
            }

            Op::GatherCols(x, idx) => {
                let (rows, cols) = self.value(*x).rows_cols();
                let sel = idx.len();
                self.accumulate_with(adj, *x, rows * cols, |dx| {
                    for r in 0..rows {
                        for (j, &src) in idx.iter().enumerate() {
                            dx[r * cols + src] += grad[r * sel + j];
                        }
                    }
                });
            }

            Op::Mask(x) => {
                let mask = node.aux.as_ref().expect("mask payload");
                let g: Vec<f64> = grad.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                self.accumulate(adj, *x, &g);
            }

            Op::SquaredError(a, b) => {
                let n = self.value(*a).numel();
                let scale = grad[0] * 2.0 / n as f64;
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                let diff: Vec<f64> = ad.iter().zip(bd).map(|(&x, &y)| scale * (x - y)).collect();
                self.accumulate(adj, *a, &diff);
                let neg: Vec<f64> = diff.iter().map(|v| -v).collect();
                self.accumulate(adj, *b, &neg);
            }

            Op::CrossEntropyLogits(logits, targets) => {
                let (rows, cols) = self.value(*logits).rows_cols();
                let data = self.value(*logits).data();
                let scale = grad[0] / rows as f64;
                self.accumulate_with(adj, *logits, rows * cols, |dl| {
                    for (r, &t) in targets.iter().enumerate() {
                        let row = &data[r * cols..(r + 1) * cols];
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
                        for c in 0..cols {
                            let sm = (row[c] - max).exp() / sum;
                            let onehot = if c == t { 1.0 } else { 0.0 };
                            dl[r * cols + c] += scale * (sm - onehot);
                        }
                    }
                });
            }

            Op::Reshape(x) => self.accumulate(adj, *x, grad),
        }
    }
}


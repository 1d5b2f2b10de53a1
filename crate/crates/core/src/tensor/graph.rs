use super::kernels;
use super::params::{Gradients, ParamId, ParamStore};
use super::{log_sum_exp, sigmoid, softmax, Result, Tensor, TensorError};

/// Handle to a node on a [`Graph`]. Only meaningful for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Softmax(Var),
    CrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
    BceWithLogits { logit: Var, target: f64 },
    Sum(Var),
    AddN(Vec<Var>),
    Dot(Var, Var),
    WeightedSum { weights: Var, items: Vec<Var> },
    Row { table: Var, index: usize },
    MeanRows { table: Var, rows: Vec<usize> },
    Detach(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param(_) => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Dot(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::Detach(a) => vec![*a],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::BceWithLogits { logit, .. } => vec![*logit],
            Op::Concat(parts) | Op::AddN(parts) => parts.clone(),
            Op::WeightedSum { weights, items } => {
                let mut v = vec![*weights];
                v.extend(items);
                v
            }
            Op::Row { table, .. } | Op::MeanRows { table, .. } => vec![*table],
        }
    }
}

struct Node {
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Dynamic tape: every op appends a node, so node order is a topological order
/// and a reverse sweep visits each node once. Cycles cannot be expressed.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    record: bool,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            record: true,
        }
    }

    /// A graph that keeps values only; `backward` yields no gradients.
    pub fn inference(params: &'p ParamStore) -> Self {
        Self {
            record: false,
            ..Self::new(params)
        }
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
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite(name));
        }
        let needs_grad = self.record && op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        let op = if needs_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
            needs_grad: self.record,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// `[m×k] · [k×n]`; a rank-1 right operand is treated as a column and the
    /// result is then rank 1.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() > 2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let (m, k) = ta.as_matrix_dims();
        let (k2, n) = tb.as_matrix_dims();
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let data = kernels::matmul(ta.data(), tb.data(), m, k, n);
        let shape = if tb.shape().len() == 1 { vec![m] } else { vec![m, n] };
        self.push(Tensor { shape, data }, Op::MatMul(a, b), "matmul")
    }

    fn zip_with(&mut self, a: Var, b: Var, name: &'static str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor { shape, data }, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    fn map(&mut self, a: Var, name: &'static str, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| f(*x)).collect();
        let shape = ta.shape().to_vec();
        self.push(Tensor { shape, data }, op, name)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.map(a, "scale", Op::Scale(a, factor), |x| x * factor)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map(a, "sigmoid", Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map(a, "tanh", Op::Tanh(a), f64::tanh)
    }

    /// Concatenation along the leading axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(TensorError::Empty("concat"))?;
        let tail = self.shape(first)[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape()[1..] != tail[..] {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: self.shape(first).to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            lead += t.shape()[0];
            data.extend_from_slice(t.data());
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        self.push(Tensor { shape, data }, Op::Concat(parts.to_vec()), "concat")
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "softmax",
                left: t.shape().to_vec(),
                right: vec![],
            });
        }
        let data = softmax(t.data());
        self.push(Tensor::vector(data), Op::Softmax(a), "softmax")
    }

    /// `-log softmax(logits)[target]` as a one-element tensor.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = self.value(logits);
        if target >= t.len() {
            return Err(TensorError::IndexOutOfRange {
                index: target,
                extent: t.len(),
            });
        }
        let lse = log_sum_exp(t.data());
        let loss = lse - t.data()[target];
        let probs = t.data().iter().map(|x| (x - lse).exp()).collect();
        self.push(
            Tensor::scalar(loss.max(0.0)),
            Op::CrossEntropy { logits, target, probs },
            "cross_entropy",
        )
    }

    /// Binary cross-entropy of `sigmoid(logit)` against `target` ∈ [0, 1].
    pub fn bce_with_logits(&mut self, logit: Var, target: f64) -> Result<Var> {
        let x = self.value(logit).item();
        let loss = x.max(0.0) - x * target + (-x.abs()).exp().ln_1p();
        self.push(Tensor::scalar(loss), Op::BceWithLogits { logit, target }, "bce")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), "sum")
    }

    /// Elementwise sum of equally shaped tensors.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(TensorError::Empty("add_n"))?;
        let mut acc = self.value(first).clone();
        for &p in &parts[1..] {
            self.same_shape("add_n", first, p)?;
            kernels::axpy(1.0, self.value(p).data(), acc.data_mut());
        }
        self.push(acc, Op::AddN(parts.to_vec()), "add_n")
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("dot", a, b)?;
        let d = kernels::dot(self.value(a).data(), self.value(b).data());
        self.push(Tensor::scalar(d), Op::Dot(a, b), "dot")
    }

    /// `Σ_k weights[k] · items[k]`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let first = *items.first().ok_or(TensorError::Empty("weighted_sum"))?;
        if self.value(weights).len() != items.len() {
            return Err(TensorError::ShapeMismatch {
                op: "weighted_sum",
                left: self.shape(weights).to_vec(),
                right: vec![items.len()],
            });
        }
        let mut acc = Tensor::zeros(self.shape(first));
        for (k, &item) in items.iter().enumerate() {
            self.same_shape("weighted_sum", first, item)?;
            let w = self.value(weights).data()[k];
            kernels::axpy(w, self.value(item).data(), acc.data_mut());
        }
        self.push(
            acc,
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            "weighted_sum",
        )
    }

    fn check_row(&self, table: Var, index: usize) -> Result<(usize, usize)> {
        let t = self.value(table);
        if t.shape().len() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "row",
                left: t.shape().to_vec(),
                right: vec![],
            });
        }
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        if index >= rows {
            return Err(TensorError::IndexOutOfRange { index, extent: rows });
        }
        Ok((rows, cols))
    }

    /// Row `index` of a matrix (embedding lookup).
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var> {
        let (_, cols) = self.check_row(table, index)?;
        let data = self.value(table).data()[index * cols..(index + 1) * cols].to_vec();
        self.push(Tensor::vector(data), Op::Row { table, index }, "row")
    }

    /// Mean of the selected rows of a matrix.
    pub fn mean_rows(&mut self, table: Var, rows: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Err(TensorError::Empty("mean_rows"));
        }
        let mut cols = 0;
        for &r in rows {
            cols = self.check_row(table, r)?.1;
        }
        let mut acc = vec![0.0; cols];
        let scale = 1.0 / rows.len() as f64;
        let data = self.value(table).data();
        for &r in rows {
            kernels::axpy(scale, &data[r * cols..(r + 1) * cols], &mut acc);
        }
        self.push(
            Tensor::vector(acc),
            Op::MeanRows {
                table,
                rows: rows.to_vec(),
            },
            "mean_rows",
        )
    }

    /// Identity in the forward pass. [`Graph::backward`] passes gradients
    /// through it; [`Graph::backward_split`] treats it as a cut point.
    pub fn detach(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).clone();
        self.push(value, Op::Detach(a), "detach")
    }

    /// Gradients of a scalar `loss` with respect to every reachable parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check_scalar(loss)?;
        let mut grads = Gradients::new(self.params.len());
        self.propagate(vec![(loss, vec![1.0])], true, &mut grads);
        Ok(grads)
    }

    /// Two-stage backward through detach cut points.
    ///
    /// Returns `(above, below)`: `above` holds gradients flowing from the loss
    /// with every detached value held constant; `below` holds gradients flowing
    /// from the detached values into the subgraph that produced them.
    /// `above + below` equals [`Graph::backward`].
    pub fn backward_split(&self, loss: Var) -> Result<(Gradients, Gradients)> {
        self.check_scalar(loss)?;
        let mut above = Gradients::new(self.params.len());
        let node_grads = self.propagate(vec![(loss, vec![1.0])], false, &mut above);
        let seeds: Vec<(Var, Vec<f64>)> = self
            .nodes
            .iter()
            .zip(node_grads)
            .filter_map(|(node, g)| match (&node.op, g) {
                (Op::Detach(src), Some(g)) => Some((*src, g)),
                _ => None,
            })
            .collect();
        let mut below = Gradients::new(self.params.len());
        if !seeds.is_empty() {
            self.propagate(seeds, false, &mut below);
        }
        Ok((above, below))
    }

    fn check_scalar(&self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(shape.to_vec()));
        }
        Ok(())
    }

    fn propagate(&self, seeds: Vec<(Var, Vec<f64>)>, through_detach: bool, out: &mut Gradients) -> Vec<Option<Vec<f64>>> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut top = 0;
        for (v, g) in seeds {
            top = top.max(v.0 + 1);
            if !self.nodes[v.0].needs_grad {
                continue;
            }
            match &mut grads[v.0] {
                Some(existing) => kernels::axpy(1.0, &g, existing),
                slot => *slot = Some(g),
            }
        }
        for i in (0..top).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.backward_node(node, &g, through_detach, &mut grads, out);
            grads[i] = Some(g);
        }
        grads
    }

    fn backward_node(
        &self,
        node: &Node,
        g: &[f64],
        through_detach: bool,
        grads: &mut [Option<Vec<f64>>],
        out: &mut Gradients,
    ) {
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        macro_rules! buf {
            ($v:expr) => {
                self.grad_buf(grads, $v)
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => {
                let len = g.len();
                kernels::axpy(1.0, g, out.slot(*id, len));
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = ta.as_matrix_dims();
                let (_, n) = tb.as_matrix_dims();
                if needs(*a) {
                    kernels::matmul_grad_left(g, tb.data(), buf!(*a), m, k, n);
                }
                if needs(*b) {
                    kernels::matmul_grad_right(ta.data(), g, buf!(*b), m, k, n);
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    kernels::axpy(1.0, g, buf!(*a));
                }
                if needs(*b) {
                    kernels::axpy(1.0, g, buf!(*b));
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    kernels::axpy(1.0, g, buf!(*a));
                }
                if needs(*b) {
                    kernels::axpy(-1.0, g, buf!(*b));
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    let tb = self.value(*b).data();
                    for ((ga, gi), bi) in buf!(*a).iter_mut().zip(g).zip(tb) {
                        *ga += gi * bi;
                    }
                }
                if needs(*b) {
                    let ta = self.value(*a).data();
                    for ((gb, gi), ai) in buf!(*b).iter_mut().zip(g).zip(ta) {
                        *gb += gi * ai;
                    }
                }
            }
            Op::Scale(a, c) => kernels::axpy(*c, g, buf!(*a)),
            Op::Sigmoid(a) => {
                let y = self.node_value(node).data();
                for ((ga, gi), yi) in buf!(*a).iter_mut().zip(g).zip(y) {
                    *ga += gi * yi * (1.0 - yi);
                }
            }
            Op::Tanh(a) => {
                let y = self.node_value(node).data();
                for ((ga, gi), yi) in buf!(*a).iter_mut().zip(g).zip(y) {
                    *ga += gi * (1.0 - yi * yi);
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if needs(p) {
                        kernels::axpy(1.0, &g[offset..offset + len], buf!(p));
                    }
                    offset += len;
                }
            }
            Op::Softmax(a) => {
                let y = self.node_value(node).data();
                let inner = kernels::dot(g, y);
                for ((ga, gi), yi) in buf!(*a).iter_mut().zip(g).zip(y) {
                    *ga += yi * (gi - inner);
                }
            }
            Op::CrossEntropy { logits, target, probs } => {
                let ga = buf!(*logits);
                kernels::axpy(g[0], probs, ga);
                ga[*target] -= g[0];
            }
            Op::BceWithLogits { logit, target } => {
                let x = self.value(*logit).item();
                buf!(*logit)[0] += g[0] * (sigmoid(x) - target);
            }
            Op::Sum(a) => buf!(*a).iter_mut().for_each(|v| *v += g[0]),
            Op::AddN(parts) => {
                for &p in parts {
                    if needs(p) {
                        kernels::axpy(1.0, g, buf!(p));
                    }
                }
            }
            Op::Dot(a, b) => {
                if needs(*a) {
                    kernels::axpy(g[0], self.value(*b).data(), buf!(*a));
                }
                if needs(*b) {
                    kernels::axpy(g[0], self.value(*a).data(), buf!(*b));
                }
            }
            Op::WeightedSum { weights, items } => {
                let w = self.value(*weights).data().to_vec();
                if needs(*weights) {
                    let gw: Vec<f64> = items.iter().map(|&it| kernels::dot(g, self.value(it).data())).collect();
                    kernels::axpy(1.0, &gw, buf!(*weights));
                }
                for (k, &it) in items.iter().enumerate() {
                    if needs(it) {
                        kernels::axpy(w[k], g, buf!(it));
                    }
                }
            }
            Op::Row { table, index } => {
                let cols = g.len();
                let gt = buf!(*table);
                kernels::axpy(1.0, g, &mut gt[index * cols..(index + 1) * cols]);
            }
            Op::MeanRows { table, rows } => {
                let cols = g.len();
                let scale = 1.0 / rows.len() as f64;
                let gt = buf!(*table);
                for &r in rows {
                    kernels::axpy(scale, g, &mut gt[r * cols..(r + 1) * cols]);
                }
            }
            Op::Detach(a) => {
                if through_detach {
                    kernels::axpy(1.0, g, buf!(*a));
                }
            }
        }
    }

    fn grad_buf<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut Vec<f64> {
        let len = self.value(v).len();
        grads[v.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn node_value<'a>(&'a self, node: &'a Node) -> &'a Tensor {
        match &node.value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ParamGroup;

    fn store_with(name: &str, t: Tensor) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.insert(name, ParamGroup::Lookahead, t).unwrap();
        (s, id)
    }

    #[test]
    fn identity_matmul() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let i2 = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let m = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let p = g.matmul(i2, m).unwrap();
        assert_eq!(g.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.shape(p), &[2, 2]);
    }

    #[test]
    fn row_times_column() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let a = g.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
        let b = g.constant(Tensor::matrix(2, 1, vec![0.0, 5.0]).unwrap());
        let p = g.matmul(a, b).unwrap();
        assert_eq!(g.value(p).data(), &[0.0]);
        assert_eq!(g.shape(p), &[1, 1]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(g.matmul(a, b), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let (s, id) = store_with("p", Tensor::new(vec![2, 3], (0..6).map(f64::from).collect()).unwrap());
        let mut g = Graph::new(&s);
        let p = g.param(id);
        let l = g.sum(p).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(id).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn sigmoid_of_dot_at_zero() {
        let (s, id) = store_with("w", Tensor::vector(vec![0.0; 3]));
        let mut g = Graph::new(&s);
        let w = g.param(id);
        let x = g.constant(Tensor::vector(vec![1.0, -2.0, 4.0]));
        let d = g.dot(w, x).unwrap();
        let l = g.sigmoid(d).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(id).unwrap(), &[0.25, -0.5, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let (s, id) = store_with("w", Tensor::vector(vec![0.0; 3]));
        let mut g = Graph::new(&s);
        let w = g.param(id);
        let y = g.tanh(w).unwrap();
        assert!(matches!(g.backward(y), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn cross_entropy_checks_target() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let l = g.constant(Tensor::vector(vec![0.0; 4]));
        assert!(g.cross_entropy(l, 4).is_err());
        let ce = g.cross_entropy(l, 2).unwrap();
        assert!((g.value(ce).item() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_an_error() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let a = g.constant(Tensor::vector(vec![f64::MAX]));
        assert!(matches!(g.scale(a, 10.0), Err(TensorError::NonFinite("scale"))));
    }

    #[test]
    fn split_backward_sums_to_full() {
        let (s, id) = store_with("w", Tensor::vector(vec![0.3, -0.2]));
        let mut g = Graph::new(&s);
        let w = g.param(id);
        let h = g.tanh(w).unwrap();
        let d = g.detach(h).unwrap();
        let y = g.mul(d, w).unwrap();
        let l = g.sum(y).unwrap();
        let full = g.backward(l).unwrap();
        let (above, below) = g.backward_split(l).unwrap();
        // above: d(sum(c * w))/dw = c = tanh(w)
        let tw: Vec<f64> = [0.3f64, -0.2].iter().map(|v| v.tanh()).collect();
        assert_eq!(above.get(id).unwrap(), tw.as_slice());
        for i in 0..2 {
            let total = above.get(id).unwrap()[i] + below.get(id).unwrap()[i];
            assert!((total - full.get(id).unwrap()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn inference_graph_has_no_gradients() {
        let (s, id) = store_with("w", Tensor::vector(vec![1.0]));
        let mut g = Graph::inference(&s);
        let w = g.param(id);
        let l = g.sum(w).unwrap();
        let grads = g.backward(l).unwrap();
        assert!(grads.get(id).is_none());
    }
}

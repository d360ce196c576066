use crate::ops::{gemm, sigmoid, transpose};
use crate::tape::{Node, Op};
use crate::{AutodiffError, Result, Tape, Tensor};

/// Gradients of a scalar loss with respect to every node that requires one.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `None` when the node does not depend on any trainable leaf or is not
    /// upstream of the loss.
    pub fn get(&self, t: Tensor<'_>) -> Option<&[f64]> {
        self.grads.get(t.id).and_then(|g| g.as_deref())
    }

    /// Like [`Gradients::get`] but zero-filled for unreachable nodes.
    pub fn get_or_zero(&self, t: Tensor<'_>) -> Vec<f64> {
        self.get(t).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()])
    }
}

fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node], id: usize) -> Option<&'a mut Vec<f64>> {
    if !nodes[id].requires_grad {
        return None;
    }
    Some(grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.len()]))
}

impl Tape {
    /// Reverse sweep from `loss`, which must hold exactly one element.
    pub fn backward(&self, loss: Tensor<'_>) -> Result<Gradients> {
        assert!(std::ptr::eq(self, loss.tape), "loss belongs to another tape");
        let nodes = self.nodes();
        let shape = nodes[loss.id].shape;
        if shape.numel() != 1 {
            return Err(AutodiffError::NotScalarLoss(shape));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        if nodes[loss.id].requires_grad {
            grads[loss.id] = Some(vec![1.0]);
        }
        for i in (0..=loss.id).rev() {
            let Some(g) = grads[i].take() else { continue };
            propagate(&nodes, &mut grads, i, &g);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn propagate(nodes: &[Node], grads: &mut [Option<Vec<f64>>], i: usize, g: &[f64]) {
    let node = &nodes[i];
    let y = &node.value;
    macro_rules! each {
        ($x:expr, |$k:ident| $d:expr) => {
            if let Some(dx) = acc(grads, nodes, $x) {
                for $k in 0..g.len() {
                    dx[$k] += $d;
                }
            }
        };
    }
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            each!(*a, |k| g[k]);
            each!(*b, |k| g[k]);
        }
        Op::Sub(a, b) => {
            each!(*a, |k| g[k]);
            each!(*b, |k| -g[k]);
        }
        Op::Mul(a, b) => {
            let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
            each!(*a, |k| g[k] * vb[k]);
            each!(*b, |k| g[k] * va[k]);
        }
        Op::Div(a, b) => {
            let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
            each!(*a, |k| g[k] / vb[k]);
            each!(*b, |k| -g[k] * va[k] / (vb[k] * vb[k]));
        }
        Op::Minimum(a, b) => {
            let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
            each!(*a, |k| if va[k] <= vb[k] { g[k] } else { 0.0 });
            each!(*b, |k| if va[k] <= vb[k] { 0.0 } else { g[k] });
        }
        Op::AddBias(x, b) => {
            each!(*x, |k| g[k]);
            if let Some(db) = acc(grads, nodes, *b) {
                let d = db.len();
                for (k, gk) in g.iter().enumerate() {
                    db[k % d] += gk;
                }
            }
        }
        Op::Scale(x, c) => each!(*x, |k| c * g[k]),
        Op::AddScalar(x) => each!(*x, |k| g[k]),
        Op::Tanh(x) => each!(*x, |k| g[k] * (1.0 - y[k] * y[k])),
        Op::Sigmoid(x) => each!(*x, |k| g[k] * y[k] * (1.0 - y[k])),
        Op::Relu(x) => {
            let vx = &nodes[*x].value;
            each!(*x, |k| if vx[k] > 0.0 { g[k] } else { 0.0 })
        }
        Op::Exp(x) => each!(*x, |k| g[k] * y[k]),
        Op::Log(x) => {
            let vx = &nodes[*x].value;
            each!(*x, |k| g[k] / vx[k])
        }
        Op::Softplus(x) => {
            let vx = &nodes[*x].value;
            each!(*x, |k| g[k] * sigmoid(vx[k]))
        }
        Op::Square(x) => {
            let vx = &nodes[*x].value;
            each!(*x, |k| 2.0 * g[k] * vx[k])
        }
        Op::MatMul(a, b) => {
            let (na, nb) = (&nodes[*a], &nodes[*b]);
            let (m, k) = (na.shape.dims()[0], na.shape.dims()[1]);
            let n = nb.shape.dims()[1];
            let (va, vb) = (&na.value, &nb.value);
            if let Some(da) = acc(grads, nodes, *a) {
                // dA += dC · Bᵀ
                gemm(m, n, k, g, (n, 1), vb, (1, n), da, 1.0);
            }
            if let Some(db) = acc(grads, nodes, *b) {
                // dB += Aᵀ · dC
                gemm(k, m, n, va, (1, k), g, (n, 1), db, 1.0);
            }
        }
        Op::Softmax(x, axis) => {
            let (outer, n, inner) = node.shape.split(*axis);
            if let Some(dx) = acc(grads, nodes, *x) {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * n + j) * inner + i;
                        let dot: f64 = (0..n).map(|j| g[at(j)] * y[at(j)]).sum();
                        for j in 0..n {
                            dx[at(j)] += y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
            }
        }
        Op::LogSoftmax(x, axis) => {
            let (outer, n, inner) = node.shape.split(*axis);
            if let Some(dx) = acc(grads, nodes, *x) {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * n + j) * inner + i;
                        let total: f64 = (0..n).map(|j| g[at(j)]).sum();
                        for j in 0..n {
                            dx[at(j)] += g[at(j)] - y[at(j)].exp() * total;
                        }
                    }
                }
            }
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            rstd,
        } => {
            let d = node.shape.last();
            let rows = rstd.len();
            let gv = &nodes[*gain].value;
            if let Some(dx) = acc(grads, nodes, *x) {
                for r in 0..rows {
                    let s = r * d;
                    let mut m1 = 0.0;
                    let mut m2 = 0.0;
                    for j in 0..d {
                        let dh = g[s + j] * gv[j];
                        m1 += dh;
                        m2 += dh * xhat[s + j];
                    }
                    m1 /= d as f64;
                    m2 /= d as f64;
                    for j in 0..d {
                        let dh = g[s + j] * gv[j];
                        dx[s + j] += rstd[r] * (dh - m1 - xhat[s + j] * m2);
                    }
                }
            }
            if let Some(dg) = acc(grads, nodes, *gain) {
                for (k, gk) in g.iter().enumerate() {
                    dg[k % d] += gk * xhat[k];
                }
            }
            if let Some(db) = acc(grads, nodes, *bias) {
                for (k, gk) in g.iter().enumerate() {
                    db[k % d] += gk;
                }
            }
        }
        Op::Concat(parts, axis) => {
            let (outer, n, inner) = node.shape.split(*axis);
            let mut offset = 0;
            for &p in parts {
                let np = nodes[p].shape.dims()[*axis];
                if let Some(dp) = acc(grads, nodes, p) {
                    for o in 0..outer {
                        let src = (o * n + offset) * inner;
                        let dst = o * np * inner;
                        for t in 0..np * inner {
                            dp[dst + t] += g[src + t];
                        }
                    }
                }
                offset += np;
            }
        }
        Op::Slice { x, axis, start } => {
            let src_shape = nodes[*x].shape;
            let (outer, n, inner) = src_shape.split(*axis);
            let len = node.shape.dims()[*axis];
            if let Some(dx) = acc(grads, nodes, *x) {
                for o in 0..outer {
                    let base = o * n * inner + start * inner;
                    let gbase = o * len * inner;
                    for t in 0..len * inner {
                        dx[base + t] += g[gbase + t];
                    }
                }
            }
        }
        Op::GatherRows(x, rows) => {
            let row = node.shape.numel() / rows.len().max(1);
            if let Some(dx) = acc(grads, nodes, *x) {
                for (k, &r) in rows.iter().enumerate() {
                    for t in 0..row {
                        dx[r * row + t] += g[k * row + t];
                    }
                }
            }
        }
        Op::Sum(x, axis) | Op::Mean(x, axis) => {
            let (outer, n, inner) = nodes[*x].shape.split(*axis);
            let c = if matches!(node.op, Op::Mean(..)) {
                1.0 / n as f64
            } else {
                1.0
            };
            if let Some(dx) = acc(grads, nodes, *x) {
                for o in 0..outer {
                    for j in 0..n {
                        for i in 0..inner {
                            dx[(o * n + j) * inner + i] += c * g[o * inner + i];
                        }
                    }
                }
            }
        }
        Op::SumAll(x) => {
            if let Some(dx) = acc(grads, nodes, *x) {
                dx.iter_mut().for_each(|v| *v += g[0]);
            }
        }
        Op::MeanAll(x) => {
            if let Some(dx) = acc(grads, nodes, *x) {
                let c = g[0] / dx.len().max(1) as f64;
                dx.iter_mut().for_each(|v| *v += c);
            }
        }
        Op::Reshape(x) => each!(*x, |k| g[k]),
        Op::Transpose(x) => {
            let (r, c) = (node.shape.dims()[0], node.shape.dims()[1]);
            let gt = transpose(g, r, c);
            if let Some(dx) = acc(grads, nodes, *x) {
                for (d, v) in dx.iter_mut().zip(gt) {
                    *d += v;
                }
            }
        }
    }
}

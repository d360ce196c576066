//! Forward operations. Every op records a node whose backward rule lives
//! in `backward.rs`.

use crate::tape::{NodeId, Op};
use crate::{AutodiffError, Result, Shape, Tensor};

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
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

/// `c = a · b` for row-major `a: m×k` and `b: k×n` given explicit strides,
/// so transposed operands need no copy. `c` is accumulated into when
/// `beta == 1`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        if beta == 0.0 {
            c[..m * n].iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    assert!(a.len() > (m - 1) * a_strides.0 + (k - 1) * a_strides.1);
    assert!(b.len() > (k - 1) * b_strides.0 + (n - 1) * b_strides.1);
    // SAFETY: bounds of all three operands were asserted above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl<'t> Tensor<'t> {
    fn same_tape(&self, other: &Tensor<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "tensors belong to different tapes");
    }

    fn unary(self, op: Op, f: impl Fn(f64) -> f64) -> Tensor<'t> {
        let (value, shape, rg) = {
            let nodes = self.tape.nodes();
            let n = &nodes[self.id];
            (n.value.iter().map(|&x| f(x)).collect(), n.shape, n.requires_grad)
        };
        let id = self.tape.push(value, shape, op, rg);
        Tensor { tape: self.tape, id }
    }

    fn binary(
        self,
        other: Tensor<'t>,
        name: &'static str,
        op: fn(NodeId, NodeId) -> Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor<'t>> {
        self.same_tape(&other);
        let (value, shape, rg) = {
            let nodes = self.tape.nodes();
            let (a, b) = (&nodes[self.id], &nodes[other.id]);
            if a.shape != b.shape {
                return Err(AutodiffError::ShapeMismatch {
                    op: name,
                    left: a.shape,
                    right: b.shape,
                });
            }
            let v = a.value.iter().zip(&b.value).map(|(&x, &y)| f(x, y)).collect();
            (v, a.shape, a.requires_grad || b.requires_grad)
        };
        let id = self.tape.push(value, shape, op(self.id, other.id), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    pub fn add(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "add", Op::Add, |a, b| a + b)
    }

    pub fn sub(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "sub", Op::Sub, |a, b| a - b)
    }

    pub fn mul(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "mul", Op::Mul, |a, b| a * b)
    }

    pub fn div(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "div", Op::Div, |a, b| a / b)
    }

    /// Elementwise minimum; ties route the gradient to `self`.
    pub fn minimum(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "minimum", Op::Minimum, f64::min)
    }

    /// `x + b` with rank-1 `b` broadcast over the last axis.
    pub fn add_bias(self, bias: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&bias);
        let (value, shape, rg) = {
            let nodes = self.tape.nodes();
            let (x, b) = (&nodes[self.id], &nodes[bias.id]);
            if b.shape.rank() != 1 || b.shape.numel() != x.shape.last() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "add_bias",
                    left: x.shape,
                    right: b.shape,
                });
            }
            let d = b.value.len();
            let v = x.value.iter().enumerate().map(|(i, &v)| v + b.value[i % d]).collect();
            (v, x.shape, x.requires_grad || b.requires_grad)
        };
        let id = self.tape.push(value, shape, Op::AddBias(self.id, bias.id), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    pub fn scale(self, c: f64) -> Tensor<'t> {
        self.unary(Op::Scale(self.id, c), |x| c * x)
    }

    pub fn add_scalar(self, c: f64) -> Tensor<'t> {
        self.unary(Op::AddScalar(self.id), |x| x + c)
    }

    pub fn neg(self) -> Tensor<'t> {
        self.scale(-1.0)
    }

    pub fn tanh(self) -> Tensor<'t> {
        self.unary(Op::Tanh(self.id), f64::tanh)
    }

    pub fn sigmoid(self) -> Tensor<'t> {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    pub fn relu(self) -> Tensor<'t> {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn exp(self) -> Tensor<'t> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    pub fn log(self) -> Tensor<'t> {
        self.unary(Op::Log(self.id), f64::ln)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(self) -> Tensor<'t> {
        self.unary(Op::Softplus(self.id), softplus)
    }

    pub fn square(self) -> Tensor<'t> {
        self.unary(Op::Square(self.id), |x| x * x)
    }

    /// Rank-2 matrix product.
    pub fn matmul(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.same_tape(&other);
        let (value, shape, rg) = {
            let nodes = self.tape.nodes();
            let (a, b) = (&nodes[self.id], &nodes[other.id]);
            if a.shape.rank() != 2 || b.shape.rank() != 2 || a.shape.dims()[1] != b.shape.dims()[0] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "matmul",
                    left: a.shape,
                    right: b.shape,
                });
            }
            let (m, k, n) = (a.shape.dims()[0], a.shape.dims()[1], b.shape.dims()[1]);
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, &a.value, (k, 1), &b.value, (n, 1), &mut c, 0.0);
            (c, Shape::new(&[m, n]), a.requires_grad || b.requires_grad)
        };
        let id = self.tape.push(value, shape, Op::MatMul(self.id, other.id), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    fn check_axis(&self, name: &'static str, axis: usize) -> Result<Shape> {
        let shape = self.shape();
        if axis >= shape.rank() {
            return Err(AutodiffError::InvalidArgument {
                op: name,
                reason: format!("axis {axis} out of range for shape {shape}"),
            });
        }
        Ok(shape)
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(self, axis: usize) -> Result<Tensor<'t>> {
        let shape = self.check_axis("softmax", axis)?;
        let value = self.with_value(|x| softmax_along(x, shape, axis, false));
        let rg = self.requires_grad();
        let id = self.tape.push(value, shape, Op::Softmax(self.id, axis), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    pub fn log_softmax(self, axis: usize) -> Result<Tensor<'t>> {
        let shape = self.check_axis("log_softmax", axis)?;
        let value = self.with_value(|x| softmax_along(x, shape, axis, true));
        let rg = self.requires_grad();
        let id = self.tape.push(value, shape, Op::LogSoftmax(self.id, axis), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    /// Normalizes the last axis to zero mean and unit variance, then applies
    /// the rank-1 `gain` and `bias`.
    pub fn layernorm(self, gain: Tensor<'t>, bias: Tensor<'t>, eps: f64) -> Result<Tensor<'t>> {
        if eps <= 0.0 {
            return Err(AutodiffError::InvalidArgument {
                op: "layernorm",
                reason: format!("eps must be positive, got {eps}"),
            });
        }
        self.same_tape(&gain);
        self.same_tape(&bias);
        let (value, shape, xhat, rstd, rg) = {
            let nodes = self.tape.nodes();
            let (x, g, b) = (&nodes[self.id], &nodes[gain.id], &nodes[bias.id]);
            let d = x.shape.last();
            for p in [g, b] {
                if p.shape.rank() != 1 || p.shape.numel() != d {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "layernorm",
                        left: x.shape,
                        right: p.shape,
                    });
                }
            }
            let rows = x.shape.numel() / d.max(1);
            let mut xhat = vec![0.0; x.value.len()];
            let mut rstd = vec![0.0; rows];
            let mut out = vec![0.0; x.value.len()];
            for r in 0..rows {
                let row = &x.value[r * d..(r + 1) * d];
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let s = 1.0 / (var + eps).sqrt();
                rstd[r] = s;
                for j in 0..d {
                    let h = (row[j] - mean) * s;
                    xhat[r * d + j] = h;
                    out[r * d + j] = h * g.value[j] + b.value[j];
                }
            }
            let rg = x.requires_grad || g.requires_grad || b.requires_grad;
            (out, x.shape, xhat, rstd, rg)
        };
        let op = Op::LayerNorm {
            x: self.id,
            gain: gain.id,
            bias: bias.id,
            xhat,
            rstd,
        };
        let id = self.tape.push(value, shape, op, rg);
        Ok(Tensor { tape: self.tape, id })
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[Tensor<'t>], axis: usize) -> Result<Tensor<'t>> {
        let first = parts.first().ok_or(AutodiffError::InvalidArgument {
            op: "concat",
            reason: "no inputs".into(),
        })?;
        let tape = first.tape;
        let base = first.check_axis("concat", axis)?;
        let (value, shape, rg) = {
            let nodes = tape.nodes();
            let mut total = 0;
            let mut rg = false;
            for p in parts {
                first.same_tape(p);
                let s = nodes[p.id].shape;
                if s.rank() != base.rank() || (0..base.rank()).any(|a| a != axis && s.dims()[a] != base.dims()[a]) {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "concat",
                        left: base,
                        right: s,
                    });
                }
                total += s.dims()[axis];
                rg |= nodes[p.id].requires_grad;
            }
            let shape = base.with_dim(axis, total);
            let (outer, _, inner) = shape.split(axis);
            let mut out = Vec::with_capacity(shape.numel());
            for o in 0..outer {
                for p in parts {
                    let n = &nodes[p.id];
                    let chunk = n.shape.dims()[axis] * inner;
                    out.extend_from_slice(&n.value[o * chunk..(o + 1) * chunk]);
                }
            }
            (out, shape, rg)
        };
        let ids = parts.iter().map(|p| p.id).collect();
        let id = tape.push(value, shape, Op::Concat(ids, axis), rg);
        Ok(Tensor { tape, id })
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Tensor<'t>> {
        let shape = self.check_axis("slice", axis)?;
        let n = shape.dims()[axis];
        if start + len > n {
            return Err(AutodiffError::InvalidArgument {
                op: "slice",
                reason: format!("range {start}..{} exceeds axis length {n}", start + len),
            });
        }
        let out_shape = shape.with_dim(axis, len);
        let (outer, _, inner) = shape.split(axis);
        let value = self.with_value(|x| {
            let mut out = Vec::with_capacity(out_shape.numel());
            for o in 0..outer {
                let base = o * n * inner + start * inner;
                out.extend_from_slice(&x[base..base + len * inner]);
            }
            out
        });
        let rg = self.requires_grad();
        let op = Op::Slice {
            x: self.id,
            axis,
            start,
        };
        let id = self.tape.push(value, out_shape, op, rg);
        Ok(Tensor { tape: self.tape, id })
    }

    /// Selects entries of axis 0 (rows), repeats allowed.
    pub fn gather_rows(self, rows: &[usize]) -> Result<Tensor<'t>> {
        let shape = self.check_axis("gather_rows", 0)?;
        let n = shape.dims()[0];
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(AutodiffError::InvalidArgument {
                op: "gather_rows",
                reason: format!("row {bad} out of range for {n} rows"),
            });
        }
        let row = shape.numel() / n.max(1);
        let value = self.with_value(|x| {
            let mut out = Vec::with_capacity(rows.len() * row);
            for &r in rows {
                out.extend_from_slice(&x[r * row..(r + 1) * row]);
            }
            out
        });
        let out_shape = shape.with_dim(0, rows.len());
        let rg = self.requires_grad();
        let id = self
            .tape
            .push(value, out_shape, Op::GatherRows(self.id, rows.to_vec()), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    fn reduce(self, name: &'static str, axis: usize, mean: bool) -> Result<Tensor<'t>> {
        let shape = self.check_axis(name, axis)?;
        let (outer, n, inner) = shape.split(axis);
        let value = self.with_value(|x| {
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for j in 0..n {
                    for i in 0..inner {
                        out[o * inner + i] += x[(o * n + j) * inner + i];
                    }
                }
            }
            if mean {
                out.iter_mut().for_each(|v| *v /= n as f64);
            }
            out
        });
        let rg = self.requires_grad();
        let op = if mean {
            Op::Mean(self.id, axis)
        } else {
            Op::Sum(self.id, axis)
        };
        let id = self.tape.push(value, shape.without(axis), op, rg);
        Ok(Tensor { tape: self.tape, id })
    }

    pub fn sum(self, axis: usize) -> Result<Tensor<'t>> {
        self.reduce("sum", axis, false)
    }

    pub fn mean(self, axis: usize) -> Result<Tensor<'t>> {
        self.reduce("mean", axis, true)
    }

    pub fn sum_all(self) -> Tensor<'t> {
        let v = self.with_value(|x| x.iter().sum::<f64>());
        let rg = self.requires_grad();
        let id = self.tape.push(vec![v], Shape::scalar(), Op::SumAll(self.id), rg);
        Tensor { tape: self.tape, id }
    }

    pub fn mean_all(self) -> Tensor<'t> {
        let v = self.with_value(|x| x.iter().sum::<f64>() / x.len().max(1) as f64);
        let rg = self.requires_grad();
        let id = self.tape.push(vec![v], Shape::scalar(), Op::MeanAll(self.id), rg);
        Tensor { tape: self.tape, id }
    }

    pub fn reshape(self, dims: &[usize]) -> Result<Tensor<'t>> {
        let shape = self.shape();
        let target = Shape::new(dims);
        if target.numel() != shape.numel() {
            return Err(AutodiffError::ShapeMismatch {
                op: "reshape",
                left: shape,
                right: target,
            });
        }
        let value = self.value();
        let rg = self.requires_grad();
        let id = self.tape.push(value, target, Op::Reshape(self.id), rg);
        Ok(Tensor { tape: self.tape, id })
    }

    /// Rank-2 transpose.
    pub fn transpose(self) -> Result<Tensor<'t>> {
        let shape = self.shape();
        if shape.rank() != 2 {
            return Err(AutodiffError::InvalidArgument {
                op: "transpose",
                reason: format!("expected rank 2, got {shape}"),
            });
        }
        let (r, c) = (shape.dims()[0], shape.dims()[1]);
        let value = self.with_value(|x| transpose(x, r, c));
        let rg = self.requires_grad();
        let id = self.tape.push(value, Shape::new(&[c, r]), Op::Transpose(self.id), rg);
        Ok(Tensor { tape: self.tape, id })
    }
}

pub(crate) fn transpose(x: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = x[i * c + j];
        }
    }
    out
}

pub(crate) fn softmax_along(x: &[f64], shape: Shape, axis: usize, log: bool) -> Vec<f64> {
    let (outer, n, inner) = shape.split(axis);
    let mut out = vec![0.0; x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let max = (0..n).map(|j| x[at(j)]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..n).map(|j| (x[at(j)] - max).exp()).sum();
            for j in 0..n {
                out[at(j)] = if log {
                    x[at(j)] - max - z.ln()
                } else {
                    (x[at(j)] - max).exp() / z
                };
            }
        }
    }
    out
}

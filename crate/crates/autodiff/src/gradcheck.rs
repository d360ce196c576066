//! Central finite differences, used as an independent oracle for the
//! backward rules.

use crate::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-4,
            abs_floor: 1e-7,
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, analytic: f64, numeric: f64) -> bool {
        let diff = (analytic - numeric).abs();
        diff <= self.abs_floor || diff <= self.rel * analytic.abs().max(numeric.abs())
    }
}

/// Central-difference derivative of `f` along each coordinate of `x`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference derivative of `loss` with respect to the listed
/// elements of parameter `id`.
pub fn store_difference(
    store: &ParamStore,
    id: ParamId,
    elements: &[usize],
    h: f64,
    mut loss: impl FnMut(&ParamStore) -> f64,
) -> Vec<f64> {
    let mut probe = store.clone();
    elements
        .iter()
        .map(|&k| {
            let x = store.value(id)[k];
            probe.value_mut(id)[k] = x + h;
            let up = loss(&probe);
            probe.value_mut(id)[k] = x - h;
            let down = loss(&probe);
            probe.value_mut(id)[k] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Mismatch {
    pub label: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}[{}]: analytic {:.12e} vs numeric {:.12e}",
            self.label, self.index, self.analytic, self.numeric
        )
    }
}

pub fn compare(label: &str, analytic: &[f64], numeric: &[f64], tol: Tolerance) -> std::result::Result<(), Mismatch> {
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        if !tol.accepts(a, n) {
            return Err(Mismatch {
                label: label.to_string(),
                index: i,
                analytic: a,
                numeric: n,
            });
        }
    }
    Ok(())
}

/// SplitMix64.
struct Mix(u64);

impl Mix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn dim(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next() % (hi - lo + 1) as u64) as usize
    }

    fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.range(lo, hi)).collect()
    }

    /// Values bounded away from zero, either sign.
    fn away_from_zero(&mut self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let m = self.range(0.05, 2.0);
                if self.unit() < 0.5 {
                    -m
                } else {
                    m
                }
            })
            .collect()
    }
}

type Build = Box<dyn for<'t> Fn(&[crate::Tensor<'t>]) -> crate::Tensor<'t>>;

struct Case {
    inputs: Vec<(Vec<f64>, Vec<usize>)>,
    build: Build,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub op: &'static str,
    pub instances: usize,
    pub checked: usize,
    pub max_rel_err: f64,
    pub failure: Option<Mismatch>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

pub const PRIMITIVES: &[&str] = &[
    "matmul",
    "add",
    "sub",
    "mul",
    "div",
    "minimum",
    "add_bias",
    "scale",
    "add_scalar",
    "tanh",
    "sigmoid",
    "relu",
    "exp",
    "log",
    "softplus",
    "square",
    "softmax",
    "log_softmax",
    "layernorm",
    "concat",
    "slice",
    "gather_rows",
    "sum",
    "mean",
    "sum_all",
    "mean_all",
    "reshape",
    "transpose",
];

fn make_case(op: &str, rng: &mut Mix) -> Case {
    let r = rng.dim(1, 4);
    let c = rng.dim(1, 5);
    let m2 = |rng: &mut Mix| (rng.vec(r * c, -2.0, 2.0), vec![r, c]);
    let unary = |f: fn(crate::Tensor<'_>) -> crate::Tensor<'_>, v: Vec<f64>| Case {
        inputs: vec![(v, vec![r, c])],
        build: Box::new(move |x| f(x[0])),
    };
    match op {
        "matmul" => {
            let k = rng.dim(1, 5);
            Case {
                inputs: vec![
                    (rng.vec(r * k, -2.0, 2.0), vec![r, k]),
                    (rng.vec(k * c, -2.0, 2.0), vec![k, c]),
                ],
                build: Box::new(|x| x[0].matmul(x[1]).unwrap()),
            }
        }
        "add" | "sub" | "mul" => {
            let name = op.to_string();
            Case {
                inputs: vec![m2(rng), m2(rng)],
                build: Box::new(move |x| match name.as_str() {
                    "add" => x[0].add(x[1]).unwrap(),
                    "sub" => x[0].sub(x[1]).unwrap(),
                    _ => x[0].mul(x[1]).unwrap(),
                }),
            }
        }
        "div" => Case {
            inputs: vec![m2(rng), (rng.away_from_zero(r * c), vec![r, c])],
            build: Box::new(|x| x[0].div(x[1]).unwrap()),
        },
        "minimum" => {
            let a = rng.vec(r * c, -2.0, 2.0);
            let b = a.iter().map(|v| v + rng.away_from_zero(1)[0]).collect();
            Case {
                inputs: vec![(a, vec![r, c]), (b, vec![r, c])],
                build: Box::new(|x| x[0].minimum(x[1]).unwrap()),
            }
        }
        "add_bias" => Case {
            inputs: vec![m2(rng), (rng.vec(c, -1.0, 1.0), vec![c])],
            build: Box::new(|x| x[0].add_bias(x[1]).unwrap()),
        },
        "scale" => {
            let k = rng.range(-3.0, 3.0);
            Case {
                inputs: vec![m2(rng)],
                build: Box::new(move |x| x[0].scale(k)),
            }
        }
        "add_scalar" => {
            let k = rng.range(-3.0, 3.0);
            Case {
                inputs: vec![m2(rng)],
                build: Box::new(move |x| x[0].add_scalar(k)),
            }
        }
        "tanh" => unary(|t| t.tanh(), rng.vec(r * c, -2.0, 2.0)),
        "sigmoid" => unary(|t| t.sigmoid(), rng.vec(r * c, -3.0, 3.0)),
        "relu" => unary(|t| t.relu(), rng.away_from_zero(r * c)),
        "exp" => unary(|t| t.exp(), rng.vec(r * c, -2.0, 2.0)),
        "log" => unary(|t| t.log(), rng.vec(r * c, 0.1, 3.0)),
        "softplus" => unary(|t| t.softplus(), rng.vec(r * c, -4.0, 4.0)),
        "square" => unary(|t| t.square(), rng.vec(r * c, -2.0, 2.0)),
        "softmax" | "log_softmax" | "sum" | "mean" => {
            let axis = (rng.next() % 2) as usize;
            let name = op.to_string();
            Case {
                inputs: vec![m2(rng)],
                build: Box::new(move |x| match name.as_str() {
                    "softmax" => x[0].softmax(axis).unwrap(),
                    "log_softmax" => x[0].log_softmax(axis).unwrap(),
                    "sum" => x[0].sum(axis).unwrap(),
                    _ => x[0].mean(axis).unwrap(),
                }),
            }
        }
        "layernorm" => {
            let c = rng.dim(2, 6);
            let eps = 1e-5;
            Case {
                inputs: vec![
                    (rng.vec(r * c, -2.0, 2.0), vec![r, c]),
                    (rng.vec(c, 0.5, 1.5), vec![c]),
                    (rng.vec(c, -0.5, 0.5), vec![c]),
                ],
                build: Box::new(move |x| x[0].layernorm(x[1], x[2], eps).unwrap()),
            }
        }
        "concat" => {
            let axis = (rng.next() % 2) as usize;
            let extra = rng.dim(1, 3);
            let other = if axis == 0 { vec![extra, c] } else { vec![r, extra] };
            let n: usize = other.iter().product();
            Case {
                inputs: vec![m2(rng), (rng.vec(n, -2.0, 2.0), other)],
                build: Box::new(move |x| crate::Tensor::concat(&[x[0], x[1]], axis).unwrap()),
            }
        }
        "slice" => {
            let axis = (rng.next() % 2) as usize;
            let n = if axis == 0 { r } else { c };
            let start = rng.dim(0, n - 1);
            let len = rng.dim(1, n - start);
            Case {
                inputs: vec![m2(rng)],
                build: Box::new(move |x| x[0].slice(axis, start, len).unwrap()),
            }
        }
        "gather_rows" => {
            let rows: Vec<usize> = (0..rng.dim(1, 6)).map(|_| rng.dim(0, r - 1)).collect();
            Case {
                inputs: vec![m2(rng)],
                build: Box::new(move |x| x[0].gather_rows(&rows).unwrap()),
            }
        }
        "sum_all" => unary(|t| t.sum_all(), rng.vec(r * c, -2.0, 2.0)),
        "mean_all" => unary(|t| t.mean_all(), rng.vec(r * c, -2.0, 2.0)),
        "reshape" => {
            let n = r * c;
            Case {
                inputs: vec![m2(rng)],
                build: Box::new(move |x| x[0].reshape(&[n]).unwrap()),
            }
        }
        "transpose" => Case {
            inputs: vec![m2(rng)],
            build: Box::new(|x| x[0].transpose().unwrap()),
        },
        other => panic!("unknown primitive {other}"),
    }
}

fn eval_weighted(case: &Case, inputs: &[Vec<f64>], weights: &[f64]) -> f64 {
    let tape = crate::Tape::new();
    let xs: Vec<_> = inputs
        .iter()
        .zip(&case.inputs)
        .map(|(v, (_, d))| tape.constant(v.clone(), d))
        .collect();
    let out = (case.build)(&xs);
    out.with_value(|y| y.iter().zip(weights).map(|(a, b)| a * b).sum())
}

/// Finite-difference check of one primitive's backward rule on
/// `instances` random inputs. The scalar probed is `Σ w ⊙ op(x)` with
/// random fixed weights `w`.
pub fn check_primitive(op: &'static str, instances: usize, seed: u64, h: f64) -> SuiteReport {
    let tol = Tolerance::default();
    let mut rng = Mix(seed ^ op.bytes().fold(0u64, |a, b| a.wrapping_mul(31).wrapping_add(b as u64)));
    let mut report = SuiteReport {
        op,
        instances,
        checked: 0,
        max_rel_err: 0.0,
        failure: None,
    };
    for _ in 0..instances {
        let case = make_case(op, &mut rng);
        let tape = crate::Tape::new();
        let xs: Vec<_> = case.inputs.iter().map(|(v, d)| tape.variable(v.clone(), d)).collect();
        let out = (case.build)(&xs);
        let weights = rng.vec(out.numel(), -1.0, 1.0);
        let w = tape.constant(weights.clone(), &out.dims());
        let loss = out.mul(w).unwrap().sum_all();
        let grads = tape.backward(loss).unwrap();
        let values: Vec<Vec<f64>> = case.inputs.iter().map(|(v, _)| v.clone()).collect();
        for (i, x) in xs.iter().enumerate() {
            let analytic = grads.get_or_zero(*x);
            let numeric = central_difference(
                |probe| {
                    let mut vals = values.clone();
                    vals[i] = probe.to_vec();
                    eval_weighted(&case, &vals, &weights)
                },
                &values[i],
                h,
            );
            for (a, n) in analytic.iter().zip(&numeric) {
                let scale = a.abs().max(n.abs());
                if scale > 0.0 && (a - n).abs() > tol.abs_floor {
                    report.max_rel_err = report.max_rel_err.max((a - n).abs() / scale);
                }
            }
            report.checked += analytic.len();
            if let Err(m) = compare(&format!("{op}.input{i}"), &analytic, &numeric, tol) {
                report.failure.get_or_insert(m);
            }
        }
    }
    report
}

/// Runs [`check_primitive`] for every entry of [`PRIMITIVES`].
pub fn primitive_suite(instances: usize, seed: u64) -> Vec<SuiteReport> {
    PRIMITIVES
        .iter()
        .map(|op| check_primitive(op, instances, seed, 1e-6))
        .collect()
}

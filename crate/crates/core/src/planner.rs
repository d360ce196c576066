//! High-level waypoint policy: a residual GRU chain of Gaussian waypoints
//! sampled once per episode from the initial state.

use std::f64::consts::PI;

use hytl_autodiff::{Bound, ParamStore, Tape, Tensor};
use hytl_env::Vec3;
use hytl_nn::{Activation, GruCell, Linear, Mlp};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::Result;

pub const WAYPOINT_DIM: usize = 3;

#[derive(Clone, Debug)]
pub struct WaypointPolicy {
    pub store: ParamStore,
    pub state: Mlp,
    pub head: Linear,
    pub gru: GruCell,
    pub delta: Linear,
    pub sigma: Linear,
    pub n: usize,
}

/// A sampled chain and its progress through an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct WaypointPlan {
    /// Waypoints clamped to the workspace.
    pub waypoints: Vec<Vec3>,
    /// Pre-clamp draws, which the chain and log-probability use.
    pub samples: Vec<Vec3>,
    pub means: Vec<Vec3>,
    pub sigmas: Vec<Vec3>,
    pub log_prob: f64,
    pub active: usize,
}

impl WaypointPlan {
    pub fn exhausted(&self) -> bool {
        self.active >= self.waypoints.len()
    }

    /// The waypoint currently guiding; the last one once all are reached.
    pub fn current(&self) -> Vec3 {
        self.waypoints[self.active.min(self.waypoints.len() - 1)]
    }

    /// Moves to the next waypoint if the gripper is within `eps` of the
    /// active one. Returns whether a waypoint was reached.
    pub fn advance(&mut self, gripper: Vec3, eps: f64) -> bool {
        if self.exhausted() {
            return false;
        }
        let w = self.waypoints[self.active];
        let d = (0..3).map(|i| (w[i] - gripper[i]).powi(2)).sum::<f64>().sqrt();
        if d < eps {
            self.active += 1;
            true
        } else {
            false
        }
    }
}

fn to_vec3(v: &[f64]) -> Vec3 {
    [v[0], v[1], v[2]]
}

/// Diagonal Gaussian log-density.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], sigma: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(sigma)
        .map(|((x, m), s)| -0.5 * ((x - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln())
        .sum()
}

/// Samples, means, sigmas and the summed log-probability of a chain.
pub type Chain<'t> = (Vec<Vec3>, Vec<Vec3>, Vec<Vec3>, Tensor<'t>);

impl WaypointPolicy {
    pub fn new(features: usize, hidden: usize, n: usize, rng: &mut impl Rng) -> Self {
        assert!(n >= 1, "a plan needs at least one waypoint");
        let mut store = ParamStore::new();
        let state = Mlp::new(&mut store, "state", &[features, hidden, hidden], Activation::Tanh, rng);
        let head = Linear::new(&mut store, "head", hidden, WAYPOINT_DIM, true, rng);
        store.value_mut(head.bias.unwrap()).fill(0.5);
        let gru = GruCell::new(&mut store, "gru", WAYPOINT_DIM, hidden, rng);
        let delta = Linear::zeros(&mut store, "delta", hidden, WAYPOINT_DIM, true);
        let sigma = Linear::new(&mut store, "sigma", hidden, WAYPOINT_DIM, true, rng);
        for w in store.value_mut(sigma.weight) {
            *w *= 0.1;
        }
        // softplus(b) = 0.15
        store.value_mut(sigma.bias.unwrap()).fill((0.15f64.exp() - 1.0).ln());
        WaypointPolicy {
            store,
            state,
            head,
            gru,
            delta,
            sigma,
            n,
        }
    }

    /// Runs the chain on `p`. `draw(i, mean, sigma)` supplies waypoint `i`;
    /// the returned tensor is the summed log-probability of the draws.
    pub fn chain<'t>(
        &self,
        p: &Bound<'t>,
        s0: &[f64],
        mut draw: impl FnMut(usize, &[f64], &[f64]) -> Vec3,
    ) -> Result<Chain<'t>> {
        let tape = p.get(self.head.weight).tape();
        let x = tape.constant(s0.to_vec(), &[1, s0.len()]);
        let mut h = self.state.forward(p, x)?.tanh();
        let mut mean = self.head.forward(p, h)?;
        let (mut samples, mut means, mut sigmas): (Vec<Vec3>, Vec<Vec3>, Vec<Vec3>) =
            (Vec::new(), Vec::new(), Vec::new());
        let mut log_prob = tape.scalar(0.0);
        for i in 0..self.n {
            if i > 0 {
                let prev = tape.constant(samples[i - 1].to_vec(), &[1, WAYPOINT_DIM]);
                h = self.gru.step(p, prev, h)?;
                mean = prev.add(self.delta.forward(p, h)?)?;
            }
            let sigma = self.sigma.forward(p, h)?.softplus();
            let (m, s) = (mean.value(), sigma.value());
            let w = draw(i, &m, &s);
            let wt = tape.constant(w.to_vec(), &[1, WAYPOINT_DIM]);
            let z = wt.sub(mean)?.div(sigma)?;
            let lp = z
                .square()
                .scale(-0.5)
                .sub(sigma.log())?
                .add_scalar(-0.5 * (2.0 * PI).ln())
                .sum_all();
            log_prob = log_prob.add(lp)?;
            samples.push(w);
            means.push(to_vec3(&m));
            sigmas.push(to_vec3(&s));
        }
        Ok((samples, means, sigmas, log_prob))
    }

    fn plan_from(&self, samples: Vec<Vec3>, means: Vec<Vec3>, sigmas: Vec<Vec3>, log_prob: f64) -> WaypointPlan {
        WaypointPlan {
            waypoints: samples.iter().map(|w| w.map(|v| v.clamp(0.0, 1.0))).collect(),
            samples,
            means,
            sigmas,
            log_prob,
            active: 0,
        }
    }

    pub fn sample_plan(&self, s0: &[f64], rng: &mut impl Rng) -> Result<WaypointPlan> {
        let tape = Tape::new();
        let p = self.store.bind_frozen(&tape);
        let (samples, means, sigmas, lp) = self.chain(&p, s0, |_, m, s| {
            [0, 1, 2].map(|d| m[d] + s[d] * rng.sample::<f64, _>(StandardNormal))
        })?;
        Ok(self.plan_from(samples, means, sigmas, lp.item()))
    }

    /// The chain of means, used for deterministic evaluation.
    pub fn mean_plan(&self, s0: &[f64]) -> Result<WaypointPlan> {
        let tape = Tape::new();
        let p = self.store.bind_frozen(&tape);
        let (samples, means, sigmas, lp) = self.chain(&p, s0, |_, m, _| to_vec3(m))?;
        Ok(self.plan_from(samples, means, sigmas, lp.item()))
    }

    /// `−(Σ log π(w_i)) · (return − baseline)` with the plan's draws replayed
    /// on `p`.
    pub fn loss<'t>(
        &self,
        p: &Bound<'t>,
        s0: &[f64],
        plan: &WaypointPlan,
        ret: f64,
        baseline: f64,
    ) -> Result<Tensor<'t>> {
        let (_, _, _, lp) = self.chain(p, s0, |i, _, _| plan.samples[i])?;
        Ok(lp.scale(-(ret - baseline)))
    }

    /// One Adam step on the plan's score-function loss; returns the loss.
    pub fn update(
        &mut self,
        s0: &[f64],
        plan: &WaypointPlan,
        ret: f64,
        baseline: f64,
        adam: &hytl_autodiff::AdamConfig,
    ) -> Result<f64> {
        let tape = Tape::new();
        let p = self.store.bind(&tape);
        let loss = self.loss(&p, s0, plan, ret, baseline)?;
        let grads = tape.backward(loss)?;
        self.store.accumulate(&p, &grads);
        self.store.adam_step(adam);
        Ok(loss.item())
    }
}

/// Exponential moving average of episode returns, seeded by the first one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Baseline {
    pub value: Option<f64>,
    pub decay: f64,
}

impl Baseline {
    pub fn new(decay: f64) -> Self {
        Baseline { value: None, decay }
    }

    pub fn get(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }

    pub fn update(&mut self, ret: f64) {
        self.value = Some(match self.value {
            None => ret,
            Some(v) => self.decay * v + (1.0 - self.decay) * ret,
        });
    }
}

//! Hybrid discrete/continuous soft actor-critic: a categorical policy over
//! primitives, a tanh-squashed Gaussian over their parameters, and twin
//! critics with soft-updated targets.

use std::f64::consts::{LN_2, PI};

use hytl_autodiff::{Bound, ParamStore, Tape, Tensor};
use hytl_env::{HybridAction, PrimitiveKind, P_MAX};
use hytl_nn::{Activation, Mlp};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CoreError, Result};

pub const K: usize = PrimitiveKind::COUNT;
const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 1.0;

pub fn arity_mask(kind: usize) -> [f64; P_MAX] {
    let d = PrimitiveKind::ALL[kind].arity();
    let mut m = [0.0; P_MAX];
    m[..d].fill(1.0);
    m
}

fn one_hot<'t>(tape: &'t Tape, kinds: &[usize], width: usize) -> Tensor<'t> {
    let mut v = vec![0.0; kinds.len() * width];
    for (i, &k) in kinds.iter().enumerate() {
        v[i * width + k] = 1.0;
    }
    tape.constant(v, &[kinds.len(), width])
}

fn masks<'t>(tape: &'t Tape, kinds: &[usize]) -> Tensor<'t> {
    let v: Vec<f64> = kinds.iter().flat_map(|&k| arity_mask(k)).collect();
    tape.constant(v, &[kinds.len(), P_MAX])
}

/// Inverse-CDF draw from `probs` using a uniform variate `u ∈ [0, 1)`.
pub fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `Σ_k π(k)(α log π(k) − Q(k))`, averaged over rows; both inputs `B × K`.
pub fn primitive_objective<'t>(log_probs: Tensor<'t>, q: Tensor<'t>, alpha: f64) -> Result<Tensor<'t>> {
    let rows = log_probs.dims()[0];
    let inner = log_probs.scale(alpha).sub(q)?;
    let weighted = log_probs.exp().mul(inner)?;
    Ok(weighted.sum_all().scale(1.0 / rows as f64))
}

/// `mean(α log π_p − Q)` over rows.
pub fn parameter_objective<'t>(log_probs: Tensor<'t>, q: Tensor<'t>, alpha: f64) -> Result<Tensor<'t>> {
    Ok(log_probs.scale(alpha).sub(q)?.mean_all())
}

/// Pre-drawn noise for one critic loss evaluation.
#[derive(Clone, Debug)]
pub struct CriticNoise {
    pub k_uniform: Vec<f64>,
    pub eps: Vec<f64>,
}

impl CriticNoise {
    pub fn sample(batch: usize, rng: &mut impl Rng) -> Self {
        CriticNoise {
            k_uniform: (0..batch).map(|_| rng.gen()).collect(),
            eps: (0..batch * P_MAX).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }
}

/// Pre-drawn noise for the two policy losses.
#[derive(Clone, Debug)]
pub struct ActorNoise {
    /// One parameter draw per (primitive, row), primitive-major.
    pub eps_k: Vec<f64>,
    pub k_uniform: Vec<f64>,
    pub eps_p: Vec<f64>,
}

impl ActorNoise {
    pub fn sample(batch: usize, rng: &mut impl Rng) -> Self {
        ActorNoise {
            eps_k: (0..K * batch * P_MAX).map(|_| rng.sample(StandardNormal)).collect(),
            k_uniform: (0..batch).map(|_| rng.gen()).collect(),
            eps_p: (0..batch * P_MAX).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }
}

/// Tensors and plain data for one critic update.
pub struct CriticBatch<'t> {
    pub obs: Tensor<'t>,
    pub next_obs: Tensor<'t>,
    pub kinds: Vec<usize>,
    pub params: Vec<[f64; P_MAX]>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct HybridSac {
    pub obs_dim: usize,
    pub actor: ParamStore,
    pub critic: ParamStore,
    pub target: ParamStore,
    pub primitive: Mlp,
    pub parameter: Mlp,
    pub q1: Mlp,
    pub q2: Option<Mlp>,
    pub gamma: f64,
    pub alpha_k: f64,
    pub alpha_p: f64,
}

impl HybridSac {
    pub fn new(
        obs_dim: usize,
        hidden: usize,
        twin: bool,
        gamma: f64,
        alpha_k: f64,
        alpha_p: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut actor = ParamStore::new();
        let primitive = Mlp::new(&mut actor, "pi_k", &[obs_dim, hidden, hidden, K], Activation::Relu, rng);
        let parameter = Mlp::new(
            &mut actor,
            "pi_p",
            &[obs_dim + K, hidden, hidden, 2 * P_MAX],
            Activation::Relu,
            rng,
        );
        // unit pre-squash std at init
        let out_bias = parameter
            .layers
            .last()
            .and_then(|l| l.bias)
            .expect("biased output layer");
        let b0 = (2.0 * (0.0 - LOG_STD_MIN) / (LOG_STD_MAX - LOG_STD_MIN) - 1.0).atanh();
        actor.value_mut(out_bias)[P_MAX..].fill(b0);
        let mut critic = ParamStore::new();
        let q_in = obs_dim + K + P_MAX;
        let q1 = Mlp::new(&mut critic, "q1", &[q_in, hidden, hidden, 1], Activation::Relu, rng);
        let q2 = twin.then(|| Mlp::new(&mut critic, "q2", &[q_in, hidden, hidden, 1], Activation::Relu, rng));
        let target = critic.clone();
        HybridSac {
            obs_dim,
            actor,
            critic,
            target,
            primitive,
            parameter,
            q1,
            q2,
            gamma,
            alpha_k,
            alpha_p,
        }
    }

    /// `B × K` log-probabilities of the primitive policy.
    pub fn primitive_log_probs<'t>(&self, a: &Bound<'t>, obs: Tensor<'t>) -> Result<Tensor<'t>> {
        Ok(self.primitive.forward(a, obs)?.log_softmax(1)?)
    }

    fn parameter_head<'t>(&self, a: &Bound<'t>, obs: Tensor<'t>, kinds: &[usize]) -> Result<(Tensor<'t>, Tensor<'t>)> {
        let tape = obs.tape();
        let inp = Tensor::concat(&[obs, one_hot(tape, kinds, K)], 1)?;
        let out = self.parameter.forward(a, inp)?;
        let mean = out.slice(1, 0, P_MAX)?;
        let log_std = out
            .slice(1, P_MAX, P_MAX)?
            .tanh()
            .add_scalar(1.0)
            .scale(0.5 * (LOG_STD_MAX - LOG_STD_MIN))
            .add_scalar(LOG_STD_MIN);
        Ok((mean, log_std))
    }

    /// Reparameterized tanh-Gaussian parameters (masked to each primitive's
    /// arity) and their `B × 1` log-probabilities.
    pub fn parameter_sample<'t>(
        &self,
        a: &Bound<'t>,
        obs: Tensor<'t>,
        kinds: &[usize],
        eps: &[f64],
    ) -> Result<(Tensor<'t>, Tensor<'t>)> {
        let tape = obs.tape();
        let b = kinds.len();
        if b == 0 {
            return Err(CoreError::EmptyBatch);
        }
        let (mean, log_std) = self.parameter_head(a, obs, kinds)?;
        let noise = tape.constant(eps.to_vec(), &[b, P_MAX]);
        let u = mean.add(log_std.exp().mul(noise)?)?;
        let mask = masks(tape, kinds);
        let x = u.tanh().mul(mask)?;
        let base: Vec<f64> = eps
            .iter()
            .map(|e| -0.5 * e * e - 0.5 * (2.0 * PI).ln() - 2.0 * LN_2)
            .collect();
        // log(1 − tanh²u) = 2(log 2 − u − softplus(−2u))
        let per_dim = tape
            .constant(base, &[b, P_MAX])
            .sub(log_std)?
            .add(u.scale(2.0))?
            .add(u.scale(-2.0).softplus().scale(2.0))?;
        let logp = per_dim.mul(mask)?.sum(1)?.reshape(&[b, 1])?;
        Ok((x, logp))
    }

    /// Deterministic parameters `tanh(mean)`, masked.
    pub fn parameter_mode<'t>(&self, a: &Bound<'t>, obs: Tensor<'t>, kinds: &[usize]) -> Result<Tensor<'t>> {
        let (mean, _) = self.parameter_head(a, obs, kinds)?;
        Ok(mean.tanh().mul(masks(obs.tape(), kinds))?)
    }

    /// Online or target Q values of both critics, `B × 1` each.
    pub fn q_values<'t>(
        &self,
        c: &Bound<'t>,
        obs: Tensor<'t>,
        kinds: &[usize],
        x: Tensor<'t>,
    ) -> Result<(Tensor<'t>, Option<Tensor<'t>>)> {
        let inp = Tensor::concat(&[obs, one_hot(obs.tape(), kinds, K), x], 1)?;
        let q1 = self.q1.forward(c, inp)?;
        let q2 = match &self.q2 {
            Some(q2) => Some(q2.forward(c, inp)?),
            None => None,
        };
        Ok((q1, q2))
    }

    pub fn q_min<'t>(&self, c: &Bound<'t>, obs: Tensor<'t>, kinds: &[usize], x: Tensor<'t>) -> Result<Tensor<'t>> {
        Ok(match self.q_values(c, obs, kinds, x)? {
            (q1, Some(q2)) => q1.minimum(q2)?,
            (q1, None) => q1,
        })
    }

    /// Bootstrapped targets `y` for a batch (plain values, no gradient).
    pub fn critic_targets(
        &self,
        actor: &Bound<'_>,
        target: &Bound<'_>,
        next_obs: Tensor<'_>,
        rewards: &[f64],
        terminal: &[bool],
        noise: &CriticNoise,
    ) -> Result<Vec<f64>> {
        let b = rewards.len();
        let next_obs = next_obs.detach();
        let logp = self.primitive_log_probs(actor, next_obs)?.value();
        let kinds: Vec<usize> = (0..b)
            .map(|i| {
                let probs: Vec<f64> = logp[i * K..(i + 1) * K].iter().map(|l| l.exp()).collect();
                categorical(&probs, noise.k_uniform[i])
            })
            .collect();
        let (x, logpp) = self.parameter_sample(actor, next_obs, &kinds, &noise.eps)?;
        let q = self.q_min(target, next_obs, &kinds, x)?.value();
        let logpp = logpp.value();
        Ok((0..b)
            .map(|i| {
                let soft = q[i] - self.alpha_k * logp[i * K + kinds[i]] - self.alpha_p * logpp[i];
                let cont = if terminal[i] { 0.0 } else { 1.0 };
                rewards[i] + self.gamma * cont * soft
            })
            .collect())
    }

    /// Mean squared Bellman error over the batch, averaged over critics.
    pub fn critic_loss<'t>(
        &self,
        critic: &Bound<'t>,
        actor: &Bound<'t>,
        target: &Bound<'t>,
        batch: &CriticBatch<'t>,
        noise: &CriticNoise,
    ) -> Result<Tensor<'t>> {
        let b = batch.kinds.len();
        if b == 0 {
            return Err(CoreError::EmptyBatch);
        }
        let tape = batch.obs.tape();
        let y = self.critic_targets(actor, target, batch.next_obs, &batch.rewards, &batch.terminal, noise)?;
        let y = tape.constant(y, &[b, 1]);
        let x = tape.constant(batch.params.iter().flatten().copied().collect(), &[b, P_MAX]);
        let (q1, q2) = self.q_values(critic, batch.obs, &batch.kinds, x)?;
        let l1 = q1.sub(y)?.square().mean_all();
        Ok(match q2 {
            Some(q2) => l1.add(q2.sub(y)?.square().mean_all())?.scale(0.5),
            None => l1,
        })
    }

    /// Exact expectation over all primitives, one reparameterized parameter
    /// draw each; critics should be bound frozen. The critics read
    /// `obs.detach()`, so observation gradients only pass through the
    /// policies.
    pub fn primitive_loss<'t>(
        &self,
        actor: &Bound<'t>,
        critic: &Bound<'t>,
        obs: Tensor<'t>,
        noise: &ActorNoise,
    ) -> Result<Tensor<'t>> {
        let b = obs.dims()[0];
        if b == 0 {
            return Err(CoreError::EmptyBatch);
        }
        let logp = self.primitive_log_probs(actor, obs)?;
        let stacked = Tensor::concat(&[obs; K], 0)?;
        let kinds: Vec<usize> = (0..K).flat_map(|k| std::iter::repeat_n(k, b)).collect();
        let (x, _) = self.parameter_sample(actor, stacked, &kinds, &noise.eps_k)?;
        let q = self
            .q_min(critic, stacked.detach(), &kinds, x)?
            .reshape(&[K, b])?
            .transpose()?;
        primitive_objective(logp, q, self.alpha_k)
    }

    /// Parameter-policy loss with primitives resampled from the current π_k;
    /// the critics read `obs.detach()`.
    pub fn parameter_loss<'t>(
        &self,
        actor: &Bound<'t>,
        critic: &Bound<'t>,
        obs: Tensor<'t>,
        noise: &ActorNoise,
    ) -> Result<Tensor<'t>> {
        let b = obs.dims()[0];
        if b == 0 {
            return Err(CoreError::EmptyBatch);
        }
        let logp = self.primitive_log_probs(actor, obs)?.value();
        let kinds: Vec<usize> = (0..b)
            .map(|i| {
                let probs: Vec<f64> = logp[i * K..(i + 1) * K].iter().map(|l| l.exp()).collect();
                categorical(&probs, noise.k_uniform[i])
            })
            .collect();
        let (x, logpp) = self.parameter_sample(actor, obs, &kinds, &noise.eps_p)?;
        let q = self.q_min(critic, obs.detach(), &kinds, x)?;
        parameter_objective(logpp, q, self.alpha_p)
    }

    /// `target ← τ·online + (1 − τ)·target`.
    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        Ok(self.target.soft_update_from(&self.critic, tau)?)
    }

    /// Chooses an action for one observation; returns it with `log π_k` and
    /// `log π_p`.
    pub fn act(&self, obs: &[f64], rng: &mut impl Rng, deterministic: bool) -> Result<(HybridAction, f64, f64)> {
        let tape = Tape::new();
        let a = self.actor.bind_frozen(&tape);
        let o = tape.constant(obs.to_vec(), &[1, self.obs_dim]);
        let logp = self.primitive_log_probs(&a, o)?.value();
        let k = if deterministic {
            (0..K).fold(0, |best, i| if logp[i] > logp[best] { i } else { best })
        } else {
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            categorical(&probs, rng.gen())
        };
        let (x, logpp) = if deterministic {
            (self.parameter_mode(&a, o, &[k])?.value(), f64::NAN)
        } else {
            let eps: Vec<f64> = (0..P_MAX).map(|_| rng.sample(StandardNormal)).collect();
            let (x, lp) = self.parameter_sample(&a, o, &[k], &eps)?;
            (x.value(), lp.item())
        };
        let mut params = [0.0; P_MAX];
        params.copy_from_slice(&x);
        let action = HybridAction {
            kind: PrimitiveKind::ALL[k],
            params,
        };
        Ok((action, logp[k], logpp))
    }
}

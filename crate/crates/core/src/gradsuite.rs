//! Finite-difference checks of the composite training losses on tiny
//! networks, reported in the same shape as the primitive suite.

use hytl_autodiff::gradcheck::{compare, store_difference, Mismatch, SuiteReport, Tolerance};
use hytl_autodiff::{Bound, ParamStore, Tape, Tensor};
use hytl_env::P_MAX;
use hytl_nn::{TransformerConfig, TransformerEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attcat::Probe;
use crate::planner::WaypointPolicy;
use crate::sac::{arity_mask, ActorNoise, CriticBatch, CriticNoise, HybridSac, K};

pub const COMPOSITES: &[&str] = &["J_Q", "J_pi_k", "J_pi_p", "planner_loss", "probe_ce"];

const OBS: usize = 4;
const WIDTH: usize = 8;
const BATCH: usize = 3;
const H: f64 = 1e-6;

struct Tally {
    report: SuiteReport,
    tol: Tolerance,
}

impl Tally {
    fn new(op: &'static str, instances: usize) -> Self {
        Tally {
            report: SuiteReport {
                op,
                instances,
                checked: 0,
                max_rel_err: 0.0,
                failure: None,
            },
            tol: Tolerance::default(),
        }
    }

    fn record(&mut self, label: &str, analytic: &[f64], numeric: &[f64]) {
        for (a, n) in analytic.iter().zip(numeric) {
            let scale = a.abs().max(n.abs());
            if scale > 0.0 && (a - n).abs() > self.tol.abs_floor {
                self.report.max_rel_err = self.report.max_rel_err.max((a - n).abs() / scale);
            }
        }
        self.report.checked += analytic.len();
        if let Err(m) = compare(label, analytic, numeric, self.tol) {
            self.report.failure.get_or_insert(m);
        }
    }

    /// Compares the analytic gradient of every parameter in `store` with
    /// central differences of `loss`.
    fn store(
        &mut self,
        store: &ParamStore,
        analytic: &[(hytl_autodiff::ParamId, Vec<f64>)],
        loss: impl Fn(&ParamStore) -> f64,
    ) {
        for (id, grad) in analytic {
            let all: Vec<usize> = (0..grad.len()).collect();
            let numeric = store_difference(store, *id, &all, H, &loss);
            self.record(store.name(*id), grad, &numeric);
        }
    }
}

fn grads_of(
    store: &ParamStore,
    bound: &Bound<'_>,
    grads: &hytl_autodiff::Gradients,
) -> Vec<(hytl_autodiff::ParamId, Vec<f64>)> {
    store
        .ids()
        .zip(bound.tensors())
        .map(|(id, t)| (id, grads.get_or_zero(*t)))
        .collect()
}

struct SacCase {
    sac: HybridSac,
    obs: Vec<f64>,
    next_obs: Vec<f64>,
    kinds: Vec<usize>,
    params: Vec<[f64; P_MAX]>,
    rewards: Vec<f64>,
    terminal: Vec<bool>,
    critic_noise: CriticNoise,
    actor_noise: ActorNoise,
}

fn sac_case(rng: &mut ChaCha8Rng) -> SacCase {
    let mut sac = HybridSac::new(
        OBS,
        WIDTH,
        true,
        0.9,
        rng.gen_range(0.05..0.5),
        rng.gen_range(0.05..0.5),
        rng,
    );
    for store in [&mut sac.actor, &mut sac.critic] {
        for id in store
            .ids()
            .filter(|&id| store.name(id).ends_with("/b"))
            .collect::<Vec<_>>()
        {
            for v in store.value_mut(id) {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }
    for id in sac.target.ids().collect::<Vec<_>>() {
        for v in sac.target.value_mut(id) {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    let kinds: Vec<usize> = (0..BATCH).map(|_| rng.gen_range(0..K)).collect();
    let params = kinds
        .iter()
        .map(|&k| {
            let m = arity_mask(k);
            [0, 1, 2, 3, 4].map(|d| m[d] * rng.gen_range(-0.9..0.9))
        })
        .collect();
    SacCase {
        obs: (0..BATCH * OBS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        next_obs: (0..BATCH * OBS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        kinds,
        params,
        rewards: (0..BATCH).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        terminal: (0..BATCH).map(|_| rng.gen_bool(0.3)).collect(),
        critic_noise: CriticNoise::sample(BATCH, rng),
        actor_noise: ActorNoise::sample(BATCH, rng),
        sac,
    }
}

fn critic_loss_value(c: &SacCase, critic: &ParamStore, obs: &[f64]) -> f64 {
    let tape = Tape::new();
    let cb = critic.bind_frozen(&tape);
    let a = c.sac.actor.bind_frozen(&tape);
    let t = c.sac.target.bind_frozen(&tape);
    let batch = CriticBatch {
        obs: tape.constant(obs.to_vec(), &[BATCH, OBS]),
        next_obs: tape.constant(c.next_obs.clone(), &[BATCH, OBS]),
        kinds: c.kinds.clone(),
        params: c.params.clone(),
        rewards: c.rewards.clone(),
        terminal: c.terminal.clone(),
    };
    c.sac.critic_loss(&cb, &a, &t, &batch, &c.critic_noise).unwrap().item()
}

fn check_critic(tally: &mut Tally, c: &SacCase) {
    let tape = Tape::new();
    let cb = c.sac.critic.bind(&tape);
    let a = c.sac.actor.bind_frozen(&tape);
    let t = c.sac.target.bind_frozen(&tape);
    let obs = tape.variable(c.obs.clone(), &[BATCH, OBS]);
    let batch = CriticBatch {
        obs,
        next_obs: tape.constant(c.next_obs.clone(), &[BATCH, OBS]),
        kinds: c.kinds.clone(),
        params: c.params.clone(),
        rewards: c.rewards.clone(),
        terminal: c.terminal.clone(),
    };
    let loss = c.sac.critic_loss(&cb, &a, &t, &batch, &c.critic_noise).unwrap();
    let grads = tape.backward(loss).unwrap();
    tally.store(&c.sac.critic, &grads_of(&c.sac.critic, &cb, &grads), |s| {
        critic_loss_value(c, s, &c.obs)
    });
    let numeric = hytl_autodiff::gradcheck::central_difference(|o| critic_loss_value(c, &c.sac.critic, o), &c.obs, H);
    tally.record("obs", &grads.get_or_zero(obs), &numeric);
}

type ActorLoss = for<'t> fn(&HybridSac, &Bound<'t>, &Bound<'t>, Tensor<'t>, &ActorNoise) -> crate::Result<Tensor<'t>>;

fn check_actor(tally: &mut Tally, c: &SacCase, f: ActorLoss) {
    let value = |actor: &ParamStore, obs: &[f64]| {
        let tape = Tape::new();
        let a = actor.bind_frozen(&tape);
        let cb = c.sac.critic.bind_frozen(&tape);
        f(
            &c.sac,
            &a,
            &cb,
            tape.constant(obs.to_vec(), &[BATCH, OBS]),
            &c.actor_noise,
        )
        .unwrap()
        .item()
    };
    let tape = Tape::new();
    let a = c.sac.actor.bind(&tape);
    let cb = c.sac.critic.bind_frozen(&tape);
    let obs = tape.constant(c.obs.clone(), &[BATCH, OBS]);
    let loss = f(&c.sac, &a, &cb, obs, &c.actor_noise).unwrap();
    let grads = tape.backward(loss).unwrap();
    tally.store(&c.sac.actor, &grads_of(&c.sac.actor, &a, &grads), |s| value(s, &c.obs));
}

fn check_planner(tally: &mut Tally, rng: &mut ChaCha8Rng) {
    let policy = WaypointPolicy::new(OBS, WIDTH, 3, rng);
    let s0: Vec<f64> = (0..OBS).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let plan = policy.sample_plan(&s0, rng).unwrap();
    let (ret, base) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let value = |store: &ParamStore| {
        let tape = Tape::new();
        let p = store.bind_frozen(&tape);
        policy.loss(&p, &s0, &plan, ret, base).unwrap().item()
    };
    let tape = Tape::new();
    let p = policy.store.bind(&tape);
    let loss = policy.loss(&p, &s0, &plan, ret, base).unwrap();
    let grads = tape.backward(loss).unwrap();
    tally.store(&policy.store, &grads_of(&policy.store, &p, &grads), value);
}

fn check_probe(tally: &mut Tally, rng: &mut ChaCha8Rng) {
    let vocab = 14;
    let mut cfg = TransformerConfig::new(vocab);
    cfg.layers = 1;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.mlp_hidden = 8;
    cfg.max_len = 6;
    let mut enc_store = ParamStore::new();
    let encoder = TransformerEncoder::new(&mut enc_store, "enc", cfg, rng).unwrap();
    for id in enc_store.ids().collect::<Vec<_>>() {
        for v in enc_store.value_mut(id) {
            *v += rng.gen_range(-0.2..0.2);
        }
    }
    let mut probe_store = ParamStore::new();
    let probe = Probe::new(&mut probe_store, 8, 4, rng);
    let seqs: Vec<Vec<usize>> = (0..BATCH)
        .map(|_| {
            let len = rng.gen_range(2..=6);
            (0..6)
                .map(|i| if i < len { rng.gen_range(2..vocab) } else { 0 })
                .collect()
        })
        .collect();
    let targets: Vec<usize> = (0..BATCH).map(|_| rng.gen_range(0..4)).collect();
    let loss_on = |e: &Bound<'_>, p: &Bound<'_>| -> f64 {
        let rows: Vec<_> = seqs.iter().map(|s| encoder.encode(e, s).unwrap().pooled).collect();
        probe
            .loss(p, Tensor::concat(&rows, 0).unwrap(), &targets)
            .unwrap()
            .item()
    };
    let tape = Tape::new();
    let e = enc_store.bind(&tape);
    let p = probe_store.bind(&tape);
    let rows: Vec<_> = seqs.iter().map(|s| encoder.encode(&e, s).unwrap().pooled).collect();
    let loss = probe.loss(&p, Tensor::concat(&rows, 0).unwrap(), &targets).unwrap();
    let grads = tape.backward(loss).unwrap();
    tally.store(&enc_store, &grads_of(&enc_store, &e, &grads), |s| {
        let tape = Tape::new();
        loss_on(&s.bind_frozen(&tape), &probe_store.bind_frozen(&tape))
    });
    tally.store(&probe_store, &grads_of(&probe_store, &p, &grads), |s| {
        let tape = Tape::new();
        loss_on(&enc_store.bind_frozen(&tape), &s.bind_frozen(&tape))
    });
}

/// Checks one composite loss on `instances` random tiny instances.
pub fn check_composite(op: &'static str, instances: usize, seed: u64) -> SuiteReport {
    let mut tally = Tally::new(op, instances);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ op.len() as u64 ^ (op.as_bytes()[op.len() - 1] as u64) << 8);
    for _ in 0..instances {
        match op {
            "J_Q" => check_critic(&mut tally, &sac_case(&mut rng)),
            "J_pi_k" => check_actor(&mut tally, &sac_case(&mut rng), |s, a, c, o, n| {
                s.primitive_loss(a, c, o, n)
            }),
            "J_pi_p" => check_actor(&mut tally, &sac_case(&mut rng), |s, a, c, o, n| {
                s.parameter_loss(a, c, o, n)
            }),
            "planner_loss" => check_planner(&mut tally, &mut rng),
            "probe_ce" => check_probe(&mut tally, &mut rng),
            _ => {
                tally.report.failure = Some(Mismatch {
                    label: format!("unknown composite {op}"),
                    index: 0,
                    analytic: f64::NAN,
                    numeric: f64::NAN,
                })
            }
        }
    }
    tally.report
}

pub fn composite_suite(instances: usize, seed: u64) -> Vec<SuiteReport> {
    COMPOSITES
        .iter()
        .map(|op| check_composite(op, instances, seed))
        .collect()
}

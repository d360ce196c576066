#![allow(clippy::needless_range_loop)]
use hytl_autodiff::{AdamConfig, ParamStore, Tape};
use hytl_core::replay::{Replay, Transition};
use hytl_core::sac::{
    arity_mask, categorical, parameter_objective, primitive_objective, ActorNoise, CriticBatch, CriticNoise, HybridSac,
    K,
};
use hytl_core::CoreError;
use hytl_env::{PrimitiveKind, P_MAX};
use hytl_ltl::FormulaId;
use hytl_nn::{Activation, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sac(obs: usize, seed: u64) -> HybridSac {
    HybridSac::new(obs, 16, true, 0.99, 0.1, 0.1, &mut rng(seed))
}

#[test]
fn uniform_categorical_frequencies() {
    let mut r = rng(0);
    let probs = [0.2; 5];
    let mut counts = [0usize; 5];
    for _ in 0..10_000 {
        counts[categorical(&probs, r.gen())] += 1;
    }
    for c in counts {
        assert!((c as f64 / 10_000.0 - 0.2).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn primitive_probabilities_normalize() {
    let s = sac(4, 1);
    let tape = Tape::new();
    let a = s.actor.bind_frozen(&tape);
    let obs = tape.constant((0..12).map(|i| i as f64 * 0.1 - 0.5).collect(), &[3, 4]);
    let logp = s.primitive_log_probs(&a, obs).unwrap().value();
    for row in logp.chunks(K) {
        let total: f64 = row.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn samples_stay_inside_the_open_box() {
    let s = sac(4, 2);
    let mut r = rng(2);
    for _ in 0..500 {
        let obs: Vec<f64> = (0..4).map(|_| r.gen_range(-3.0..3.0)).collect();
        let (a, lk, lp) = s.act(&obs, &mut r, false).unwrap();
        assert!(lk.is_finite() && lp.is_finite());
        for (d, x) in a.params.iter().enumerate() {
            if d < a.kind.arity() {
                assert!(x.abs() < 1.0);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
    }
}

#[test]
fn deterministic_act_takes_modes() {
    let s = sac(4, 3);
    let obs = [0.3, -0.2, 0.9, 0.1];
    let tape = Tape::new();
    let a = s.actor.bind_frozen(&tape);
    let o = tape.constant(obs.to_vec(), &[1, 4]);
    let logp = s.primitive_log_probs(&a, o).unwrap().value();
    let best = (0..K).max_by(|&i, &j| logp[i].total_cmp(&logp[j])).unwrap();
    let mode = s.parameter_mode(&a, o, &[best]).unwrap().value();
    let (action, lk, lp) = s.act(&obs, &mut rng(0), true).unwrap();
    assert_eq!(action.kind.index(), best);
    assert_eq!(action.params.to_vec(), mode);
    assert_eq!(lk, logp[best]);
    assert!(lp.is_nan());
}

/// Independent density: recover the Gaussian pre-image from two draws and
/// apply the change of variables directly.
#[test]
fn tanh_gaussian_log_prob_matches_change_of_variables() {
    let s = sac(4, 4);
    let mut r = rng(4);
    for kind in [PrimitiveKind::Reach, PrimitiveKind::Push, PrimitiveKind::Atomic] {
        let k = kind.index();
        let obs: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let draw = |eps: &[f64]| {
            let tape = Tape::new();
            let a = s.actor.bind_frozen(&tape);
            let o = tape.constant(obs.clone(), &[1, 4]);
            let (x, lp) = s.parameter_sample(&a, o, &[k], eps).unwrap();
            (x.value(), lp.item())
        };
        let (x0, _) = draw(&[0.0; P_MAX]);
        let (x1, _) = draw(&[1.0; P_MAX]);
        let eps: Vec<f64> = (0..P_MAX).map(|_| r.gen_range(-2.0..2.0)).collect();
        let (x, lp) = draw(&eps);
        let mut expected = 0.0;
        for d in 0..kind.arity() {
            let mean = x0[d].atanh();
            let std = x1[d].atanh() - mean;
            let u = x[d].atanh();
            let z = (u - mean) / std;
            expected += -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - x[d] * x[d]).ln();
        }
        assert!((lp - expected).abs() < 1e-6, "{kind:?}: {lp} vs {expected}");
    }
}

#[test]
fn masked_dimensions_get_no_gradient() {
    let s = sac(4, 6);
    let tape = Tape::new();
    let a = s.actor.bind(&tape);
    let o = tape.constant(vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.0], &[2, 4]);
    let kinds = [PrimitiveKind::Grasp.index(), PrimitiveKind::Reach.index()];
    let eps = vec![0.3; 2 * P_MAX];
    let (x, lp) = s.parameter_sample(&a, o, &kinds, &eps).unwrap();
    let loss = x.sum_all().add(lp.sum_all()).unwrap();
    let grads = tape.backward(loss).unwrap();
    let last = s.parameter.layers.last().unwrap();
    let w = grads.get_or_zero(a.get(last.weight));
    let b = grads.get_or_zero(a.get(last.bias.unwrap()));
    let out = 2 * P_MAX;
    for col in [3, 4, P_MAX + 3, P_MAX + 4] {
        assert_eq!(b[col], 0.0);
        for row in 0..last.fan_in {
            assert_eq!(w[row * out + col], 0.0);
        }
    }
    assert!(b[0] != 0.0 && b[P_MAX] != 0.0);
    assert_eq!(arity_mask(PrimitiveKind::Release.index()), [0.0; P_MAX]);
}

fn critic_batch_targets(s: &HybridSac, terminal: Vec<bool>, rewards: Vec<f64>) -> Vec<f64> {
    let tape = Tape::new();
    let a = s.actor.bind_frozen(&tape);
    let t = s.target.bind_frozen(&tape);
    let n = rewards.len();
    let next = tape.constant((0..n * 4).map(|i| (i as f64 * 0.37).sin()).collect(), &[n, 4]);
    s.critic_targets(&a, &t, next, &rewards, &terminal, &CriticNoise::sample(n, &mut rng(9)))
        .unwrap()
}

#[test]
fn terminal_and_myopic_targets_equal_rewards() {
    let s = sac(4, 7);
    let rewards = vec![0.5, -1.0, 2.0];
    assert_eq!(critic_batch_targets(&s, vec![true; 3], rewards.clone()), rewards);
    let mut myopic = sac(4, 7);
    myopic.gamma = 0.0;
    assert_eq!(critic_batch_targets(&myopic, vec![false; 3], rewards.clone()), rewards);
    let bootstrapped = critic_batch_targets(&s, vec![false; 3], rewards.clone());
    assert!(bootstrapped.iter().zip(&rewards).all(|(y, r)| y != r));
}

#[test]
fn empty_batches_are_rejected() {
    let s = sac(4, 8);
    let tape = Tape::new();
    let a = s.actor.bind_frozen(&tape);
    let c = s.critic.bind_frozen(&tape);
    let empty = tape.constant(vec![], &[0, 4]);
    let noise = ActorNoise::sample(0, &mut rng(0));
    assert!(matches!(
        s.primitive_loss(&a, &c, empty, &noise),
        Err(CoreError::EmptyBatch)
    ));
    assert!(matches!(
        s.parameter_loss(&a, &c, empty, &noise),
        Err(CoreError::EmptyBatch)
    ));
    let batch = CriticBatch {
        obs: empty,
        next_obs: empty,
        kinds: vec![],
        params: vec![],
        rewards: vec![],
        terminal: vec![],
    };
    let t = s.target.bind_frozen(&tape);
    let cn = CriticNoise::sample(0, &mut rng(0));
    assert!(matches!(
        s.critic_loss(&c, &a, &t, &batch, &cn),
        Err(CoreError::EmptyBatch)
    ));
}

#[test]
fn soft_update_rules() {
    let mut s = sac(4, 10);
    let mut other = sac(4, 11);
    s.critic.copy_values_from(&other.critic).unwrap();
    assert!(s.target.sq_distance(&s.critic) > 0.0);
    let mut once = s.clone();
    s.soft_update_targets(0.005).unwrap();
    s.soft_update_targets(0.005).unwrap();
    once.soft_update_targets(1.0 - 0.995 * 0.995).unwrap();
    for (a, b) in s.target.ids().map(|id| (s.target.value(id), once.target.value(id))) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    other.soft_update_targets(1.0).unwrap();
    assert_eq!(other.target.sq_distance(&other.critic), 0.0);
}

#[test]
fn soft_update_halves_distance_every_ln2_over_tau_steps() {
    let mut s = sac(4, 12);
    let tau = 0.01;
    let start = s.target.sq_distance(&s.critic).sqrt();
    for id in s.critic.ids().collect::<Vec<_>>() {
        for v in s.critic.value_mut(id) {
            *v += 0.5;
        }
    }
    let d0 = s.target.sq_distance(&s.critic).sqrt();
    assert!(d0 > start);
    let mut steps = 0;
    while s.target.sq_distance(&s.critic).sqrt() > d0 / 2.0 {
        s.soft_update_targets(tau).unwrap();
        steps += 1;
    }
    let predicted = std::f64::consts::LN_2 / tau;
    assert!(
        (steps as f64 - predicted).abs() <= 0.05 * predicted,
        "{steps} vs {predicted}"
    );
}

/// Two arms with Q = (1, 0) and α = 0.1 settle at softmax(Q/α).
#[test]
fn two_armed_bandit_reaches_softmax_fixed_point() {
    let mut r = rng(13);
    let mut store = ParamStore::new();
    let net = Mlp::new(&mut store, "pi", &[2, 8, 2], Activation::Tanh, &mut r);
    let q = [1.0, 0.0];
    let alpha = 0.1;
    for _ in 0..3000 {
        let tape = Tape::new();
        let p = store.bind(&tape);
        let obs = tape.constant(vec![1.0, -0.5], &[1, 2]);
        let logp = net.forward(&p, obs).unwrap().log_softmax(1).unwrap();
        let loss = primitive_objective(logp, tape.constant(q.to_vec(), &[1, 2]), alpha).unwrap();
        let grads = tape.backward(loss).unwrap();
        store.accumulate(&p, &grads);
        store.adam_step(&AdamConfig::with_lr(1e-2));
    }
    let tape = Tape::new();
    let p = store.bind_frozen(&tape);
    let probs = net
        .forward(&p, tape.constant(vec![1.0, -0.5], &[1, 2]))
        .unwrap()
        .softmax(1)
        .unwrap()
        .value();
    let z = (q[0] / alpha).exp() + (q[1] / alpha).exp();
    let target = [(q[0] / alpha).exp() / z, (q[1] / alpha).exp() / z];
    for i in 0..2 {
        assert!((probs[i] - target[i]).abs() < 0.02, "{probs:?} vs {target:?}");
    }
}

/// With α_p = 0 and Q = −‖x − x*‖², the parameter mode converges on x*.
#[test]
fn analytic_critic_pulls_parameter_mean() {
    let s = sac(3, 14);
    let mut actor = s.actor.clone();
    let target = [0.4, -0.6, 0.2];
    let k = PrimitiveKind::Reach.index();
    let obs = vec![0.1, 0.5, -0.2];
    let mut r = rng(14);
    for _ in 0..3000 {
        let tape = Tape::new();
        let a = actor.bind(&tape);
        let o = tape.constant(obs.repeat(16), &[16, 3]);
        let eps: Vec<f64> = (0..16 * P_MAX).map(|_| r.sample(rand_distr::StandardNormal)).collect();
        let (x, lp) = s.parameter_sample(&a, o, &[k; 16], &eps).unwrap();
        let xs = tape.constant(
            (0..16)
                .flat_map(|_| [target[0], target[1], target[2], 0.0, 0.0])
                .collect(),
            &[16, P_MAX],
        );
        let qv = x
            .sub(xs)
            .unwrap()
            .square()
            .sum(1)
            .unwrap()
            .reshape(&[16, 1])
            .unwrap()
            .scale(-1.0);
        let loss = parameter_objective(lp, qv, 0.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        actor.accumulate(&a, &grads);
        actor.adam_step(&AdamConfig::with_lr(3e-3));
    }
    let tape = Tape::new();
    let a = actor.bind_frozen(&tape);
    let mode = s.parameter_mode(&a, tape.constant(obs, &[1, 3]), &[k]).unwrap().value();
    for d in 0..3 {
        assert!((mode[d] - target[d]).abs() < 0.05, "{mode:?}");
    }
}

#[test]
fn equal_values_push_towards_uniform() {
    let mut r = rng(15);
    let mut store = ParamStore::new();
    let net = Mlp::new(&mut store, "pi", &[1, 4, K], Activation::Tanh, &mut r);
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.value_mut(id) {
            *v *= 3.0;
        }
    }
    let entropy = |store: &ParamStore| {
        let tape = Tape::new();
        let p = store.bind_frozen(&tape);
        let lp = net
            .forward(&p, tape.constant(vec![1.0], &[1, 1]))
            .unwrap()
            .log_softmax(1)
            .unwrap()
            .value();
        -lp.iter().map(|l| l.exp() * l).sum::<f64>()
    };
    let before = entropy(&store);
    for _ in 0..1000 {
        let tape = Tape::new();
        let p = store.bind(&tape);
        let lp = net
            .forward(&p, tape.constant(vec![1.0], &[1, 1]))
            .unwrap()
            .log_softmax(1)
            .unwrap();
        let loss = primitive_objective(lp, tape.constant(vec![0.7; K], &[1, K]), 0.1).unwrap();
        let g = tape.backward(loss).unwrap();
        store.accumulate(&p, &g);
        store.adam_step(&AdamConfig::with_lr(1e-2));
    }
    assert!(entropy(&store) > before);
    assert!((entropy(&store) - (K as f64).ln()).abs() < 0.05);
}

/// The exact K-sum agrees in expectation with sampling k and x.
#[test]
fn exact_primitive_sum_matches_monte_carlo() {
    let s = HybridSac::new(3, 8, true, 0.99, 0.2, 0.1, &mut rng(16));
    let obs = vec![0.3, -0.1, 0.6];
    let mut r = rng(17);
    let b = 2000;
    let exact: Vec<f64> = (0..5)
        .map(|_| {
            let tape = Tape::new();
            let a = s.actor.bind_frozen(&tape);
            let c = s.critic.bind_frozen(&tape);
            let o = tape.constant(obs.repeat(b), &[b, 3]);
            s.primitive_loss(&a, &c, o, &ActorNoise::sample(b, &mut r))
                .unwrap()
                .item()
        })
        .collect();
    let exact = exact.iter().sum::<f64>() / exact.len() as f64;

    let n = 100_000;
    let tape = Tape::new();
    let a = s.actor.bind_frozen(&tape);
    let c = s.critic.bind_frozen(&tape);
    let one = tape.constant(obs.clone(), &[1, 3]);
    let logp = s.primitive_log_probs(&a, one).unwrap().value();
    let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let kinds: Vec<usize> = (0..n).map(|_| categorical(&probs, r.gen())).collect();
    let eps: Vec<f64> = (0..n * P_MAX).map(|_| r.sample(rand_distr::StandardNormal)).collect();
    let o = tape.constant(obs.repeat(n), &[n, 3]);
    let (x, _) = s.parameter_sample(&a, o, &kinds, &eps).unwrap();
    let q = s.q_min(&c, o, &kinds, x).unwrap().value();
    let samples: Vec<f64> = (0..n).map(|i| s.alpha_k * logp[kinds[i]] - q[i]).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(
        (mean - exact).abs() < 3.0 * se + 1e-3,
        "mc {mean} ± {se} vs exact {exact}"
    );
}

/// A two-state chain under a fixed policy: the critic converges to the
/// policy-evaluation fixed point computed by value iteration.
#[test]
fn critic_matches_value_iteration_on_chain() {
    let mut s = HybridSac::new(2, 32, true, 0.9, 1e-9, 1e-9, &mut rng(18));
    let states = [[1.0, 0.0], [0.0, 1.0]];
    // k = 0 moves 0 → 1 and ends the episode from 1; other primitives stay.
    let reward = |st: usize, k: usize| match (st, k) {
        (0, 0) => 0.0,
        (1, 0) => 1.0,
        (_, _) => 0.1,
    };
    let step = |st: usize, k: usize| -> (usize, bool) {
        match (st, k) {
            (0, 0) => (1, false),
            (1, 0) => (1, true),
            (st, _) => (st, false),
        }
    };
    let pi: Vec<Vec<f64>> = states
        .iter()
        .map(|o| {
            let tape = Tape::new();
            let a = s.actor.bind_frozen(&tape);
            s.primitive_log_probs(&a, tape.constant(o.to_vec(), &[1, 2]))
                .unwrap()
                .value()
                .iter()
                .map(|l| l.exp())
                .collect()
        })
        .collect();
    let mut q = [[0.0; K]; 2];
    for _ in 0..2000 {
        let v: Vec<f64> = (0..2).map(|st| (0..K).map(|k| pi[st][k] * q[st][k]).sum()).collect();
        for st in 0..2 {
            for k in 0..K {
                let (next, done) = step(st, k);
                q[st][k] = reward(st, k) + if done { 0.0 } else { 0.9 * v[next] };
            }
        }
    }
    let mut replay = Replay::new(1000);
    let mut r = rng(19);
    for _ in 0..1000 {
        let st = r.gen_range(0..2);
        let k = r.gen_range(0..K);
        let (next, done) = step(st, k);
        let m = arity_mask(k);
        replay.push(Transition {
            features: states[st].to_vec(),
            formula: FormulaId::TRUE,
            waypoint: vec![],
            kind: k,
            params: [0, 1, 2, 3, 4].map(|d| m[d] * r.gen_range(-1.0..1.0)),
            reward: reward(st, k),
            next_features: states[next].to_vec(),
            next_formula: FormulaId::TRUE,
            next_waypoint: vec![],
            terminal: done,
        });
    }
    for _ in 0..10_000 {
        let batch = replay.sample(32, &mut r).unwrap();
        let tape = Tape::new();
        let c = s.critic.bind(&tape);
        let a = s.actor.bind_frozen(&tape);
        let t = s.target.bind_frozen(&tape);
        let cb = CriticBatch {
            obs: tape.constant(batch.iter().flat_map(|t| t.features.clone()).collect(), &[32, 2]),
            next_obs: tape.constant(batch.iter().flat_map(|t| t.next_features.clone()).collect(), &[32, 2]),
            kinds: batch.iter().map(|t| t.kind).collect(),
            params: batch.iter().map(|t| t.params).collect(),
            rewards: batch.iter().map(|t| t.reward).collect(),
            terminal: batch.iter().map(|t| t.terminal).collect(),
        };
        let loss = s
            .critic_loss(&c, &a, &t, &cb, &CriticNoise::sample(32, &mut r))
            .unwrap();
        let g = tape.backward(loss).unwrap();
        s.critic.accumulate(&c, &g);
        s.critic.adam_step(&AdamConfig::with_lr(1e-3));
        s.soft_update_targets(0.01).unwrap();
    }
    for st in 0..2 {
        for k in 0..K {
            let tape = Tape::new();
            let c = s.critic.bind_frozen(&tape);
            let x = tape.constant(vec![0.0; P_MAX], &[1, P_MAX]);
            let learned = s
                .q_min(&c, tape.constant(states[st].to_vec(), &[1, 2]), &[k], x)
                .unwrap()
                .item();
            assert!(
                (learned - q[st][k]).abs() < 0.05,
                "Q({st},{k}) = {learned} vs {}",
                q[st][k]
            );
        }
    }
}

#[test]
fn replay_underfill_and_ring() {
    let mut replay = Replay::new(3);
    let t = |r: f64| Transition {
        features: vec![r],
        formula: FormulaId::TRUE,
        waypoint: vec![],
        kind: 3,
        params: [0.0; P_MAX],
        reward: r,
        next_features: vec![r],
        next_formula: FormulaId::TRUE,
        next_waypoint: vec![],
        terminal: true,
    };
    replay.push(t(1.0));
    assert!(matches!(
        replay.sample(2, &mut rng(0)),
        Err(CoreError::ReplayUnderfilled { have: 1, need: 2 })
    ));
    for r in 2..=5 {
        replay.push(t(r as f64));
    }
    assert_eq!(replay.len(), 3);
    let mut rewards: Vec<f64> = replay.iter().map(|t| t.reward).collect();
    rewards.sort_by(f64::total_cmp);
    assert_eq!(rewards, vec![3.0, 4.0, 5.0]);
}

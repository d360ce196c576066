//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 6 and 7 measure learning outcomes. Their lines are reported but
//! do not fail the test; every other criterion must pass.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use hytl_autodiff::gradcheck::primitive_suite;
use hytl_autodiff::{AdamConfig, ParamStore, Tape};
use hytl_core::attcat::{attcat_scores, AttcatOptions, Probe, Weighting};
use hytl_core::gradsuite::composite_suite;
use hytl_core::sac::primitive_objective;
use hytl_core::{train_with, Agent, Driver, RunConfig, TrainOutcome};
use hytl_env::{reset, scripted_actions, TASK_NAMES};
use hytl_ltl::{all_words, enumerate_formulas, progress, satisfies, shaped_reward, simplify, TokenVocab, Verdict};
use hytl_nn::{Activation, Mlp, Pooling, TransformerConfig, TransformerEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 6] = [0, 1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> RunConfig {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "configs",
        &format!("{name}.toml"),
    ]
    .iter()
    .collect();
    RunConfig::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn c1_progression() -> Outcome {
    let start = Instant::now();
    let formulas = enumerate_formulas(3, 3, 500);
    let words = all_words(3, 4);
    let mut mismatches = 0usize;
    for phi in &formulas {
        for w in &words {
            let mut cur = simplify(phi);
            for sigma in w {
                cur = simplify(&progress(sigma, &cur));
            }
            if cur.is_true() != satisfies(w, phi) {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        formulas.len() == 500 && mismatches == 0 && secs < 60.0,
        format!(
            "{} formulas x {} words, {mismatches} mismatches, {secs:.1} s",
            formulas.len(),
            words.len()
        ),
    )
}

fn c2_reward_cases() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..1000 {
        let r_env: f64 = rng.gen_range(-10.0..10.0);
        let r_phi: f64 = rng.gen_range(1e-3..10.0);
        let got = [Verdict::SatisfiedNow, Verdict::ViolatedNow, Verdict::Ongoing]
            .map(|v| shaped_reward(r_env, v, r_phi).unwrap());
        if got != [r_env + r_phi, r_env - r_phi, r_env] {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("1000 pairs, {bad} mismatches"))
}

fn c3_gradients() -> Outcome {
    let reports: Vec<_> = primitive_suite(100, 3)
        .into_iter()
        .chain(composite_suite(100, 3))
        .collect();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.op).collect();
    let worst = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    verdict(
        failed.is_empty() && reports.iter().all(|r| r.instances == 100),
        format!(
            "{} ops x 100 instances, max rel err {worst:.2e}, failed {failed:?}",
            reports.len()
        ),
    )
}

fn c4_encoder() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut row_err, mut pad_err, mut mean_err) = (0.0f64, 0.0f64, 0.0f64);
    for draw in 0..20 {
        let cfg = TransformerConfig {
            layers: 1 + draw % 3,
            dim: 8,
            heads: [1, 2, 4][draw % 3],
            mlp_hidden: 16,
            max_len: 16,
            pooling: if draw % 2 == 0 {
                Pooling::MaskedMean
            } else {
                Pooling::Cls
            },
            ..TransformerConfig::new(14)
        };
        let mut store = ParamStore::new();
        let enc = TransformerEncoder::new(&mut store, "enc", cfg, &mut rng).unwrap();
        let real = rng.gen_range(1..10);
        let mut tokens: Vec<usize> = (0..real).map(|_| rng.gen_range(1..14)).collect();
        tokens.resize(16, TokenVocab::PAD);
        let pooled = |store: &ParamStore| {
            let tape = Tape::new();
            let out = enc.encode(&store.bind_frozen(&tape), &tokens).unwrap();
            (out.pooled.value(), out.attention)
        };
        let (before, attention) = pooled(&store);
        for head in attention.iter().flatten() {
            for row in head.chunks(16) {
                row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        let mut poked = store.clone();
        for v in &mut poked.value_mut(enc.embedding())[..8] {
            *v += rng.gen_range(-10.0..10.0);
        }
        let (after, _) = pooled(&poked);
        pad_err = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).abs())
            .fold(pad_err, f64::max);

        let mut unit = store.clone();
        for id in unit.ids().collect::<Vec<_>>() {
            match unit.name(id) {
                "enc/ln_out/gain" => unit.value_mut(id).fill(1.0),
                "enc/ln_out/bias" => unit.value_mut(id).fill(0.0),
                _ => {}
            }
        }
        let tape = Tape::new();
        let y = enc.encode(&unit.bind_frozen(&tape), &tokens).unwrap().y.value();
        for row in y.chunks(8) {
            mean_err = mean_err.max((row.iter().sum::<f64>() / 8.0).abs());
        }
    }
    verdict(
        row_err <= 1e-9 && pad_err < 1e-12 && mean_err < 1e-9,
        format!("20 encoders: row-sum err {row_err:.1e}, PAD shift {pad_err:.1e}, pre-gain mean {mean_err:.1e}"),
    )
}

fn c5_attcat() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut names: Vec<String> = vec![];
    names.extend(
        [
            "<pad>",
            "<cls>",
            "true",
            "false",
            "not",
            "and",
            "or",
            "next",
            "until",
            "eventually",
            "a",
            "b",
            "c",
        ]
        .map(String::from),
    );
    let vocab = TokenVocab::from_names(names, 16).unwrap();
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let cfg = TransformerConfig {
            layers: 1 + draw % 2,
            dim: 8,
            heads: 2,
            mlp_hidden: 8,
            max_len: 16,
            final_ln: false,
            ..TransformerConfig::new(vocab.len())
        };
        let mut enc_store = ParamStore::new();
        let enc = TransformerEncoder::new(&mut enc_store, "enc", cfg, &mut rng).unwrap();
        let mut probe_store = ParamStore::new();
        let probe = Probe::new(&mut probe_store, 8, 3, &mut rng);
        let mut tokens: Vec<usize> = (0..rng.gen_range(1..9))
            .map(|_| rng.gen_range(2..vocab.len()))
            .collect();
        tokens.extend([TokenVocab::PAD; 2]);
        let options = AttcatOptions {
            weighting: Weighting::Unit,
            final_layer_only: true,
        };
        let (y, scores) = attcat_scores(
            &enc,
            &enc_store,
            &probe,
            &probe_store,
            &vocab,
            &tokens,
            draw % 3,
            "c",
            options,
        )
        .unwrap();
        worst = worst.max((scores.total.iter().sum::<f64>() - y).abs());
    }
    verdict(worst <= 1e-6, format!("100 draws, max |sum - y| {worst:.1e}"))
}

fn c6_reach_point() -> Outcome {
    let mut reached = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in SEEDS {
        let cfg = RunConfig {
            seed,
            stop_success: Some(0.9),
            ..config("ReachPoint_hytl")
        };
        let budget = cfg.budget;
        let start = Instant::now();
        let outcome = train_with(cfg, std::io::sink(), std::io::sink()).unwrap();
        slowest = slowest.max(start.elapsed());
        reached.push(outcome.steps_to(0.9).filter(|&s| s <= budget));
    }
    let ok = reached.iter().filter(|r| r.is_some()).count();
    verdict(
        ok == SEEDS.len() && budget_ok(slowest),
        format!(
            "{ok}/6 seeds at >= 0.9 within 50000 steps, steps {:?}, slowest seed {:.0} s",
            reached,
            slowest.as_secs_f64()
        ),
    )
}

fn budget_ok(slowest: Duration) -> bool {
    slowest <= Duration::from_secs(15 * 60)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c7_waypoint_ablation() -> Outcome {
    let arm = |name: &str| -> Vec<(f64, f64)> {
        SEEDS
            .iter()
            .map(|&seed| {
                let cfg = RunConfig { seed, ..config(name) };
                let budget = cfg.budget;
                let outcome: TrainOutcome = train_with(cfg, std::io::sink(), std::io::sink()).unwrap();
                let steps = outcome.steps_to(0.8).map_or(f64::INFINITY, |s| s as f64);
                (outcome.success_auc(budget), steps)
            })
            .collect()
    };
    let full = arm("TwoStage_hytl");
    let ablated = arm("TwoStage_no_waypoint");
    let auc = |v: &[(f64, f64)]| median(v.iter().map(|r| r.0).collect());
    let steps = |v: &[(f64, f64)]| median(v.iter().map(|r| r.1).collect());
    let (a_full, a_abl) = (auc(&full), auc(&ablated));
    let (s_full, s_abl) = (steps(&full), steps(&ablated));
    verdict(
        a_full >= a_abl && s_full <= s_abl,
        format!(
            "median AUC {a_full:.3} vs {a_abl:.3}, median steps to 0.8 {s_full} vs {s_abl}; per seed HyTL {:?}, no-waypoint {:?}",
            full.iter().map(|r| (round3(r.0), r.1)).collect::<Vec<_>>(),
            ablated.iter().map(|r| (round3(r.0), r.1)).collect::<Vec<_>>()
        ),
    )
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn bandit(q: [f64; 2], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = ParamStore::new();
    let net = Mlp::new(&mut store, "pi", &[2, 8, 2], Activation::Tanh, &mut rng);
    let obs = [0.3, -0.7];
    for _ in 0..4000 {
        let tape = Tape::new();
        let p = store.bind(&tape);
        let logp = net
            .forward(&p, tape.constant(obs.to_vec(), &[1, 2]))
            .unwrap()
            .log_softmax(1)
            .unwrap();
        let loss = primitive_objective(logp, tape.constant(q.to_vec(), &[1, 2]), alpha).unwrap();
        let grads = tape.backward(loss).unwrap();
        store.accumulate(&p, &grads);
        store.adam_step(&AdamConfig::with_lr(1e-2));
    }
    let tape = Tape::new();
    let probs = net
        .forward(&store.bind_frozen(&tape), tape.constant(obs.to_vec(), &[1, 2]))
        .unwrap()
        .softmax(1)
        .unwrap()
        .value();
    let z: f64 = q.iter().map(|v| (v / alpha).exp()).sum();
    let target = q.iter().map(|v| (v / alpha).exp() / z).collect();
    (probs, target)
}

fn c8_bandit() -> Outcome {
    let mut err = 0.0f64;
    let mut detail = Vec::new();
    for (q, alpha) in [([1.0, 0.0], 0.1), ([1.0, 0.5], 0.25)] {
        let (probs, target) = bandit(q, alpha);
        let e = probs
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        err = err.max(e);
        detail.push(format!("Q {q:?} alpha {alpha}: pi = {probs:.4?} vs {target:.4?}"));
    }
    verdict(err < 0.02, format!("{}, max err {err:.1e}", detail.join("; ")))
}

fn c9_determinism() -> Outcome {
    let run = || {
        let cfg = RunConfig {
            budget: 1500,
            eval_every: 500,
            ..config("TwoStage_hytl")
        };
        let (mut m, mut e) = (Vec::new(), Vec::new());
        train_with(cfg, &mut m, &mut e).unwrap();
        (m, e)
    };
    let (a, b) = (run(), run());
    verdict(
        a == b,
        format!("two 1500-step runs, metrics {} bytes, identical: {}", a.0.len(), a == b),
    )
}

fn c10_scripted() -> Outcome {
    let mut failures = Vec::new();
    let mut episodes = 0;
    for name in TASK_NAMES {
        let mut agent = Agent::new(RunConfig {
            task: name.to_string(),
            ..RunConfig::default()
        })
        .unwrap();
        for seed in 0..20 {
            let actions = scripted_actions(&agent.task, &reset(&agent.task, seed).unwrap()).unwrap();
            let trace = agent.run_episode(seed, Driver::Script(&actions)).unwrap();
            episodes += 1;
            if !trace.success || trace.len() > agent.horizon() {
                failures.push((name, seed));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{episodes} scripted episodes over {} tasks, failures {failures:?}",
            TASK_NAMES.len()
        ),
    )
}

#[test]
fn acceptance() {
    type Check = fn() -> Outcome;
    let criteria: [(u8, &str, Check, bool); 10] = [
        (1, "progression matches finite-word semantics", c1_progression, true),
        (2, "shaped reward case table", c2_reward_cases, true),
        (3, "gradient suite", c3_gradients, true),
        (4, "encoder invariants", c4_encoder, true),
        (5, "AttCAT completeness", c5_attcat, true),
        (6, "ReachPoint learning", c6_reach_point, false),
        (7, "TwoStage waypoint ablation", c7_waypoint_ablation, false),
        (8, "SAC bandit fixed point", c8_bandit, true),
        (9, "determinism", c9_determinism, true),
        (10, "scripted solvability", c10_scripted, true),
    ];
    let mut required_failures = Vec::new();
    std::io::stdout().lock().write_all(b"\n").unwrap();
    for (id, name, check, required) in criteria {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let line = format!(
            "{} criterion {id:>2} {name}: {} [{:.1} s]\n",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        if required && !v.pass {
            required_failures.push(id);
        }
    }
    assert!(required_failures.is_empty(), "criteria failed: {required_failures:?}");
}

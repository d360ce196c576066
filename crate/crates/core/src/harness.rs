//! The outer training loop, evaluation and CSV emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use hytl_env::{reset, scripted_actions};

use crate::agent::{Agent, Driver, EpisodeTrace, LossReport, Mode};
use crate::{Result, RunConfig};

pub const METRICS_HEADER: [&str; 12] = [
    "wall_ms",
    "env_steps",
    "episode",
    "return",
    "success",
    "jq",
    "jpk",
    "jpp",
    "jw",
    "probe_ce",
    "waypoints_reached",
    "formula_id",
];

pub const EVAL_HEADER: [&str; 5] = [
    "env_steps",
    "success_rate",
    "mean_return",
    "normalized_return",
    "mean_length",
];

/// Evaluation episodes use seeds from this base upward, for every run.
pub const EVAL_SEED_BASE: u64 = 0x00E7_A100_0000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub env_steps: u64,
    pub success_rate: f64,
    pub mean_return: f64,
    pub normalized_return: f64,
    pub mean_length: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub evals: Vec<EvalRow>,
}

impl TrainOutcome {
    /// First evaluation step reaching `rate`, if any.
    pub fn steps_to(&self, rate: f64) -> Option<u64> {
        self.evals.iter().find(|e| e.success_rate >= rate).map(|e| e.env_steps)
    }

    /// Area under the success-rate curve over `[0, budget]`, normalized to
    /// `[0, 1]`, holding each evaluation until the next one.
    pub fn success_auc(&self, budget: u64) -> f64 {
        let mut area = 0.0;
        for (i, e) in self.evals.iter().enumerate() {
            let end = self.evals.get(i + 1).map_or(budget, |n| n.env_steps).min(budget);
            area += e.success_rate * end.saturating_sub(e.env_steps) as f64;
        }
        area / budget as f64
    }
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("task", &self.task.name)
            .field("env_steps", &self.env_steps)
            .field("episodes", &self.episodes)
            .finish_non_exhaustive()
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Return of the scripted oracle, averaged over the evaluation seeds.
pub fn scripted_return(agent: &mut Agent, episodes: usize) -> Result<f64> {
    let mut total = 0.0;
    let bonus = std::mem::take(&mut agent.config.waypoint_bonus);
    let planner = agent.planner.take();
    for i in 0..episodes {
        let seed = EVAL_SEED_BASE + i as u64;
        let actions = scripted_actions(&agent.task, &reset(&agent.task, seed)?)?;
        total += agent.run_episode(seed, Driver::Script(&actions))?.episode_return;
    }
    agent.config.waypoint_bonus = bonus;
    agent.planner = planner;
    Ok(total / episodes as f64)
}

/// Deterministic evaluation over the fixed seed set.
pub fn evaluate(agent: &mut Agent, episodes: usize, oracle: f64) -> Result<(EvalRow, Vec<EpisodeTrace>)> {
    let traces = (0..episodes)
        .map(|i| agent.run_episode(EVAL_SEED_BASE + i as u64, Driver::Policy(Mode::Eval)))
        .collect::<Result<Vec<_>>>()?;
    let n = episodes as f64;
    let mean_return = traces.iter().map(|t| t.episode_return).sum::<f64>() / n;
    let row = EvalRow {
        env_steps: agent.env_steps,
        success_rate: traces.iter().filter(|t| t.success).count() as f64 / n,
        mean_return,
        normalized_return: mean_return / oracle,
        mean_length: traces.iter().map(|t| t.len() as f64).sum::<f64>() / n,
    };
    Ok((row, traces))
}

/// Trains per `config`, streaming one metrics row per exploration episode
/// and one evaluation row per evaluation.
pub fn train_with<M: Write, E: Write>(config: RunConfig, metrics: M, eval: E) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut agent = Agent::new(config)?;
    let cfg = agent.config.clone();
    let mut metrics = csv::Writer::from_writer(metrics);
    let mut eval = csv::Writer::from_writer(eval);
    metrics.write_record(METRICS_HEADER)?;
    eval.write_record(EVAL_HEADER)?;
    let oracle = scripted_return(&mut agent, cfg.eval_episodes)?;
    let mut evals = Vec::new();
    let mut next_eval = cfg.eval_every;
    let mut carry = 0.0;
    'outer: while agent.env_steps < cfg.budget {
        let mut traces = Vec::new();
        for _ in 0..cfg.episodes_per_iter {
            let seed: u64 = rand::Rng::gen(&mut agent.rng);
            let driver = if agent.env_steps < cfg.warmup_steps {
                Driver::Random
            } else {
                Driver::Policy(Mode::Explore)
            };
            let before = agent.env_steps;
            let trace = agent.run_episode(seed, driver)?;
            traces.push((trace, agent.env_steps - before));
        }
        let collected: u64 = traces.iter().map(|t| t.1).sum();
        let mut reports: Vec<LossReport> = Vec::new();
        if agent.env_steps >= cfg.warmup_steps && agent.replay.len() >= cfg.batch_size {
            carry += collected as f64 * cfg.updates_per_step;
            while carry >= 1.0 {
                reports.push(agent.train_step()?);
                carry -= 1.0;
            }
        }
        let avg = |f: fn(&LossReport) -> f64| mean(&reports.iter().map(f).collect::<Vec<_>>());
        let wall = if cfg.wall_clock { start.elapsed().as_millis() } else { 0 };
        let mut steps = agent.env_steps - collected;
        let first = agent.episodes - traces.len() as u64;
        for (i, (trace, n)) in traces.iter().enumerate() {
            steps += n;
            metrics.write_record([
                wall.to_string(),
                steps.to_string(),
                (first + i as u64).to_string(),
                num(trace.episode_return),
                (trace.success as u8).to_string(),
                num(avg(|r| r.jq)),
                num(avg(|r| r.jpk)),
                num(avg(|r| r.jpp)),
                num(trace.planner_loss.unwrap_or(f64::NAN)),
                num(avg(|r| r.probe_ce)),
                trace.waypoints_reached.to_string(),
                trace.final_formula.0.to_string(),
            ])?;
        }
        metrics.flush()?;
        if agent.env_steps >= next_eval {
            while next_eval <= agent.env_steps {
                next_eval += cfg.eval_every;
            }
            let (row, _) = evaluate(&mut agent, cfg.eval_episodes, oracle)?;
            eval.write_record([
                row.env_steps.to_string(),
                num(row.success_rate),
                num(row.mean_return),
                num(row.normalized_return),
                num(row.mean_length),
            ])?;
            eval.flush()?;
            evals.push(row);
            if cfg.stop_success.is_some_and(|s| row.success_rate >= s) {
                break 'outer;
            }
        }
    }
    Ok(TrainOutcome { agent, evals })
}

/// Trains and writes `metrics.csv`, `eval.csv` and `checkpoint.hytl` under
/// `out`.
pub fn train(config: RunConfig, out: &Path) -> Result<TrainOutcome> {
    fs::create_dir_all(out)?;
    let metrics = BufWriter::new(File::create(out.join("metrics.csv"))?);
    let eval = BufWriter::new(File::create(out.join("eval.csv"))?);
    let outcome = train_with(config, metrics, eval)?;
    outcome
        .agent
        .save(BufWriter::new(File::create(out.join("checkpoint.hytl"))?))?;
    Ok(outcome)
}

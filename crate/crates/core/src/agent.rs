//! The full agent: task encoder, hybrid SAC, waypoint planner and probe,
//! with episode rollout, the joint training step and checkpointing.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use hytl_autodiff::checkpoint::{read_records, write_records, Record};
use hytl_autodiff::{AdamConfig, Bound, ParamStore, Tape, Tensor};
use hytl_env::trajectory::StepRecord;
use hytl_env::{reset, HybridAction, PrimitiveKind, TaskSpec, Vec3, WorldState, P_MAX};
use hytl_ltl::{shaped_reward, simplify, FormulaId, FormulaTable, TokenVocab, Verdict};
use hytl_nn::{Pooling, TransformerConfig, TransformerEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attcat::Probe;
use crate::planner::{Baseline, WaypointPlan, WaypointPolicy};
use crate::replay::{Replay, Transition};
use crate::sac::{ActorNoise, CriticBatch, CriticNoise, HybridSac, K};
use crate::{CoreError, Result, RunConfig};

/// Observation slots taken by the active waypoint and its offset.
pub const WAYPOINT_SLOTS: usize = 6;

/// Losses of one training step; `probe_ce` is NaN when the probe is off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub jq: f64,
    pub jpk: f64,
    pub jpp: f64,
    pub probe_ce: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Stochastic actions, transitions stored, planner updated.
    Explore,
    /// Deterministic actions and the mean waypoint chain.
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub actions: Vec<HybridAction>,
    pub rewards: Vec<f64>,
    pub formulas: Vec<FormulaId>,
    pub final_formula: FormulaId,
    pub success: bool,
    pub episode_return: f64,
    /// Steps at which the formula changed to a new, non-false formula.
    pub progressions: usize,
    pub waypoints_reached: usize,
    pub planner_loss: Option<f64>,
    pub states: Vec<WorldState>,
    pub trajectory: Vec<TrajectoryLine>,
}

/// One line of a trajectory dump: the env record plus the waypoint that
/// guided the call. `episode` holds the reset seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    #[serde(flatten)]
    pub step: StepRecord,
    pub waypoint: Option<Vec3>,
    pub waypoint_reached: bool,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Where the next action comes from during a rollout.
pub enum Driver<'a> {
    Policy(Mode),
    /// Uniformly random primitive and parameters.
    Random,
    /// A fixed action list; the episode ends when it runs out.
    Script(&'a [HybridAction]),
}

pub struct Agent {
    pub config: RunConfig,
    pub task: TaskSpec,
    pub table: FormulaTable,
    pub root: FormulaId,
    pub vocab: TokenVocab,
    pub encoder: Option<TransformerEncoder>,
    pub encoder_store: ParamStore,
    pub sac: HybridSac,
    pub planner: Option<WaypointPolicy>,
    pub probe: Option<Probe>,
    pub probe_store: ParamStore,
    pub replay: Replay,
    pub rng: ChaCha8Rng,
    pub baseline: Baseline,
    pub env_steps: u64,
    pub episodes: u64,
    pub train_steps: u64,
    feature_len: usize,
    horizon: usize,
    tokens: HashMap<FormulaId, Vec<usize>>,
    embeddings: HashMap<FormulaId, Vec<f64>>,
}

fn random_action(rng: &mut impl Rng) -> HybridAction {
    let kind = PrimitiveKind::ALL[rng.gen_range(0..K)];
    let mut params = [0.0; P_MAX];
    for p in params.iter_mut().take(kind.arity()) {
        *p = rng.gen_range(-1.0..1.0);
    }
    HybridAction { kind, params }
}

fn waypoint_slots(plan: Option<&WaypointPlan>, gripper: [f64; 3]) -> Vec<f64> {
    match plan {
        Some(plan) => {
            let w = plan.current();
            let mut v: Vec<f64> = w.iter().map(|x| 2.0 * x - 1.0).collect();
            v.extend((0..3).map(|i| 2.0 * (w[i] - gripper[i])));
            v
        }
        None => vec![0.0; WAYPOINT_SLOTS],
    }
}

fn matrix(rows: &[&[f64]]) -> (Vec<f64>, [usize; 2]) {
    let cols = rows.first().map_or(0, |r| r.len());
    (
        rows.iter().flat_map(|r| r.iter().copied()).collect(),
        [rows.len(), cols],
    )
}

impl Agent {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let task = hytl_env::task_by_name(&config.task)?;
        Self::with_task(config, task)
    }

    /// An agent for a custom task; `config.task` is only used as a label.
    pub fn with_task(config: RunConfig, task: TaskSpec) -> Result<Self> {
        config.validate_hyperparameters()?;
        task.validate()?;
        let alphabet = task.alphabet();
        let mut table = FormulaTable::new();
        let root = table.intern(simplify(&task.parsed_formula()?));
        let vocab = TokenVocab::new(&alphabet, config.max_len);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let feature_len = 4 + 4 * task.objects.len();

        let mut encoder_store = ParamStore::new();
        let encoder = if config.encoder {
            let mut cfg = TransformerConfig::new(vocab.len());
            cfg.layers = config.layers;
            cfg.dim = config.dim;
            cfg.heads = config.heads;
            cfg.mlp_hidden = config.mlp_hidden;
            cfg.max_len = config.max_len;
            cfg.pad_id = TokenVocab::PAD;
            cfg.pooling = if config.cls_pooling {
                Pooling::Cls
            } else {
                Pooling::MaskedMean
            };
            Some(TransformerEncoder::new(&mut encoder_store, "enc", cfg, &mut rng)?)
        } else {
            None
        };
        let obs_dim = feature_len + config.dim + WAYPOINT_SLOTS;
        let sac = HybridSac::new(
            obs_dim,
            config.hidden,
            config.twin_critics,
            config.gamma,
            config.alpha_k,
            config.alpha_p,
            &mut rng,
        );
        let planner = config
            .waypoints
            .then(|| WaypointPolicy::new(feature_len, config.planner_hidden, config.n_waypoints, &mut rng));
        let mut probe_store = ParamStore::new();
        let probe = (config.probe && config.encoder)
            .then(|| Probe::new(&mut probe_store, config.dim, alphabet.len(), &mut rng));
        Ok(Agent {
            horizon: config.horizon.unwrap_or(task.horizon),
            replay: Replay::new(config.replay_capacity),
            baseline: Baseline::new(config.baseline_decay),
            config,
            task,
            table,
            root,
            vocab,
            encoder,
            encoder_store,
            sac,
            planner,
            probe,
            probe_store,
            rng,
            env_steps: 0,
            episodes: 0,
            train_steps: 0,
            feature_len,
            tokens: HashMap::new(),
            embeddings: HashMap::new(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn obs_dim(&self) -> usize {
        self.sac.obs_dim
    }

    pub fn tokens_for(&mut self, id: FormulaId) -> Result<Vec<usize>> {
        if let Some(t) = self.tokens.get(&id) {
            return Ok(t.clone());
        }
        let t = self.vocab.tokenize(self.table.get(id))?;
        self.tokens.insert(id, t.clone());
        Ok(t)
    }

    /// Pooled embeddings of `tokens`, one row each (zeros without an encoder).
    pub fn embed_rows<'t>(&self, e: &Bound<'t>, tape: &'t Tape, tokens: &[Vec<usize>]) -> Result<Tensor<'t>> {
        match &self.encoder {
            None => Ok(tape.constant(
                vec![0.0; tokens.len() * self.config.dim],
                &[tokens.len(), self.config.dim],
            )),
            Some(enc) => {
                let rows = tokens
                    .iter()
                    .map(|t| Ok(enc.encode(e, t)?.pooled))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tensor::concat(&rows, 0)?)
            }
        }
    }

    /// φ_θ for one formula, cached until the next training step.
    pub fn embedding(&mut self, id: FormulaId) -> Result<Vec<f64>> {
        if let Some(v) = self.embeddings.get(&id) {
            return Ok(v.clone());
        }
        let tokens = self.tokens_for(id)?;
        let tape = Tape::new();
        let e = self.encoder_store.bind_frozen(&tape);
        let v = self.embed_rows(&e, &tape, &[tokens])?.value();
        self.embeddings.insert(id, v.clone());
        Ok(v)
    }

    pub fn observation(&mut self, features: &[f64], formula: FormulaId, waypoint: &[f64]) -> Result<Vec<f64>> {
        let mut obs = features.to_vec();
        obs.extend(self.embedding(formula)?);
        obs.extend_from_slice(waypoint);
        Ok(obs)
    }

    /// Runs one episode from `reset(task, seed)`.
    pub fn run_episode(&mut self, seed: u64, driver: Driver<'_>) -> Result<EpisodeTrace> {
        let mode = match driver {
            Driver::Policy(m) => m,
            _ => Mode::Explore,
        };
        let store = matches!(mode, Mode::Explore) && !matches!(driver, Driver::Script(_));
        let mut state = reset(&self.task, seed)?;
        let s0 = state.features();
        let mut plan = match (&self.planner, &driver) {
            (Some(p), Driver::Policy(Mode::Eval)) => Some(p.mean_plan(&s0)?),
            (Some(p), _) => Some(p.sample_plan(&s0, &mut self.rng)?),
            (None, _) => None,
        };
        let mut phi = self.root;
        let mut visited = HashSet::from([phi]);
        let mut trace = EpisodeTrace {
            seed,
            actions: Vec::new(),
            rewards: Vec::new(),
            formulas: vec![phi],
            final_formula: phi,
            success: false,
            episode_return: 0.0,
            progressions: 0,
            waypoints_reached: 0,
            planner_loss: None,
            states: vec![state.clone()],
            trajectory: Vec::new(),
        };
        let props: Vec<String> = self.task.labels.iter().map(|l| l.prop.clone()).collect();
        for t in 0..self.horizon {
            let features = state.features();
            let wp = waypoint_slots(plan.as_ref(), state.gripper);
            let action = match &driver {
                Driver::Random => random_action(&mut self.rng),
                Driver::Script(actions) => match actions.get(t) {
                    Some(a) => *a,
                    None => break,
                },
                Driver::Policy(m) => {
                    let obs = self.observation(&features, phi, &wp)?;
                    self.sac.act(&obs, &mut self.rng, *m == Mode::Eval)?.0
                }
            };
            let out = self.task.step(&state, &action)?;
            let outcome = self.table.progress(phi, &out.assignment);
            let next = outcome.next;
            let mut r = shaped_reward(out.r_env, outcome.verdict, self.config.r_phi)?;
            if next != phi && next != FormulaId::FALSE {
                trace.progressions += 1;
            }
            if outcome.verdict == Verdict::Ongoing && visited.insert(next) {
                r += self.config.subgoal_bonus;
            }
            let waypoint = plan.as_ref().map(|p| p.current());
            let mut reached = false;
            if let Some(plan) = plan.as_mut() {
                if plan.advance(out.state.gripper, self.config.eps_reach) {
                    reached = true;
                    trace.waypoints_reached += 1;
                    r += self.config.waypoint_bonus;
                }
            }
            let done = matches!(next, FormulaId::TRUE | FormulaId::FALSE) || t + 1 == self.horizon;
            if store {
                let mut params = action.params;
                for p in params.iter_mut().skip(action.kind.arity()) {
                    *p = 0.0;
                }
                self.replay.push(Transition {
                    next_features: out.state.features(),
                    next_waypoint: waypoint_slots(plan.as_ref(), out.state.gripper),
                    features,
                    formula: phi,
                    waypoint: wp,
                    kind: action.kind.index(),
                    params,
                    reward: r,
                    next_formula: next,
                    terminal: done,
                });
                self.env_steps += 1;
            }
            trace.trajectory.push(TrajectoryLine {
                step: StepRecord::new(seed, t as u64, &action, &out, &props),
                waypoint,
                waypoint_reached: reached,
            });
            trace.actions.push(action);
            trace.rewards.push(r);
            trace.formulas.push(next);
            trace.states.push(out.state.clone());
            trace.episode_return += r;
            state = out.state;
            phi = next;
            if done {
                break;
            }
        }
        trace.final_formula = phi;
        trace.success = phi == FormulaId::TRUE;
        if store {
            self.episodes += 1;
            if let (Some(planner), Some(plan)) = (self.planner.as_mut(), plan.as_ref()) {
                let ret = trace.episode_return;
                let b = if self.config.baseline {
                    self.baseline.value.unwrap_or(ret)
                } else {
                    0.0
                };
                let adam = AdamConfig::with_lr(self.config.planner_lr);
                trace.planner_loss = Some(planner.update(&s0, plan, ret, b, &adam)?);
                if self.config.baseline {
                    self.baseline.update(ret);
                }
            }
        }
        Ok(trace)
    }

    /// One gradient step on critics, policies, encoder and probe, then a
    /// target soft-update.
    pub fn train_step(&mut self) -> Result<LossReport> {
        let cfg = self.config.clone();
        let b = cfg.batch_size;
        let batch: Vec<Transition> = self.replay.sample(b, &mut self.rng)?;
        let critic_noise = CriticNoise::sample(b, &mut self.rng);
        let actor_noise = ActorNoise::sample(b, &mut self.rng);

        let mut ids: Vec<FormulaId> = batch.iter().flat_map(|t| [t.formula, t.next_formula]).collect();
        ids.sort();
        ids.dedup();
        let tokens = ids.iter().map(|&id| self.tokens_for(id)).collect::<Result<Vec<_>>>()?;
        let pos = |id: FormulaId| ids.binary_search(&id).expect("id collected above");
        let idx: Vec<usize> = batch.iter().map(|t| pos(t.formula)).collect();
        let next_idx: Vec<usize> = batch.iter().map(|t| pos(t.next_formula)).collect();
        let width = self.task.labels.len();
        let targets: Vec<Option<usize>> = batch
            .iter()
            .map(|t| self.table.next_subgoal(t.formula, width).map(|p| p.0 as usize))
            .collect();

        let rows = |f: &dyn Fn(&Transition) -> &[f64]| matrix(&batch.iter().map(f).collect::<Vec<_>>());
        let (feat, fd) = rows(&|t| &t.features);
        let (next_feat, _) = rows(&|t| &t.next_features);
        let (wp, wd) = rows(&|t| &t.waypoint);
        let (next_wp, _) = rows(&|t| &t.next_waypoint);

        let enc_on = self.encoder.is_some();
        let enc_critic = enc_on && cfg.encoder_from_critic;
        let enc_actor = enc_on && (cfg.encoder_from_primitive || cfg.encoder_from_parameter);

        // Critic pass.
        let jq = {
            let tape = Tape::new();
            let e = if enc_critic {
                self.encoder_store.bind(&tape)
            } else {
                self.encoder_store.bind_frozen(&tape)
            };
            let table = self.embed_rows(&e, &tape, &tokens)?;
            let phi = table.gather_rows(&idx)?;
            let phi_next = table.detach().gather_rows(&next_idx)?;
            let obs = Tensor::concat(
                &[tape.constant(feat.clone(), &fd), phi, tape.constant(wp.clone(), &wd)],
                1,
            )?;
            let next_obs = Tensor::concat(
                &[tape.constant(next_feat, &fd), phi_next, tape.constant(next_wp, &wd)],
                1,
            )?;
            let c = self.sac.critic.bind(&tape);
            let a = self.sac.actor.bind_frozen(&tape);
            let t = self.sac.target.bind_frozen(&tape);
            let batch = CriticBatch {
                obs,
                next_obs,
                kinds: batch.iter().map(|t| t.kind).collect(),
                params: batch.iter().map(|t| t.params).collect(),
                rewards: batch.iter().map(|t| t.reward).collect(),
                terminal: batch.iter().map(|t| t.terminal).collect(),
            };
            let loss = self.sac.critic_loss(&c, &a, &t, &batch, &critic_noise)?;
            let grads = tape.backward(loss)?;
            self.sac.critic.accumulate(&c, &grads);
            if enc_critic {
                self.encoder_store.accumulate(&e, &grads);
            }
            loss.item()
        };

        // Policy and probe pass.
        let (jpk, jpp, probe_ce) = {
            let tape = Tape::new();
            let e = if enc_actor {
                self.encoder_store.bind(&tape)
            } else {
                self.encoder_store.bind_frozen(&tape)
            };
            let table = self.embed_rows(&e, &tape, &tokens)?;
            let phi = table.gather_rows(&idx)?;
            let gate = |on: bool| if on { phi } else { phi.detach() };
            let obs_k = Tensor::concat(
                &[
                    tape.constant(feat.clone(), &fd),
                    gate(cfg.encoder_from_primitive),
                    tape.constant(wp.clone(), &wd),
                ],
                1,
            )?;
            let obs_p = Tensor::concat(
                &[
                    tape.constant(feat, &fd),
                    gate(cfg.encoder_from_parameter),
                    tape.constant(wp, &wd),
                ],
                1,
            )?;
            let a = self.sac.actor.bind(&tape);
            let c = self.sac.critic.bind_frozen(&tape);
            let jpk = self.sac.primitive_loss(&a, &c, obs_k, &actor_noise)?;
            let jpp = self.sac.parameter_loss(&a, &c, obs_p, &actor_noise)?;
            let mut total = jpk.add(jpp)?;
            let p = self.probe_store.bind(&tape);
            let mut probe_ce = f64::NAN;
            if let Some(probe) = &self.probe {
                let (rows, classes): (Vec<usize>, Vec<usize>) = targets
                    .iter()
                    .enumerate()
                    .filter_map(|(i, t)| t.map(|c| (i, c)))
                    .unzip();
                if !rows.is_empty() {
                    let ce = probe.loss(&p, phi.detach().gather_rows(&rows)?, &classes)?;
                    probe_ce = ce.item();
                    total = total.add(ce)?;
                }
            }
            let grads = tape.backward(total)?;
            self.sac.actor.accumulate(&a, &grads);
            if enc_actor {
                self.encoder_store.accumulate(&e, &grads);
            }
            if self.probe.is_some() {
                self.probe_store.accumulate(&p, &grads);
            }
            (jpk.item(), jpp.item(), probe_ce)
        };

        let step = |store: &mut ParamStore, lr: f64| {
            if let Some(c) = cfg.grad_clip {
                store.clip_grad_norm(c);
            }
            store.adam_step(&AdamConfig::with_lr(lr));
        };
        step(&mut self.sac.critic, cfg.lr);
        step(&mut self.sac.actor, cfg.lr);
        if enc_critic || enc_actor {
            step(&mut self.encoder_store, cfg.encoder_lr);
        }
        if self.probe.is_some() {
            step(&mut self.probe_store, cfg.lr);
        }
        self.sac.soft_update_targets(cfg.tau)?;
        self.embeddings.clear();
        self.train_steps += 1;
        Ok(LossReport { jq, jpk, jpp, probe_ce })
    }

    /// Deterministic action for an observation built from `state`.
    pub fn greedy_action(
        &mut self,
        state: &WorldState,
        formula: FormulaId,
        plan: Option<&WaypointPlan>,
    ) -> Result<HybridAction> {
        let wp = waypoint_slots(plan, state.gripper);
        let obs = self.observation(&state.features(), formula, &wp)?;
        Ok(self.sac.act(&obs, &mut self.rng, true)?.0)
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    /// Serializes config, vocabulary, counters, RNG state and every store.
    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let bytes = |name: &str, b: &[u8]| Record {
            name: name.into(),
            dims: vec![b.len()],
            data: b.iter().map(|&x| x as f64).collect(),
        };
        let hash = self.config.hash();
        let mut rng = self.rng.get_seed().to_vec();
        rng.extend(self.rng.get_word_pos().to_le_bytes());
        rng.extend(self.rng.get_stream().to_le_bytes());
        let mut records = vec![
            bytes("meta/config", self.config.to_toml().as_bytes()),
            Record {
                name: "meta/config_hash".into(),
                dims: vec![2],
                data: vec![(hash >> 32) as f64, (hash & 0xffff_ffff) as f64],
            },
            bytes("meta/vocab", self.vocab.names().join("\n").as_bytes()),
            bytes("meta/rng", &rng),
            Record {
                name: "meta/counters".into(),
                dims: vec![4],
                data: vec![
                    self.env_steps as f64,
                    self.episodes as f64,
                    self.train_steps as f64,
                    self.baseline.value.unwrap_or(f64::NAN),
                ],
            },
        ];
        records.extend(self.encoder_store.to_records("encoder"));
        records.extend(self.sac.actor.to_records("actor"));
        records.extend(self.sac.critic.to_records("critic"));
        records.extend(self.sac.target.to_records("target"));
        if let Some(p) = &self.planner {
            records.extend(p.store.to_records("planner"));
        }
        records.extend(self.probe_store.to_records("probe"));
        Ok(write_records(out, &records)?)
    }

    /// Rebuilds an agent from [`Agent::save`] output. The replay buffer and
    /// optimizer moments are not stored.
    pub fn load<R: Read>(input: R) -> Result<Self> {
        let records = read_records(input)?;
        let find = |name: &str| {
            records
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| CoreError::Checkpoint(format!("missing {name}")))
        };
        let text = |name: &str| -> Result<Vec<u8>> { Ok(find(name)?.data.iter().map(|&v| v as u8).collect()) };
        let config_text = String::from_utf8(text("meta/config")?).map_err(|e| CoreError::Checkpoint(e.to_string()))?;
        let config = RunConfig::from_toml(&config_text)?;
        let hash = find("meta/config_hash")?;
        if hash.data.len() != 2 || ((hash.data[0] as u64) << 32 | hash.data[1] as u64) != config.hash() {
            return Err(CoreError::Checkpoint("config hash mismatch".into()));
        }
        let mut agent = Agent::new(config)?;
        let vocab = String::from_utf8(text("meta/vocab")?).map_err(|e| CoreError::Checkpoint(e.to_string()))?;
        if vocab != agent.vocab.names().join("\n") {
            return Err(CoreError::Checkpoint("vocabulary mismatch".into()));
        }
        let rng = text("meta/rng")?;
        if rng.len() != 32 + 16 + 8 {
            return Err(CoreError::Checkpoint("bad rng record".into()));
        }
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&rng[..32]);
        agent.rng = ChaCha8Rng::from_seed(seed);
        agent
            .rng
            .set_stream(u64::from_le_bytes(rng[48..56].try_into().expect("8 bytes")));
        agent
            .rng
            .set_word_pos(u128::from_le_bytes(rng[32..48].try_into().expect("16 bytes")));
        let counters = &find("meta/counters")?.data;
        agent.env_steps = counters[0] as u64;
        agent.episodes = counters[1] as u64;
        agent.train_steps = counters[2] as u64;
        agent.baseline.value = (!counters[3].is_nan()).then_some(counters[3]);
        agent.encoder_store.load_records("encoder", &records)?;
        agent.sac.actor.load_records("actor", &records)?;
        agent.sac.critic.load_records("critic", &records)?;
        agent.sac.target.load_records("target", &records)?;
        if let Some(p) = agent.planner.as_mut() {
            p.store.load_records("planner", &records)?;
        }
        agent.probe_store.load_records("probe", &records)?;
        Ok(agent)
    }
}

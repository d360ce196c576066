use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Every knob of a training run, read from a flat TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub seed: u64,
    /// Primitive calls across all exploration episodes.
    pub budget: u64,
    pub episodes_per_iter: usize,
    /// Gradient steps per collected primitive call.
    pub updates_per_step: f64,
    pub warmup_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Stop once an evaluation reaches this success rate.
    pub stop_success: Option<f64>,
    /// Write real elapsed milliseconds; `false` writes 0 for reproducible files.
    pub wall_clock: bool,

    pub batch_size: usize,
    pub replay_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub encoder_lr: f64,
    pub planner_lr: f64,
    pub alpha_k: f64,
    pub alpha_p: f64,
    pub hidden: usize,
    pub twin_critics: bool,
    pub grad_clip: Option<f64>,

    pub r_phi: f64,
    /// Added on the first visit to each new formula within an episode; 0 disables.
    pub subgoal_bonus: f64,
    pub horizon: Option<usize>,

    pub waypoints: bool,
    pub n_waypoints: usize,
    pub eps_reach: f64,
    /// Added when a waypoint is reached; 0 disables.
    pub waypoint_bonus: f64,
    pub planner_hidden: usize,
    /// EMA return baseline for the planner; `false` uses 0.
    pub baseline: bool,
    pub baseline_decay: f64,

    pub encoder: bool,
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub max_len: usize,
    pub cls_pooling: bool,
    pub encoder_from_critic: bool,
    pub encoder_from_primitive: bool,
    pub encoder_from_parameter: bool,
    pub probe: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "ReachPoint".into(),
            seed: 0,
            budget: 50_000,
            episodes_per_iter: 1,
            updates_per_step: 1.0,
            warmup_steps: 1000,
            eval_every: 2000,
            eval_episodes: 20,
            stop_success: None,
            wall_clock: true,
            batch_size: 256,
            replay_capacity: 100_000,
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            encoder_lr: 3e-4,
            planner_lr: 1e-3,
            alpha_k: 0.1,
            alpha_p: 0.1,
            hidden: 64,
            twin_critics: true,
            grad_clip: None,
            r_phi: 1.0,
            subgoal_bonus: 0.25,
            horizon: None,
            waypoints: true,
            n_waypoints: 3,
            eps_reach: 0.05,
            waypoint_bonus: 0.1,
            planner_hidden: 32,
            baseline: true,
            baseline_decay: 0.99,
            encoder: true,
            layers: 2,
            dim: 32,
            heads: 4,
            mlp_hidden: 64,
            max_len: 24,
            cls_pooling: false,
            encoder_from_critic: true,
            encoder_from_primitive: true,
            encoder_from_parameter: true,
            probe: true,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CoreError {
    CoreError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_hyperparameters()?;
        hytl_env::task_by_name(&self.task).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    /// Every check except that `task` names a library task.
    pub fn validate_hyperparameters(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(invalid("budget must be positive"));
        }
        if self.waypoint_bonus != 0.0 && !self.waypoints {
            return Err(invalid("waypoint_bonus requires waypoints = true"));
        }
        if !(self.subgoal_bonus.is_finite() && self.waypoint_bonus.is_finite()) {
            return Err(invalid("bonuses must be finite"));
        }
        if self.r_phi <= 0.0 {
            return Err(invalid("r_phi must be positive"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(invalid("tau must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma must lie in [0, 1]"));
        }
        if self.alpha_k <= 0.0 || self.alpha_p <= 0.0 {
            return Err(invalid("temperatures must be positive"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(invalid("replay capacity must hold at least one batch"));
        }
        if self.n_waypoints == 0 || self.eps_reach <= 0.0 {
            return Err(invalid("n_waypoints and eps_reach must be positive"));
        }
        if self.episodes_per_iter == 0 || self.eval_episodes == 0 || self.eval_every == 0 {
            return Err(invalid("episode counts and eval cadence must be positive"));
        }
        if self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(invalid("dim must be divisible by heads"));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(invalid("baseline_decay must lie in [0, 1)"));
        }
        Ok(())
    }

    /// FNV-1a of the serialized config.
    pub fn hash(&self) -> u64 {
        self.to_toml().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

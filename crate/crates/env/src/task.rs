use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hytl_ltl::{parse, Alphabet, Assignment, Formula, PropId};

use crate::world::{dist, dist_xy, Vec3};
use crate::{execute, EnvError, HybridAction, Object, Result, WorldState};

const MAX_LAYOUT_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub half_extent: f64,
    pub spawn_lo: Vec3,
    pub spawn_hi: Vec3,
    #[serde(default)]
    pub movable: bool,
    #[serde(default)]
    pub support: bool,
}

/// Geometric predicate behind one proposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// Gripper within `radius` of the object.
    GripperNear {
        object: String,
        radius: f64,
    },
    /// Gripper within `radius` of the object in the table plane.
    GripperOverXy {
        object: String,
        radius: f64,
    },
    Holding {
        object: String,
    },
    /// `object` is held and within `radius` of `target` in the plane.
    HeldNearXy {
        object: String,
        target: String,
        radius: f64,
    },
    /// `object` within `radius` of `target` in the plane and below `z_max`.
    InsideBelow {
        object: String,
        target: String,
        radius: f64,
        z_max: f64,
    },
    /// `object` resting on top of `base`.
    RestingOn {
        object: String,
        base: String,
        radius: f64,
    },
    /// `object` moved at least `distance` in the plane since reset.
    Displaced {
        object: String,
        distance: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub prop: String,
    pub predicate: Predicate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub objects: Vec<ObjectSpec>,
    pub labels: Vec<Labeling>,
    pub formula: String,
    pub horizon: usize,
    pub action_cost: f64,
    pub min_separation: f64,
    /// Resample layouts in which some proposition already holds.
    #[serde(default = "yes")]
    pub fresh_start: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: WorldState,
    pub r_env: f64,
    pub micro_steps: u32,
    pub assignment: Assignment,
}

impl TaskSpec {
    pub fn alphabet(&self) -> Alphabet {
        let names: Vec<&str> = self.labels.iter().map(|l| l.prop.as_str()).collect();
        Alphabet::new(&names).expect("validated task alphabet")
    }

    pub fn parsed_formula(&self) -> Result<Formula> {
        Ok(parse(&self.formula, &self.alphabet())?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(EnvError::InvalidSpec("horizon must be at least 1".into()));
        }
        let names: Vec<&str> = self.labels.iter().map(|l| l.prop.as_str()).collect();
        let alphabet = Alphabet::new(&names)?;
        parse(&self.formula, &alphabet)?;
        for o in &self.objects {
            let ok = (0..3).all(|i| 0.0 <= o.spawn_lo[i] && o.spawn_lo[i] <= o.spawn_hi[i] && o.spawn_hi[i] <= 1.0);
            if !ok {
                return Err(EnvError::InvalidSpec(format!("bad spawn box for {}", o.name)));
            }
        }
        for l in &self.labels {
            for name in l.predicate.objects() {
                if !self.objects.iter().any(|o| o.name == name) {
                    return Err(EnvError::InvalidSpec(format!(
                        "predicate for {} names unknown object {name}",
                        l.prop
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: TaskSpec = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task spec serializes")
    }

    /// The labeling function L(s).
    pub fn label(&self, state: &WorldState) -> Assignment {
        let mut a = Assignment::empty(self.labels.len());
        for (i, l) in self.labels.iter().enumerate() {
            if l.predicate.holds(state) {
                a.insert(PropId(i as u16));
            }
        }
        a
    }

    pub fn step(&self, state: &WorldState, action: &HybridAction) -> Result<StepOutcome> {
        let (state, micro_steps) = execute(state, action);
        let assignment = self.label(&state);
        Ok(StepOutcome {
            state,
            r_env: -self.action_cost,
            micro_steps,
            assignment,
        })
    }
}

impl Predicate {
    fn objects(&self) -> Vec<&str> {
        match self {
            Predicate::GripperNear { object, .. }
            | Predicate::GripperOverXy { object, .. }
            | Predicate::Holding { object }
            | Predicate::Displaced { object, .. } => vec![object],
            Predicate::HeldNearXy { object, target, .. } | Predicate::InsideBelow { object, target, .. } => {
                vec![object, target]
            }
            Predicate::RestingOn { object, base, .. } => vec![object, base],
        }
    }

    pub fn holds(&self, s: &WorldState) -> bool {
        let idx = |name: &str| s.object_index(name).expect("validated object name");
        match self {
            Predicate::GripperNear { object, radius } => dist(s.gripper, s.objects[idx(object)].pos) < *radius,
            Predicate::GripperOverXy { object, radius } => dist_xy(s.gripper, s.objects[idx(object)].pos) < *radius,
            Predicate::Holding { object } => s.held == Some(idx(object)),
            Predicate::HeldNearXy { object, target, radius } => {
                let o = idx(object);
                s.held == Some(o) && dist_xy(s.objects[o].pos, s.objects[idx(target)].pos) < *radius
            }
            Predicate::InsideBelow {
                object,
                target,
                radius,
                z_max,
            } => {
                let o = &s.objects[idx(object)];
                dist_xy(o.pos, s.objects[idx(target)].pos) < *radius && o.pos[2] < *z_max
            }
            Predicate::RestingOn { object, base, radius } => {
                let i = idx(object);
                let (o, b) = (&s.objects[i], &s.objects[idx(base)]);
                let top = b.pos[2] + b.half_extent + o.half_extent;
                s.held != Some(i) && dist_xy(o.pos, b.pos) < *radius && (o.pos[2] - top).abs() < 1e-6
            }
            Predicate::Displaced { object, distance } => {
                let o = &s.objects[idx(object)];
                dist_xy(o.pos, o.spawn) >= *distance
            }
        }
    }
}

/// Samples an initial layout; with `fresh_start`, layouts where a
/// proposition already holds are rejected. Deterministic in `(task, seed)`.
pub fn reset(task: &TaskSpec, seed: u64) -> Result<WorldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let objects: Vec<Object> = task
            .objects
            .iter()
            .map(|spec| {
                let pos = [0, 1, 2].map(|i| {
                    let (lo, hi) = (spec.spawn_lo[i], spec.spawn_hi[i]);
                    if hi > lo {
                        rng.gen_range(lo..=hi)
                    } else {
                        lo
                    }
                });
                Object {
                    name: spec.name.clone(),
                    pos,
                    half_extent: spec.half_extent,
                    spawn: pos,
                    movable: spec.movable,
                    support: spec.support,
                }
            })
            .collect();
        let separated = objects.iter().enumerate().all(|(i, a)| {
            objects[i + 1..]
                .iter()
                .all(|b| dist(a.pos, b.pos) >= task.min_separation)
        });
        if separated {
            let state = WorldState::new(objects);
            if !task.fresh_start || task.label(&state).is_empty() {
                return Ok(state);
            }
        }
    }
    Err(EnvError::LayoutInfeasible {
        task: task.name.clone(),
        attempts: MAX_LAYOUT_ATTEMPTS,
    })
}

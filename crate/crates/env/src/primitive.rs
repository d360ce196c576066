use serde::{Deserialize, Serialize};

use crate::world::{clamp_unit, dist, Vec3};
use crate::{EnvError, Result, WorldState};

/// Width of the shared parameter vector.
pub const P_MAX: usize = 5;
/// Micro-steps any single primitive may consume.
pub const MICRO_STEP_CAP: u32 = 20;

const STEP_LEN: f64 = 0.05;
const REACH_TOL: f64 = 0.01;
const GRASP_RADIUS: f64 = 0.03;
const PUSH_RANGE: f64 = 0.2;
const PUSH_CONTACT: f64 = 0.04;
const PUSH_APPROACH_CAP: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Reach,
    Grasp,
    Push,
    Release,
    Atomic,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::Reach,
        PrimitiveKind::Grasp,
        PrimitiveKind::Push,
        PrimitiveKind::Release,
        PrimitiveKind::Atomic,
    ];
    pub const COUNT: usize = 5;

    pub fn arity(self) -> usize {
        match self {
            PrimitiveKind::Reach | PrimitiveKind::Grasp => 3,
            PrimitiveKind::Push => 5,
            PrimitiveKind::Release => 0,
            PrimitiveKind::Atomic => 4,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// A primitive with its parameters in [-1, 1]; entries past the arity are
/// carried but ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub kind: PrimitiveKind,
    pub params: [f64; P_MAX],
}

impl HybridAction {
    pub fn new(kind: PrimitiveKind, params: &[f64]) -> Result<Self> {
        if params.len() != kind.arity() {
            return Err(EnvError::ArityMismatch {
                kind,
                expected: kind.arity(),
                got: params.len(),
            });
        }
        let mut p = [0.0; P_MAX];
        p[..params.len()].copy_from_slice(params);
        Ok(HybridAction { kind, params: p })
    }

    pub fn reach(target: Vec3) -> Self {
        Self::new(PrimitiveKind::Reach, &to_unit(target)).unwrap()
    }

    pub fn grasp(target: Vec3) -> Self {
        Self::new(PrimitiveKind::Grasp, &to_unit(target)).unwrap()
    }

    pub fn push(approach: Vec3, delta_xy: [f64; 2]) -> Self {
        let a = to_unit(approach);
        let d = delta_xy.map(|v| (v / PUSH_RANGE).clamp(-1.0, 1.0));
        Self::new(PrimitiveKind::Push, &[a[0], a[1], a[2], d[0], d[1]]).unwrap()
    }

    pub fn release() -> Self {
        Self::new(PrimitiveKind::Release, &[]).unwrap()
    }

    pub fn atomic(delta: Vec3, close: bool) -> Self {
        let d = delta.map(|v| (v / STEP_LEN).clamp(-1.0, 1.0));
        let g = if close { 1.0 } else { -1.0 };
        Self::new(PrimitiveKind::Atomic, &[d[0], d[1], d[2], g]).unwrap()
    }

    pub fn meaningful(&self) -> &[f64] {
        &self.params[..self.kind.arity()]
    }
}

fn to_unit(p: Vec3) -> Vec3 {
    p.map(|v| (2.0 * v - 1.0).clamp(-1.0, 1.0))
}

fn to_world(u: &[f64]) -> Vec3 {
    [0, 1, 2].map(|i| (u[i].clamp(-1.0, 1.0) + 1.0) / 2.0)
}

/// Applies one primitive and returns the new state with the number of
/// micro-steps it consumed.
pub fn execute(state: &WorldState, action: &HybridAction) -> (WorldState, u32) {
    let mut s = state.clone();
    let mut used = 0;
    match action.kind {
        PrimitiveKind::Reach => {
            used = move_to(&mut s, to_world(&action.params), MICRO_STEP_CAP);
        }
        PrimitiveKind::Grasp => {
            used = move_to(&mut s, to_world(&action.params), MICRO_STEP_CAP);
            close(&mut s);
        }
        PrimitiveKind::Push => {
            used = move_to(&mut s, to_world(&action.params), PUSH_APPROACH_CAP);
            let delta = [
                action.params[3].clamp(-1.0, 1.0) * PUSH_RANGE,
                action.params[4].clamp(-1.0, 1.0) * PUSH_RANGE,
            ];
            used += push(&mut s, delta, MICRO_STEP_CAP - used);
        }
        PrimitiveKind::Release => open(&mut s),
        PrimitiveKind::Atomic => {
            let delta = [0, 1, 2].map(|i| action.params[i].clamp(-1.0, 1.0) * STEP_LEN);
            let target = clamp_unit([0, 1, 2].map(|i| s.gripper[i] + delta[i]));
            if target != s.gripper {
                set_gripper(&mut s, target);
                used = 1;
            }
            if action.params[3] >= 0.0 {
                close(&mut s);
            } else {
                open(&mut s);
            }
        }
    }
    s.micro_steps += used as u64;
    s.primitive_calls += 1;
    (s, used)
}

fn set_gripper(s: &mut WorldState, p: Vec3) {
    s.gripper = clamp_unit(p);
    if let Some(h) = s.held {
        s.objects[h].pos = s.gripper;
    }
}

fn move_to(s: &mut WorldState, target: Vec3, cap: u32) -> u32 {
    let target = clamp_unit(target);
    let mut used = 0;
    while used < cap {
        let d = dist(s.gripper, target);
        if d < REACH_TOL {
            break;
        }
        let step = d.min(STEP_LEN) / d;
        let next = [0, 1, 2].map(|i| s.gripper[i] + (target[i] - s.gripper[i]) * step);
        set_gripper(s, next);
        used += 1;
    }
    used
}

fn push(s: &mut WorldState, delta: [f64; 2], cap: u32) -> u32 {
    let len = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
    let mut remaining = len;
    let mut used = 0;
    while remaining > 1e-12 && used < cap {
        let step = remaining.min(STEP_LEN);
        let before = s.gripper;
        let next = clamp_unit([
            before[0] + delta[0] / len * step,
            before[1] + delta[1] / len * step,
            before[2],
        ]);
        let moved = [next[0] - before[0], next[1] - before[1]];
        for (i, o) in s.objects.iter_mut().enumerate() {
            if Some(i) != s.held && o.movable && dist(o.pos, before) < PUSH_CONTACT {
                o.pos = clamp_unit([o.pos[0] + moved[0], o.pos[1] + moved[1], o.pos[2]]);
            }
        }
        set_gripper(s, next);
        remaining -= step;
        used += 1;
    }
    used
}

fn close(s: &mut WorldState) {
    s.gripper_open = false;
    if s.held.is_some() {
        return;
    }
    let g = s.gripper;
    let nearest = s
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.movable && dist(o.pos, g) <= GRASP_RADIUS)
        .min_by(|a, b| dist(a.1.pos, g).total_cmp(&dist(b.1.pos, g)))
        .map(|(i, _)| i);
    if let Some(i) = nearest {
        s.held = Some(i);
        s.objects[i].pos = g;
    }
}

fn open(s: &mut WorldState) {
    s.gripper_open = true;
    let Some(h) = s.held.take() else {
        return;
    };
    let obj = &s.objects[h];
    let (x, y, he) = (obj.pos[0], obj.pos[1], obj.half_extent);
    let mut rest = he;
    for (i, o) in s.objects.iter().enumerate() {
        let over = (o.pos[0] - x).abs() <= o.half_extent.max(0.02) && (o.pos[1] - y).abs() <= o.half_extent.max(0.02);
        if i != h && o.support && over {
            rest = rest.max(o.pos[2] + o.half_extent + he);
        }
    }
    s.objects[h].pos[2] = rest.clamp(0.0, 1.0);
}

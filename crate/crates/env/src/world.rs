use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub const GRIPPER_START: Vec3 = [0.5, 0.5, 0.8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub name: String,
    pub pos: Vec3,
    pub half_extent: f64,
    /// Position at reset, for displacement predicates.
    pub spawn: Vec3,
    pub movable: bool,
    pub support: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub gripper: Vec3,
    pub gripper_open: bool,
    pub held: Option<usize>,
    pub objects: Vec<Object>,
    pub micro_steps: u64,
    pub primitive_calls: u64,
}

impl WorldState {
    pub fn new(objects: Vec<Object>) -> Self {
        WorldState {
            gripper: GRIPPER_START,
            gripper_open: true,
            held: None,
            objects,
            micro_steps: 0,
            primitive_calls: 0,
        }
    }

    pub fn object(&self, name: &str) -> Option<&Object> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    /// Gripper position, gripper flag, then per object its position and a
    /// held flag; coordinates are mapped from [0,1] to [-1,1].
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.feature_len());
        f.extend(self.gripper.iter().map(|v| 2.0 * v - 1.0));
        f.push(if self.gripper_open { -1.0 } else { 1.0 });
        for (i, o) in self.objects.iter().enumerate() {
            f.extend(o.pos.iter().map(|v| 2.0 * v - 1.0));
            f.push(if self.held == Some(i) { 1.0 } else { -1.0 });
        }
        f
    }

    pub fn feature_len(&self) -> usize {
        4 + 4 * self.objects.len()
    }
}

pub(crate) fn clamp_unit(p: Vec3) -> Vec3 {
    p.map(|v| v.clamp(0.0, 1.0))
}

pub(crate) fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn dist_xy(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

use hytl_ltl::FormulaId;
use rand::Rng;

use crate::{CoreError, Result};
use hytl_env::P_MAX;

/// One primitive call as stored for off-policy training.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    pub formula: FormulaId,
    /// Active-waypoint slots of the observation.
    pub waypoint: Vec<f64>,
    pub kind: usize,
    /// Parameters with dims past the primitive's arity zeroed.
    pub params: [f64; P_MAX],
    pub reward: f64,
    pub next_features: Vec<f64>,
    pub next_formula: FormulaId,
    pub next_waypoint: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer storing rows in flat columns.
#[derive(Clone, Debug)]
pub struct Replay {
    capacity: usize,
    len: usize,
    next: usize,
    feature_width: usize,
    waypoint_width: usize,
    features: Vec<f64>,
    next_features: Vec<f64>,
    waypoints: Vec<f64>,
    next_waypoints: Vec<f64>,
    params: Vec<[f64; P_MAX]>,
    scalars: Vec<Row>,
}

#[derive(Clone, Copy, Debug)]
struct Row {
    formula: FormulaId,
    next_formula: FormulaId,
    kind: usize,
    reward: f64,
    terminal: bool,
}

fn put(column: &mut Vec<f64>, slot: usize, width: usize, values: &[f64]) {
    if column.len() == slot * width {
        column.extend_from_slice(values);
    } else {
        column[slot * width..(slot + 1) * width].copy_from_slice(values);
    }
}

impl Replay {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Replay {
            capacity,
            len: 0,
            next: 0,
            feature_width: 0,
            waypoint_width: 0,
            features: Vec::new(),
            next_features: Vec::new(),
            waypoints: Vec::new(),
            next_waypoints: Vec::new(),
            params: Vec::new(),
            scalars: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, overwriting the oldest row when full. Every transition
    /// must have the widths of the first one.
    pub fn push(&mut self, t: Transition) {
        if self.len == 0 {
            self.feature_width = t.features.len();
            self.waypoint_width = t.waypoint.len();
        }
        let (fw, ww) = (self.feature_width, self.waypoint_width);
        assert!(
            t.features.len() == fw
                && t.next_features.len() == fw
                && t.waypoint.len() == ww
                && t.next_waypoint.len() == ww,
            "transition widths differ from the buffer's"
        );
        let slot = self.next;
        put(&mut self.features, slot, fw, &t.features);
        put(&mut self.next_features, slot, fw, &t.next_features);
        put(&mut self.waypoints, slot, ww, &t.waypoint);
        put(&mut self.next_waypoints, slot, ww, &t.next_waypoint);
        let row = Row {
            formula: t.formula,
            next_formula: t.next_formula,
            kind: t.kind,
            reward: t.reward,
            terminal: t.terminal,
        };
        if self.scalars.len() == slot {
            self.params.push(t.params);
            self.scalars.push(row);
        } else {
            self.params[slot] = t.params;
            self.scalars[slot] = row;
        }
        self.len = (self.len + 1).min(self.capacity);
        self.next = (self.next + 1) % self.capacity;
    }

    /// Row `i` in storage order.
    pub fn get(&self, i: usize) -> Transition {
        assert!(i < self.len, "replay index {i} out of range");
        let (fw, ww) = (self.feature_width, self.waypoint_width);
        let row = self.scalars[i];
        Transition {
            features: self.features[i * fw..(i + 1) * fw].to_vec(),
            formula: row.formula,
            waypoint: self.waypoints[i * ww..(i + 1) * ww].to_vec(),
            kind: row.kind,
            params: self.params[i],
            reward: row.reward,
            next_features: self.next_features[i * fw..(i + 1) * fw].to_vec(),
            next_formula: row.next_formula,
            next_waypoint: self.next_waypoints[i * ww..(i + 1) * ww].to_vec(),
            terminal: row.terminal,
        }
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Transition>> {
        if self.len < n {
            return Err(CoreError::ReplayUnderfilled {
                have: self.len,
                need: n,
            });
        }
        Ok((0..n).map(|_| self.get(rng.gen_range(0..self.len))).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.len).map(|i| self.get(i))
    }
}

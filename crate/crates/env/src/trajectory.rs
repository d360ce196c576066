//! JSON-lines trajectory dumps.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{HybridAction, Result, StepOutcome, Vec3};

/// One primitive call as written to a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: u64,
    pub action: HybridAction,
    pub r_env: f64,
    pub micro_steps: u32,
    pub gripper: Vec3,
    pub held: Option<String>,
    pub assignment: Vec<String>,
}

impl StepRecord {
    pub fn new(episode: u64, step: u64, action: &HybridAction, outcome: &StepOutcome, prop_names: &[String]) -> Self {
        let s = &outcome.state;
        StepRecord {
            episode,
            step,
            action: *action,
            r_env: outcome.r_env,
            micro_steps: outcome.micro_steps,
            gripper: s.gripper,
            held: s.held.map(|h| s.objects[h].name.clone()),
            assignment: outcome
                .assignment
                .iter()
                .map(|p| prop_names[p.0 as usize].clone())
                .collect(),
        }
    }
}

pub fn write_line<T: Serialize, W: Write>(out: &mut W, item: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, item)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_lines<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            items.push(serde_json::from_str(&line)?);
        }
    }
    Ok(items)
}

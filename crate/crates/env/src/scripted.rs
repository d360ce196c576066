use crate::world::{dist, Vec3};
use crate::{execute, EnvError, HybridAction, Result, TaskSpec, WorldState};

const CARRY_HEIGHT: f64 = 0.3;

struct Script {
    state: WorldState,
    actions: Vec<HybridAction>,
}

impl Script {
    fn apply(&mut self, a: HybridAction) {
        self.state = execute(&self.state, &a).0;
        self.actions.push(a);
    }

    fn reach(&mut self, target: Vec3) {
        for _ in 0..3 {
            if dist(self.state.gripper, target) < 0.01 {
                return;
            }
            self.apply(HybridAction::reach(target));
        }
    }

    fn grasp(&mut self, object: &str) {
        let p = self.pos(object);
        self.reach(p);
        self.apply(HybridAction::grasp(p));
    }

    fn carry_over(&mut self, object: &str) {
        let p = self.pos(object);
        self.reach([p[0], p[1], CARRY_HEIGHT]);
    }

    fn pos(&self, object: &str) -> Vec3 {
        self.state.object(object).expect("library object").pos
    }
}

/// A hand-written primitive sequence that completes a library task from
/// `state`.
pub fn scripted_actions(task: &TaskSpec, state: &WorldState) -> Result<Vec<HybridAction>> {
    let mut s = Script {
        state: state.clone(),
        actions: Vec::new(),
    };
    match task.name.as_str() {
        "ReachPoint" => {
            let g = s.pos("goal");
            s.reach(g);
        }
        "TwoStage" => {
            let (a, b) = (s.pos("zone_a"), s.pos("zone_b"));
            s.reach(a);
            s.reach(b);
        }
        "Stack" => {
            s.grasp("cubeA");
            s.carry_over("cubeB");
            s.apply(HybridAction::release());
        }
        "NutAssembly" => {
            s.grasp("nut");
            s.carry_over("peg");
            s.apply(HybridAction::release());
        }
        "Cleanup" => {
            let (j, sp) = (s.pos("jello"), s.pos("spam"));
            // Push the jello away from the spam, toward the table centre if
            // that direction would leave the workspace.
            let mut d = [j[0] - sp[0], j[1] - sp[1]];
            let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
            d = [d[0] / n, d[1] / n];
            let end = [j[0] + 0.17 * d[0], j[1] + 0.17 * d[1]];
            if !(0.05..0.95).contains(&end[0]) || !(0.05..0.95).contains(&end[1]) {
                let c = [0.5 - j[0], 0.5 - j[1]];
                let n = (c[0] * c[0] + c[1] * c[1]).sqrt().max(1e-9);
                d = [c[0] / n, c[1] / n];
            }
            let approach = [j[0] - 0.02 * d[0], j[1] - 0.02 * d[1], j[2]];
            s.reach(approach);
            s.apply(HybridAction::push(approach, [0.15 * d[0], 0.15 * d[1]]));
            s.grasp("spam");
            s.carry_over("bin");
            s.apply(HybridAction::release());
        }
        "PegInsertion" => {
            s.grasp("peg");
            s.carry_over("hole");
            s.apply(HybridAction::release());
        }
        other => return Err(EnvError::UnknownTask(other.into())),
    }
    Ok(s.actions)
}

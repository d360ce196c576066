use crate::{EnvError, Labeling, ObjectSpec, Predicate, Result, TaskSpec};

pub const TASK_NAMES: [&str; 6] = [
    "ReachPoint",
    "TwoStage",
    "Stack",
    "NutAssembly",
    "Cleanup",
    "PegInsertion",
];

const HORIZON: usize = 25;
const ACTION_COST: f64 = 0.01;

fn table_object(name: &str, half_extent: f64, movable: bool, support: bool) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        half_extent,
        spawn_lo: [0.2, 0.2, half_extent],
        spawn_hi: [0.8, 0.8, half_extent],
        movable,
        support,
    }
}

fn marker(name: &str, lo: [f64; 3], hi: [f64; 3]) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        half_extent: 0.0,
        spawn_lo: lo,
        spawn_hi: hi,
        movable: false,
        support: false,
    }
}

fn label(prop: &str, predicate: Predicate) -> Labeling {
    Labeling {
        prop: prop.into(),
        predicate,
    }
}

fn over(object: &str, radius: f64) -> Predicate {
    Predicate::GripperOverXy {
        object: object.into(),
        radius,
    }
}

fn holding(object: &str) -> Predicate {
    Predicate::Holding { object: object.into() }
}

fn task(name: &str, objects: Vec<ObjectSpec>, labels: Vec<Labeling>, formula: &str) -> TaskSpec {
    TaskSpec {
        name: name.into(),
        objects,
        labels,
        formula: formula.into(),
        horizon: HORIZON,
        action_cost: ACTION_COST,
        min_separation: 0.1,
        fresh_start: true,
    }
}

pub fn task_library() -> Vec<TaskSpec> {
    let reach = task(
        "ReachPoint",
        vec![marker("goal", [0.25, 0.25, 0.0], [0.75, 0.75, 0.0])],
        vec![label("reached", over("goal", 0.1))],
        "F reached",
    );
    let mut two_stage = task(
        "TwoStage",
        vec![
            marker("zone_a", [0.2, 0.2, 0.0], [0.8, 0.8, 0.0]),
            marker("zone_b", [0.2, 0.2, 0.0], [0.8, 0.8, 0.0]),
        ],
        vec![
            label("zone_a", over("zone_a", 0.1)),
            label("zone_b", over("zone_b", 0.1)),
        ],
        "F (zone_a & F zone_b)",
    );
    two_stage.min_separation = 0.3;
    let stack = task(
        "Stack",
        vec![
            table_object("cubeA", 0.025, true, false),
            table_object("cubeB", 0.025, true, true),
        ],
        vec![
            label("cubeA_grasped", holding("cubeA")),
            label(
                "cubeA_on_cubeB",
                Predicate::RestingOn {
                    object: "cubeA".into(),
                    base: "cubeB".into(),
                    radius: 0.03,
                },
            ),
        ],
        "F (cubeA_grasped & F cubeA_on_cubeB)",
    );
    let nut = task(
        "NutAssembly",
        vec![
            table_object("nut", 0.02, true, false),
            table_object("peg", 0.05, false, true),
        ],
        vec![
            label("nut_grasped", holding("nut")),
            label(
                "nut_on_peg",
                Predicate::RestingOn {
                    object: "nut".into(),
                    base: "peg".into(),
                    radius: 0.03,
                },
            ),
        ],
        "F (nut_grasped & F nut_on_peg)",
    );
    let cleanup = task(
        "Cleanup",
        vec![
            table_object("jello", 0.03, true, false),
            table_object("spam", 0.025, true, false),
            table_object("bin", 0.0, false, false),
        ],
        vec![
            label(
                "jello_pushed",
                Predicate::Displaced {
                    object: "jello".into(),
                    distance: 0.1,
                },
            ),
            label("spam_grasped", holding("spam")),
            label(
                "spam_in_bin",
                Predicate::InsideBelow {
                    object: "spam".into(),
                    target: "bin".into(),
                    radius: 0.06,
                    z_max: 0.1,
                },
            ),
        ],
        "F (jello_pushed & F (spam_grasped & F spam_in_bin))",
    );
    let peg = task(
        "PegInsertion",
        vec![
            table_object("peg", 0.04, true, false),
            table_object("hole", 0.0, false, false),
        ],
        vec![
            label("peg_grasped", holding("peg")),
            label(
                "hole_reached",
                Predicate::HeldNearXy {
                    object: "peg".into(),
                    target: "hole".into(),
                    radius: 0.05,
                },
            ),
            label(
                "peg_inserted",
                Predicate::InsideBelow {
                    object: "peg".into(),
                    target: "hole".into(),
                    radius: 0.03,
                    z_max: 0.06,
                },
            ),
        ],
        "F (peg_grasped & F (hole_reached & F peg_inserted))",
    );
    vec![reach, two_stage, stack, nut, cleanup, peg]
}

pub fn task_by_name(name: &str) -> Result<TaskSpec> {
    task_library()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| EnvError::UnknownTask(name.into()))
}

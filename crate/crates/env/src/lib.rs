//! A kinematic tabletop world driven by five parameterized behavior
//! primitives, with per-task labeling functions and LTL task formulas.
//!
//! ```
//! use hytl_env::{reset, task_by_name, scripted_actions};
//!
//! let task = task_by_name("PegInsertion").unwrap();
//! let state = reset(&task, 3).unwrap();
//! let mut s = state.clone();
//! for action in scripted_actions(&task, &state).unwrap() {
//!     s = task.step(&s, &action).unwrap().state;
//! }
//! assert!(task.label(&s).contains(task.alphabet().id("peg_inserted").unwrap()));
//! ```

mod error;
mod library;
mod primitive;
mod scripted;
mod task;
pub mod trajectory;
mod world;

pub use error::EnvError;
pub use library::{task_by_name, task_library, TASK_NAMES};
pub use primitive::{execute, HybridAction, PrimitiveKind, MICRO_STEP_CAP, P_MAX};
pub use scripted::scripted_actions;
pub use task::{reset, Labeling, ObjectSpec, Predicate, StepOutcome, TaskSpec};
pub use world::{Object, Vec3, WorldState, GRIPPER_START};

pub type Result<T> = std::result::Result<T, EnvError>;

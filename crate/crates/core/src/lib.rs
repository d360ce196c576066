//! Hierarchical temporal-logic-guided RL: a waypoint planner over a hybrid
//! (primitive, parameter) soft actor-critic, with a Transformer task
//! encoder and AttCAT token attributions.

pub mod agent;
pub mod attcat;
mod config;
mod error;
pub mod gradsuite;
pub mod harness;
pub mod planner;
pub mod replay;
pub mod sac;

pub use agent::{Agent, Driver, EpisodeTrace, LossReport, Mode};
pub use config::RunConfig;
pub use error::{CoreError, Result};
pub use harness::{evaluate, train, train_with, EvalRow, TrainOutcome};

use thiserror::Error;

use crate::PrimitiveKind;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("could not place objects for task {task} after {attempts} attempts")]
    LayoutInfeasible { task: String, attempts: usize },
    #[error("{kind:?} takes {expected} parameters, got {got}")]
    ArityMismatch {
        kind: PrimitiveKind,
        expected: usize,
        got: usize,
    },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Ltl(#[from] hytl_ltl::LtlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

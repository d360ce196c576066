use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Autodiff(#[from] hytl_autodiff::AutodiffError),
    #[error(transparent)]
    Nn(#[from] hytl_nn::NnError),
    #[error(transparent)]
    Env(#[from] hytl_env::EnvError),
    #[error(transparent)]
    Ltl(#[from] hytl_ltl::LtlError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("replay holds {have} transitions, a batch needs {need}")]
    ReplayUnderfilled { have: usize, need: usize },
    #[error("class {class} outside {classes} probe classes")]
    InvalidClass { class: usize, classes: usize },
    #[error("model is not trained: {0}")]
    UntrainedModel(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

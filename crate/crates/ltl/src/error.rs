use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtlError {
    #[error("syntax error at {position}: expected {}, found {found}", expected.join(" or "))]
    SyntaxError {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown proposition `{name}` at {position}")]
    UnknownProposition { name: String, position: usize },
    #[error("negation at {position} must apply directly to a proposition")]
    NegationNotOnLiteral { position: usize },
    #[error("task reward r_phi must be positive, got {0}")]
    NonPositiveTaskReward(f64),
    #[error("formula needs {needed} tokens but the maximum length is {max}")]
    FormulaTooLong { needed: usize, max: usize },
    #[error("alphabet: {0}")]
    Alphabet(String),
}

//! Co-safe LTL over finite words.
//!
//! Formulas are kept in negation normal form at the literal level, which
//! keeps every accepted formula in the co-safe fragment and makes
//! [`progress`] total. A [`FormulaTable`] interns formulas so progressed
//! task states can be stored as small integer ids.

mod alphabet;
mod enumerate;
mod error;
mod formula;
mod parse;
mod progress;
mod reward;
mod table;
mod tokens;

pub use alphabet::{Alphabet, Assignment, Prop, PropId};
pub use enumerate::{all_words, enumerate_formulas};
pub use error::LtlError;
pub use formula::Formula;
pub use parse::{parse, parse_inferring_alphabet};
pub use progress::{progress, satisfies, simplify};
pub use reward::{shaped_reward, Verdict};
pub use table::{FormulaId, FormulaTable, ProgressOutcome};
pub use tokens::{Token, TokenVocab};

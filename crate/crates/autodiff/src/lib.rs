//! Define-by-run reverse-mode automatic differentiation over small dense
//! `f64` tensors (rank ≤ 3).
//!
//! A [`Tape`] records every operation applied to its [`Tensor`] handles.
//! Calling [`Tape::backward`] on a scalar walks the tape in reverse and
//! returns [`Gradients`] for every node that depends on a trainable leaf.
//! Learnable weights live in a [`ParamStore`], which binds them onto a tape
//! for one forward/backward pass and owns the Adam state.
//!
//! ```
//! use hytl_autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.variable(vec![2.0], &[1]);
//! let y = tape.variable(vec![3.0], &[1]);
//! let z = x.mul(y).unwrap().sum_all();
//! let grads = tape.backward(z).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &[3.0]);
//! ```

#![allow(clippy::should_implement_trait, clippy::needless_range_loop)]

mod backward;
pub mod checkpoint;
mod error;
pub mod gradcheck;
mod ops;
mod param;
mod shape;
mod tape;

pub use backward::Gradients;
pub use error::{AutodiffError, Result};
pub use param::{AdamConfig, Bound, ParamId, ParamStore};
pub use shape::Shape;
pub use tape::{Tape, Tensor};

//! Network building blocks over [`hytl_autodiff`]: affine layers, MLPs, a
//! GRU cell and a pre-norm Transformer encoder that records its attention
//! maps and per-layer token activations.
//!
//! Blocks only hold [`ParamId`](hytl_autodiff::ParamId)s; weights live in a
//! caller-owned [`ParamStore`](hytl_autodiff::ParamStore) and every forward
//! pass reads them through a [`Bound`](hytl_autodiff::Bound) view.

mod error;
mod gru;
mod linear;
mod transformer;

pub use error::{NnError, Result};
pub use gru::GruCell;
pub use linear::{xavier_uniform, Activation, Linear, Mlp};
pub use transformer::{sinusoidal, EncoderOutput, Pooling, TransformerConfig, TransformerEncoder};

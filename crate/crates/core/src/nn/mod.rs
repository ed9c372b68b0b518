//! A small feed-forward network engine.
//!
//! Networks are fully connected with ReLU hidden layers and a linear output
//! layer. Hidden-layer outputs can be masked by a [`DropoutMask`] using
//! inverted dropout: kept units are scaled by `1 / keep_prob`, so the
//! all-ones mask reproduces the plain forward pass and no inference-time
//! rescaling exists. Gradients are computed by hand and applied with
//! [`Adam`].

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, Adam, AdamConfig};
pub use mlp::{BatchCache, DropoutMask, ForwardCache, Gradients, Mlp};

//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Everything is `f64` and batch-major: inputs are `(batch, features)`.

mod adam;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{Activation, Backward, GradientTape, Mlp, MlpGrads};

//! Small dense feed-forward network engine: forward pass, hand-written
//! backpropagation, Adam, inverted dropout and L1/L2 penalty hooks.

mod adam;
mod gradcheck;
mod loss;
mod matrix;
mod mlp;

pub use adam::{
    adam_step, add_regularization_gradient, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
};
pub use gradcheck::{compare_with_finite_differences, gradient_check};
pub use loss::{one_hot, softmax_cross_entropy, softmax_in_place, softmax_rows};
pub use matrix::{argmax, Matrix};
pub use mlp::{Activation, ForwardTrace, Gradients, MlpModel};

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix must have positive dimensions, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value produced during {0}")]
    NonFinite(&'static str),
}

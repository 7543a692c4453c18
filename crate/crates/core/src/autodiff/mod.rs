//! Dense `f64` tensors, a per-pass reverse-mode graph, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod funcs;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use funcs::{cross_entropy, log_softmax, softmax};
pub use gradcheck::{analytic_grads, grad_check};
pub use graph::{AttnSpec, Gradients, Graph, Var};
pub use params::ParamSet;
pub use tensor::Tensor;

//! Reverse-mode automatic differentiation over N×C×H×W tensors.
//!
//! The graph is rebuilt for every forward pass. Parameters enter as leaves
//! through [`Graph::param`], losses are scalar nodes, and
//! [`Graph::backward`] fills the gradient buffers of every differentiable
//! leaf reachable from the loss.

mod adam;
pub mod conv;
mod graph;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Direction, Graph, LinearMap, Var};
pub use tensor::{Shape, Tensor};

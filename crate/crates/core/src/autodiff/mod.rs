//! Minimal reverse-mode differentiation: 2-D tensors, a recording graph,
//! parameter storage with a checkpoint format, and Adam.

mod graph;
mod optim;
mod params;
mod tensor;

pub use graph::{softmax_in_place, Graph, Var};
pub use optim::{Adam, AdamConfig};
pub use params::{Grads, ParamId, ParamStore, CHECKPOINT_VERSION};
pub use tensor::Tensor;

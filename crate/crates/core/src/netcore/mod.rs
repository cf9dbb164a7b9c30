//! The track-center regression network: layers, forward/backward, updates
//! and the NNW weight file format.

mod layer;
mod network;
pub mod nnw;
mod optim;

pub use layer::{tanh_sat, Conv2d, Layer, LayerKind, Linear, MaxPool2d, TANH_LIMIT};
pub use network::{Gradients, NetError, Network, Trace, CANONICAL_SIDE};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};

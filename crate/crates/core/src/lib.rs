//! Quantization-aware training for spiking neural networks.
//!
//! Weights pass through a differentiable quantizer built from a sum of
//! temperature sigmoids during training and through the matching step
//! function at inference. Networks of LIF neurons are trained with
//! surrogate-gradient BPTT on frames integrated from event streams, then
//! exported with bit-packed low-bit weights.

// NaN-rejecting `!(x > 0.0)` checks and index loops over parallel arrays are
// deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod data;
pub mod error;
pub mod model_io;
pub mod network;
pub mod neuron;
pub mod quantizer;
pub mod trainer;

pub use error::{Error, Result};
pub use network::{build_network, Mode, Network, NetworkSpec};
pub use quantizer::Precision;

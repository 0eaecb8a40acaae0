//! Minimal reverse-mode automatic differentiation and the dense networks
//! built on it.
//!
//! A [`Tape`] records scalar primitives; [`MlpNetwork`] evaluates on or off
//! the tape; [`AdamState`] updates a flat parameter vector. A tape is
//! single-threaded, but distinct tapes and networks are independent and may
//! be used concurrently.

mod adam;
mod network;
mod tape;

pub use adam::AdamState;
pub use network::{Activation, BoundNet, MlpNetwork, OutputMap};
pub use tape::{Dual, Gradients, Tape, Var};

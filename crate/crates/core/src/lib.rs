//! Dual-format multilingual evaluation and FFN key-neuron probing.
//!
//! - [`dualset`] builds language x culture question sets from templates.
//! - [`evalkit`] scores short answers and reports quadrant and gap metrics.
//! - [`tinylm`] is a small instrumentable transformer used as a probing target.
//! - [`trace`] stores per-question activation traces.
//! - [`probe`] extracts key neurons and specialization proportions from traces.
//! - [`stats`] correlates neuron counts with scores and runs masking ablations.

mod container;
pub mod dualset;
pub mod evalkit;
mod neuron;
pub mod probe;
pub mod seed;
pub mod stats;
pub mod tinylm;
pub mod trace;

pub use neuron::NeuronId;

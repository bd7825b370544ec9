use std::fmt;

use serde::{Deserialize, Serialize};

/// One FFN neuron: coordinate `neuron` of the post-activation vector at `layer`.
///
/// Ordering is by layer first, then neuron, which is also the export order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub neuron: usize,
}

impl NeuronId {
    pub fn new(neuron: usize, layer: usize) -> Self {
        Self { layer, neuron }
    }

    pub fn in_range(&self, num_layers: usize, ffn_width: usize) -> bool {
        self.layer < num_layers && self.neuron < ffn_width
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(j={}, l={})", self.neuron, self.layer)
    }
}

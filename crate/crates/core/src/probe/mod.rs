//! Key-neuron extraction and specialized-neuron proportions.

mod export;
mod extract;
mod proportion;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::neuron::NeuronId;
pub use export::{read_key_set, write_key_set};
pub use extract::extract_key_neurons;
pub use proportion::{
    aggregate_proportions, random_neuron_sample, specialized_proportion, PairProportion,
    ProportionPair, SpecializationReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("degenerate threshold {spec}: needs {needed} candidates but only {available} values exist")]
    DegenerateThreshold {
        spec: ThresholdSpec,
        needed: usize,
        available: usize,
    },
    #[error("invalid threshold {0}")]
    InvalidThreshold(ThresholdSpec),
    #[error("dimension mismatch: {left:?} vs {right:?} (layers, ffn_width)")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("no key-neuron sets to combine")]
    NoSets,
    #[error("proportion undefined: target set is empty")]
    EmptyTarget,
    #[error("all {0} pairs were skipped; nothing to average")]
    EmptyReport(usize),
    #[error("sample of {count} exceeds population {population}")]
    SampleTooLarge { count: usize, population: usize },
    #[error("neuron {neuron} outside {num_layers} x {ffn_width}")]
    OutOfRange {
        neuron: NeuronId,
        num_layers: usize,
        ffn_width: usize,
    },
    #[error("key-set file: {0}")]
    Format(String),
}

/// How "highly activated" is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdSpec {
    /// Per layer, the k-th largest value pooled over all response tokens and
    /// neurons; every neuron reaching it on some token is kept.
    LayerTopK { k: usize },
    /// As `LayerTopK`, pooled across all layers at once.
    GlobalTopK { k: usize },
    /// Neurons whose max-over-tokens value ranks in the top `fraction` of all
    /// per-neuron maxima.
    GlobalTopFraction { fraction: f64 },
}

impl ThresholdSpec {
    pub const DEFAULT: ThresholdSpec = ThresholdSpec::LayerTopK { k: 5 };

    pub fn validate(&self) -> Result<(), ProbeError> {
        let ok = match *self {
            ThresholdSpec::LayerTopK { k } | ThresholdSpec::GlobalTopK { k } => k >= 1,
            ThresholdSpec::GlobalTopFraction { fraction } => fraction > 0.0 && fraction <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ProbeError::InvalidThreshold(*self))
        }
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::LayerTopK { k } => write!(f, "layer_top_k(k={k})"),
            ThresholdSpec::GlobalTopK { k } => write!(f, "global_top_k(k={k})"),
            ThresholdSpec::GlobalTopFraction { fraction } => {
                write!(f, "global_top_fraction(f={fraction})")
            }
        }
    }
}

/// Deduplicated neurons plus the `(L, dm)` they index into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyNeuronSet {
    neurons: BTreeSet<NeuronId>,
    num_layers: usize,
    ffn_width: usize,
    pub provenance: String,
}

impl KeyNeuronSet {
    pub fn empty(num_layers: usize, ffn_width: usize, provenance: impl Into<String>) -> Self {
        Self {
            neurons: BTreeSet::new(),
            num_layers,
            ffn_width,
            provenance: provenance.into(),
        }
    }

    pub fn new(
        neurons: impl IntoIterator<Item = NeuronId>,
        num_layers: usize,
        ffn_width: usize,
        provenance: impl Into<String>,
    ) -> Result<Self, ProbeError> {
        let mut set = Self::empty(num_layers, ffn_width, provenance);
        for n in neurons {
            set.insert(n)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: NeuronId) -> Result<bool, ProbeError> {
        if !id.in_range(self.num_layers, self.ffn_width) {
            return Err(ProbeError::OutOfRange {
                neuron: id,
                num_layers: self.num_layers,
                ffn_width: self.ffn_width,
            });
        }
        Ok(self.neurons.insert(id))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.num_layers, self.ffn_width)
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn contains(&self, id: &NeuronId) -> bool {
        self.neurons.contains(id)
    }

    /// Neurons in (layer, neuron) order.
    pub fn iter(&self) -> impl Iterator<Item = &NeuronId> {
        self.neurons.iter()
    }

    pub fn neurons(&self) -> &BTreeSet<NeuronId> {
        &self.neurons
    }

    pub fn is_subset(&self, other: &KeyNeuronSet) -> bool {
        self.neurons.is_subset(&other.neurons)
    }

    fn check_dims(&self, other: &KeyNeuronSet) -> Result<(), ProbeError> {
        if self.dims() != other.dims() {
            return Err(ProbeError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

/// Set union of per-question key sets into a dataset-level key set.
pub fn union_key_neurons(sets: &[KeyNeuronSet]) -> Result<KeyNeuronSet, ProbeError> {
    let first = sets.first().ok_or(ProbeError::NoSets)?;
    let mut out = KeyNeuronSet::empty(first.num_layers, first.ffn_width, "union");
    for s in sets {
        first.check_dims(s)?;
        out.neurons.extend(s.neurons.iter().copied());
    }
    Ok(out)
}

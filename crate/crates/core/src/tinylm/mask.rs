use std::collections::BTreeSet;

use crate::neuron::NeuronId;

use super::ModelError;

/// Neurons whose post-activation value is replaced by 0 before `W_down`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskSpec {
    masked: BTreeSet<NeuronId>,
}

impl MaskSpec {
    pub fn new(
        neurons: impl IntoIterator<Item = NeuronId>,
        num_layers: usize,
        ffn_width: usize,
    ) -> Result<Self, ModelError> {
        let masked: BTreeSet<NeuronId> = neurons.into_iter().collect();
        if let Some(bad) = masked.iter().find(|n| !n.in_range(num_layers, ffn_width)) {
            return Err(ModelError::MaskOutOfRange {
                neuron: *bad,
                num_layers,
                ffn_width,
            });
        }
        Ok(Self { masked })
    }

    /// Every neuron of an `L x dm` model.
    pub fn full(num_layers: usize, ffn_width: usize) -> Self {
        Self {
            masked: (0..num_layers)
                .flat_map(|l| (0..ffn_width).map(move |j| NeuronId::new(j, l)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.masked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked.is_empty()
    }

    pub fn contains(&self, id: NeuronId) -> bool {
        self.masked.contains(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NeuronId> {
        self.masked.iter()
    }

    /// Per-layer keep flags (`true` = pass through).
    pub(crate) fn keep_table(&self, num_layers: usize, ffn_width: usize) -> Vec<Vec<bool>> {
        let mut table = vec![vec![true; ffn_width]; num_layers];
        for n in &self.masked {
            table[n.layer][n.neuron] = false;
        }
        table
    }
}

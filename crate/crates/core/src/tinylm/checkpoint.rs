//! Weight checkpoints: magic `"NWTS"`, same container as traces, tensors in
//! [`ModelWeights::tensors`] order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::container::{self, ContainerError};

use super::{ModelConfig, ModelError, ModelWeights};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"NWTS";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

pub fn save_weights<W: Write>(weights: &ModelWeights, sink: &mut W) -> Result<u64, ModelError> {
    weights.validate()?;
    let tensors = weights.tensors();
    let header = CheckpointHeader {
        config: weights.config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, m)| TensorEntry {
                name: name.clone(),
                shape: [m.rows, m.cols],
            })
            .collect(),
    };
    let bytes = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut written = container::write_preamble(sink, &WEIGHTS_MAGIC, &bytes)?;
    let mut crc = crc32fast::Hasher::new();
    for (_, m) in &tensors {
        written += container::write_values(sink, &m.data, &mut crc)?;
    }
    Ok(written)
}

pub fn load_weights<R: Read>(source: &mut R) -> Result<ModelWeights, ModelError> {
    let bytes = container::read_preamble(source, &WEIGHTS_MAGIC).map_err(checkpoint_err)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut weights = ModelWeights::zeros(&header.config)?;
    let expected: Vec<(String, [usize; 2])> = weights
        .tensors()
        .iter()
        .map(|(n, m)| (n.clone(), [m.rows, m.cols]))
        .collect();
    if expected.len() != header.tensors.len()
        || expected
            .iter()
            .zip(&header.tensors)
            .any(|((n, s), e)| *n != e.name || *s != e.shape)
    {
        return Err(ModelError::Checkpoint(
            "tensor list does not match the declared config".into(),
        ));
    }
    let mut crc = crc32fast::Hasher::new();
    for m in weights.tensors_mut() {
        let mut data = Vec::new();
        container::read_values(source, &mut data, m.rows * m.cols, &mut crc)
            .map_err(checkpoint_err)?;
        m.data = data;
    }
    if container::has_trailing(source)? {
        return Err(ModelError::Checkpoint("trailing bytes after tensors".into()));
    }
    weights.validate()?;
    Ok(weights)
}

fn checkpoint_err(e: ContainerError) -> ModelError {
    match e {
        ContainerError::Io(io) => ModelError::Io(io),
        other => ModelError::Checkpoint(other.to_string()),
    }
}

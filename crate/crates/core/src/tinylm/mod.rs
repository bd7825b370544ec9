//! A seeded miniature decoder-only transformer with FFN recording and masking.
//!
//! Each block is `x += Attn(x)` followed by `x += W_down · act(W_up · x)`, with
//! no biases and no normalization. The recorded "neuron" value is the
//! post-activation scalar `act(W_up · x)_j`; masking replaces that same scalar
//! with 0 before `W_down`, after it has been recorded.

mod checkpoint;
mod config;
mod generate;
mod mask;
mod planted;
mod tokenizer;
mod weights;

use std::io;

use thiserror::Error;

use crate::neuron::NeuronId;

pub use checkpoint::{load_weights, save_weights, WEIGHTS_MAGIC};
pub use config::{ActivationKind, GenerationSettings, ModelConfig, KV_BUDGET_ELEMENTS, STOP_TOKEN};
pub use generate::{
    final_activations, final_logits, generate_with_recording, record_forced, Generation, TraceMeta,
};
pub use mask::MaskSpec;
pub use planted::{plant_gate_model, GatePlant};
pub use tokenizer::ByteTokenizer;
pub use weights::{init_model, LayerWeights, Matrix, ModelWeights};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("capacity exceeded: max_seq_len {max_seq_len} x d_model {d_model} x {num_layers} layers overflows the KV budget of {budget} elements")]
    Capacity {
        max_seq_len: usize,
        d_model: usize,
        num_layers: usize,
        budget: usize,
    },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("context overflow: prompt of {prompt_len} + {new_tokens} new tokens exceeds max_seq_len {max_seq_len}")]
    ContextOverflow {
        prompt_len: usize,
        new_tokens: usize,
        max_seq_len: usize,
    },
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("token {token} is not encodable with vocab_size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    #[error("masked neuron {neuron} outside {num_layers} layers x {ffn_width} neurons")]
    MaskOutOfRange {
        neuron: NeuronId,
        num_layers: usize,
        ffn_width: usize,
    },
    #[error("cannot plant gate: {0}")]
    PlantInfeasible(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

//! Hand-built weights in which one known FFN neuron decides one prediction.
//!
//! Residual-stream layout:
//!
//! | dim | role |
//! |-----|------|
//! | 0 | trigger flag (set by the trigger token's embedding) |
//! | 1 | trigger presence, written by layer-0 uniform attention |
//! | 2 | constant 1 on every token |
//! | 3 | gate output, written by the gate neuron through `W_down` |
//! | 4 | "answer emitted" flag on the gated and fallback tokens |
//! | 5.. | scratch, carries small random signal for the other neurons |
//!
//! Logits read only dims 2-4: fallback = dim 2, gated = dim 3, stop = `S * dim 4`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::neuron::NeuronId;

use super::{ModelConfig, ModelError, ModelWeights, STOP_TOKEN};

const DIM_TRIGGER: usize = 0;
const DIM_PRESENCE: usize = 1;
const DIM_BIAS: usize = 2;
const DIM_GATE: usize = 3;
const DIM_EMITTED: usize = 4;
const FIRST_SCRATCH: usize = 5;

/// Offset on the gate neuron's pre-activation so it stays negative without a trigger.
const GATE_OFFSET: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatePlant {
    pub trigger: u32,
    pub gated_output: u32,
    /// Token predicted when the gate is silent.
    pub fallback_output: u32,
    pub gate: NeuronId,
}

impl GatePlant {
    /// Picks the smallest free non-stop token id as the fallback output.
    pub fn new(trigger: u32, gated_output: u32, gate: NeuronId) -> Self {
        let fallback_output = (1..)
            .find(|t| *t != trigger && *t != gated_output)
            .expect("unbounded range");
        Self {
            trigger,
            gated_output,
            fallback_output,
            gate,
        }
    }

    pub fn with_fallback(mut self, token: u32) -> Self {
        self.fallback_output = token;
        self
    }

    /// Pre-activation weight on the presence channel. The presence value is at
    /// least `1 / max_seq_len` whenever the trigger occurs in the context.
    fn presence_gain(config: &ModelConfig) -> f32 {
        2.0 * config.max_seq_len as f32
    }
}

/// Constructs a [`ModelWeights`] realising `plant` on top of `config`'s shapes.
///
/// With the trigger in the prompt the gate neuron's activation is at least
/// `1.5` (ReLU) while every other neuron stays below `0.1`; the greedy next
/// token is `gated_output`. Zeroing the gate makes `fallback_output` win. After
/// either answer token the stop token wins, so a prompt that already ends in
/// one produces an empty response.
pub fn plant_gate_model(config: &ModelConfig, plant: &GatePlant) -> Result<ModelWeights, ModelError> {
    config.validate()?;
    let infeasible = |msg: String| Err(ModelError::PlantInfeasible(msg));
    if config.ffn_width < 2 {
        return infeasible(format!("ffn_width must be >= 2, got {}", config.ffn_width));
    }
    if config.d_model < FIRST_SCRATCH {
        return infeasible(format!(
            "d_model must be >= {FIRST_SCRATCH}, got {}",
            config.d_model
        ));
    }
    if !plant.gate.in_range(config.num_layers, config.ffn_width) {
        return infeasible(format!("gate neuron {} out of range", plant.gate));
    }
    let tokens = [plant.trigger, plant.gated_output, plant.fallback_output];
    if tokens.iter().any(|&t| t == STOP_TOKEN || t as usize >= config.vocab_size) {
        return infeasible(format!(
            "trigger/gated/fallback tokens {tokens:?} must be non-stop ids below vocab_size {}",
            config.vocab_size
        ));
    }
    if plant.trigger == plant.gated_output
        || plant.trigger == plant.fallback_output
        || plant.gated_output == plant.fallback_output
    {
        return infeasible(format!("trigger/gated/fallback tokens {tokens:?} must be distinct"));
    }

    let mut w = ModelWeights::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scratch = Normal::new(0.0f32, 0.1).expect("valid std");
    let tiny = Normal::new(0.0f32, 0.002).expect("valid std");
    let d = config.d_model;

    for t in 0..config.vocab_size {
        w.token_embedding.set(t, DIM_BIAS, 1.0);
        for c in FIRST_SCRATCH..d {
            w.token_embedding.set(t, c, scratch.sample(&mut rng));
        }
    }
    w.token_embedding.set(plant.trigger as usize, DIM_TRIGGER, 1.0);
    w.token_embedding.set(plant.gated_output as usize, DIM_EMITTED, 1.0);
    w.token_embedding.set(plant.fallback_output as usize, DIM_EMITTED, 1.0);
    for p in 0..config.max_seq_len {
        for c in FIRST_SCRATCH..d {
            w.position_embedding.set(p, c, scratch.sample(&mut rng));
        }
    }

    // Wq = Wk = 0 gives uniform causal attention; layer 0 averages the trigger flag.
    w.layers[0].wv.set(DIM_PRESENCE, DIM_TRIGGER, 1.0);
    w.layers[0].wo.set(DIM_PRESENCE, DIM_PRESENCE, 1.0);

    for (l, layer) in w.layers.iter_mut().enumerate() {
        for j in 0..config.ffn_width {
            if NeuronId::new(j, l) == plant.gate {
                continue;
            }
            layer.w_up.set(j, DIM_BIAS, rng.random_range(0.01f32..0.05));
            for c in FIRST_SCRATCH..d {
                layer.w_up.set(j, c, tiny.sample(&mut rng));
                layer.w_down.set(c, j, 0.01 * scratch.sample(&mut rng));
            }
        }
    }
    let gate_layer = &mut w.layers[plant.gate.layer];
    gate_layer
        .w_up
        .set(plant.gate.neuron, DIM_PRESENCE, GatePlant::presence_gain(config));
    gate_layer.w_up.set(plant.gate.neuron, DIM_BIAS, -GATE_OFFSET);
    gate_layer.w_down.set(DIM_GATE, plant.gate.neuron, 1.0);

    let stop_weight = 4.0 * GatePlant::presence_gain(config);
    w.output.set(plant.fallback_output as usize, DIM_BIAS, 1.0);
    w.output.set(plant.gated_output as usize, DIM_GATE, 1.0);
    w.output.set(STOP_TOKEN as usize, DIM_EMITTED, stop_weight);
    Ok(w)
}

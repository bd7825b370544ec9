use serde::{Deserialize, Serialize};

use super::ModelError;

/// Upper bound on `max_seq_len * d_model * num_layers * 2` (KV cache elements).
pub const KV_BUDGET_ELEMENTS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    /// tanh approximation. Probing fixtures should prefer ReLU, since thresholds
    /// compare signed values.
    Gelu,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Gelu => {
                const C: f32 = 0.797_884_6; // sqrt(2/pi)
                0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub ffn_width: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub max_seq_len: usize,
    pub activation: ActivationKind,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "vocab_size must be at least 2 (one id is the stop token), got {}",
                self.vocab_size
            )));
        }
        for (name, v) in [
            ("d_model", self.d_model),
            ("ffn_width", self.ffn_width),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("max_seq_len", self.max_seq_len),
        ] {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !self.d_model.is_multiple_of(self.num_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "num_heads ({}) must divide d_model ({})",
                self.num_heads, self.d_model
            )));
        }
        let kv = self
            .max_seq_len
            .checked_mul(self.d_model)
            .and_then(|v| v.checked_mul(self.num_layers))
            .and_then(|v| v.checked_mul(2));
        match kv {
            Some(n) if n <= KV_BUDGET_ELEMENTS => Ok(()),
            _ => Err(ModelError::Capacity {
                max_seq_len: self.max_seq_len,
                d_model: self.d_model,
                num_layers: self.num_layers,
                budget: KV_BUDGET_ELEMENTS,
            }),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.num_heads
    }
}

pub const STOP_TOKEN: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    /// 0.0 means greedy decoding.
    pub temperature: f32,
    pub max_new_tokens: usize,
    pub stop_tokens: Vec<u32>,
    /// Only consulted when `temperature > 0`.
    pub sample_seed: u64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_new_tokens: 1024,
            stop_tokens: vec![STOP_TOKEN],
            sample_seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelConfig {
        ModelConfig {
            vocab_size: 16,
            d_model: 8,
            ffn_width: 16,
            num_layers: 2,
            num_heads: 2,
            max_seq_len: 32,
            activation: ActivationKind::Relu,
            seed: 1,
        }
    }

    #[test]
    fn rejects_single_token_vocab() {
        let cfg = ModelConfig {
            vocab_size: 1,
            ..base()
        };
        assert!(matches!(cfg.validate(), Err(ModelError::InvalidConfig(_))));
    }

    #[test]
    fn rejects_heads_not_dividing_width() {
        let cfg = ModelConfig {
            num_heads: 3,
            ..base()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn capacity_budget() {
        let cfg = ModelConfig {
            max_seq_len: usize::MAX / 2,
            ..base()
        };
        assert!(matches!(cfg.validate(), Err(ModelError::Capacity { .. })));
    }

    #[test]
    fn generation_defaults() {
        let s = GenerationSettings::default();
        assert_eq!(s.temperature, 0.0);
        assert_eq!(s.max_new_tokens, 1024);
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(ActivationKind::Gelu.apply(0.0), 0.0);
        assert!((ActivationKind::Gelu.apply(1.0) - 0.841_192).abs() < 1e-5);
        assert_eq!(ActivationKind::Relu.apply(-2.0), 0.0);
    }
}

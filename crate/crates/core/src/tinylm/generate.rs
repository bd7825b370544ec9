use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trace::{ActivationTrace, TraceHeader, TRACE_FORMAT_VERSION};

use super::{GenerationSettings, MaskSpec, ModelError, ModelWeights};

/// Metadata copied into the header of a recorded trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceMeta {
    pub model_id: String,
    pub question_id: String,
    pub language: String,
    pub culture: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Response tokens, stop token excluded.
    pub response: Vec<u32>,
    pub trace: ActivationTrace,
}

/// Incremental forward pass with a private KV cache.
struct Session<'a> {
    weights: &'a ModelWeights,
    keep: Option<Vec<Vec<bool>>>,
    keys: Vec<Vec<f32>>,
    values: Vec<Vec<f32>>,
    pos: usize,
    x: Vec<f32>,
    q: Vec<f32>,
    kv: Vec<f32>,
    attn: Vec<f32>,
    proj: Vec<f32>,
    up: Vec<f32>,
    scores: Vec<f32>,
}

impl<'a> Session<'a> {
    fn new(weights: &'a ModelWeights, mask: Option<&MaskSpec>) -> Self {
        let cfg = &weights.config;
        let d = cfg.d_model;
        Self {
            weights,
            keep: mask
                .filter(|m| !m.is_empty())
                .map(|m| m.keep_table(cfg.num_layers, cfg.ffn_width)),
            keys: vec![Vec::new(); cfg.num_layers],
            values: vec![Vec::new(); cfg.num_layers],
            pos: 0,
            x: vec![0.0; d],
            q: vec![0.0; d],
            kv: vec![0.0; d],
            attn: vec![0.0; d],
            proj: vec![0.0; d],
            up: vec![0.0; cfg.ffn_width],
            scores: Vec::with_capacity(cfg.max_seq_len),
        }
    }

    /// Feeds one token, optionally appending its per-layer FFN activations
    /// (pre-mask) to `record`, and returns the next-token logits.
    fn step(&mut self, token: u32, mut record: Option<&mut Vec<f32>>) -> Vec<f32> {
        let w = self.weights;
        let cfg = &w.config;
        let d = cfg.d_model;
        let hd = cfg.head_dim();
        let scale = 1.0 / (hd as f32).sqrt();
        let pos = self.pos;

        for ((x, e), p) in self
            .x
            .iter_mut()
            .zip(w.token_embedding.row(token as usize))
            .zip(w.position_embedding.row(pos))
        {
            *x = e + p;
        }

        for (l, layer) in w.layers.iter().enumerate() {
            layer.wq.matvec(&self.x, &mut self.q);
            layer.wk.matvec(&self.x, &mut self.kv);
            self.keys[l].extend_from_slice(&self.kv);
            layer.wv.matvec(&self.x, &mut self.kv);
            self.values[l].extend_from_slice(&self.kv);

            let keys = &self.keys[l];
            let vals = &self.values[l];
            for h in 0..cfg.num_heads {
                let span = h * hd..(h + 1) * hd;
                let qh = &self.q[span.clone()];
                self.scores.clear();
                for p in 0..=pos {
                    let kp = &keys[p * d + span.start..p * d + span.end];
                    self.scores
                        .push(qh.iter().zip(kp).map(|(a, b)| a * b).sum::<f32>() * scale);
                }
                let max = self.scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut denom = 0.0;
                for s in self.scores.iter_mut() {
                    *s = (*s - max).exp();
                    denom += *s;
                }
                let out = &mut self.attn[span.clone()];
                out.fill(0.0);
                for (p, s) in self.scores.iter().enumerate() {
                    let a = s / denom;
                    let vp = &vals[p * d + span.start..p * d + span.end];
                    for (o, v) in out.iter_mut().zip(vp) {
                        *o += a * v;
                    }
                }
            }
            layer.wo.matvec(&self.attn, &mut self.proj);
            for (x, a) in self.x.iter_mut().zip(&self.proj) {
                *x += a;
            }

            layer.w_up.matvec(&self.x, &mut self.up);
            for u in self.up.iter_mut() {
                *u = cfg.activation.apply(*u);
            }
            if let Some(rec) = record.as_deref_mut() {
                rec.extend_from_slice(&self.up);
            }
            if let Some(keep) = &self.keep {
                for (u, k) in self.up.iter_mut().zip(&keep[l]) {
                    if !k {
                        *u = 0.0;
                    }
                }
            }
            layer.w_down.matvec(&self.up, &mut self.proj);
            for (x, f) in self.x.iter_mut().zip(&self.proj) {
                *x += f;
            }
        }

        self.pos += 1;
        let mut logits = vec![0.0; cfg.vocab_size];
        w.output.matvec(&self.x, &mut logits);
        logits
    }
}

fn check_inputs(
    weights: &ModelWeights,
    mask: Option<&MaskSpec>,
    prompt: &[u32],
    extra: usize,
) -> Result<(), ModelError> {
    let cfg = &weights.config;
    if prompt.is_empty() {
        return Err(ModelError::EmptyPrompt);
    }
    if let Some(&t) = prompt.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(ModelError::TokenOutOfRange {
            token: t,
            vocab_size: cfg.vocab_size,
        });
    }
    if let Some(mask) = mask {
        if let Some(bad) = mask
            .iter()
            .find(|n| !n.in_range(cfg.num_layers, cfg.ffn_width))
        {
            return Err(ModelError::MaskOutOfRange {
                neuron: *bad,
                num_layers: cfg.num_layers,
                ffn_width: cfg.ffn_width,
            });
        }
    }
    if prompt.len().saturating_add(extra) > cfg.max_seq_len {
        return Err(ModelError::ContextOverflow {
            prompt_len: prompt.len(),
            new_tokens: extra,
            max_seq_len: cfg.max_seq_len,
        });
    }
    Ok(())
}

fn greedy(logits: &[f32]) -> u32 {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best as u32
}

fn sample(logits: &[f32], temperature: f32, rng: &mut ChaCha8Rng) -> u32 {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let weights: Vec<f64> = logits
        .iter()
        .map(|&v| (((v - max) / temperature) as f64).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return i as u32;
        }
    }
    (weights.len() - 1) as u32
}

fn build_trace(
    weights: &ModelWeights,
    meta: &TraceMeta,
    tokens: usize,
    values: Vec<f32>,
) -> ActivationTrace {
    let header = TraceHeader {
        format_version: TRACE_FORMAT_VERSION,
        model_id: meta.model_id.clone(),
        num_layers: weights.config.num_layers,
        ffn_width: weights.config.ffn_width,
        question_id: if meta.question_id.is_empty() {
            "unnamed".into()
        } else {
            meta.question_id.clone()
        },
        language: meta.language.clone(),
        culture: meta.culture.clone(),
        num_response_tokens: tokens,
    };
    ActivationTrace::new(header, values).expect("recorded activations are finite and well-shaped")
}

/// Autoregressive decoding that records, for every response token, the FFN
/// activations of the forward step that produced it. The stop token is not part
/// of the response and its step is not recorded.
pub fn generate_with_recording(
    weights: &ModelWeights,
    mask: Option<&MaskSpec>,
    prompt: &[u32],
    settings: &GenerationSettings,
    meta: &TraceMeta,
) -> Result<Generation, ModelError> {
    if !(settings.temperature >= 0.0 && settings.temperature.is_finite()) {
        return Err(ModelError::InvalidConfig(format!(
            "temperature must be finite and >= 0, got {}",
            settings.temperature
        )));
    }
    check_inputs(weights, mask, prompt, settings.max_new_tokens)?;
    let mut session = Session::new(weights, mask);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.sample_seed);
    let mut pending = Vec::new();
    let mut logits = Vec::new();
    for (i, &t) in prompt.iter().enumerate() {
        let record = (i + 1 == prompt.len()).then_some(&mut pending);
        logits = session.step(t, record);
    }

    let mut response = Vec::new();
    let mut values = Vec::new();
    while response.len() < settings.max_new_tokens {
        let next = if settings.temperature == 0.0 {
            greedy(&logits)
        } else {
            sample(&logits, settings.temperature, &mut rng)
        };
        if settings.stop_tokens.contains(&next) {
            break;
        }
        response.push(next);
        values.append(&mut pending);
        if response.len() == settings.max_new_tokens {
            break;
        }
        logits = session.step(next, Some(&mut pending));
    }
    let trace = build_trace(weights, meta, response.len(), values);
    Ok(Generation { response, trace })
}

/// Records activations for a fixed response (teacher forcing) instead of a
/// free generation.
pub fn record_forced(
    weights: &ModelWeights,
    mask: Option<&MaskSpec>,
    prompt: &[u32],
    response: &[u32],
    meta: &TraceMeta,
) -> Result<ActivationTrace, ModelError> {
    check_inputs(weights, mask, prompt, response.len())?;
    if let Some(&t) = response
        .iter()
        .find(|&&t| t as usize >= weights.config.vocab_size)
    {
        return Err(ModelError::TokenOutOfRange {
            token: t,
            vocab_size: weights.config.vocab_size,
        });
    }
    let mut session = Session::new(weights, mask);
    let mut pending = Vec::new();
    for (i, &t) in prompt.iter().enumerate() {
        let record = (i + 1 == prompt.len()).then_some(&mut pending);
        session.step(t, record);
    }
    let mut values = Vec::new();
    for (i, &t) in response.iter().enumerate() {
        values.append(&mut pending);
        if i + 1 < response.len() {
            session.step(t, Some(&mut pending));
        }
    }
    Ok(build_trace(weights, meta, response.len(), values))
}

/// Next-token logits after feeding `tokens`.
pub fn final_logits(
    weights: &ModelWeights,
    mask: Option<&MaskSpec>,
    tokens: &[u32],
) -> Result<Vec<f32>, ModelError> {
    check_inputs(weights, mask, tokens, 0)?;
    let mut session = Session::new(weights, mask);
    let mut logits = Vec::new();
    for &t in tokens {
        logits = session.step(t, None);
    }
    Ok(logits)
}

/// Per-layer activations at the last position of `tokens` (`L x dm`, pre-mask).
pub fn final_activations(
    weights: &ModelWeights,
    mask: Option<&MaskSpec>,
    tokens: &[u32],
) -> Result<Vec<f32>, ModelError> {
    check_inputs(weights, mask, tokens, 0)?;
    let mut session = Session::new(weights, mask);
    let mut record = Vec::new();
    for (i, &t) in tokens.iter().enumerate() {
        let rec = (i + 1 == tokens.len()).then_some(&mut record);
        session.step(t, rec);
    }
    Ok(record)
}

use crate::trace::ActivationTrace;

use super::{KeyNeuronSet, NeuronId, ProbeError, ThresholdSpec};

/// Selects the neurons of `trace` that reach the threshold on at least one
/// response token.
///
/// Values are compared signed (no absolute value). Boundary ties are kept, so a
/// layer may contribute more than `k` neurons. A trace without response tokens
/// yields an empty set.
pub fn extract_key_neurons(
    trace: &ActivationTrace,
    threshold: &ThresholdSpec,
) -> Result<KeyNeuronSet, ProbeError> {
    threshold.validate()?;
    let layers = trace.num_layers();
    let width = trace.ffn_width();
    let tokens = trace.num_tokens();
    let mut out = KeyNeuronSet::empty(layers, width, trace.header().question_id.clone());
    if tokens == 0 {
        return Ok(out);
    }

    match *threshold {
        ThresholdSpec::LayerTopK { k } => {
            let available = tokens * width;
            if k > available {
                return Err(ProbeError::DegenerateThreshold {
                    spec: *threshold,
                    needed: k,
                    available,
                });
            }
            let mut pooled = Vec::with_capacity(available);
            for layer in 0..layers {
                pooled.clear();
                for t in 0..tokens {
                    pooled.extend_from_slice(trace.row(t, layer));
                }
                let cut = kth_largest(&mut pooled, k);
                keep_reaching(trace, layer, cut, &mut out);
            }
        }
        ThresholdSpec::GlobalTopK { k } => {
            let available = trace.values().len();
            if k > available {
                return Err(ProbeError::DegenerateThreshold {
                    spec: *threshold,
                    needed: k,
                    available,
                });
            }
            let mut pooled = trace.values().to_vec();
            let cut = kth_largest(&mut pooled, k);
            for layer in 0..layers {
                keep_reaching(trace, layer, cut, &mut out);
            }
        }
        ThresholdSpec::GlobalTopFraction { fraction } => {
            let maxima = neuron_maxima(trace);
            let count = top_count(fraction, maxima.len());
            let mut pooled = maxima.clone();
            let cut = kth_largest(&mut pooled, count);
            for (idx, m) in maxima.iter().enumerate() {
                if *m >= cut {
                    out.neurons.insert(NeuronId::new(idx % width, idx / width));
                }
            }
        }
    }
    Ok(out)
}

/// k-th largest (1-based) by total order; reorders `values`.
fn kth_largest(values: &mut [f32], k: usize) -> f32 {
    let idx = k - 1;
    let (_, kth, _) = values.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
    *kth
}

fn keep_reaching(trace: &ActivationTrace, layer: usize, cut: f32, out: &mut KeyNeuronSet) {
    for j in 0..trace.ffn_width() {
        if (0..trace.num_tokens()).any(|t| trace.value(t, layer, j) >= cut) {
            out.neurons.insert(NeuronId::new(j, layer));
        }
    }
}

/// Max over tokens for every neuron, indexed `layer * width + neuron`.
fn neuron_maxima(trace: &ActivationTrace) -> Vec<f32> {
    let width = trace.ffn_width();
    let mut maxima = vec![f32::NEG_INFINITY; trace.num_layers() * width];
    for t in 0..trace.num_tokens() {
        for layer in 0..trace.num_layers() {
            let row = trace.row(t, layer);
            for (m, v) in maxima[layer * width..(layer + 1) * width].iter_mut().zip(row) {
                *m = m.max(*v);
            }
        }
    }
    maxima
}

/// `ceil(fraction * n)` clamped to `[1, n]`, treating products within 1e-9 of an
/// integer as that integer.
pub(crate) fn top_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let count = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (count as usize).clamp(1, n)
}

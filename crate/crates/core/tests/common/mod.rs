//! Shared fixtures for integration tests. Also pulled into the CLI acceptance
//! target by path, so it only depends on `dualprobe`, `rand` and `rand_chacha`.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dualprobe::probe::ThresholdSpec;
use dualprobe::trace::{ActivationTrace, TraceHeader, TRACE_FORMAT_VERSION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn trace_from(tokens: usize, layers: usize, width: usize, values: Vec<f32>) -> ActivationTrace {
    ActivationTrace::new(
        TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            model_id: "oracle".into(),
            num_layers: layers,
            ffn_width: width,
            question_id: "q".into(),
            language: "en".into(),
            culture: "US".into(),
            num_response_tokens: tokens,
        },
        values,
    )
    .unwrap()
}

/// L in 1..=4, dm in 1..=64, tokens in 1..=8. Half the traces use a coarse
/// value grid so ties are common.
pub fn random_trace(seed: u64) -> ActivationTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = rng.random_range(1..=4);
    let width = rng.random_range(1..=64);
    let tokens = rng.random_range(1..=8);
    let coarse = rng.random_bool(0.5);
    let values = (0..tokens * layers * width)
        .map(|_| {
            if coarse {
                rng.random_range(-4i32..=8) as f32 * 0.25
            } else {
                rng.random_range(-3.0f32..3.0)
            }
        })
        .collect();
    trace_from(tokens, layers, width, values)
}

fn descending(mut v: Vec<f32>) -> Vec<f32> {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Fully sorts every pool and keeps each neuron whose best token reaches the
/// k-th value. `None` when the pool is smaller than k.
pub fn brute_force(trace: &ActivationTrace, spec: &ThresholdSpec) -> Option<BTreeSet<(usize, usize)>> {
    let (t_n, l_n, w_n) = (trace.num_tokens(), trace.num_layers(), trace.ffn_width());
    let best = |l: usize, j: usize| {
        (0..t_n)
            .map(|t| trace.value(t, l, j))
            .fold(f32::NEG_INFINITY, f32::max)
    };
    let mut out = BTreeSet::new();
    match *spec {
        ThresholdSpec::LayerTopK { k } => {
            for l in 0..l_n {
                let pool: Vec<f32> = (0..t_n)
                    .flat_map(|t| (0..w_n).map(move |j| (t, j)))
                    .map(|(t, j)| trace.value(t, l, j))
                    .collect();
                let cut = *descending(pool).get(k - 1)?;
                out.extend((0..w_n).filter(|&j| best(l, j) >= cut).map(|j| (l, j)));
            }
        }
        ThresholdSpec::GlobalTopK { k } => {
            let cut = *descending(trace.values().to_vec()).get(k - 1)?;
            for l in 0..l_n {
                out.extend((0..w_n).filter(|&j| best(l, j) >= cut).map(|j| (l, j)));
            }
        }
        ThresholdSpec::GlobalTopFraction { fraction } => {
            let n = l_n * w_n;
            let maxima: Vec<f32> = (0..l_n)
                .flat_map(|l| (0..w_n).map(move |j| (l, j)))
                .map(|(l, j)| best(l, j))
                .collect();
            // smallest count c with c >= fraction * n, up to float noise
            let mut count = 1;
            while count < n && (count as f64) < fraction * n as f64 - 1e-9 {
                count += 1;
            }
            let cut = descending(maxima)[count - 1];
            for l in 0..l_n {
                out.extend((0..w_n).filter(|&j| best(l, j) >= cut).map(|j| (l, j)));
            }
        }
    }
    Some(out)
}

pub fn oracle_specs() -> Vec<ThresholdSpec> {
    vec![
        ThresholdSpec::LayerTopK { k: 1 },
        ThresholdSpec::LayerTopK { k: 2 },
        ThresholdSpec::LayerTopK { k: 5 },
        ThresholdSpec::GlobalTopK { k: 1 },
        ThresholdSpec::GlobalTopK { k: 5 },
        ThresholdSpec::GlobalTopK { k: 20 },
        ThresholdSpec::GlobalTopFraction { fraction: 0.01 },
        ThresholdSpec::GlobalTopFraction { fraction: 0.1 },
        ThresholdSpec::GlobalTopFraction { fraction: 0.5 },
    ]
}

pub fn as_pairs(set: &dualprobe::probe::KeyNeuronSet) -> BTreeSet<(usize, usize)> {
    set.iter().map(|n| (n.layer, n.neuron)).collect()
}

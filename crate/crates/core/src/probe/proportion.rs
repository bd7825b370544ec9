use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KeyNeuronSet, NeuronId, ProbeError};

/// `|target \ base| / |target|`: the share of the target rendering's key
/// neurons that the base rendering never activates. Directional.
pub fn specialized_proportion(
    base: &KeyNeuronSet,
    target: &KeyNeuronSet,
) -> Result<f64, ProbeError> {
    base.check_dims(target)?;
    if target.is_empty() {
        return Err(ProbeError::EmptyTarget);
    }
    let only_target = target.iter().filter(|n| !base.contains(n)).count();
    Ok(only_target as f64 / target.len() as f64)
}

/// One dual-format question pair: `base` is the English rendering's key set.
#[derive(Debug, Clone)]
pub struct ProportionPair {
    pub pair_id: String,
    pub base: KeyNeuronSet,
    pub target: KeyNeuronSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProportion {
    pub pair_id: String,
    pub proportion: f64,
    pub target_size: usize,
    pub specialized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationReport {
    pub culture: String,
    pub language: String,
    pub per_pair: Vec<PairProportion>,
    pub mean_proportion: f64,
    pub pair_count: usize,
    /// Pairs whose target set was empty; excluded from the mean.
    pub skipped: Vec<String>,
}

impl SpecializationReport {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

/// Averages per-pair proportions for one (culture, language) cell.
pub fn aggregate_proportions(
    pairs: &[ProportionPair],
    culture: &str,
    language: &str,
) -> Result<SpecializationReport, ProbeError> {
    let mut per_pair = Vec::new();
    let mut skipped = Vec::new();
    for pair in pairs {
        match specialized_proportion(&pair.base, &pair.target) {
            Ok(p) => per_pair.push(PairProportion {
                pair_id: pair.pair_id.clone(),
                proportion: p,
                target_size: pair.target.len(),
                specialized: pair.target.iter().filter(|n| !pair.base.contains(n)).count(),
            }),
            Err(ProbeError::EmptyTarget) => skipped.push(pair.pair_id.clone()),
            Err(e) => return Err(e),
        }
    }
    if per_pair.is_empty() {
        return Err(ProbeError::EmptyReport(skipped.len()));
    }
    let mean = per_pair.iter().map(|p| p.proportion).sum::<f64>() / per_pair.len() as f64;
    Ok(SpecializationReport {
        culture: culture.into(),
        language: language.into(),
        pair_count: per_pair.len(),
        per_pair,
        mean_proportion: mean,
        skipped,
    })
}

/// Uniform sample of `count` distinct neurons, reproducible from `seed`.
pub fn random_neuron_sample(
    dims: (usize, usize),
    count: usize,
    seed: u64,
) -> Result<KeyNeuronSet, ProbeError> {
    let (layers, width) = dims;
    let population = layers * width;
    if count > population {
        return Err(ProbeError::SampleTooLarge { count, population });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, population, count);
    KeyNeuronSet::new(
        picks
            .into_iter()
            .map(|i| NeuronId::new(i % width, i / width)),
        layers,
        width,
        format!("random(seed={seed})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[(usize, usize)]) -> KeyNeuronSet {
        KeyNeuronSet::new(ids.iter().map(|&(j, l)| NeuronId::new(j, l)), 2, 4, "t").unwrap()
    }

    fn pair(id: &str, base: &[(usize, usize)], target: &[(usize, usize)]) -> ProportionPair {
        ProportionPair {
            pair_id: id.into(),
            base: set(base),
            target: set(target),
        }
    }

    #[test]
    fn identical_and_disjoint() {
        let a = set(&[(0, 0), (1, 1)]);
        assert_eq!(specialized_proportion(&a, &a).unwrap(), 0.0);
        assert_eq!(specialized_proportion(&set(&[(2, 0)]), &a).unwrap(), 1.0);
    }

    #[test]
    fn two_thirds() {
        let target = set(&[(0, 0), (1, 0), (2, 1)]);
        let base = set(&[(1, 0)]);
        assert_eq!(specialized_proportion(&base, &target).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn direction_matters() {
        let a = set(&[(0, 0), (1, 0), (2, 1)]);
        let b = set(&[(1, 0)]);
        assert_eq!(specialized_proportion(&a, &b).unwrap(), 0.0);
        assert_ne!(
            specialized_proportion(&a, &b).unwrap(),
            specialized_proportion(&b, &a).unwrap()
        );
    }

    #[test]
    fn empty_target_is_undefined() {
        assert_eq!(
            specialized_proportion(&set(&[(0, 0)]), &set(&[])),
            Err(ProbeError::EmptyTarget)
        );
    }

    #[test]
    fn mean_of_half_and_one() {
        let r = aggregate_proportions(
            &[
                pair("a", &[(0, 0)], &[(0, 0), (1, 0)]),
                pair("b", &[], &[(3, 1)]),
            ],
            "US",
            "zh",
        )
        .unwrap();
        assert_eq!(r.mean_proportion, 0.75);
        assert_eq!(r.pair_count, 2);
    }

    #[test]
    fn skipped_pairs_are_tallied() {
        let r = aggregate_proportions(
            &[
                pair("a", &[(0, 0), (1, 0), (2, 0)], &[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1)]),
                pair("b", &[(0, 0)], &[]),
            ],
            "CN",
            "zh",
        )
        .unwrap();
        assert!((r.mean_proportion - 0.4).abs() < 1e-15);
        assert_eq!(r.skip_count(), 1);
        assert_eq!(r.skipped, vec!["b".to_string()]);
    }

    #[test]
    fn all_skipped_is_an_error() {
        assert_eq!(
            aggregate_proportions(&[pair("a", &[], &[])], "CN", "zh"),
            Err(ProbeError::EmptyReport(1))
        );
    }

    #[test]
    fn random_sample_edges() {
        assert_eq!(random_neuron_sample((2, 4), 8, 1).unwrap().len(), 8);
        assert!(random_neuron_sample((2, 4), 0, 1).unwrap().is_empty());
        assert!(random_neuron_sample((2, 4), 9, 1).is_err());
        assert_eq!(
            random_neuron_sample((4, 250), 10, 3).unwrap(),
            random_neuron_sample((4, 250), 10, 3).unwrap()
        );
    }

    #[test]
    fn different_seeds_differ() {
        let a = random_neuron_sample((4, 250), 10, 11).unwrap();
        let b = random_neuron_sample((4, 250), 10, 12).unwrap();
        assert_ne!(a.neurons(), b.neurons(), "two seeded draws of 10/1000 coincided");
    }
}

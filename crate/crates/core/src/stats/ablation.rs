use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::dualset::{AnswerSet, QuestionRef};
use crate::evalkit::{score_question, Matcher, ModelResponse};
use crate::probe::{
    extract_key_neurons, random_neuron_sample, union_key_neurons, KeyNeuronSet, ThresholdSpec,
};
use crate::seed::derive_seed;
use crate::tinylm::{
    generate_with_recording, ByteTokenizer, GenerationSettings, MaskSpec, ModelWeights, TraceMeta,
};
use crate::trace::ActivationTrace;

/// A prompt with its gold answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub question_id: String,
    pub prompt: String,
    pub answers: AnswerSet,
    #[serde(default = "default_language")]
    pub language: String,
}

fn default_language() -> String {
    "en".into()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// One mask: the union of every in-distribution question's key set.
    #[default]
    Union,
    /// Each in-distribution question is masked with its own key set; the
    /// out-of-distribution set still uses the union.
    PerQuestion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub model_id: String,
    pub thresholds: Vec<ThresholdSpec>,
    pub seed: u64,
    #[serde(default)]
    pub mode: MaskMode,
    #[serde(default)]
    pub generation: GenerationSettings,
    #[serde(default)]
    pub matcher: Matcher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub threshold: ThresholdSpec,
    /// Size of the union key set; the random mask has the same size.
    pub masked_count: usize,
    pub key_in_dist: f64,
    pub key_ood: f64,
    pub random_in_dist: f64,
    pub random_ood: f64,
    pub random_seed: u64,
}

impl AblationResult {
    pub fn in_dist_drop(&self, baseline: f64) -> f64 {
        baseline - self.key_in_dist
    }

    pub fn ood_drop(&self, baseline: f64) -> f64 {
        baseline - self.key_ood
    }
}

/// One CSV line: a threshold crossed with a mask kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub threshold: String,
    pub mask: String,
    pub masked_count: usize,
    pub in_dist: f64,
    pub ood: f64,
    pub seed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub model_id: String,
    pub mode: MaskMode,
    pub seed: u64,
    pub baseline_in_dist: f64,
    pub baseline_ood: f64,
    pub results: Vec<AblationResult>,
    /// The threshold whose key mask maximizes in-dist drop minus ood drop.
    /// Earliest wins ties.
    pub most_selective: Option<ThresholdSpec>,
}

impl AblationSummary {
    pub fn rows(&self) -> Vec<AblationRow> {
        let mut rows = vec![AblationRow {
            threshold: "none".into(),
            mask: "none".into(),
            masked_count: 0,
            in_dist: self.baseline_in_dist,
            ood: self.baseline_ood,
            seed: String::new(),
        }];
        for r in &self.results {
            rows.push(AblationRow {
                threshold: r.threshold.to_string(),
                mask: "key".into(),
                masked_count: r.masked_count,
                in_dist: r.key_in_dist,
                ood: r.key_ood,
                seed: String::new(),
            });
            rows.push(AblationRow {
                threshold: r.threshold.to_string(),
                mask: "random".into(),
                masked_count: r.masked_count,
                in_dist: r.random_in_dist,
                ood: r.random_ood,
                seed: r.random_seed.to_string(),
            });
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String, StatsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            w.serialize(row).map_err(|e| StatsError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| StatsError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

struct Runner<'a> {
    weights: &'a ModelWeights,
    settings: &'a AblationSettings,
    tokenizer: ByteTokenizer,
}

impl Runner<'_> {
    fn generate(
        &self,
        item: &EvalItem,
        mask: Option<&MaskSpec>,
    ) -> Result<(String, ActivationTrace), StatsError> {
        let model_err = |source| StatsError::Model {
            question: item.question_id.clone(),
            source,
        };
        let prompt = self.tokenizer.encode(&item.prompt).map_err(model_err)?;
        let meta = TraceMeta {
            model_id: self.settings.model_id.clone(),
            question_id: item.question_id.clone(),
            language: item.language.clone(),
            culture: String::new(),
        };
        let generation =
            generate_with_recording(self.weights, mask, &prompt, &self.settings.generation, &meta)
                .map_err(model_err)?;
        Ok((self.tokenizer.decode(&generation.response), generation.trace))
    }

    fn score_one(&self, item: &EvalItem, mask: Option<&MaskSpec>) -> Result<u8, StatsError> {
        let (text, _) = self.generate(item, mask)?;
        let response = ModelResponse {
            question: QuestionRef {
                template_id: item.question_id.clone(),
                culture: String::new(),
                language: item.language.clone(),
            },
            model_id: self.settings.model_id.clone(),
            text,
            settings: None,
        };
        let record = score_question(&response, &item.answers, self.settings.matcher).map_err(|e| {
            StatsError::Item {
                question: item.question_id.clone(),
                reason: e.to_string(),
            }
        })?;
        Ok(record.score)
    }

    /// Mean 0/1 score; `masks[i]` applies to `items[i]`.
    fn score(&self, items: &[EvalItem], masks: &[Option<&MaskSpec>]) -> Result<f64, StatsError> {
        if items.is_empty() {
            return Ok(0.0);
        }
        let scores = items
            .par_iter()
            .zip(masks)
            .map(|(item, mask)| self.score_one(item, *mask))
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(scores.iter().map(|&s| s as f64).sum::<f64>() / items.len() as f64)
    }

    fn mask(&self, set: &KeyNeuronSet) -> MaskSpec {
        let c = &self.weights.config;
        MaskSpec::new(set.iter().copied(), c.num_layers, c.ffn_width)
            .expect("key sets share the model's dimensions")
    }
}

/// Each item's own mask, or the shared one when there are none.
fn per_item<'a>(own: &'a [MaskSpec], shared: &'a MaskSpec, n: usize) -> Vec<Option<&'a MaskSpec>> {
    if own.is_empty() {
        vec![Some(shared); n]
    } else {
        own.iter().map(Some).collect()
    }
}

/// Scores both sets unmasked, then for each threshold masks the in-dist key
/// neurons and, separately, a seeded random set of the same size.
///
/// Traces come from one unmasked generation pass over the in-dist set.
/// Scores are fractions in `[0, 1]`.
pub fn run_masking_ablation(
    weights: &ModelWeights,
    in_dist: &[EvalItem],
    ood: &[EvalItem],
    settings: &AblationSettings,
) -> Result<AblationSummary, StatsError> {
    if in_dist.is_empty() {
        return Err(StatsError::EmptyInDist);
    }
    let runner = Runner {
        weights,
        settings,
        tokenizer: ByteTokenizer::new(weights.config.vocab_size),
    };
    let dims = (weights.config.num_layers, weights.config.ffn_width);
    let none_in = vec![None; in_dist.len()];
    let none_ood = vec![None; ood.len()];
    let baseline_in_dist = runner.score(in_dist, &none_in)?;
    let baseline_ood = runner.score(ood, &none_ood)?;
    let traces = in_dist
        .par_iter()
        .map(|item| runner.generate(item, None).map(|(_, t)| t))
        .collect::<Result<Vec<_>, _>>()?;

    let results = settings
        .thresholds
        .par_iter()
        .enumerate()
        .map(|(index, threshold)| {
            let wrap = |source| StatsError::Threshold {
                setting: *threshold,
                source,
            };
            let sets = traces
                .iter()
                .map(|t| extract_key_neurons(t, threshold))
                .collect::<Result<Vec<_>, _>>()
                .map_err(wrap)?;
            let union = union_key_neurons(&sets).map_err(wrap)?;
            let random_seed = derive_seed(settings.seed, &format!("random-mask/{index}/{threshold}"));
            let random_union = random_neuron_sample(dims, union.len(), random_seed).map_err(wrap)?;
            let union_mask = runner.mask(&union);
            let random_mask = runner.mask(&random_union);

            let (key_masks, random_masks): (Vec<MaskSpec>, Vec<MaskSpec>) = match settings.mode {
                MaskMode::Union => (vec![], vec![]),
                MaskMode::PerQuestion => {
                    let mut key = Vec::with_capacity(sets.len());
                    let mut random = Vec::with_capacity(sets.len());
                    for (q, set) in sets.iter().enumerate() {
                        key.push(runner.mask(set));
                        let s = derive_seed(random_seed, &format!("question/{q}"));
                        random.push(runner.mask(&random_neuron_sample(dims, set.len(), s).map_err(wrap)?));
                    }
                    (key, random)
                }
            };
            let n = in_dist.len();
            let key_in_dist = runner.score(in_dist, &per_item(&key_masks, &union_mask, n))?;
            let random_in_dist = runner.score(in_dist, &per_item(&random_masks, &random_mask, n))?;
            let key_ood = runner.score(ood, &vec![Some(&union_mask); ood.len()])?;
            let random_ood = runner.score(ood, &vec![Some(&random_mask); ood.len()])?;
            Ok(AblationResult {
                threshold: *threshold,
                masked_count: union.len(),
                key_in_dist,
                key_ood,
                random_in_dist,
                random_ood,
                random_seed,
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;

    let mut most_selective: Option<(f64, ThresholdSpec)> = None;
    for r in &results {
        let gain = r.in_dist_drop(baseline_in_dist) - r.ood_drop(baseline_ood);
        if most_selective.is_none_or(|(best, _)| gain > best) {
            most_selective = Some((gain, r.threshold));
        }
    }
    Ok(AblationSummary {
        model_id: settings.model_id.clone(),
        mode: settings.mode,
        seed: settings.seed,
        baseline_in_dist,
        baseline_ood,
        results,
        most_selective: most_selective.map(|(_, t)| t),
    })
}

//! Correlation of key-neuron counts with scores, and masking ablations.

mod ablation;
mod pearson;

use thiserror::Error;

use crate::probe::{ProbeError, ThresholdSpec};
use crate::tinylm::ModelError;

pub use ablation::{
    run_masking_ablation, AblationResult, AblationRow, AblationSettings, AblationSummary, EvalItem,
    MaskMode,
};
pub use pearson::{neuron_count_vs_score, pearson, CorrelationResult};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("series lengths differ: {xs} vs {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("correlation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("correlation is undefined: {0}")]
    ConstantSeries(String),
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("threshold {setting}: {source}")]
    Threshold {
        setting: ThresholdSpec,
        #[source]
        source: ProbeError,
    },
    #[error("question {question}: {source}")]
    Model {
        question: String,
        #[source]
        source: ModelError,
    },
    #[error("question {question}: {reason}")]
    Item { question: String, reason: String },
    #[error("in-distribution set is empty")]
    EmptyInDist,
    #[error("csv: {0}")]
    Csv(String),
}

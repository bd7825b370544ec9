//! Short-answer scoring and per-cell reports.

mod normalize;
mod report;
mod score;

use thiserror::Error;

use crate::dualset::{CellKey, QuestionRef};

pub use normalize::normalize_text;
pub use report::{
    average_reports, culture_gap, quadrant_report, score_set, synergy_gap, CellEntry, CellScore,
    GapComparison, GapReport, QuadrantReport,
};
pub use score::{
    evaluate_responses, is_unsegmented, score_question, EvalRecord, Matcher, ModelResponse,
    UNSEGMENTED_LANGUAGES,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("question {0} has no gold answers")]
    EmptyAnswers(QuestionRef),
    #[error("response refers to unknown question {0}")]
    UnknownQuestion(QuestionRef),
    #[error("cell {0} has no records")]
    EmptyCell(CellKey),
    #[error("report has no populated cell {0}")]
    MissingCell(CellKey),
    #[error("language {0} needs at least two populated cultures")]
    InsufficientCultures(String),
    #[error("no reports to average")]
    NoReports,
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        EvalError::Csv(e.to_string())
    }
}

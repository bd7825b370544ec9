//! Dual-format question sets: every template rendered across a grid of
//! cultures and languages, with an index of pairs that differ in one axis.

mod assemble;
pub mod io;
mod review;
mod translate;
mod types;

use thiserror::Error;

pub use assemble::{
    adapt_template, assemble_eval_set, index_pairs, validate_pairs, AnswerBook, Assembly,
    AssemblyOptions, PairViolation, Shortfall,
};
pub use io::{read_answer_book, read_dataset, read_jsonl, write_dataset, write_jsonl, AnswerEntry};
pub use review::{
    ingest_reviews, parse_review_sheet, sample_for_review, summarize_reviews, write_review_bundle,
    ReviewBundle, ReviewItem, ReviewSummary, REVIEW_RUBRIC,
};
pub use translate::{
    build_cross_lingual, translate_batch, Exemplar, FaultyTranslator, HttpTranslator,
    MockTranslator, Quarantined, RetryPolicy, TranslateError, TranslationJob, TranslationRequest,
    TranslationResponse, TranslatorClient,
};
pub use types::{
    AdaptationRow, AdaptationTable, AnswerSet, CellKey, DatasetSpec, DualPair, GoldAnswer,
    LanguageLayout, LocalizedQuestion, PhrasingRule, QuestionRef, TemplateQuestion, REGION_MARKER,
};

#[derive(Debug, Error)]
pub enum DualsetError {
    #[error("invalid template: {0}")]
    Template(String),
    #[error("invalid answer set: {0}")]
    Answers(String),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("no adaptation entry for {0}")]
    MissingAdaptation(CellKey),
    #[error("{question} is already in the target language")]
    SameLanguage { question: QuestionRef },
    #[error("translating {question} to {target_language} failed after {attempts} attempt(s): {reason}")]
    Translation {
        question: QuestionRef,
        target_language: String,
        attempts: u32,
        reason: String,
    },
    #[error("not enough templates: {}", format_shortfalls(.0))]
    InsufficientTemplates(Vec<Shortfall>),
    #[error("review sample of {requested} exceeds the {available} eligible questions")]
    ReviewTooLarge { requested: usize, available: usize },
    #[error("review sheet {sheet}: {reason}")]
    Review { sheet: String, reason: String },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_shortfalls(s: &[Shortfall]) -> String {
    s.iter()
        .map(|x| format!("{} needs {} has {}", x.culture, x.needed, x.available))
        .collect::<Vec<_>>()
        .join("; ")
}

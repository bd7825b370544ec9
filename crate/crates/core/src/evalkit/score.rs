use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::{normalize_text, EvalError};
use crate::dualset::{AnswerSet, LocalizedQuestion, QuestionRef};
use crate::tinylm::GenerationSettings;

/// Primary language subtags written without spaces between words. Boundary
/// matching degrades to plain substring for these.
pub const UNSEGMENTED_LANGUAGES: &[&str] = &["zh", "ja", "th", "lo", "km", "my", "bo"];

pub fn is_unsegmented(language: &str) -> bool {
    let primary = language.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
    UNSEGMENTED_LANGUAGES.contains(&primary.as_str())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Whole normalized response equals the answer.
    Exact,
    Substring,
    /// Substring aligned to whitespace token boundaries.
    #[default]
    BoundarySubstring,
}

impl Matcher {
    /// Both arguments must already be normalized.
    pub fn matches(self, response: &str, gold: &str, language: &str) -> bool {
        if gold.is_empty() {
            return false;
        }
        match self {
            Matcher::Exact => response == gold,
            Matcher::Substring => response.contains(gold),
            Matcher::BoundarySubstring if is_unsegmented(language) => response.contains(gold),
            Matcher::BoundarySubstring => format!(" {response} ").contains(&format!(" {gold} ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    #[serde(flatten)]
    pub question: QuestionRef,
    pub model_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<GenerationSettings>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(flatten)]
    pub question: QuestionRef,
    pub model_id: String,
    pub matched: bool,
    pub matched_answer: Option<String>,
    pub score: u8,
}

/// Scores one response: 1 if any gold answer or alias matches. The matched
/// string is reported as written in the answer set.
pub fn score_question(
    response: &ModelResponse,
    answers: &AnswerSet,
    matcher: Matcher,
) -> Result<EvalRecord, EvalError> {
    if answers.is_empty() {
        return Err(EvalError::EmptyAnswers(response.question.clone()));
    }
    let text = normalize_text(&response.text);
    let language = &response.question.language;
    let hit = answers
        .answers
        .iter()
        .flat_map(|a| std::iter::once(&a.text).chain(&a.aliases))
        .find(|gold| matcher.matches(&text, &normalize_text(gold), language));
    Ok(EvalRecord {
        question: response.question.clone(),
        model_id: response.model_id.clone(),
        matched: hit.is_some(),
        matched_answer: hit.cloned(),
        score: hit.is_some() as u8,
    })
}

/// Scores every response against the dataset, preserving input order.
pub fn evaluate_responses(
    responses: &[ModelResponse],
    dataset: &[LocalizedQuestion],
    matcher: Matcher,
) -> Result<Vec<EvalRecord>, EvalError> {
    let index: HashMap<QuestionRef, &AnswerSet> =
        dataset.iter().map(|q| (q.key(), &q.answers)).collect();
    responses
        .par_iter()
        .map(|r| {
            let answers = index
                .get(&r.question)
                .ok_or_else(|| EvalError::UnknownQuestion(r.question.clone()))?;
            score_question(r, answers, matcher)
        })
        .collect()
}

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnswerSet, DualsetError, GoldAnswer, LocalizedQuestion};

/// A source text and its rendering in the target language, shown to the
/// translator as a one-shot format anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub source_text: String,
    pub target_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub source_language: String,
    pub target_language: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar: Option<Exemplar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    /// Network or service hiccup; worth retrying.
    #[error("transport error: {0}")]
    Transport(String),
    /// The service refused the request; retrying will not help.
    #[error("rejected: {0}")]
    Rejected(String),
}

pub trait TranslatorClient: Send + Sync {
    fn translate(&self, request: &TranslationRequest) -> Result<TranslationResponse, TranslateError>;
}

impl<T: TranslatorClient + ?Sized> TranslatorClient for &T {
    fn translate(&self, request: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        (**self).translate(request)
    }
}

impl<T: TranslatorClient + ?Sized> TranslatorClient for Box<T> {
    fn translate(&self, request: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        (**self).translate(request)
    }
}

/// Deterministic stand-in: prefixes the text with `⟦lang⟧`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTranslator;

impl MockTranslator {
    /// Splits a mock rendering back into `(language, original text)`.
    pub fn reverse(text: &str) -> Option<(&str, &str)> {
        let rest = text.strip_prefix('⟦')?;
        let (lang, original) = rest.split_once('⟧')?;
        Some((lang, original))
    }
}

impl TranslatorClient for MockTranslator {
    fn translate(&self, request: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        Ok(TranslationResponse {
            text: format!("⟦{}⟧{}", request.target_language, request.text),
        })
    }
}

type FaultPredicate = Box<dyn Fn(&TranslationRequest) -> bool + Send + Sync>;

/// Wraps a client and fails every request matching a predicate.
pub struct FaultyTranslator<T> {
    inner: T,
    fails: FaultPredicate,
    transient: bool,
    calls: AtomicUsize,
    matched: AtomicUsize,
}

impl<T: TranslatorClient> FaultyTranslator<T> {
    /// Matching requests always fail with a transport error.
    pub fn new(inner: T, fails: impl Fn(&TranslationRequest) -> bool + Send + Sync + 'static) -> Self {
        Self {
            inner,
            fails: Box::new(fails),
            transient: false,
            calls: AtomicUsize::new(0),
            matched: AtomicUsize::new(0),
        }
    }

    /// Matching requests alternate fail/succeed, so a single retry recovers.
    /// Only meaningful for sequential callers.
    pub fn transient(mut self) -> Self {
        self.transient = true;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn matched_requests(&self) -> usize {
        self.matched.load(Ordering::SeqCst)
    }
}

impl<T: TranslatorClient> TranslatorClient for FaultyTranslator<T> {
    fn translate(&self, request: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if (self.fails)(request) {
            let n = self.matched.fetch_add(1, Ordering::SeqCst);
            if !self.transient || n.is_multiple_of(2) {
                return Err(TranslateError::Transport(format!(
                    "injected failure for {:?}",
                    request.text
                )));
            }
        }
        self.inner.translate(request)
    }
}

/// Client for a JSON-over-HTTP translation service.
///
/// POSTs a [`TranslationRequest`] body and expects a [`TranslationResponse`].
/// 5xx and connection failures are transport errors; 4xx are rejections.
pub struct HttpTranslator {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpTranslator {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            token,
            agent,
        }
    }
}

impl TranslatorClient for HttpTranslator {
    fn translate(&self, request: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call
            .send_json(request)
            .map_err(|e| TranslateError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status >= 500 {
            return Err(TranslateError::Transport(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(TranslateError::Rejected(format!("HTTP {status}")));
        }
        response
            .body_mut()
            .read_json::<TranslationResponse>()
            .map_err(|e| TranslateError::Transport(format!("bad response body: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3 }
    }
}

fn translate_with_retry(
    translator: &dyn TranslatorClient,
    request: &TranslationRequest,
    retry: RetryPolicy,
) -> Result<String, (u32, TranslateError)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match translator.translate(request) {
            Ok(r) => return Ok(r.text),
            Err(TranslateError::Transport(_)) if attempt < retry.max_attempts.max(1) => continue,
            Err(e) => return Err((attempt, e)),
        }
    }
}

/// Renders `source` (question and every gold answer) in `target_language`.
/// The culture and template are unchanged.
pub fn build_cross_lingual(
    source: &LocalizedQuestion,
    target_language: &str,
    translator: &dyn TranslatorClient,
    exemplar: Option<&Exemplar>,
    retry: RetryPolicy,
) -> Result<LocalizedQuestion, DualsetError> {
    if target_language == source.language {
        return Err(DualsetError::SameLanguage {
            question: source.key(),
        });
    }
    let fail = |(attempts, err): (u32, TranslateError)| DualsetError::Translation {
        question: source.key(),
        target_language: target_language.to_string(),
        attempts,
        reason: err.to_string(),
    };
    let request = |text: &str, exemplar: Option<&Exemplar>| TranslationRequest {
        source_language: source.language.clone(),
        target_language: target_language.to_string(),
        text: text.to_string(),
        exemplar: exemplar.cloned(),
    };
    let question =
        translate_with_retry(translator, &request(&source.question, exemplar), retry).map_err(fail)?;
    let mut answers = Vec::with_capacity(source.answers.answers.len());
    for gold in &source.answers.answers {
        let text = translate_with_retry(translator, &request(&gold.text, None), retry).map_err(fail)?;
        let aliases = gold
            .aliases
            .iter()
            .map(|a| translate_with_retry(translator, &request(a, None), retry))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        answers.push(GoldAnswer { text, aliases });
    }
    Ok(LocalizedQuestion {
        template_id: source.template_id.clone(),
        culture: source.culture.clone(),
        language: target_language.to_string(),
        question,
        answers: AnswerSet::new(answers),
    })
}

/// A record that could not be built, kept for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarantined {
    pub template_id: String,
    pub culture: String,
    pub language: String,
    pub source_language: String,
    pub attempts: u32,
    pub reason: String,
}

pub struct TranslationJob<'a> {
    pub source: &'a LocalizedQuestion,
    pub target_language: String,
    pub exemplar: Option<Exemplar>,
}

/// Runs jobs with at most `max_in_flight` concurrent requests. Results keep
/// job order; failures are returned as quarantine entries, never dropped.
pub fn translate_batch(
    jobs: &[TranslationJob<'_>],
    translator: &dyn TranslatorClient,
    retry: RetryPolicy,
    max_in_flight: usize,
) -> Vec<Result<LocalizedQuestion, Quarantined>> {
    let run = |job: &TranslationJob<'_>| {
        build_cross_lingual(
            job.source,
            &job.target_language,
            translator,
            job.exemplar.as_ref(),
            retry,
        )
        .map_err(|e| {
            let (attempts, reason) = match &e {
                DualsetError::Translation { attempts, reason, .. } => (*attempts, reason.clone()),
                other => (0, other.to_string()),
            };
            Quarantined {
                template_id: job.source.template_id.clone(),
                culture: job.source.culture.clone(),
                language: job.target_language.clone(),
                source_language: job.source.language.clone(),
                attempts,
                reason,
            }
        })
    };
    match rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
        Err(_) => jobs.iter().map(run).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question() -> LocalizedQuestion {
        LocalizedQuestion {
            template_id: "t1".into(),
            culture: "US".into(),
            language: "en".into(),
            question: "What is a common snack in the US?".into(),
            answers: AnswerSet::new(vec![GoldAnswer::new("chips").with_aliases(["crisps"])]),
        }
    }

    #[test]
    fn mock_prefixes_and_reverses() {
        let out = build_cross_lingual(&question(), "zh", &MockTranslator, None, RetryPolicy::default())
            .unwrap();
        assert_eq!(out.question, "⟦zh⟧What is a common snack in the US?");
        assert_eq!(out.answers.answers[0].text, "⟦zh⟧chips");
        assert_eq!(out.answers.answers[0].aliases, vec!["⟦zh⟧crisps".to_string()]);
        assert_eq!(out.culture, "US");
        assert_eq!(out.template_id, "t1");
        assert_eq!(
            MockTranslator::reverse(&out.question),
            Some(("zh", "What is a common snack in the US?"))
        );
    }

    #[test]
    fn same_language_is_rejected() {
        let err = build_cross_lingual(&question(), "en", &MockTranslator, None, RetryPolicy::default());
        assert!(matches!(err, Err(DualsetError::SameLanguage { .. })));
    }

    #[test]
    fn transient_failures_are_retried() {
        let flaky = FaultyTranslator::new(MockTranslator, |_| true).transient();
        let out = build_cross_lingual(&question(), "zh", &flaky, None, RetryPolicy { max_attempts: 2 });
        assert!(out.is_ok());
        assert_eq!(flaky.matched_requests(), 6);
    }

    #[test]
    fn persistent_failure_reports_attempts() {
        let broken = FaultyTranslator::new(MockTranslator, |_| true);
        let err = build_cross_lingual(&question(), "zh", &broken, None, RetryPolicy { max_attempts: 3 })
            .unwrap_err();
        assert!(matches!(err, DualsetError::Translation { attempts: 3, .. }));
        assert_eq!(broken.calls(), 3);
    }

    #[test]
    fn rejections_are_not_retried() {
        struct Refuses;
        impl TranslatorClient for Refuses {
            fn translate(&self, _: &TranslationRequest) -> Result<TranslationResponse, TranslateError> {
                Err(TranslateError::Rejected("nope".into()))
            }
        }
        let err = build_cross_lingual(&question(), "zh", &Refuses, None, RetryPolicy { max_attempts: 5 })
            .unwrap_err();
        assert!(matches!(err, DualsetError::Translation { attempts: 1, .. }));
    }

    #[test]
    fn request_wire_format() {
        let req = TranslationRequest {
            source_language: "en".into(),
            target_language: "zh".into(),
            text: "hi".into(),
            exemplar: None,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"source_language":"en","target_language":"zh","text":"hi"}"#
        );
        let with = TranslationRequest {
            exemplar: Some(Exemplar {
                source_text: "a".into(),
                target_text: "b".into(),
            }),
            ..req
        };
        let json = serde_json::to_value(&with).unwrap();
        assert_eq!(json["exemplar"]["source_text"], "a");
        assert_eq!(json["exemplar"]["target_text"], "b");
    }
}

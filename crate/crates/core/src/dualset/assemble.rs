use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::translate::{translate_batch, Exemplar, Quarantined, RetryPolicy, TranslationJob};
use super::{
    AdaptationTable, AnswerSet, CellKey, DatasetSpec, DualPair, DualsetError, LocalizedQuestion,
    QuestionRef, TemplateQuestion, TranslatorClient, REGION_MARKER,
};

/// Localizes a template for `(culture, language)`: the region marker becomes
/// the table's display name, then phrasing rules run in order. The returned
/// question has no answers yet.
pub fn adapt_template(
    template: &TemplateQuestion,
    table: &AdaptationTable,
    culture: &str,
    language: &str,
) -> Result<LocalizedQuestion, DualsetError> {
    template.validate()?;
    let row = table
        .get(culture, language)
        .ok_or_else(|| DualsetError::MissingAdaptation(CellKey::new(culture, language)))?;
    let mut text = template.text.replacen(REGION_MARKER, &row.region_name, 1);
    for rule in &row.rules {
        if !rule.find.is_empty() {
            text = text.replace(&rule.find, &rule.replace);
        }
    }
    Ok(LocalizedQuestion {
        template_id: template.template_id.clone(),
        culture: culture.into(),
        language: language.into(),
        question: text,
        answers: AnswerSet::default(),
    })
}

/// Culture-specific gold answers in the culture's native language.
pub type AnswerBook = BTreeMap<(String, String), AnswerSet>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub culture: String,
    pub needed: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    /// Sorted by (template_id, culture, language).
    pub records: Vec<LocalizedQuestion>,
    pub pairs: Vec<DualPair>,
    pub quarantined: Vec<Quarantined>,
    /// Records the spec asked for.
    pub requested: usize,
}

impl Assembly {
    pub fn is_complete(&self) -> bool {
        self.quarantined.is_empty()
    }

    pub fn cell_counts(&self) -> BTreeMap<CellKey, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.cell()).or_insert(0) += 1;
        }
        counts
    }
}

/// Builds the native cells by adaptation and every other cell by translating
/// the native rendering, then indexes dual pairs.
///
/// Translations into the pivot language run before the remaining
/// cross-lingual cells so they can serve as one-shot exemplars: rendering a US
/// question in Chinese is anchored by the same template's Chinese-culture
/// question in English and in Chinese.
pub fn assemble_eval_set(
    spec: &DatasetSpec,
    templates: &[TemplateQuestion],
    answers: &AnswerBook,
    table: &AdaptationTable,
    translator: &dyn TranslatorClient,
    options: AssemblyOptions,
) -> Result<Assembly, DualsetError> {
    spec.validate()?;
    let mut by_id: BTreeMap<&str, &TemplateQuestion> = BTreeMap::new();
    for t in templates {
        t.validate()?;
        if by_id.insert(t.template_id.as_str(), t).is_some() {
            return Err(DualsetError::Template(format!(
                "duplicate template_id {}",
                t.template_id
            )));
        }
    }
    let cells = spec.cells();
    let native = |culture: &str| spec.native_languages[culture].clone();

    // Samples needed per culture: the largest cell drawing on it.
    let mut needed: BTreeMap<String, usize> = BTreeMap::new();
    for (cell, samples) in &cells {
        let n = needed.entry(cell.culture.clone()).or_insert(0);
        *n = (*n).max(*samples);
    }
    let mut chosen: BTreeMap<String, Vec<&TemplateQuestion>> = BTreeMap::new();
    let mut shortfalls = Vec::new();
    for (culture, &n) in &needed {
        let eligible: Vec<&TemplateQuestion> = by_id
            .values()
            .filter(|t| answers.contains_key(&(t.template_id.clone(), culture.clone())))
            .copied()
            .collect();
        if eligible.len() < n {
            shortfalls.push(Shortfall {
                culture: culture.clone(),
                needed: n,
                available: eligible.len(),
            });
        }
        chosen.insert(culture.clone(), eligible.into_iter().take(n).collect());
    }
    if !shortfalls.is_empty() {
        return Err(DualsetError::InsufficientTemplates(shortfalls));
    }

    let mut built: HashMap<QuestionRef, LocalizedQuestion> = HashMap::new();
    for (culture, picks) in &chosen {
        let language = native(culture);
        for t in picks {
            let mut q = adapt_template(t, table, culture, &language)?;
            let set = answers[&(t.template_id.clone(), culture.clone())].clone();
            set.validate().map_err(|e| {
                DualsetError::Answers(format!("{} for {culture}: {e}", t.template_id))
            })?;
            q.answers = set;
            built.insert(q.key(), q);
        }
    }

    let foreign: Vec<&(CellKey, usize)> = cells
        .iter()
        .filter(|(cell, _)| cell.language != native(&cell.culture))
        .collect();
    let (into_pivot, rest): (Vec<_>, Vec<_>) = foreign
        .into_iter()
        .partition(|(cell, _)| cell.language == spec.pivot_language);
    let mut quarantined = Vec::new();
    for phase in [into_pivot, rest] {
        let mut jobs = Vec::new();
        for (cell, samples) in phase {
            let source_language = native(&cell.culture);
            for t in chosen[&cell.culture].iter().take(*samples) {
                let source_key = QuestionRef {
                    template_id: t.template_id.clone(),
                    culture: cell.culture.clone(),
                    language: source_language.clone(),
                };
                let source = &built[&source_key];
                let exemplar = find_exemplar(
                    &built,
                    spec,
                    &t.template_id,
                    &cell.culture,
                    &source_language,
                    &cell.language,
                );
                jobs.push(TranslationJob {
                    source,
                    target_language: cell.language.clone(),
                    exemplar,
                });
            }
        }
        let results = translate_batch(&jobs, translator, options.retry, options.max_in_flight);
        drop(jobs);
        for r in results {
            match r {
                Ok(q) => {
                    built.insert(q.key(), q);
                }
                Err(q) => quarantined.push(q),
            }
        }
    }

    let mut records = Vec::with_capacity(spec.total_records());
    for (cell, samples) in &cells {
        for t in chosen[&cell.culture].iter().take(*samples) {
            let key = QuestionRef {
                template_id: t.template_id.clone(),
                culture: cell.culture.clone(),
                language: cell.language.clone(),
            };
            if let Some(q) = built.get(&key) {
                records.push(q.clone());
            }
        }
    }
    records.sort_by_key(|a| a.key());
    quarantined.sort_by(|a, b| {
        (&a.template_id, &a.culture, &a.language).cmp(&(&b.template_id, &b.culture, &b.language))
    });
    let pairs = index_pairs(&records);
    Ok(Assembly {
        records,
        pairs,
        quarantined,
        requested: spec.total_records(),
    })
}

/// Same template, another culture, rendered in both the source and the target
/// language. Cultures native to the target language are preferred.
fn find_exemplar(
    built: &HashMap<QuestionRef, LocalizedQuestion>,
    spec: &DatasetSpec,
    template_id: &str,
    culture: &str,
    source_language: &str,
    target_language: &str,
) -> Option<Exemplar> {
    let mut candidates: Vec<&String> = spec
        .native_languages
        .keys()
        .filter(|c| c.as_str() != culture)
        .collect();
    candidates.sort_by_key(|c| (spec.native_languages[*c] != target_language, *c));
    candidates.into_iter().find_map(|c| {
        let lookup = |language: &str| {
            built.get(&QuestionRef {
                template_id: template_id.into(),
                culture: c.clone(),
                language: language.into(),
            })
        };
        Some(Exemplar {
            source_text: lookup(source_language)?.question.clone(),
            target_text: lookup(target_language)?.question.clone(),
        })
    })
}

/// Every pair of records sharing a template and differing in exactly one axis.
pub fn index_pairs(records: &[LocalizedQuestion]) -> Vec<DualPair> {
    let mut by_template: BTreeMap<&str, Vec<QuestionRef>> = BTreeMap::new();
    for r in records {
        by_template.entry(&r.template_id).or_default().push(r.key());
    }
    let mut pairs = BTreeSet::new();
    for group in by_template.values() {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                let (left, right) = if a <= b { (a, b) } else { (b, a) };
                let pair = DualPair {
                    left: left.clone(),
                    right: right.clone(),
                };
                if pair.is_valid() {
                    pairs.insert(pair);
                }
            }
        }
    }
    pairs.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PairViolation {
    MissingRecord(QuestionRef),
    NotDual(DualPair),
}

/// Linear-time check that every pair is dual and resolves to a record.
pub fn validate_pairs(records: &[LocalizedQuestion], pairs: &[DualPair]) -> Vec<PairViolation> {
    let keys: std::collections::HashSet<QuestionRef> = records.iter().map(|r| r.key()).collect();
    let mut out = Vec::new();
    for p in pairs {
        if !p.is_valid() {
            out.push(PairViolation::NotDual(p.clone()));
        }
        for side in [&p.left, &p.right] {
            if !keys.contains(side) {
                out.push(PairViolation::MissingRecord(side.clone()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualset::{AdaptationRow, FaultyTranslator, LanguageLayout, MockTranslator, PhrasingRule};

    fn table() -> AdaptationTable {
        vec![
            AdaptationRow {
                culture: "US".into(),
                language: "en".into(),
                region_name: "the US".into(),
                rules: vec![],
            },
            AdaptationRow {
                culture: "CN".into(),
                language: "zh".into(),
                region_name: "中国".into(),
                rules: vec![PhrasingRule {
                    find: "What is".into(),
                    replace: "什么是".into(),
                }],
            },
        ]
        .into()
    }

    fn template(id: &str, text: &str) -> TemplateQuestion {
        TemplateQuestion {
            template_id: id.into(),
            text: text.into(),
            topic: "sport".into(),
        }
    }

    #[test]
    fn adapts_region_marker() {
        let t = template("t1", "What is the most popular sports team in «REGION»?");
        let q = adapt_template(&t, &table(), "US", "en").unwrap();
        assert_eq!(q.question, "What is the most popular sports team in the US?");
    }

    #[test]
    fn applies_rules_in_order() {
        let t = template("t1", "What is eaten in «REGION»?");
        let q = adapt_template(&t, &table(), "CN", "zh").unwrap();
        assert_eq!(q.question, "什么是 eaten in 中国?");
    }

    #[test]
    fn substitution_is_local() {
        let a = adapt_template(&template("a", "Tea in «REGION»?"), &table(), "US", "en").unwrap();
        let b = adapt_template(&template("b", "Coffee in «REGION»?"), &table(), "US", "en").unwrap();
        assert_eq!(a.question, "Tea in the US?");
        assert_eq!(b.question, "Coffee in the US?");
    }

    #[test]
    fn missing_table_entry() {
        let t = template("t1", "x «REGION»");
        assert!(matches!(
            adapt_template(&t, &table(), "KR", "ko"),
            Err(DualsetError::MissingAdaptation(_))
        ));
    }

    fn two_by_two() -> (DatasetSpec, Vec<TemplateQuestion>, AnswerBook) {
        let spec = DatasetSpec {
            layout: vec![
                LanguageLayout {
                    language: "en".into(),
                    cultures: vec!["US".into(), "CN".into()],
                    samples_per_cell: 1,
                },
                LanguageLayout {
                    language: "zh".into(),
                    cultures: vec!["CN".into(), "US".into()],
                    samples_per_cell: 1,
                },
            ],
            native_languages: [("US", "en"), ("CN", "zh")]
                .iter()
                .map(|(c, l)| (c.to_string(), l.to_string()))
                .collect(),
            pivot_language: "en".into(),
        };
        let templates = vec![template("t1", "What is a snack in «REGION»?")];
        let mut book = AnswerBook::new();
        book.insert(("t1".into(), "US".into()), AnswerSet::from_texts(&["chips"]));
        book.insert(("t1".into(), "CN".into()), AnswerSet::from_texts(&["瓜子"]));
        (spec, templates, book)
    }

    #[test]
    fn two_languages_one_template() {
        let (spec, templates, book) = two_by_two();
        let out = assemble_eval_set(&spec, &templates, &book, &table(), &MockTranslator, Default::default())
            .unwrap();
        assert_eq!(out.records.len(), 4);
        // same-culture: US en/zh, CN en/zh; same-language: en US/CN, zh US/CN
        assert_eq!(out.pairs.len(), 4);
        assert_eq!(out.pairs.iter().filter(|p| p.same_culture()).count(), 2);
        assert!(validate_pairs(&out.records, &out.pairs).is_empty());
        let us_zh = out.records.iter().find(|r| r.culture == "US" && r.language == "zh").unwrap();
        assert_eq!(us_zh.question, "⟦zh⟧What is a snack in the US?");
        assert_eq!(us_zh.answers.answers[0].text, "⟦zh⟧chips");
    }

    #[test]
    fn exemplar_anchors_us_to_native_translation() {
        use std::sync::Mutex;
        struct Spy(Mutex<Vec<super::super::TranslationRequest>>);
        impl TranslatorClient for Spy {
            fn translate(
                &self,
                r: &super::super::TranslationRequest,
            ) -> Result<super::super::TranslationResponse, super::super::TranslateError> {
                self.0.lock().unwrap().push(r.clone());
                MockTranslator.translate(r)
            }
        }
        let (spec, templates, book) = two_by_two();
        let spy = Spy(Mutex::new(Vec::new()));
        assemble_eval_set(&spec, &templates, &book, &table(), &spy, Default::default()).unwrap();
        let reqs = spy.0.into_inner().unwrap();
        let us_to_zh = reqs
            .iter()
            .find(|r| r.target_language == "zh" && r.text.contains("the US"))
            .unwrap();
        let ex = us_to_zh.exemplar.as_ref().unwrap();
        assert_eq!(ex.target_text, "什么是 a snack in 中国?");
        assert_eq!(ex.source_text, "⟦en⟧什么是 a snack in 中国?");
    }

    #[test]
    fn single_cell() {
        let (mut spec, templates, book) = two_by_two();
        spec.layout = vec![LanguageLayout {
            language: "en".into(),
            cultures: vec!["US".into()],
            samples_per_cell: 1,
        }];
        let out = assemble_eval_set(&spec, &templates, &book, &table(), &MockTranslator, Default::default())
            .unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.pairs.is_empty());
    }

    #[test]
    fn shortfall_is_reported() {
        let (mut spec, templates, book) = two_by_two();
        spec.layout[0].samples_per_cell = 3;
        let err = assemble_eval_set(&spec, &templates, &book, &table(), &MockTranslator, Default::default())
            .unwrap_err();
        match err {
            DualsetError::InsufficientTemplates(s) => {
                assert_eq!(s.len(), 2);
                assert!(s.iter().all(|x| x.needed == 3 && x.available == 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failed_translation_is_quarantined() {
        let (spec, templates, book) = two_by_two();
        let faulty = FaultyTranslator::new(MockTranslator, |r| r.target_language == "zh");
        let out = assemble_eval_set(&spec, &templates, &book, &table(), &faulty, Default::default())
            .unwrap();
        assert_eq!(out.records.len() + out.quarantined.len(), out.requested);
        assert_eq!(out.quarantined.len(), 1);
        assert_eq!(out.quarantined[0].culture, "US");
        assert!(!out.is_complete());
    }
}

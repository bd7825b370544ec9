use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::evalkit::normalize_text;

use super::DualsetError;

pub const REGION_MARKER: &str = "«REGION»";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateQuestion {
    pub template_id: String,
    /// Question text with exactly one `«REGION»` marker.
    pub text: String,
    #[serde(default)]
    pub topic: String,
}

impl TemplateQuestion {
    pub fn validate(&self) -> Result<(), DualsetError> {
        if self.template_id.is_empty() {
            return Err(DualsetError::Template("empty template_id".into()));
        }
        let markers = self.text.matches(REGION_MARKER).count();
        if markers != 1 {
            return Err(DualsetError::Template(format!(
                "template {} has {markers} {REGION_MARKER} markers, expected exactly 1",
                self.template_id
            )));
        }
        Ok(())
    }
}

/// A (culture, language) cell of the dual grid. `culture` is the region whose
/// everyday knowledge is asked about; `language` is the medium of the question.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub culture: String,
    pub language: String,
}

impl CellKey {
    pub fn new(culture: impl Into<String>, language: impl Into<String>) -> Self {
        Self {
            culture: culture.into(),
            language: language.into(),
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.culture, self.language)
    }
}

/// Identifies one localized question. Ordering is the canonical dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuestionRef {
    pub template_id: String,
    pub culture: String,
    pub language: String,
}

impl QuestionRef {
    pub fn cell(&self) -> CellKey {
        CellKey::new(self.culture.clone(), self.language.clone())
    }

    /// `template.culture.language`, used for trace and key-set file names.
    pub fn question_id(&self) -> String {
        format!("{}.{}.{}", self.template_id, self.culture, self.language)
    }
}

impl fmt::Display for QuestionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}/{}", self.template_id, self.culture, self.language)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub text: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl GoldAnswer {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            aliases: Vec::new(),
        }
    }

    pub fn with_aliases(mut self, aliases: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerSet {
    pub answers: Vec<GoldAnswer>,
}

impl AnswerSet {
    pub fn new(answers: Vec<GoldAnswer>) -> Self {
        Self { answers }
    }

    pub fn from_texts(texts: &[&str]) -> Self {
        Self::new(texts.iter().map(|t| GoldAnswer::new(*t)).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    /// Non-empty, no blank strings, and every answer and alias distinct after
    /// normalization.
    pub fn validate(&self) -> Result<(), DualsetError> {
        if self.answers.is_empty() {
            return Err(DualsetError::Answers("answer set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.answers {
            for s in std::iter::once(&a.text).chain(&a.aliases) {
                let norm = normalize_text(s);
                if norm.is_empty() {
                    return Err(DualsetError::Answers(format!(
                        "answer {s:?} is empty after normalization"
                    )));
                }
                if !seen.insert(norm) {
                    return Err(DualsetError::Answers(format!(
                        "answer {s:?} duplicates another entry after normalization"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizedQuestion {
    pub template_id: String,
    pub culture: String,
    pub language: String,
    pub question: String,
    pub answers: AnswerSet,
}

impl LocalizedQuestion {
    pub fn key(&self) -> QuestionRef {
        QuestionRef {
            template_id: self.template_id.clone(),
            culture: self.culture.clone(),
            language: self.language.clone(),
        }
    }

    pub fn cell(&self) -> CellKey {
        CellKey::new(self.culture.clone(), self.language.clone())
    }
}

/// Two renderings of one template differing in exactly one axis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualPair {
    pub left: QuestionRef,
    pub right: QuestionRef,
}

impl DualPair {
    pub fn is_valid(&self) -> bool {
        let same_culture = self.left.culture == self.right.culture;
        let same_language = self.left.language == self.right.language;
        self.left.template_id == self.right.template_id && (same_culture != same_language)
    }

    pub fn same_culture(&self) -> bool {
        self.left.culture == self.right.culture
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhrasingRule {
    pub find: String,
    pub replace: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptationRow {
    pub culture: String,
    pub language: String,
    /// Replaces the region marker, e.g. `"the US"`.
    pub region_name: String,
    #[serde(default)]
    pub rules: Vec<PhrasingRule>,
}

/// Localization rules per (culture, language).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<AdaptationRow>", into = "Vec<AdaptationRow>")]
pub struct AdaptationTable {
    rows: BTreeMap<CellKey, AdaptationRow>,
}

impl AdaptationTable {
    pub fn insert(&mut self, row: AdaptationRow) {
        self.rows
            .insert(CellKey::new(row.culture.clone(), row.language.clone()), row);
    }

    pub fn get(&self, culture: &str, language: &str) -> Option<&AdaptationRow> {
        self.rows.get(&CellKey::new(culture, language))
    }
}

impl From<Vec<AdaptationRow>> for AdaptationTable {
    fn from(rows: Vec<AdaptationRow>) -> Self {
        let mut t = Self::default();
        for r in rows {
            t.insert(r);
        }
        t
    }
}

impl From<AdaptationTable> for Vec<AdaptationRow> {
    fn from(t: AdaptationTable) -> Self {
        t.rows.into_values().collect()
    }
}

/// One row of the layout: a language and the cultures asked about in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageLayout {
    pub language: String,
    pub cultures: Vec<String>,
    pub samples_per_cell: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub layout: Vec<LanguageLayout>,
    /// Culture -> the language spoken natively there.
    pub native_languages: BTreeMap<String, String>,
    #[serde(default = "default_pivot")]
    pub pivot_language: String,
}

fn default_pivot() -> String {
    "en".into()
}

impl DatasetSpec {
    /// English asked about seven cultures, and six further languages each asked
    /// about their own culture and the US; 500 questions per cell.
    pub fn seven_region() -> Self {
        let natives = [
            ("US", "en"),
            ("CN", "zh"),
            ("ES", "es"),
            ("ID", "id"),
            ("KR", "ko"),
            ("IR", "fa"),
            ("JB", "su"),
        ];
        let mut layout = vec![LanguageLayout {
            language: "en".into(),
            cultures: natives.iter().map(|(c, _)| c.to_string()).collect(),
            samples_per_cell: 500,
        }];
        for (culture, language) in &natives[1..] {
            layout.push(LanguageLayout {
                language: language.to_string(),
                cultures: vec![culture.to_string(), "US".into()],
                samples_per_cell: 500,
            });
        }
        Self {
            layout,
            native_languages: natives
                .iter()
                .map(|(c, l)| (c.to_string(), l.to_string()))
                .collect(),
            pivot_language: "en".into(),
        }
    }

    /// `(cell, samples)` in layout order.
    pub fn cells(&self) -> Vec<(CellKey, usize)> {
        self.layout
            .iter()
            .flat_map(|row| {
                row.cultures
                    .iter()
                    .map(move |c| (CellKey::new(c.clone(), row.language.clone()), row.samples_per_cell))
            })
            .collect()
    }

    pub fn total_records(&self) -> usize {
        self.cells().iter().map(|(_, n)| n).sum()
    }

    pub fn validate(&self) -> Result<(), DualsetError> {
        let mut seen = BTreeSet::new();
        for (cell, samples) in self.cells() {
            if samples == 0 {
                return Err(DualsetError::InvalidSpec(format!(
                    "cell {cell} has samples_per_cell = 0"
                )));
            }
            if !self.native_languages.contains_key(&cell.culture) {
                return Err(DualsetError::InvalidSpec(format!(
                    "culture {} has no native language",
                    cell.culture
                )));
            }
            if !seen.insert(cell.clone()) {
                return Err(DualsetError::InvalidSpec(format!("cell {cell} listed twice")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_region_counts() {
        let spec = DatasetSpec::seven_region();
        spec.validate().unwrap();
        assert_eq!(spec.cells().len(), 19);
        assert_eq!(spec.total_records(), 9_500);
    }

    #[test]
    fn template_marker_count() {
        let mut t = TemplateQuestion {
            template_id: "t1".into(),
            text: "Food in «REGION»?".into(),
            topic: "food".into(),
        };
        assert!(t.validate().is_ok());
        t.text = "Food in «REGION» and «REGION»?".into();
        assert!(t.validate().is_err());
        t.text = "Food?".into();
        assert!(t.validate().is_err());
    }

    #[test]
    fn answer_set_rules() {
        assert!(AnswerSet::default().validate().is_err());
        assert!(AnswerSet::from_texts(&["3", "three"]).validate().is_ok());
        assert!(AnswerSet::from_texts(&["Tea", "tea!"]).validate().is_err());
        assert!(AnswerSet::from_texts(&["..."]).validate().is_err());
    }

    #[test]
    fn dual_pair_axes() {
        let q = |c: &str, l: &str| QuestionRef {
            template_id: "t".into(),
            culture: c.into(),
            language: l.into(),
        };
        assert!(DualPair { left: q("US", "en"), right: q("US", "zh") }.is_valid());
        assert!(DualPair { left: q("US", "en"), right: q("CN", "en") }.is_valid());
        assert!(!DualPair { left: q("US", "en"), right: q("CN", "zh") }.is_valid());
        assert!(!DualPair { left: q("US", "en"), right: q("US", "en") }.is_valid());
    }
}

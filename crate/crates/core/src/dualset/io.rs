//! Line-delimited JSON persistence. Dataset text is NFC-normalized on write.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{AnswerSet, DualsetError, GoldAnswer, LocalizedQuestion};

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DualsetError> {
    let mut out = BufWriter::new(File::create(path)?);
    for (i, item) in items.iter().enumerate() {
        serde_json::to_writer(&mut out, item)
            .map_err(|source| DualsetError::Json { line: i + 1, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Blank lines are skipped; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DualsetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line).map_err(|source| DualsetError::Json { line: i + 1, source })?,
        );
    }
    Ok(items)
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

pub fn to_nfc(q: &LocalizedQuestion) -> LocalizedQuestion {
    LocalizedQuestion {
        template_id: nfc(&q.template_id),
        culture: nfc(&q.culture),
        language: nfc(&q.language),
        question: nfc(&q.question),
        answers: AnswerSet::new(
            q.answers
                .answers
                .iter()
                .map(|a| GoldAnswer {
                    text: nfc(&a.text),
                    aliases: a.aliases.iter().map(|s| nfc(s)).collect(),
                })
                .collect(),
        ),
    }
}

pub fn write_dataset(path: &Path, records: &[LocalizedQuestion]) -> Result<(), DualsetError> {
    let normalized: Vec<LocalizedQuestion> = records.iter().map(to_nfc).collect();
    write_jsonl(path, &normalized)
}

pub fn read_dataset(path: &Path) -> Result<Vec<LocalizedQuestion>, DualsetError> {
    read_jsonl(path)
}

/// One line of an answers file: gold answers for a template in one culture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub template_id: String,
    pub culture: String,
    pub answers: AnswerSet,
}

pub fn read_answer_book(path: &Path) -> Result<super::AnswerBook, DualsetError> {
    let entries: Vec<AnswerEntry> = read_jsonl(path)?;
    let mut book = super::AnswerBook::new();
    for e in entries {
        let key = (e.template_id, e.culture);
        if book.contains_key(&key) {
            return Err(DualsetError::Answers(format!(
                "duplicate answers for {} in {}",
                key.0, key.1
            )));
        }
        book.insert(key, e.answers);
    }
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_nfc() {
        let q = LocalizedQuestion {
            template_id: "t1".into(),
            culture: "ES".into(),
            language: "es".into(),
            question: "¿Qué come la gente en Espan\u{0303}a?".into(),
            answers: AnswerSet::new(vec![GoldAnswer::new("jamo\u{0301}n").with_aliases(["x"])]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &[q]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("España"));
        assert!(text.contains(r#""answers":[{"text":"jamón","aliases":["x"]}]"#));
        let back = read_dataset(&path).unwrap();
        assert_eq!(back[0].question, "¿Qué come la gente en España?");
    }

    #[test]
    fn bad_line_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"template_id\":\"a\",\"culture\":\"US\",\"answers\":[]}\n\nnot json\n").unwrap();
        match read_jsonl::<AnswerEntry>(&path) {
            Err(DualsetError::Json { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{TraceError, TraceReader};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ManifestError {
    #[error("line {line}: expected 6 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: bad {field}: {value:?}")]
    BadField {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("field {0:?} contains a tab or newline")]
    Unencodable(String),
}

/// One manifest row: `question_id  language  culture  path  byte_length  crc32`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub question_id: String,
    pub language: String,
    pub culture: String,
    pub path: String,
    pub byte_length: u64,
    pub checksum: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceManifest {
    pub entries: Vec<ManifestEntry>,
}

impl TraceManifest {
    pub fn push(&mut self, entry: ManifestEntry) -> Result<(), ManifestError> {
        for field in [
            &entry.question_id,
            &entry.language,
            &entry.culture,
            &entry.path,
        ] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(ManifestError::Unencodable(field.clone()));
            }
        }
        self.entries.push(entry);
        Ok(())
    }
}

impl fmt::Display for TraceManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{:08x}",
                e.question_id, e.language, e.culture, e.path, e.byte_length, e.checksum
            )?;
        }
        Ok(())
    }
}

impl FromStr for TraceManifest {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for (idx, raw) in s.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 6 {
                return Err(ManifestError::FieldCount {
                    line,
                    found: fields.len(),
                });
            }
            let byte_length = fields[4].parse().map_err(|_| ManifestError::BadField {
                line,
                field: "byte_length",
                value: fields[4].into(),
            })?;
            let checksum =
                u32::from_str_radix(fields[5], 16).map_err(|_| ManifestError::BadField {
                    line,
                    field: "checksum",
                    value: fields[5].into(),
                })?;
            entries.push(ManifestEntry {
                question_id: fields[0].into(),
                language: fields[1].into(),
                culture: fields[2].into(),
                path: fields[3].into(),
                byte_length,
                checksum,
            });
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestViolation {
    DuplicateId { question_id: String },
    Unreadable { question_id: String, reason: String },
    Unparseable { question_id: String, reason: String },
    ByteLength { question_id: String, expected: u64, actual: u64 },
    Checksum { question_id: String, expected: u32, actual: u32 },
    MetadataMismatch {
        question_id: String,
        field: &'static str,
        manifest: String,
        header: String,
    },
}

impl ManifestViolation {
    pub fn question_id(&self) -> &str {
        match self {
            Self::DuplicateId { question_id }
            | Self::Unreadable { question_id, .. }
            | Self::Unparseable { question_id, .. }
            | Self::ByteLength { question_id, .. }
            | Self::Checksum { question_id, .. }
            | Self::MetadataMismatch { question_id, .. } => question_id,
        }
    }
}

/// Checks every manifest row against the trace file it names.
///
/// Entries are checked in parallel; the returned list keeps manifest order.
pub fn validate_manifest(manifest: &TraceManifest, root: &Path) -> Vec<ManifestViolation> {
    let mut seen = HashSet::new();
    let mut violations: Vec<ManifestViolation> = manifest
        .entries
        .iter()
        .filter(|e| !seen.insert(e.question_id.as_str()))
        .map(|e| ManifestViolation::DuplicateId {
            question_id: e.question_id.clone(),
        })
        .collect();
    let per_entry: Vec<Vec<ManifestViolation>> = manifest
        .entries
        .par_iter()
        .map(|entry| check_entry(entry, root))
        .collect();
    violations.extend(per_entry.into_iter().flatten());
    violations
}

fn check_entry(entry: &ManifestEntry, root: &Path) -> Vec<ManifestViolation> {
    let qid = || entry.question_id.clone();
    let path = root.join(&entry.path);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) => {
            return vec![ManifestViolation::Unreadable {
                question_id: qid(),
                reason: format!("{}: {e}", path.display()),
            }]
        }
    };
    let mut out = Vec::new();
    match file.metadata() {
        Ok(meta) if meta.len() != entry.byte_length => out.push(ManifestViolation::ByteLength {
            question_id: qid(),
            expected: entry.byte_length,
            actual: meta.len(),
        }),
        Ok(_) => {}
        Err(e) => {
            return vec![ManifestViolation::Unreadable {
                question_id: qid(),
                reason: e.to_string(),
            }]
        }
    }
    let reader = match TraceReader::new(BufReader::new(file)) {
        Ok(r) => r,
        Err(e) => {
            out.push(unparseable(entry, e));
            return out;
        }
    };
    let header = reader.header().clone();
    for (field, expected, actual) in [
        ("question_id", &entry.question_id, &header.question_id),
        ("language", &entry.language, &header.language),
        ("culture", &entry.culture, &header.culture),
    ] {
        if expected != actual {
            out.push(ManifestViolation::MetadataMismatch {
                question_id: qid(),
                field,
                manifest: expected.clone(),
                header: actual.clone(),
            });
        }
    }
    match reader.finish() {
        Ok(crc) if crc != entry.checksum => out.push(ManifestViolation::Checksum {
            question_id: qid(),
            expected: entry.checksum,
            actual: crc,
        }),
        Ok(_) => {}
        Err(e) => out.push(unparseable(entry, e)),
    }
    out
}

fn unparseable(entry: &ManifestEntry, err: TraceError) -> ManifestViolation {
    ManifestViolation::Unparseable {
        question_id: entry.question_id.clone(),
        reason: err.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut m = TraceManifest::default();
        m.push(ManifestEntry {
            question_id: "t1.US.en".into(),
            language: "en".into(),
            culture: "US".into(),
            path: "traces/t1.US.en.ntrc".into(),
            byte_length: 312,
            checksum: 0xdead_beef,
        })
        .unwrap();
        let text = m.to_string();
        assert_eq!(text, "t1.US.en\ten\tUS\ttraces/t1.US.en.ntrc\t312\tdeadbeef\n");
        assert_eq!(text.parse::<TraceManifest>().unwrap(), m);
    }

    #[test]
    fn rejects_short_rows_and_tabs() {
        assert_eq!(
            "a\tb\tc".parse::<TraceManifest>(),
            Err(ManifestError::FieldCount { line: 1, found: 3 })
        );
        let mut m = TraceManifest::default();
        let entry = ManifestEntry {
            question_id: "a\tb".into(),
            language: "en".into(),
            culture: "US".into(),
            path: "p".into(),
            byte_length: 0,
            checksum: 0,
        };
        assert!(m.push(entry).is_err());
    }
}

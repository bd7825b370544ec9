use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetSpec, DualPair, DualsetError, LocalizedQuestion, QuestionRef};

/// Scoring guide shipped with every bundle.
pub const REVIEW_RUBRIC: &str = "\
Score the translated question against its duals on a 1-3 scale.
3: The question asks the same thing as the source, names the same region, and a native speaker would phrase it this way.
2: The question asks the same thing and would get the same answer, but the wording is stiff or slightly off.
1: The question asks something different, the region reference was lost, or parts were left untranslated.";

pub const BASELINE_CULTURE: &str = "US";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub row_id: String,
    /// Baseline-culture question rendered in a non-pivot language.
    pub target: LocalizedQuestion,
    /// The same template as baseline/pivot, native/pivot and native/native.
    pub duals: Vec<LocalizedQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewBundle {
    pub seed: u64,
    pub rubric: String,
    pub items: Vec<ReviewItem>,
}

/// Seeded uniform sample of translated baseline questions with their duals.
/// Only targets whose three duals all exist and are indexed as pairs are
/// eligible.
pub fn sample_for_review(
    records: &[LocalizedQuestion],
    pairs: &[DualPair],
    spec: &DatasetSpec,
    sample_size: usize,
    seed: u64,
) -> Result<ReviewBundle, DualsetError> {
    let by_key: HashMap<QuestionRef, &LocalizedQuestion> =
        records.iter().map(|r| (r.key(), r)).collect();
    let indexed: HashSet<(&QuestionRef, &QuestionRef)> = pairs
        .iter()
        .flat_map(|p| [(&p.left, &p.right), (&p.right, &p.left)])
        .collect();
    let pivot = spec.pivot_language.as_str();
    let mut native_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (culture, language) in &spec.native_languages {
        native_of.entry(language.as_str()).or_insert(culture.as_str());
    }

    let mut sorted: Vec<&LocalizedQuestion> = records.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let mut eligible = Vec::new();
    for r in sorted {
        if r.culture != BASELINE_CULTURE || r.language == pivot {
            continue;
        }
        let Some(culture) = native_of.get(r.language.as_str()) else {
            continue;
        };
        let at = |c: &str, l: &str| QuestionRef {
            template_id: r.template_id.clone(),
            culture: c.into(),
            language: l.into(),
        };
        let target = r.key();
        let keys = [
            at(BASELINE_CULTURE, pivot),
            at(culture, pivot),
            at(culture, &r.language),
        ];
        if keys.iter().any(|k| !by_key.contains_key(k)) {
            continue;
        }
        // baseline/pivot and native/native are the target's direct duals;
        // native/pivot is linked through native/native.
        if !indexed.contains(&(&target, &keys[0]))
            || !indexed.contains(&(&target, &keys[2]))
            || !indexed.contains(&(&keys[1], &keys[2]))
        {
            continue;
        }
        eligible.push((r, keys.map(|k| by_key[&k].clone())));
    }
    if sample_size > eligible.len() {
        return Err(DualsetError::ReviewTooLarge {
            requested: sample_size,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, eligible.len(), sample_size).into_vec();
    picks.sort_unstable();
    let items = picks
        .into_iter()
        .enumerate()
        .map(|(row, i)| {
            let (target, duals) = &eligible[i];
            ReviewItem {
                row_id: format!("r{:04}", row + 1),
                target: (*target).clone(),
                duals: duals.to_vec(),
            }
        })
        .collect();
    Ok(ReviewBundle {
        seed,
        rubric: REVIEW_RUBRIC.into(),
        items,
    })
}

/// Writes `bundle.json` and one blank `reviewer_<n>.csv` per reviewer.
pub fn write_review_bundle(
    bundle: &ReviewBundle,
    dir: &Path,
    reviewers: usize,
) -> Result<Vec<PathBuf>, DualsetError> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(bundle)
        .map_err(|source| DualsetError::Json { line: 0, source })?;
    fs::write(dir.join("bundle.json"), json + "\n")?;
    let mut sheets = Vec::with_capacity(reviewers);
    for n in 1..=reviewers {
        let path = dir.join(format!("reviewer_{n}.csv"));
        let mut text = String::from("row_id,score\n");
        for item in &bundle.items {
            text.push_str(&item.row_id);
            text.push_str(",\n");
        }
        fs::write(&path, text)?;
        sheets.push(path);
    }
    Ok(sheets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSummary {
    pub reviewers: usize,
    pub rows: usize,
    /// Share of all scores equal to 3.
    pub full_mark_rate: f64,
    /// Share of all scores of at least 2.
    pub at_least_two_rate: f64,
    /// Share of rows where every reviewer gave the same score.
    pub agreement: f64,
}

#[derive(Debug, Deserialize)]
struct SheetRow {
    row_id: String,
    score: String,
}

/// Reads one filled-in sheet as `(row_id, score)` rows.
pub fn parse_review_sheet(name: &str, reader: impl Read) -> Result<Vec<(String, u8)>, DualsetError> {
    let bad = |reason: String| DualsetError::Review {
        sheet: name.into(),
        reason,
    };
    let mut rows = Vec::new();
    for record in csv::Reader::from_reader(reader).deserialize::<SheetRow>() {
        let row = record.map_err(|e| bad(e.to_string()))?;
        let score: u8 = match row.score.trim().parse() {
            Ok(s @ 1..=3) => s,
            _ => return Err(bad(format!("row {} has score {:?}, expected 1-3", row.row_id, row.score))),
        };
        rows.push((row.row_id, score));
    }
    Ok(rows)
}

/// Sheets must cover the same rows in the same order.
pub fn summarize_reviews(sheets: &[Vec<(String, u8)>]) -> Result<ReviewSummary, DualsetError> {
    let bad = |sheet: usize, reason: String| DualsetError::Review {
        sheet: format!("#{}", sheet + 1),
        reason,
    };
    let Some(first) = sheets.first() else {
        return Err(bad(0, "no reviewer sheets".into()));
    };
    if first.is_empty() {
        return Err(bad(0, "sheet has no rows".into()));
    }
    for (s, sheet) in sheets.iter().enumerate().skip(1) {
        if sheet.len() != first.len() || sheet.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            return Err(bad(s, "rows differ from the first sheet".into()));
        }
    }
    let total = (sheets.len() * first.len()) as f64;
    let count = |pred: fn(u8) -> bool| {
        sheets.iter().flatten().filter(|(_, s)| pred(*s)).count() as f64 / total
    };
    let agreeing = (0..first.len())
        .filter(|&i| sheets.iter().all(|s| s[i].1 == first[i].1))
        .count();
    Ok(ReviewSummary {
        reviewers: sheets.len(),
        rows: first.len(),
        full_mark_rate: count(|s| s == 3),
        at_least_two_rate: count(|s| s >= 2),
        agreement: agreeing as f64 / first.len() as f64,
    })
}

pub fn ingest_reviews(paths: &[PathBuf]) -> Result<ReviewSummary, DualsetError> {
    let sheets = paths
        .iter()
        .map(|p| parse_review_sheet(&p.display().to_string(), fs::File::open(p)?))
        .collect::<Result<Vec<_>, _>>()?;
    summarize_reviews(&sheets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualset::{assemble_eval_set, AnswerBook, AnswerSet, MockTranslator, TemplateQuestion};

    fn sheet(scores: &[u8]) -> Vec<(String, u8)> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("r{i}"), s))
            .collect()
    }

    #[test]
    fn all_threes() {
        let s = summarize_reviews(&[sheet(&[3; 100])]).unwrap();
        assert_eq!(s.full_mark_rate, 1.0);
        assert_eq!(s.at_least_two_rate, 1.0);
    }

    #[test]
    fn engineered_mix() {
        let mut scores = vec![3u8; 489];
        scores.extend([2u8; 11]);
        let s = summarize_reviews(&[sheet(&scores)]).unwrap();
        assert_eq!(format!("{:.1}%", s.full_mark_rate * 100.0), "97.8%");
        assert_eq!(s.at_least_two_rate, 1.0);
    }

    #[test]
    fn agreement_across_reviewers() {
        let a = sheet(&[3, 2, 3, 1]);
        let s = summarize_reviews(&[a.clone(), a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(s.agreement, 1.0);
        let s = summarize_reviews(&[a.clone(), a.clone(), a.clone(), sheet(&[3, 3, 3, 1])]).unwrap();
        assert_eq!(s.agreement, 0.75);
    }

    #[test]
    fn parses_csv_and_rejects_bad_scores() {
        let rows = parse_review_sheet("x", "row_id,score\nr1,3\nr2, 2\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![("r1".into(), 3), ("r2".into(), 2)]);
        assert!(parse_review_sheet("x", "row_id,score\nr1,4\n".as_bytes()).is_err());
        assert!(parse_review_sheet("x", "row_id,score\nr1,\n".as_bytes()).is_err());
    }

    fn small_set() -> (Vec<LocalizedQuestion>, Vec<DualPair>, DatasetSpec) {
        let mut spec = DatasetSpec::seven_region();
        for row in &mut spec.layout {
            row.samples_per_cell = 3;
        }
        let templates: Vec<TemplateQuestion> = (0..3)
            .map(|i| TemplateQuestion {
                template_id: format!("t{i}"),
                text: format!("Question {i} about «REGION»?"),
                topic: "misc".into(),
            })
            .collect();
        let mut book = AnswerBook::new();
        let mut table = Vec::new();
        for (c, l) in &spec.native_languages {
            for t in &templates {
                book.insert((t.template_id.clone(), c.clone()), AnswerSet::from_texts(&["a"]));
            }
            table.push(crate::dualset::AdaptationRow {
                culture: c.clone(),
                language: l.clone(),
                region_name: c.clone(),
                rules: vec![],
            });
        }
        let out = assemble_eval_set(&spec, &templates, &book, &table.into(), &MockTranslator, Default::default())
            .unwrap();
        (out.records, out.pairs, spec)
    }

    #[test]
    fn sample_groups_duals() {
        let (records, pairs, spec) = small_set();
        let bundle = sample_for_review(&records, &pairs, &spec, 10, 7).unwrap();
        assert_eq!(bundle.items.len(), 10);
        for item in &bundle.items {
            assert_eq!(item.target.culture, "US");
            assert_ne!(item.target.language, "en");
            let native = &item.duals[2];
            assert_eq!(spec.native_languages[&native.culture], item.target.language);
            assert_eq!(item.duals[0].language, "en");
            assert_eq!(item.duals[1].language, "en");
        }
        assert_eq!(bundle, sample_for_review(&records, &pairs, &spec, 10, 7).unwrap());
        // 6 languages x 3 templates
        assert!(matches!(
            sample_for_review(&records, &pairs, &spec, 19, 7),
            Err(DualsetError::ReviewTooLarge { available: 18, .. })
        ));
    }

    #[test]
    fn bundle_files() {
        let (records, pairs, spec) = small_set();
        let bundle = sample_for_review(&records, &pairs, &spec, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sheets = write_review_bundle(&bundle, dir.path(), 2).unwrap();
        assert_eq!(sheets.len(), 2);
        let blank = fs::read_to_string(&sheets[0]).unwrap();
        assert_eq!(blank.lines().count(), 3);
        assert!(ingest_reviews(&sheets).is_err());
        let filled = blank.replace(",\n", ",3\n");
        for s in &sheets {
            fs::write(s, &filled).unwrap();
        }
        assert_eq!(ingest_reviews(&sheets).unwrap().full_mark_rate, 1.0);
    }
}

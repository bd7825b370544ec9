use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalRecord};
use crate::dualset::CellKey;

/// Mean score of a cell on a 0-100 scale, kept at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub mean: f64,
    pub count: usize,
}

impl fmt::Display for CellScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.mean)
    }
}

/// Unweighted mean of the cell's 0/1 scores, times 100.
pub fn score_set(records: &[EvalRecord], cell: &CellKey) -> Result<CellScore, EvalError> {
    let (hits, count) = records
        .iter()
        .filter(|r| r.question.culture == cell.culture && r.question.language == cell.language)
        .fold((0usize, 0usize), |(h, n), r| (h + r.score as usize, n + 1));
    if count == 0 {
        return Err(EvalError::EmptyCell(cell.clone()));
    }
    Ok(CellScore {
        mean: hits as f64 * 100.0 / count as f64,
        count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub culture: String,
    pub language: String,
    /// `None` when the data has no records for the cell.
    pub score: Option<CellScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantReport {
    pub model_id: String,
    /// Sorted by (culture, language).
    pub cells: Vec<CellEntry>,
}

impl QuadrantReport {
    pub fn cell(&self, culture: &str, language: &str) -> Option<CellScore> {
        self.cells
            .iter()
            .find(|c| c.culture == culture && c.language == language)
            .and_then(|c| c.score)
    }

    pub fn populated(&self) -> usize {
        self.cells.iter().filter(|c| c.score.is_some()).count()
    }

    /// `model_id,culture,language,mean,count`; absent cells have empty fields.
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model_id", "culture", "language", "mean", "count"])?;
        for c in &self.cells {
            let (mean, count) = match c.score {
                Some(s) => (s.mean.to_string(), s.count.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([&self.model_id, &c.culture, &c.language, &mean, &count])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?)
            .expect("csv output is utf-8"))
    }

    /// Languages as rows, cultures as columns, one decimal; `-` for absent.
    pub fn to_table(&self) -> String {
        let cultures: BTreeSet<&str> = self.cells.iter().map(|c| c.culture.as_str()).collect();
        let languages: BTreeSet<&str> = self.cells.iter().map(|c| c.language.as_str()).collect();
        let mut out = format!("{:<8}", self.model_id.chars().take(8).collect::<String>());
        for c in &cultures {
            out.push_str(&format!("{c:>8}"));
        }
        out.push('\n');
        for l in &languages {
            out.push_str(&format!("{l:<8}"));
            for c in &cultures {
                let s = self.cell(c, l).map_or("-".to_string(), |s| s.to_string());
                out.push_str(&format!("{s:>8}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-cell scores for one model. `expected` cells with no records are listed
/// as absent; cells found in the data are always included.
pub fn quadrant_report(records: &[EvalRecord], model_id: &str, expected: &[CellKey]) -> QuadrantReport {
    let mut tallies: BTreeMap<CellKey, (usize, usize)> =
        expected.iter().map(|c| (c.clone(), (0, 0))).collect();
    for r in records.iter().filter(|r| r.model_id == model_id) {
        let t = tallies.entry(r.question.cell()).or_insert((0, 0));
        t.0 += r.score as usize;
        t.1 += 1;
    }
    QuadrantReport {
        model_id: model_id.into(),
        cells: tallies
            .into_iter()
            .map(|(cell, (hits, count))| CellEntry {
                culture: cell.culture,
                language: cell.language,
                score: (count > 0).then(|| CellScore {
                    mean: hits as f64 * 100.0 / count as f64,
                    count,
                }),
            })
            .collect(),
    }
}

/// Cell-wise unweighted mean across models. A cell is populated only when
/// every report has it; counts are summed.
pub fn average_reports(reports: &[QuadrantReport], model_id: &str) -> Result<QuadrantReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    let keys: BTreeSet<CellKey> = reports
        .iter()
        .flat_map(|r| r.cells.iter().map(|c| CellKey::new(c.culture.clone(), c.language.clone())))
        .collect();
    let cells = keys
        .into_iter()
        .map(|k| {
            let scores: Option<Vec<CellScore>> =
                reports.iter().map(|r| r.cell(&k.culture, &k.language)).collect();
            let score = scores.map(|s| CellScore {
                mean: s.iter().map(|x| x.mean).sum::<f64>() / s.len() as f64,
                count: s.iter().map(|x| x.count).sum(),
            });
            CellEntry {
                culture: k.culture,
                language: k.language,
                score,
            }
        })
        .collect();
    Ok(QuadrantReport {
        model_id: model_id.into(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub label: String,
    pub lhs: CellKey,
    pub rhs: CellKey,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub delta: f64,
}

impl GapComparison {
    fn new(label: String, report: &QuadrantReport, lhs: CellKey, rhs: CellKey) -> Result<Self, EvalError> {
        let get = |k: &CellKey| {
            report
                .cell(&k.culture, &k.language)
                .ok_or_else(|| EvalError::MissingCell(k.clone()))
        };
        let (l, r) = (get(&lhs)?.mean, get(&rhs)?.mean);
        Ok(Self {
            label,
            lhs,
            rhs,
            lhs_mean: l,
            rhs_mean: r,
            delta: l - r,
        })
    }

    pub fn swapped(&self) -> Self {
        Self {
            label: format!("{} (swapped)", self.label),
            lhs: self.rhs.clone(),
            rhs: self.lhs.clone(),
            lhs_mean: self.rhs_mean,
            rhs_mean: self.lhs_mean,
            delta: self.rhs_mean - self.lhs_mean,
        }
    }

    /// Signed, rounded to two decimals with trailing zeros dropped: `+8.8`, `-0.95`.
    pub fn display_delta(&self) -> String {
        let mut s = format!("{:+.2}", self.delta);
        if s.ends_with('0') {
            s.pop();
        }
        if s == "-0.0" {
            s = "+0.0".into();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub model_id: String,
    pub comparisons: Vec<GapComparison>,
}

impl GapReport {
    pub fn swapped(&self) -> Self {
        Self {
            model_id: self.model_id.clone(),
            comparisons: self.comparisons.iter().map(GapComparison::swapped).collect(),
        }
    }
}

/// For a fixed language, each culture's cell against the baseline culture's.
pub fn culture_gap(report: &QuadrantReport, language: &str, baseline: &str) -> Result<GapReport, EvalError> {
    let base = CellKey::new(baseline, language);
    if report.cell(baseline, language).is_none() {
        return Err(EvalError::MissingCell(base));
    }
    let others: Vec<&str> = report
        .cells
        .iter()
        .filter(|c| c.language == language && c.culture != baseline && c.score.is_some())
        .map(|c| c.culture.as_str())
        .collect();
    if others.is_empty() {
        return Err(EvalError::InsufficientCultures(language.into()));
    }
    let comparisons = others
        .into_iter()
        .map(|c| {
            GapComparison::new(
                format!("culture {c} vs {baseline} in {language}"),
                report,
                CellKey::new(c, language),
                base.clone(),
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(GapReport {
        model_id: report.model_id.clone(),
        comparisons,
    })
}

/// A culture asked in its own language against the same culture asked in
/// the pivot language. Positive means the native language helps.
pub fn synergy_gap(
    report: &QuadrantReport,
    culture: &str,
    native_language: &str,
    pivot_language: &str,
) -> Result<GapReport, EvalError> {
    let cmp = GapComparison::new(
        format!("culture {culture}: {native_language} vs {pivot_language}"),
        report,
        CellKey::new(culture, native_language),
        CellKey::new(culture, pivot_language),
    )?;
    Ok(GapReport {
        model_id: report.model_id.clone(),
        comparisons: vec![cmp],
    })
}

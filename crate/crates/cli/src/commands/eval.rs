use std::fmt::Write as _;
use std::fs;

use anyhow::{Context as _, Result};
use dualprobe::dualset::{read_dataset, read_jsonl, write_jsonl};
use dualprobe::evalkit::{
    average_reports, culture_gap, evaluate_responses, quadrant_report, synergy_gap, EvalRecord,
    GapReport, ModelResponse, QuadrantReport,
};
use serde::{Deserialize, Serialize};

use super::{write_json, Context, DatasetSummary, Outcome};

pub const AVERAGE_ID: &str = "average";

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelGaps {
    pub model_id: String,
    pub culture: Vec<GapReport>,
    pub synergy: Vec<GapReport>,
    /// Comparisons whose cells were missing, with the reason.
    pub skipped: Vec<String>,
}

pub fn gaps_for(report: &QuadrantReport, summary: &DatasetSummary, baseline: &str) -> ModelGaps {
    let spec = &summary.spec;
    let mut gaps = ModelGaps {
        model_id: report.model_id.clone(),
        culture: Vec::new(),
        synergy: Vec::new(),
        skipped: Vec::new(),
    };
    for row in &spec.layout {
        match culture_gap(report, &row.language, baseline) {
            Ok(g) => gaps.culture.push(g),
            Err(e) => gaps.skipped.push(format!("culture gap in {}: {e}", row.language)),
        }
    }
    for (culture, native) in &spec.native_languages {
        if *native == spec.pivot_language {
            continue;
        }
        match synergy_gap(report, culture, native, &spec.pivot_language) {
            Ok(g) => gaps.synergy.push(g),
            Err(e) => gaps.skipped.push(format!("synergy gap for {culture}: {e}")),
        }
    }
    gaps
}

fn gap_lines(out: &mut String, title: &str, reports: &[GapReport]) {
    let _ = writeln!(out, "{title}");
    for g in reports.iter().flat_map(|r| &r.comparisons) {
        let _ = writeln!(
            out,
            "  {:<40} {:>7.2} {:>7.2} {:>7}",
            g.label,
            g.lhs_mean,
            g.rhs_mean,
            g.display_delta()
        );
    }
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let summary = ctx.summary()?;
    let dataset = read_dataset(&ctx.records_path()?)?;
    let expected = summary.expected_cells();
    let baseline = &ctx.config.eval.baseline_culture;
    let mut all: Vec<EvalRecord> = Vec::new();
    let mut reports = Vec::new();
    for model_id in ctx.model_ids() {
        let path = ctx.artifact(&format!("responses/{model_id}.jsonl"), "gen-traces")?;
        let responses: Vec<ModelResponse> = read_jsonl(&path)?;
        let records = evaluate_responses(&responses, &dataset, ctx.config.eval.matcher)
            .with_context(|| format!("scoring {}", path.display()))?;
        reports.push(quadrant_report(&records, &model_id, &expected));
        all.extend(records);
    }
    if reports.len() > 1 {
        reports.push(average_reports(&reports, AVERAGE_ID)?);
    }

    let dir = ctx.dir("eval")?;
    write_jsonl(&dir.join("records.jsonl"), &all)?;
    write_json(&dir.join("quadrants.json"), &reports)?;
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let text = r.to_csv()?;
        let skip = if i == 0 { 0 } else { 1 };
        for line in text.lines().skip(skip) {
            csv.push_str(line);
            csv.push('\n');
        }
    }
    fs::write(dir.join("quadrants.csv"), csv)?;

    let gaps: Vec<ModelGaps> = reports
        .iter()
        .map(|r| gaps_for(r, &summary, baseline))
        .collect();
    write_json(&dir.join("gaps.json"), &gaps)?;

    let mut tables = String::new();
    for (r, g) in reports.iter().zip(&gaps) {
        let _ = writeln!(tables, "== {} ==", r.model_id);
        tables.push_str(&r.to_table());
        gap_lines(&mut tables, "culture gaps (lhs - rhs)", &g.culture);
        gap_lines(&mut tables, "synergy gaps (native - pivot)", &g.synergy);
        tables.push('\n');
    }
    fs::write(dir.join("tables.txt"), tables)?;
    Ok(Outcome::Complete)
}

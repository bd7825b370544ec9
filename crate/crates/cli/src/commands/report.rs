use std::fmt::Write as _;
use std::fs;

use anyhow::Result;
use dualprobe::evalkit::QuadrantReport;
use dualprobe::probe::KeyNeuronSet;
use dualprobe::stats::{neuron_count_vs_score, AblationSummary};
use serde::Serialize;

use super::eval::ModelGaps;
use super::neurons::load_unions;
use super::proportions::ModelProportions;
use super::{read_json, sorted_files, write_csv, write_json, Context, Outcome};

#[derive(Serialize)]
struct Correlation {
    model_id: String,
    cells: usize,
    r: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Report {
    seed: u64,
    quadrants: Vec<QuadrantReport>,
    gaps: Vec<ModelGaps>,
    proportions: Vec<ModelProportions>,
    correlations: Vec<Correlation>,
    ablations: Vec<AblationSummary>,
}

#[derive(Serialize)]
struct QuadrantRow<'a> {
    model_id: &'a str,
    culture: &'a str,
    language: &'a str,
    mean: Option<f64>,
    count: Option<usize>,
}

#[derive(Serialize)]
struct GapRow<'a> {
    model_id: &'a str,
    kind: &'a str,
    label: &'a str,
    lhs_mean: f64,
    rhs_mean: f64,
    delta: f64,
}

#[derive(Serialize)]
struct ProportionRow<'a> {
    model_id: &'a str,
    culture: &'a str,
    language: &'a str,
    mean_proportion: f64,
}

#[derive(Serialize)]
struct CorrelationRow<'a> {
    model_id: &'a str,
    culture: &'a str,
    language: &'a str,
    key_neurons: usize,
    mean: f64,
}

#[derive(Serialize)]
struct AblationPlotRow<'a> {
    model_id: &'a str,
    threshold: &'a str,
    mask: &'a str,
    masked_count: usize,
    in_dist: f64,
    ood: f64,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let quadrants: Vec<QuadrantReport> = read_json(&ctx.artifact("eval/quadrants.json", "eval")?)?;
    let gaps: Vec<ModelGaps> = read_json(&ctx.artifact("eval/gaps.json", "eval")?)?;
    let mut proportions = Vec::new();
    for p in sorted_files(&ctx.out.join("proportions"), "json")? {
        proportions.push(read_json::<ModelProportions>(&p)?);
    }
    let mut ablations = Vec::new();
    for p in sorted_files(&ctx.out.join("ablation"), "json")? {
        ablations.push(read_json::<AblationSummary>(&p)?);
    }

    let mut correlations = Vec::new();
    let mut corr_rows = Vec::new();
    for q in &quadrants {
        let unions = load_unions(ctx, &q.model_id)?;
        if unions.is_empty() {
            continue;
        }
        let mut entries: Vec<(KeyNeuronSet, f64)> = Vec::new();
        for cell in &q.cells {
            let key = (cell.culture.clone(), cell.language.clone());
            if let (Some(score), Some(set)) = (cell.score, unions.get(&key)) {
                corr_rows.push(CorrelationRow {
                    model_id: &q.model_id,
                    culture: &cell.culture,
                    language: &cell.language,
                    key_neurons: set.len(),
                    mean: score.mean,
                });
                entries.push((set.clone(), score.mean));
            }
        }
        let (r, error) = match neuron_count_vs_score(&entries) {
            Ok(c) => (Some(c.r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        correlations.push(Correlation {
            model_id: q.model_id.clone(),
            cells: entries.len(),
            r,
            error,
        });
    }

    let dir = ctx.dir("report")?;
    let plots = ctx.dir("report/plots")?;
    let quadrant_rows: Vec<QuadrantRow> = quadrants
        .iter()
        .flat_map(|q| {
            q.cells.iter().map(move |c| QuadrantRow {
                model_id: &q.model_id,
                culture: &c.culture,
                language: &c.language,
                mean: c.score.map(|s| s.mean),
                count: c.score.map(|s| s.count),
            })
        })
        .collect();
    write_csv(&plots.join("quadrants.csv"), &quadrant_rows)?;
    let gap_rows: Vec<GapRow> = gaps
        .iter()
        .flat_map(|g| {
            let culture = g.culture.iter().flat_map(|r| &r.comparisons).map(|c| ("culture", c));
            let synergy = g.synergy.iter().flat_map(|r| &r.comparisons).map(|c| ("synergy", c));
            culture.chain(synergy).map(move |(kind, c)| GapRow {
                model_id: &g.model_id,
                kind,
                label: &c.label,
                lhs_mean: c.lhs_mean,
                rhs_mean: c.rhs_mean,
                delta: c.delta,
            })
        })
        .collect();
    write_csv(&plots.join("gaps.csv"), &gap_rows)?;
    let prop_rows: Vec<ProportionRow> = proportions
        .iter()
        .flat_map(|m| {
            m.reports.iter().map(move |r| ProportionRow {
                model_id: &m.model_id,
                culture: &r.culture,
                language: &r.language,
                mean_proportion: r.mean_proportion,
            })
        })
        .collect();
    write_csv(&plots.join("proportions.csv"), &prop_rows)?;
    write_csv(&plots.join("correlation.csv"), &corr_rows)?;
    let ablation_rows: Vec<(String, dualprobe::stats::AblationRow)> = ablations
        .iter()
        .flat_map(|a| a.rows().into_iter().map(move |r| (a.model_id.clone(), r)))
        .collect();
    let plot_rows: Vec<AblationPlotRow> = ablation_rows
        .iter()
        .map(|(m, r)| AblationPlotRow {
            model_id: m,
            threshold: &r.threshold,
            mask: &r.mask,
            masked_count: r.masked_count,
            in_dist: r.in_dist,
            ood: r.ood,
        })
        .collect();
    write_csv(&plots.join("ablation.csv"), &plot_rows)?;

    let mut md = String::from("# Run summary\n\n");
    let _ = writeln!(md, "Seed: {}\n", ctx.config.seed);
    for q in &quadrants {
        let _ = writeln!(md, "## {}\n\n```\n{}```\n", q.model_id, q.to_table());
    }
    md.push_str("## Gaps\n\n| model | comparison | delta |\n|---|---|---|\n");
    for g in &gaps {
        for c in g.culture.iter().chain(&g.synergy).flat_map(|r| &r.comparisons) {
            let _ = writeln!(md, "| {} | {} | {} |", g.model_id, c.label, c.display_delta());
        }
    }
    md.push_str("\n## Key-neuron count vs score\n\n");
    for c in &correlations {
        match (c.r, &c.error) {
            (Some(r), _) => {
                let _ = writeln!(md, "- {}: r = {r:.3} over {} cells", c.model_id, c.cells);
            }
            (None, Some(e)) => {
                let _ = writeln!(md, "- {}: undefined ({e})", c.model_id);
            }
            _ => {}
        }
    }
    if !ablations.is_empty() {
        md.push_str("\n## Masking ablation\n\n| model | threshold | mask | masked | in-dist | ood |\n|---|---|---|---|---|---|\n");
        for r in &plot_rows {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {:.3} | {:.3} |",
                r.model_id, r.threshold, r.mask, r.masked_count, r.in_dist, r.ood
            );
        }
    }
    fs::write(dir.join("summary.md"), md)?;

    write_json(
        &dir.join("report.json"),
        &Report {
            seed: ctx.config.seed,
            quadrants,
            gaps,
            proportions,
            correlations,
            ablations,
        },
    )?;
    Ok(Outcome::Complete)
}

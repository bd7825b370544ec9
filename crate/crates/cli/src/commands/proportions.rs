use std::collections::BTreeSet;

use anyhow::Result;
use dualprobe::dualset::read_dataset;
use dualprobe::probe::{aggregate_proportions, ProbeError, ProportionPair, SpecializationReport};
use serde::{Deserialize, Serialize};

use super::neurons::load_key_set;
use super::{write_csv, write_json, Context, Outcome};

#[derive(Debug, Serialize, Deserialize)]
pub struct Undefined {
    pub culture: String,
    pub language: String,
    pub reason: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelProportions {
    pub model_id: String,
    pub base_language: String,
    pub reports: Vec<SpecializationReport>,
    pub undefined: Vec<Undefined>,
}

#[derive(Serialize)]
struct Row<'a> {
    model_id: &'a str,
    culture: &'a str,
    language: &'a str,
    mean_proportion: f64,
    pairs: usize,
    skipped: usize,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let summary = ctx.summary()?;
    let pivot = summary.spec.pivot_language.clone();
    let records = read_dataset(&ctx.records_path()?)?;
    let present: BTreeSet<(String, String, String)> = records
        .iter()
        .map(|r| (r.template_id.clone(), r.culture.clone(), r.language.clone()))
        .collect();
    let templates: BTreeSet<&str> = records.iter().map(|r| r.template_id.as_str()).collect();
    let dir = ctx.dir("proportions")?;
    let mut rows_all = Vec::new();
    for model_id in ctx.model_ids() {
        let mut reports = Vec::new();
        let mut undefined = Vec::new();
        for cell in summary.expected_cells() {
            if cell.language == pivot {
                continue;
            }
            let mut pairs = Vec::new();
            for t in &templates {
                let base = (t.to_string(), cell.culture.clone(), pivot.clone());
                let target = (t.to_string(), cell.culture.clone(), cell.language.clone());
                if !present.contains(&base) || !present.contains(&target) {
                    continue;
                }
                let qid = |k: &(String, String, String)| format!("{}.{}.{}", k.0, k.1, k.2);
                pairs.push(ProportionPair {
                    pair_id: t.to_string(),
                    base: load_key_set(ctx, &model_id, &qid(&base))?,
                    target: load_key_set(ctx, &model_id, &qid(&target))?,
                });
            }
            let reason = if pairs.is_empty() {
                Some(format!("no templates have both {pivot} and {} renderings", cell.language))
            } else {
                match aggregate_proportions(&pairs, &cell.culture, &cell.language) {
                    Ok(r) => {
                        reports.push(r);
                        None
                    }
                    Err(e @ ProbeError::EmptyReport(_)) => Some(e.to_string()),
                    Err(e) => return Err(e.into()),
                }
            };
            if let Some(reason) = reason {
                undefined.push(Undefined {
                    culture: cell.culture.clone(),
                    language: cell.language.clone(),
                    reason,
                });
            }
        }
        let result = ModelProportions {
            model_id: model_id.clone(),
            base_language: pivot.clone(),
            reports,
            undefined,
        };
        write_json(&dir.join(format!("{model_id}.json")), &result)?;
        rows_all.push(result);
    }
    let rows: Vec<Row> = rows_all
        .iter()
        .flat_map(|m| {
            m.reports.iter().map(move |r| Row {
                model_id: &m.model_id,
                culture: &r.culture,
                language: &r.language,
                mean_proportion: r.mean_proportion,
                pairs: r.pair_count,
                skipped: r.skip_count(),
            })
        })
        .collect();
    write_csv(&dir.join("proportions.csv"), &rows)?;
    Ok(Outcome::Complete)
}

use std::collections::BTreeMap;
use std::time::Duration;

use anyhow::{Context as _, Result};
use dualprobe::dualset::{
    assemble_eval_set, read_answer_book, read_jsonl, sample_for_review, validate_pairs,
    write_dataset, write_jsonl, write_review_bundle, AdaptationTable, AssemblyOptions,
    FaultyTranslator, HttpTranslator, MockTranslator, TemplateQuestion, TranslatorClient,
};
use dualprobe::seed::derive_seed;

use super::{write_json, CellCount, Context, DatasetSummary, Outcome};
use crate::config::{config_bail, ConfigError, RunConfig, TranslatorKind};

fn translator(config: &RunConfig) -> Result<Box<dyn TranslatorClient>> {
    let t = &config.translator;
    match t.kind {
        TranslatorKind::Mock if t.fail_when_contains.is_empty() => Ok(Box::new(MockTranslator)),
        TranslatorKind::Mock => {
            let needles = t.fail_when_contains.clone();
            Ok(Box::new(FaultyTranslator::new(MockTranslator, move |req| {
                needles.iter().any(|n| req.text.contains(n.as_str()))
            })))
        }
        TranslatorKind::Http => {
            let endpoint = match std::env::var(&t.endpoint_env) {
                Ok(v) if !v.is_empty() => v,
                _ => config_bail!("translator endpoint: ${} is not set", t.endpoint_env),
            };
            let token = match &t.token_env {
                Some(var) => match std::env::var(var) {
                    Ok(v) => Some(v),
                    Err(_) => config_bail!("translator token: ${var} is not set"),
                },
                None => None,
            };
            Ok(Box::new(HttpTranslator::new(
                endpoint,
                token,
                Duration::from_secs(t.timeout_secs),
            )))
        }
    }
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let config = &ctx.config;
    let spec = config.dataset_spec()?;
    let templates_path = config.input("templates", &config.paths.templates)?;
    let answers_path = config.input("answers", &config.paths.answers)?;
    let templates: Vec<TemplateQuestion> = read_jsonl(&templates_path)?;
    let answers = read_answer_book(&answers_path)?;
    if config.adaptation.is_empty() {
        config_bail!("no [[adaptation]] rows configured");
    }
    let table = AdaptationTable::from(config.adaptation.clone());
    let client = translator(config)?;
    let options = AssemblyOptions {
        retry: config.retry(),
        max_in_flight: config.translator.max_in_flight.max(1),
    };
    let assembly = assemble_eval_set(&spec, &templates, &answers, &table, &*client, options)
        .map_err(|e| match e {
            dualprobe::dualset::DualsetError::InsufficientTemplates(_)
            | dualprobe::dualset::DualsetError::MissingAdaptation(_) => {
                anyhow::Error::new(ConfigError(e.to_string()))
            }
            other => anyhow::Error::new(other),
        })?;
    let violations = validate_pairs(&assembly.records, &assembly.pairs);
    if !violations.is_empty() {
        anyhow::bail!("pair index is inconsistent: {violations:?}");
    }

    let dir = ctx.dir("dataset")?;
    write_dataset(&dir.join("records.jsonl"), &assembly.records)?;
    write_jsonl(&dir.join("pairs.jsonl"), &assembly.pairs)?;
    write_jsonl(&dir.join("quarantine.jsonl"), &assembly.quarantined)?;

    let built = assembly.cell_counts();
    let summary = DatasetSummary {
        requested: assembly.requested,
        built: assembly.records.len(),
        quarantined: assembly.quarantined.len(),
        pairs: assembly.pairs.len(),
        cells: spec
            .cells()
            .into_iter()
            .map(|(cell, requested)| CellCount {
                built: built.get(&cell).copied().unwrap_or(0),
                culture: cell.culture,
                language: cell.language,
                requested,
            })
            .collect(),
        spec: spec.clone(),
    };
    write_json(&dir.join("summary.json"), &summary)?;

    if config.dataset.review_sample > 0 {
        let bundle = sample_for_review(
            &assembly.records,
            &assembly.pairs,
            &spec,
            config.dataset.review_sample,
            derive_seed(config.seed, "review"),
        )?;
        write_review_bundle(&bundle, &dir.join("review"), config.dataset.reviewers)
            .context("writing review bundle")?;
    }

    let mut by_cell: BTreeMap<String, usize> = BTreeMap::new();
    for q in &assembly.quarantined {
        *by_cell.entry(format!("{}/{}", q.culture, q.language)).or_default() += 1;
    }
    eprintln!(
        "built {} of {} records, {} pairs",
        summary.built, summary.requested, summary.pairs
    );
    if assembly.is_complete() {
        Ok(Outcome::Complete)
    } else {
        for (cell, n) in by_cell {
            eprintln!("quarantined {n} in {cell}");
        }
        Ok(Outcome::Partial)
    }
}

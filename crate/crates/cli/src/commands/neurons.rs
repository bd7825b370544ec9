use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;

use anyhow::{Context as _, Result};
use dualprobe::probe::{extract_key_neurons, read_key_set, union_key_neurons, write_key_set, KeyNeuronSet};
use dualprobe::trace::{read_trace, validate_manifest, TraceManifest};
use rayon::prelude::*;
use serde::Serialize;

use super::{write_csv, write_json, Context, Outcome};

#[derive(Serialize)]
struct CountRow<'a> {
    question_id: &'a str,
    culture: &'a str,
    language: &'a str,
    key_neurons: usize,
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let threshold = ctx.config.probe.threshold;
    threshold
        .validate()
        .map_err(|e| crate::config::ConfigError(e.to_string()))?;
    for model_id in ctx.model_ids() {
        let trace_dir = ctx.out.join("traces").join(&model_id);
        let manifest_path = ctx.artifact(&format!("traces/{model_id}/manifest.tsv"), "gen-traces")?;
        let manifest: TraceManifest = fs::read_to_string(&manifest_path)?
            .parse()
            .with_context(|| format!("parsing {}", manifest_path.display()))?;
        let out = ctx.out.join("neurons").join(&model_id);
        if out.exists() {
            fs::remove_dir_all(&out)?;
        }
        fs::create_dir_all(out.join("union"))?;

        let violations = validate_manifest(&manifest, &trace_dir);
        if !violations.is_empty() {
            write_json(&out.join("violations.json"), &violations)?;
            anyhow::bail!(
                "{model_id}: {} manifest violations (first: {:?}); see {}",
                violations.len(),
                violations[0],
                out.join("violations.json").display()
            );
        }

        let sets: Vec<KeyNeuronSet> = manifest
            .entries
            .par_iter()
            .map(|e| -> Result<KeyNeuronSet> {
                let path = trace_dir.join(&e.path);
                let trace = read_trace(&mut BufReader::new(File::open(&path)?))
                    .with_context(|| format!("reading {}", path.display()))?;
                let set = extract_key_neurons(&trace, &threshold)
                    .with_context(|| format!("extracting {}", e.question_id))?;
                fs::write(out.join(format!("{}.keys", e.question_id)), write_key_set(&set))?;
                Ok(set)
            })
            .collect::<Result<_>>()?;

        let mut cells: BTreeMap<(&str, &str), Vec<KeyNeuronSet>> = BTreeMap::new();
        let mut rows = Vec::with_capacity(sets.len());
        for (e, set) in manifest.entries.iter().zip(&sets) {
            cells
                .entry((e.culture.as_str(), e.language.as_str()))
                .or_default()
                .push(set.clone());
            rows.push(CountRow {
                question_id: &e.question_id,
                culture: &e.culture,
                language: &e.language,
                key_neurons: set.len(),
            });
        }
        for ((culture, language), members) in &cells {
            let union = union_key_neurons(members)?;
            fs::write(
                out.join("union").join(format!("{culture}.{language}.keys")),
                write_key_set(&union),
            )?;
        }
        write_csv(&out.join("counts.csv"), &rows)?;
        eprintln!("{model_id}: {} key sets, {} cells", sets.len(), cells.len());
    }
    Ok(Outcome::Complete)
}

/// Loads `neurons/<model>/<qid>.keys`.
pub fn load_key_set(ctx: &Context, model_id: &str, question_id: &str) -> Result<KeyNeuronSet> {
    let path = ctx.artifact(&format!("neurons/{model_id}/{question_id}.keys"), "extract-neurons")?;
    read_key_set(&fs::read_to_string(&path)?)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Loads every per-cell union for a model, keyed by (culture, language).
pub fn load_unions(ctx: &Context, model_id: &str) -> Result<BTreeMap<(String, String), KeyNeuronSet>> {
    let dir = ctx.out.join("neurons").join(model_id).join("union");
    let mut out = BTreeMap::new();
    for path in super::sorted_files(&dir, "keys")? {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let Some((culture, language)) = stem.split_once('.') else {
            anyhow::bail!("unexpected union file {}", path.display());
        };
        let set = read_key_set(&fs::read_to_string(&path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        out.insert((culture.to_string(), language.to_string()), set);
    }
    Ok(out)
}

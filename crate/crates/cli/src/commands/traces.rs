use std::fs::{self, File};
use std::io::BufWriter;

use anyhow::{Context as _, Result};
use dualprobe::dualset::{read_dataset, write_jsonl, LocalizedQuestion};
use dualprobe::evalkit::ModelResponse;
use dualprobe::seed::derive_seed;
use dualprobe::tinylm::{
    generate_with_recording, init_model, plant_gate_model, save_weights, ByteTokenizer, GatePlant,
    ModelWeights, TraceMeta,
};
use dualprobe::trace::{value_checksum, write_trace, ManifestEntry, TraceManifest};
use dualprobe::NeuronId;
use rayon::prelude::*;

use super::{safe_name, Context, Outcome};
use crate::config::{config_bail, ModelEntry, ModelKind, RunConfig};

/// Builds a configured model. Seeds derive from the root seed and the model id.
pub fn build_model(config: &RunConfig, entry: &ModelEntry) -> Result<ModelWeights> {
    let arch = config.model.with_seed(derive_seed(config.seed, &format!("model/{}", entry.id)));
    let weights = match &entry.kind {
        ModelKind::Random => init_model(&arch),
        ModelKind::Planted {
            trigger,
            gated,
            fallback,
            gate_layer,
            gate_neuron,
        } => {
            let token = |c: char| -> Result<u32> {
                if !c.is_ascii() || c == '\0' {
                    config_bail!("model {}: planted tokens must be non-NUL ASCII, got {c:?}", entry.id);
                }
                Ok(c as u32)
            };
            let plant = GatePlant::new(
                token(*trigger)?,
                token(*gated)?,
                NeuronId::new(*gate_neuron, *gate_layer),
            )
            .with_fallback(token(*fallback)?);
            plant_gate_model(&arch, &plant)
        }
    };
    weights.map_err(|e| crate::config::ConfigError(format!("model {}: {e}", entry.id)).into())
}

struct Traced {
    response: ModelResponse,
    entry: ManifestEntry,
}

fn trace_one(
    ctx: &Context,
    model_id: &str,
    weights: &ModelWeights,
    record: &LocalizedQuestion,
    dir: &std::path::Path,
) -> Result<Traced> {
    let key = record.key();
    let qid = key.question_id();
    safe_name(&qid)?;
    let tokenizer = ByteTokenizer::new(weights.config.vocab_size);
    let prompt = tokenizer.encode(&record.question)?;
    let meta = TraceMeta {
        model_id: model_id.into(),
        question_id: qid.clone(),
        language: record.language.clone(),
        culture: record.culture.clone(),
    };
    let settings = &ctx.config.generation;
    let generation = generate_with_recording(weights, None, &prompt, settings, &meta)
        .with_context(|| format!("generating for {qid}"))?;
    let file = format!("{qid}.ntrc");
    let mut sink = BufWriter::new(File::create(dir.join(&file))?);
    let byte_length = write_trace(&generation.trace, &mut sink)?;
    std::io::Write::flush(&mut sink)?;
    Ok(Traced {
        response: ModelResponse {
            question: key,
            model_id: model_id.into(),
            text: tokenizer.decode(&generation.response),
            settings: Some(settings.clone()),
        },
        entry: ManifestEntry {
            question_id: qid,
            language: record.language.clone(),
            culture: record.culture.clone(),
            path: file,
            byte_length,
            checksum: value_checksum(&generation.trace),
        },
    })
}

pub fn run(ctx: &Context) -> Result<Outcome> {
    let config = &ctx.config;
    if config.models.is_empty() {
        config_bail!("no [[models]] configured");
    }
    let records = read_dataset(&ctx.records_path()?)?;
    let models_dir = ctx.dir("models")?;
    let responses_dir = ctx.dir("responses")?;
    for entry in &config.models {
        let weights = build_model(config, entry)?;
        let mut sink = BufWriter::new(File::create(models_dir.join(format!("{}.nwts", entry.id)))?);
        save_weights(&weights, &mut sink)?;
        std::io::Write::flush(&mut sink)?;

        let dir = ctx.out.join("traces").join(&entry.id);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(&dir)?;
        let traced: Vec<Traced> = records
            .par_iter()
            .map(|r| trace_one(ctx, &entry.id, &weights, r, &dir))
            .collect::<Result<_>>()?;
        let mut manifest = TraceManifest::default();
        let mut responses = Vec::with_capacity(traced.len());
        for t in traced {
            manifest.push(t.entry)?;
            responses.push(t.response);
        }
        fs::write(dir.join("manifest.tsv"), manifest.to_string())?;
        write_jsonl(&responses_dir.join(format!("{}.jsonl", entry.id)), &responses)?;
        eprintln!("{}: traced {} questions", entry.id, responses.len());
    }
    Ok(Outcome::Complete)
}

use std::fs::{self, File};
use std::io::BufReader;

use anyhow::{Context as _, Result};
use dualprobe::dualset::read_jsonl;
use dualprobe::seed::derive_seed;
use dualprobe::stats::{run_masking_ablation, AblationSettings, EvalItem};
use dualprobe::tinylm::load_weights;

use super::{write_json, Context, Outcome};
use crate::config::{config_bail, ModelKind};

pub fn run(ctx: &Context) -> Result<Outcome> {
    let config = &ctx.config;
    let in_dist: Vec<EvalItem> = read_jsonl(&config.input("in_dist", &config.paths.in_dist)?)?;
    let ood: Vec<EvalItem> = read_jsonl(&config.input("ood", &config.paths.ood)?)?;
    let ids: Vec<String> = match &config.ablation.models {
        Some(ids) => ids.clone(),
        None => config
            .models
            .iter()
            .filter(|m| matches!(m.kind, ModelKind::Planted { .. }))
            .map(|m| m.id.clone())
            .collect(),
    };
    if ids.is_empty() {
        config_bail!("no models to ablate: set ablation.models or configure a planted model");
    }
    let thresholds = if config.ablation.thresholds.is_empty() {
        vec![config.probe.threshold]
    } else {
        config.ablation.thresholds.clone()
    };
    let dir = ctx.dir("ablation")?;
    for id in &ids {
        config.model(id)?;
        let path = ctx.artifact(&format!("models/{id}.nwts"), "gen-traces")?;
        let weights = load_weights(&mut BufReader::new(File::open(&path)?))
            .with_context(|| format!("loading {}", path.display()))?;
        let settings = AblationSettings {
            model_id: id.clone(),
            thresholds: thresholds.clone(),
            seed: derive_seed(config.seed, &format!("ablation/{id}")),
            mode: config.ablation.mode,
            generation: config.generation.clone(),
            matcher: config.eval.matcher,
        };
        let summary = run_masking_ablation(&weights, &in_dist, &ood, &settings)
            .with_context(|| format!("ablating {id}"))?;
        fs::write(dir.join(format!("{id}.csv")), summary.to_csv()?)?;
        write_json(&dir.join(format!("{id}.json")), &summary)?;
        eprintln!(
            "{id}: baseline in-dist {:.3}, ood {:.3}",
            summary.baseline_in_dist, summary.baseline_ood
        );
    }
    Ok(Outcome::Complete)
}

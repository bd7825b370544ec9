use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Result;
use dualprobe::dualset::{AdaptationRow, DatasetSpec, RetryPolicy};
use dualprobe::evalkit::Matcher;
use dualprobe::probe::ThresholdSpec;
use dualprobe::stats::MaskMode;
use dualprobe::tinylm::{ActivationKind, GenerationSettings, ModelConfig};
use serde::Deserialize;

/// Marks an error as a configuration problem (exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! config_bail {
    ($($arg:tt)*) => {
        return Err(anyhow::Error::new($crate::config::ConfigError(format!($($arg)*))))
    };
}
pub(crate) use config_bail;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub jobs: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub adaptation: Vec<AdaptationRow>,
    #[serde(default)]
    pub translator: TranslatorSection,
    #[serde(default)]
    pub model: ArchitectureSection,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub generation: GenerationSettings,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub ablation: AblationSection,
    /// Directory holding the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub templates: Option<PathBuf>,
    pub answers: Option<PathBuf>,
    pub in_dist: Option<PathBuf>,
    pub ood: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// `"seven_region"`, or absent when `spec` is given.
    pub preset: Option<String>,
    pub spec: Option<DatasetSpec>,
    /// Overrides every row's samples_per_cell.
    pub samples_per_cell: Option<usize>,
    #[serde(default)]
    pub review_sample: usize,
    #[serde(default = "default_reviewers")]
    pub reviewers: usize,
}

fn default_reviewers() -> usize {
    2
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            preset: None,
            spec: None,
            samples_per_cell: None,
            review_sample: 0,
            reviewers: default_reviewers(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslatorKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslatorSection {
    #[serde(default)]
    pub kind: TranslatorKind,
    /// Environment variable holding the endpoint URL.
    #[serde(default = "default_endpoint_env")]
    pub endpoint_env: String,
    /// Environment variable holding a bearer token, if any.
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Mock only: requests whose text contains any of these always fail.
    #[serde(default)]
    pub fail_when_contains: Vec<String>,
}

fn default_endpoint_env() -> String {
    "DUALPROBE_TRANSLATOR_URL".into()
}
fn default_timeout() -> u64 {
    60
}
fn default_attempts() -> u32 {
    RetryPolicy::default().max_attempts
}
fn default_in_flight() -> usize {
    4
}

impl Default for TranslatorSection {
    fn default() -> Self {
        Self {
            kind: TranslatorKind::Mock,
            endpoint_env: default_endpoint_env(),
            token_env: None,
            timeout_secs: default_timeout(),
            max_attempts: default_attempts(),
            max_in_flight: default_in_flight(),
            fail_when_contains: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    pub vocab_size: usize,
    pub d_model: usize,
    pub ffn_width: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub max_seq_len: usize,
    pub activation: ActivationKind,
}

impl Default for ArchitectureSection {
    fn default() -> Self {
        Self {
            vocab_size: 256,
            d_model: 16,
            ffn_width: 64,
            num_layers: 2,
            num_heads: 2,
            max_seq_len: 256,
            activation: ActivationKind::Relu,
        }
    }
}

impl ArchitectureSection {
    pub fn with_seed(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab_size,
            d_model: self.d_model,
            ffn_width: self.ffn_width,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            max_seq_len: self.max_seq_len,
            activation: self.activation,
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelKind {
    /// Seeded random weights.
    Random,
    /// One neuron decides between two single-character answers.
    Planted {
        trigger: char,
        gated: char,
        fallback: char,
        gate_layer: usize,
        gate_neuron: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "default_threshold")]
    pub threshold: ThresholdSpec,
}

fn default_threshold() -> ThresholdSpec {
    ThresholdSpec::DEFAULT
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default)]
    pub matcher: Matcher,
    #[serde(default = "default_baseline")]
    pub baseline_culture: String,
}

fn default_baseline() -> String {
    "US".into()
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            matcher: Matcher::default(),
            baseline_culture: default_baseline(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    #[serde(default)]
    pub thresholds: Vec<ThresholdSpec>,
    #[serde(default)]
    pub mode: MaskMode,
    /// Defaults to every planted model.
    pub models: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if m.id.is_empty() || !m.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                config_bail!("model id {:?} must be non-empty and use only [A-Za-z0-9._-]", m.id);
            }
            if !seen.insert(&m.id) {
                config_bail!("model id {} listed twice", m.id);
            }
        }
        if self.jobs == Some(0) {
            config_bail!("jobs must be at least 1");
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// A configured input path that must exist.
    pub fn input(&self, name: &str, p: &Option<PathBuf>) -> Result<PathBuf> {
        let Some(p) = p else {
            config_bail!("paths.{name} is not set");
        };
        let path = self.resolve(p);
        if !path.is_file() {
            config_bail!("paths.{name}: {} does not exist", path.display());
        }
        Ok(path)
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        let mut spec = match (&self.dataset.preset, &self.dataset.spec) {
            (Some(p), None) if p == "seven_region" => DatasetSpec::seven_region(),
            (Some(p), None) => config_bail!("unknown dataset preset {p:?}"),
            (None, Some(s)) => s.clone(),
            (None, None) => config_bail!("dataset needs either preset or spec"),
            (Some(_), Some(_)) => config_bail!("dataset.preset and dataset.spec are exclusive"),
        };
        if let Some(n) = self.dataset.samples_per_cell {
            for row in &mut spec.layout {
                row.samples_per_cell = n;
            }
        }
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(spec)
    }

    pub fn model(&self, id: &str) -> Result<&ModelEntry> {
        match self.models.iter().find(|m| m.id == id) {
            Some(m) => Ok(m),
            None => config_bail!("no model with id {id}"),
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.translator.max_attempts,
        }
    }
}

pub fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| e.is::<ConfigError>())
}


pub mod ablate;
pub mod dataset;
pub mod eval;
pub mod neurons;
pub mod proportions;
pub mod report;
pub mod traces;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use dualprobe::dualset::{CellKey, DatasetSpec};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::{config_bail, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some records were quarantined.
    Partial,
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out).map_err(|e| {
            crate::config::ConfigError(format!("output dir {} is not writable: {e}", out.display()))
        })?;
        Ok(Self { config, out })
    }

    pub fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.out.join(name);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    /// A file an earlier command should have produced.
    pub fn artifact(&self, rel: &str, producer: &str) -> Result<PathBuf> {
        let p = self.out.join(rel);
        if !p.exists() {
            config_bail!("{} is missing; run `dualprobe {producer}` first", p.display());
        }
        Ok(p)
    }

    pub fn records_path(&self) -> Result<PathBuf> {
        self.artifact("dataset/records.jsonl", "build-dataset")
    }

    pub fn summary(&self) -> Result<DatasetSummary> {
        read_json(&self.artifact("dataset/summary.json", "build-dataset")?)
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.config.models.iter().map(|m| m.id.clone()).collect()
    }
}

/// Written by build-dataset; later commands take the layout from here
/// rather than re-reading the config.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub spec: DatasetSpec,
    pub requested: usize,
    pub built: usize,
    pub quarantined: usize,
    pub pairs: usize,
    pub cells: Vec<CellCount>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CellCount {
    pub culture: String,
    pub language: String,
    pub requested: usize,
    pub built: usize,
}

impl DatasetSummary {
    pub fn expected_cells(&self) -> Vec<CellKey> {
        self.cells
            .iter()
            .map(|c| CellKey::new(c.culture.clone(), c.language.clone()))
            .collect()
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Every `*.{ext}` file in `dir`, sorted by name. A missing dir yields none.
pub fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == ext) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Question ids become file names, so path separators are not allowed.
pub fn safe_name(id: &str) -> Result<&str> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        anyhow::bail!("identifier {id:?} cannot be used as a file name");
    }
    Ok(id)
}

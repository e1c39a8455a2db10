//! Loading a stream from a CSV file or a named generator preset.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use driftgas::datasets::{normalize_by_prefix, preset, read_csv, write_csv, CsvSchema, GeneratorParams, PRESETS};
use driftgas::{ClassSet, LabeledInstance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Settings;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Csv(PathBuf),
    Synth(String),
}

impl Source {
    /// Short name used in tables and run directory names.
    pub fn name(&self) -> String {
        match self {
            Source::Csv(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into()),
            Source::Synth(n) => n.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Csv,
    Synth,
}

/// What was run on: enough to re-create the exact input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIdentity {
    pub name: String,
    pub kind: SourceKind,
    pub path: Option<String>,
    /// SHA-256 of the CSV file, or of the generated stream written as CSV.
    pub sha256: String,
    pub generator: Option<GeneratorParams>,
    pub n_instances: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Original label of each dense class id.
    pub class_names: Vec<String>,
    pub normalized: bool,
}

pub struct Loaded {
    pub instances: Vec<LabeledInstance>,
    pub classes: ClassSet,
    pub identity: DatasetIdentity,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load(source: &Source, settings: &Settings, seed: u64) -> Result<Loaded> {
    let frac = settings.run.labeled_fraction;
    match source {
        Source::Csv(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading dataset {}", path.display()))?;
            let schema = CsvSchema {
                label_column: settings.label_col,
                has_header: settings.header,
                normalize_prefix: settings.normalize.then_some(frac),
            };
            let d = read_csv(bytes.as_slice(), &source.name(), &schema)
                .with_context(|| format!("parsing dataset {}", path.display()))?;
            let identity = DatasetIdentity {
                name: source.name(),
                kind: SourceKind::Csv,
                path: Some(path.display().to_string()),
                sha256: sha256_hex(&bytes),
                generator: None,
                n_instances: d.spec.n_instances,
                n_features: d.spec.n_features,
                n_classes: d.spec.n_classes,
                class_names: d.class_names,
                normalized: settings.normalize,
            };
            Ok(Loaded { instances: d.instances, classes: d.classes, identity })
        }
        Source::Synth(name) => {
            let g = preset(name, seed)
                .ok_or_else(|| anyhow!("unknown generator `{name}`; available: {}", PRESETS.join(", ")))?;
            let mut instances = g.generate()?;
            let mut raw = Vec::new();
            write_csv(&mut raw, &instances, &g.class_names())?;
            if settings.normalize {
                normalize_by_prefix(&mut instances, frac)?;
            }
            let spec = g.spec();
            let identity = DatasetIdentity {
                name: name.clone(),
                kind: SourceKind::Synth,
                path: None,
                sha256: sha256_hex(&raw),
                n_instances: spec.n_instances,
                n_features: spec.n_features,
                n_classes: spec.n_classes,
                class_names: g.class_names(),
                generator: Some(g),
                normalized: settings.normalize,
            };
            Ok(Loaded { instances, classes: ClassSet::new(spec.n_classes)?, identity })
        }
    }
}

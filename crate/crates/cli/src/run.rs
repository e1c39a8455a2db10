//! A single experiment run and its output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use driftgas::metrics::{macro_f1, prequential_error, windowed_f1};
use driftgas::pipeline::{run_aigas_with_state, run_method, Method, PredictionTrace};
use driftgas::registration::TransformRecord;
use driftgas::stream::batch_size;
use driftgas::{split_stream, RunConfig};
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::source::{self, DatasetIdentity, Source};

pub const MANIFEST: &str = "manifest.json";
pub const PREDICTIONS: &str = "predictions.csv";
pub const PREQUENTIAL: &str = "prequential.csv";
pub const F1_WINDOW: &str = "f1_window.csv";
pub const TRANSFORMS: &str = "transforms.jsonl";
pub const GNG_FINAL: &str = "gng_final.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    /// Final prequential error in percent.
    pub prequential_error: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub labeled_instances: usize,
    pub evaluated_instances: usize,
    pub batch_size: usize,
    pub node_budget: Option<usize>,
    pub final_prototypes: Option<usize>,
    pub identity_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFiles {
    pub predictions: String,
    pub prequential: String,
    pub f1_window: String,
    pub transforms: String,
    pub gng_final: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub method: Method,
    pub dataset: DatasetIdentity,
    pub config: RunConfig,
    pub window_overlap: f64,
    pub results: RunResults,
    pub files: RunFiles,
    pub wall_time_ms: f64,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Per-batch line of `transforms.jsonl`; `transform` is absent for baselines.
#[derive(Serialize)]
struct TransformLine<'a> {
    batch: usize,
    offset: usize,
    transform: Option<&'a TransformRecord>,
    identity_fallback: bool,
    prototype_count: usize,
    matched_pairs: usize,
    assignment_cost: Option<f64>,
}

pub fn run_dir_name(dataset: &str, method: Method, seed: u64) -> String {
    format!("{dataset}_{method}_seed{seed}")
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

/// Runs `method` on `source` and writes every artifact into `dir`.
pub fn execute(source: &Source, method: Method, settings: &Settings, dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let cfg = &settings.run;
    let loaded = source::load(source, settings, cfg.seed)?;
    let split = split_stream(&loaded.instances, cfg.labeled_fraction, loaded.classes)?;
    drop(loaded.instances);

    let (trace, gng) = if method == Method::Aigas {
        let (trace, state) = run_aigas_with_state(&split, cfg)?;
        (trace, Some(state))
    } else {
        (run_method(method, &split, cfg)?, None)
    };
    let truth = trace.truth();
    let preds = trace.predictions();
    let preq = prequential_error(&truth, &preds)?;
    let f1 = macro_f1(&truth, &preds, &split.classes())?;
    let b = batch_size(split.suffix_len(), cfg.num_batches)?;
    let windows = windowed_f1(&truth, &preds, &split.classes(), b, settings.window_overlap)?;

    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut w = create(dir, PREDICTIONS)?;
    writeln!(w, "t,y_true,y_pred")?;
    for (i, (t, p)) in truth.iter().zip(&preds).enumerate() {
        writeln!(w, "{},{},{}", i + 1, t.0, p.0)?;
    }
    w.flush()?;

    let mut w = create(dir, PREQUENTIAL)?;
    writeln!(w, "t,prequential_error")?;
    for (i, v) in preq.values.iter().enumerate() {
        writeln!(w, "{},{v}", i + 1)?;
    }
    w.flush()?;

    let mut w = create(dir, F1_WINDOW)?;
    writeln!(w, "center,macro_f1")?;
    for (c, v) in &windows {
        writeln!(w, "{c},{v}")?;
    }
    w.flush()?;

    write_transforms(dir, &trace)?;

    let gng_file = match &gng {
        Some(state) => {
            let mut w = create(dir, GNG_FINAL)?;
            serde_json::to_writer_pretty(&mut w, state.gng())?;
            writeln!(w)?;
            w.flush()?;
            Some(GNG_FINAL.to_string())
        }
        None => None,
    };

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        method,
        dataset: loaded.identity,
        config: cfg.clone(),
        window_overlap: settings.window_overlap,
        results: RunResults {
            prequential_error: preq.last(),
            macro_f1: f1.macro_f1,
            per_class_f1: f1.per_class.iter().map(|s| s.f1).collect(),
            labeled_instances: split.t_s(),
            evaluated_instances: split.suffix_len(),
            batch_size: b,
            node_budget: trace.node_budget,
            final_prototypes: gng.as_ref().map(|s| s.prototypes().len()),
            identity_fallbacks: trace.records.iter().filter(|r| r.identity_fallback).count(),
        },
        files: RunFiles {
            predictions: PREDICTIONS.into(),
            prequential: PREQUENTIAL.into(),
            f1_window: F1_WINDOW.into(),
            transforms: TRANSFORMS.into(),
            gng_final: gng_file,
        },
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let mut w = create(dir, MANIFEST)?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(manifest)
}

fn write_transforms(dir: &Path, trace: &PredictionTrace) -> Result<()> {
    let mut w = create(dir, TRANSFORMS)?;
    for r in &trace.records {
        let line = TransformLine {
            batch: r.batch_index,
            offset: r.offset,
            transform: r.transform.as_ref(),
            identity_fallback: r.identity_fallback,
            prototype_count: r.prototype_count,
            matched_pairs: r.matched_pairs,
            assignment_cost: r.assignment_cost,
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub const SUMMARY_HEADER: &str = "method   dataset                  preq-error(%)  macro-F1";

pub fn summary_row(m: &RunManifest) -> String {
    format!(
        "{:<8} {:<24} {:>13.2}  {:>8.4}",
        m.method.name(),
        m.dataset.name,
        m.results.prequential_error,
        m.results.macro_f1
    )
}


//! Experiment settings: command-line flags over an optional TOML file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use driftgas::datasets::LabelColumn;
use driftgas::gng::GngParams;
use driftgas::RunConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Fraction of the stream whose labels are revealed.
    #[arg(long = "labeled-frac", value_name = "F")]
    pub labeled_frac: Option<f64>,
    /// Number of unlabeled batches.
    #[arg(long, value_name = "M", value_parser = clap::value_parser!(u64).range(1..))]
    pub batches: Option<u64>,
    /// Base prototype budget before imbalance scaling.
    #[arg(long = "g", value_name = "G")]
    pub g: Option<usize>,
    /// Neighbours voting on stream instances.
    #[arg(long = "k", value_name = "K")]
    pub k: Option<usize>,
    /// Neighbours voting on new prototype labels.
    #[arg(long, value_name = "K")]
    pub kgng: Option<usize>,
    /// Presentations of each batch to the neural gas.
    #[arg(long, value_name = "P")]
    pub passes: Option<usize>,
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Label column of CSV input: `last` or a zero-based index.
    #[arg(long = "label-col", value_name = "last|INDEX")]
    pub label_col: Option<LabelColumn>,
    /// Overlap of consecutive F1 windows, as a fraction of the window.
    #[arg(long = "window-overlap", value_name = "F")]
    pub window_overlap: Option<f64>,
    /// Reference window of the sliding baseline (default: labeled prefix size).
    #[arg(long = "sld-window", value_name = "N")]
    pub sld_window: Option<usize>,
    /// CSV input starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Skip min-max scaling fitted on the labeled prefix.
    #[arg(long)]
    pub raw: bool,
    /// TOML file with any of the settings above.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Optional overrides of the neural gas parameters.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GngOverrides {
    pub eps_winner: Option<f64>,
    pub eps_neighbor: Option<f64>,
    pub max_edge_age: Option<u32>,
    pub insertion_interval: Option<u64>,
    pub error_split_decay: Option<f64>,
    pub error_global_decay: Option<f64>,
    /// `0` disables idle-node removal.
    pub idle_limit: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub labeled_frac: Option<f64>,
    pub batches: Option<usize>,
    pub g: Option<usize>,
    pub k: Option<usize>,
    pub kgng: Option<usize>,
    pub passes: Option<usize>,
    pub seed: Option<u64>,
    pub label_col: Option<String>,
    pub window_overlap: Option<f64>,
    pub sld_window: Option<usize>,
    pub header: Option<bool>,
    pub raw: Option<bool>,
    pub gng: Option<GngOverrides>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub run: RunConfig,
    pub window_overlap: f64,
    pub label_col: LabelColumn,
    pub header: bool,
    pub normalize: bool,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let d = RunConfig::default();
        let file_label = file.label_col.as_deref().map(str::parse::<LabelColumn>).transpose()?;

        let mut gng = GngParams::default();
        if let Some(o) = &file.gng {
            gng.eps_winner = o.eps_winner.unwrap_or(gng.eps_winner);
            gng.eps_neighbor = o.eps_neighbor.unwrap_or(gng.eps_neighbor);
            gng.max_edge_age = o.max_edge_age.unwrap_or(gng.max_edge_age);
            gng.insertion_interval = o.insertion_interval.unwrap_or(gng.insertion_interval);
            gng.error_split_decay = o.error_split_decay.unwrap_or(gng.error_split_decay);
            gng.error_global_decay = o.error_global_decay.unwrap_or(gng.error_global_decay);
            if let Some(idle) = o.idle_limit {
                gng.idle_limit = (idle > 0).then_some(idle);
            }
        }

        let run = RunConfig {
            labeled_fraction: self.labeled_frac.or(file.labeled_frac).unwrap_or(d.labeled_fraction),
            num_batches: self.batches.map(|b| b as usize).or(file.batches).unwrap_or(d.num_batches),
            g_base: self.g.or(file.g).unwrap_or(d.g_base),
            k_predict: self.k.or(file.k).unwrap_or(d.k_predict),
            k_gng: self.kgng.or(file.kgng).unwrap_or(d.k_gng),
            passes: self.passes.or(file.passes).unwrap_or(d.passes),
            seed: self.seed.or(file.seed).unwrap_or(d.seed),
            sld_window: self.sld_window.or(file.sld_window),
            gng,
        };
        run.validate()?;
        let window_overlap = self.window_overlap.or(file.window_overlap).unwrap_or(0.2);
        anyhow::ensure!((0.0..1.0).contains(&window_overlap), "window overlap {window_overlap} must lie in [0, 1)");

        Ok(Settings {
            run,
            window_overlap,
            label_col: self.label_col.or(file_label).unwrap_or(LabelColumn::Last),
            header: self.header || file.header.unwrap_or(false),
            normalize: !(self.raw || file.raw.unwrap_or(false)),
        })
    }
}

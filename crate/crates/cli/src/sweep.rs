//! Cross-product of datasets and methods with per-method aggregates.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use driftgas::pipeline::Method;

use crate::config::Settings;
use crate::run::{execute, run_dir_name, RunManifest};
use crate::source::Source;

#[derive(Debug, Clone)]
pub struct Cell {
    pub dataset: String,
    pub method: Method,
    pub outcome: std::result::Result<Scores, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub prequential_error: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub ok: usize,
    pub failed: usize,
    pub mean: Scores,
    pub std: Scores,
}

fn run_cell(source: &Source, method: Method, settings: &Settings, root: &Path) -> Cell {
    let name = source.name();
    let dir = root.join(run_dir_name(&name, method, settings.run.seed));
    // Scores are read back from disk so the sweep only trusts what a run persisted.
    let outcome = execute(source, method, settings, &dir)
        .and_then(|_| RunManifest::read(&dir))
        .map(|m| Scores { prequential_error: m.results.prequential_error, macro_f1: m.results.macro_f1 })
        .map_err(|e| format!("{e:#}"));
    if let Err(e) = &outcome {
        log::warn!("{name}/{method} failed: {e}");
    }
    Cell { dataset: name, method, outcome }
}

pub fn run_cells(sources: &[Source], methods: &[Method], settings: &Settings, root: &Path) -> Vec<Cell> {
    let jobs: Vec<(&Source, Method)> = sources.iter().flat_map(|s| methods.iter().map(move |&m| (s, m))).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(s, m)| run_cell(s, m, settings, root)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(|&(s, m)| run_cell(s, m, settings, root)).collect()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation over the successful cells of each method.
pub fn aggregate(cells: &[Cell], methods: &[Method]) -> Vec<Aggregate> {
    methods
        .iter()
        .map(|&method| {
            let ok: Vec<Scores> =
                cells.iter().filter(|c| c.method == method).filter_map(|c| c.outcome.as_ref().ok().copied()).collect();
            let failed = cells.iter().filter(|c| c.method == method && c.outcome.is_err()).count();
            let (pm, ps) = mean_std(&ok.iter().map(|s| s.prequential_error).collect::<Vec<_>>());
            let (fm, fs) = mean_std(&ok.iter().map(|s| s.macro_f1).collect::<Vec<_>>());
            Aggregate {
                method,
                ok: ok.len(),
                failed,
                mean: Scores { prequential_error: pm, macro_f1: fm },
                std: Scores { prequential_error: ps, macro_f1: fs },
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long-format table: one row per cell, then one aggregate row per method.
pub fn to_csv(cells: &[Cell], aggs: &[Aggregate]) -> String {
    let mut out = String::from("row,dataset,method,status,prequential_error,macro_f1,prequential_error_std,macro_f1_std,cells,message\n");
    for c in cells {
        match &c.outcome {
            Ok(s) => writeln!(out, "cell,{},{},ok,{},{},,,1,", csv_field(&c.dataset), c.method, s.prequential_error, s.macro_f1),
            Err(e) => writeln!(out, "cell,{},{},failed,,,,,1,{}", csv_field(&c.dataset), c.method, csv_field(e)),
        }
        .unwrap();
    }
    for a in aggs {
        let status = if a.failed == 0 { "ok" } else { "partial" };
        writeln!(
            out,
            "aggregate,,{},{status},{},{},{},{},{},",
            a.method, a.mean.prequential_error, a.mean.macro_f1, a.std.prequential_error, a.std.macro_f1, a.ok
        )
        .unwrap();
    }
    out
}

/// Datasets down, methods across, with average and standard deviation rows.
pub fn to_text(cells: &[Cell], aggs: &[Aggregate], datasets: &[String], methods: &[Method]) -> String {
    let width = datasets.iter().map(String::len).chain([9]).max().unwrap_or(9) + 2;
    let mut out = String::new();
    type Pick = fn(&Scores) -> f64;
    let sections: [(&str, Pick, usize); 2] =
        [("Prequential error (%)", |s| s.prequential_error, 2), ("Macro-F1", |s| s.macro_f1, 3)];
    for (i, (title, pick, prec)) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "{title}").unwrap();
        write!(out, "{:<width$}", "dataset").unwrap();
        for m in methods {
            write!(out, "{:>10}", m.name()).unwrap();
        }
        out.push('\n');
        for d in datasets {
            write!(out, "{d:<width$}").unwrap();
            for &m in methods {
                let cell = cells.iter().find(|c| &c.dataset == d && c.method == m);
                match cell.map(|c| &c.outcome) {
                    Some(Ok(s)) => write!(out, "{:>10.prec$}", pick(s)).unwrap(),
                    _ => write!(out, "{:>10}", "failed").unwrap(),
                }
            }
            out.push('\n');
        }
        for (label, std) in [("Average", false), ("Std. Dev.", true)] {
            write!(out, "{label:<width$}").unwrap();
            for a in aggs {
                let s = if std { a.std } else { a.mean };
                write!(out, "{:>10.prec$}", pick(&s)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_reports(root: &Path, csv: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    std::fs::write(root.join("sweep.csv"), csv).context("writing sweep.csv")?;
    std::fs::write(root.join("sweep.txt"), text).context("writing sweep.txt")?;
    Ok(())
}

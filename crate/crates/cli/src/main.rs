mod config;
mod run;
mod source;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use driftgas::datasets::{preset, write_csv, PRESETS};
use driftgas::pipeline::Method;

use config::ExperimentArgs;
use source::Source;

#[derive(Parser)]
#[command(name = "driftgas", version, about = "Prototype-tracking classification of drifting streams with delayed labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one stream and write its traces.
    Run(RunArgs),
    /// Run every dataset against every method and tabulate the results.
    Sweep(SweepArgs),
    /// Write a synthetic stream to CSV.
    Generate(GenerateArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// CSV stream, one instance per row.
    #[arg(long, value_name = "PATH", conflicts_with = "synth", required_unless_present = "synth")]
    dataset: Option<PathBuf>,
    /// Built-in generator preset.
    #[arg(long, value_name = "NAME")]
    synth: Option<String>,
    #[arg(long, default_value = "aigas")]
    method: Method,
    /// Parent directory of the run directory.
    #[arg(long, value_name = "DIR", env = "DRIFTGAS_OUT", default_value = "runs")]
    out: PathBuf,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// CSV streams; repeat or separate with commas.
    #[arg(long, value_name = "PATH", value_delimiter = ',')]
    dataset: Vec<PathBuf>,
    /// Generator presets; repeat or separate with commas.
    #[arg(long, value_name = "NAME", value_delimiter = ',')]
    synth: Vec<String>,
    /// Methods to compare (default: all).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long, value_name = "DIR", env = "DRIFTGAS_OUT", default_value = "runs")]
    out: PathBuf,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_name = "NAME")]
    synth: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let settings = a.exp.resolve()?;
    let source = match (a.dataset, a.synth) {
        (Some(p), None) => Source::Csv(p),
        (None, Some(n)) => Source::Synth(n),
        _ => bail!("give exactly one of --dataset or --synth"),
    };
    let dir = a.out.join(run::run_dir_name(&source.name(), a.method, settings.run.seed));
    let manifest = run::execute(&source, a.method, &settings, &dir)?;
    println!("{}", run::SUMMARY_HEADER);
    println!("{}", run::summary_row(&manifest));
    println!("outputs: {}", dir.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let settings = a.exp.resolve()?;
    let sources: Vec<Source> =
        a.dataset.into_iter().map(Source::Csv).chain(a.synth.into_iter().map(Source::Synth)).collect();
    if sources.is_empty() {
        bail!("sweep needs at least one --dataset or --synth");
    }
    let methods = if a.method.is_empty() { Method::ALL.to_vec() } else { a.method };

    let cells = sweep::run_cells(&sources, &methods, &settings, &a.out);
    let aggs = sweep::aggregate(&cells, &methods);
    let names: Vec<String> = sources.iter().map(Source::name).collect();
    let text = sweep::to_text(&cells, &aggs, &names, &methods);
    sweep::write_reports(&a.out, &sweep::to_csv(&cells, &aggs), &text)?;
    print!("{text}");

    let failed: Vec<&sweep::Cell> = cells.iter().filter(|c| c.outcome.is_err()).collect();
    for c in &failed {
        eprintln!("failed: {}/{}: {}", c.dataset, c.method, c.outcome.as_ref().unwrap_err());
    }
    if !failed.is_empty() {
        bail!("{} of {} sweep cells failed", failed.len(), cells.len());
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let g = preset(&a.synth, a.seed)
        .with_context(|| format!("unknown generator `{}`; available: {}", a.synth, PRESETS.join(", ")))?;
    let xs = g.generate()?;
    let file = std::fs::File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    write_csv(file, &xs, &g.class_names())?;
    println!("wrote {} instances to {}", xs.len(), a.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `locdep`: derive neighborhoods, evaluate bound shapes, run the exact
//! checkers and Monte-Carlo experiments from a JSON experiment document.

mod artifacts;
mod count;
mod pipeline;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};

use artifacts::Writer;
use pipeline::Context;
use spec::{Checkers, ExperimentSpec, SchemaError};

#[derive(Debug, Parser)]
#[command(name = "locdep", version, about = "Normal approximation under local dependence")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LOCDEP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment document.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the document's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the document's `out`, else `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest joint support the exact evaluators will enumerate.
    #[arg(long, default_value_t = 1u128 << 22)]
    cap: u128,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Neighborhood structure and (κ, τ) per grid size: `derive.csv`.
    Derive(Common),
    /// Moment tables and bound shapes: `moments.csv`, `bounds.json`.
    Bound(Common),
    /// Exact checkers on the configured field: `verdicts.csv`.
    Oracle(Common),
    /// Kolmogorov distances: `summary.csv`.
    Mc(Common),
    /// Distances plus log-log fit: `summary.csv`, `rate.dat`.
    Rate(Common),
    /// Every stage and the document's assertions.
    Run(Common),
    /// Count occurrences directly; prints JSON.
    #[command(subcommand)]
    Count(count::CountCommand),
}

enum Outcome {
    Passed,
    Failed(Vec<String>),
}

fn load(common: &Common) -> Result<(Context, PathBuf)> {
    let path = common.spec.display().to_string();
    let text = std::fs::read_to_string(&common.spec).with_context(|| format!("reading {path}"))?;
    let spec = ExperimentSpec::parse(&path, &text, common.seed)?;
    let out = match (&common.out, &spec.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => PathBuf::from("out").join(&spec.name),
    };
    Ok((Context::new(spec, common.cap), out))
}

fn counted_failures(rows: &[pipeline::VerdictRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| r.counted_failure)
        .map(|r| {
            let why = if r.notes.is_empty() { format!("margin {:.3e}", r.margin) } else { r.notes.clone() };
            format!("{} failed at n = {}: {why} [{}]", r.id, r.n, r.digest)
        })
        .collect()
}

fn execute(command: &Command) -> Result<Outcome> {
    let (name, common) = match command {
        Command::Count(c) => {
            println!("{}", serde_json::to_string_pretty(&count::run(c)?)?);
            return Ok(Outcome::Passed);
        }
        Command::Derive(c) => ("derive", c),
        Command::Bound(c) => ("bound", c),
        Command::Oracle(c) => ("oracle", c),
        Command::Mc(c) => ("mc", c),
        Command::Rate(c) => ("rate", c),
        Command::Run(c) => ("run", c),
    };
    let (ctx, dir) = load(common)?;
    let mut w = Writer::new(&dir)?;
    let mut failures = Vec::new();
    let run = name == "run";

    if name == "derive" || run {
        let rows = pipeline::derive(&ctx)?;
        failures.extend(
            rows.iter().filter(|r| !r.valid).map(|r| format!("invalid neighborhoods at n = {}: {}", r.n, r.violations)),
        );
        w.csv("derive.csv", &[], &rows)?;
    }
    let bounds = if name == "bound" || run {
        let stage = pipeline::bound(&ctx)?;
        w.csv("moments.csv", &[], &stage.moment_rows(&ctx))?;
        w.json("bounds.json", &stage.to_json(&ctx))?;
        Some(stage)
    } else {
        None
    };
    let checkers = match (&ctx.spec.checkers, name) {
        (Some(c), _) => Some(c.clone()),
        (None, "oracle") => Some(Checkers { on_field: true, suite_instances: 0 }),
        (None, _) => None,
    };
    if name == "oracle" || run {
        let rows = match &checkers {
            Some(cfg) => pipeline::oracle(&ctx, cfg)?,
            None => Vec::new(),
        };
        failures.extend(counted_failures(&rows));
        w.csv("verdicts.csv", &pipeline::VerdictRow::HEADER, &rows)?;
    }
    if matches!(name, "mc" | "rate") || run {
        let tables = bounds.as_ref().map(|b| b.tables.as_slice()).unwrap_or(&[]);
        let mut stage = pipeline::mc(&ctx, tables)?;
        if name == "rate" {
            stage.fit()?;
        } else if run && ctx.spec.grid.len() >= 3 {
            stage.fit().ok();
        }
        w.csv("summary.csv", &[], &stage.rows)?;
        if name != "mc" {
            w.text("rate.dat", &stage.plot_data(&ctx))?;
        }
        if run {
            failures.extend(pipeline::assertions(&ctx, &stage, bounds.as_ref())?);
        }
    }
    let dir = w.finish(&ctx, name, &failures)?;
    println!("{name}: {} (config {}, seed {}) -> {}", ctx.spec.name, &ctx.hash[..12], ctx.seed, dir.display());
    Ok(if failures.is_empty() { Outcome::Passed } else { Outcome::Failed(failures) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(&cli.command) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(failures)) => {
            for f in &failures {
                eprintln!("FAIL {f}");
            }
            ExitCode::from(1)
        }
        Err(e) if e.downcast_ref::<SchemaError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

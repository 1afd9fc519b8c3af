use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fedsim::config::Method;
use fedsim_cli::bounds::write_bounds;
use fedsim_cli::validate::run_validators;
use fedsim_cli::{parse_config_with, run_experiment, CliError, CliResult, Overrides};

/// Federated SGD simulator: runs experiment files, bound grids and validators.
#[derive(Debug, Parser)]
#[command(name = "fedsim", version)]
struct Args {
    /// Experiment file (TOML). Without one, the default experiment runs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output].dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, overriding `seeds`.
    #[arg(long)]
    seeds: Option<String>,
    /// Update scheme, overriding `run.method`.
    #[arg(long, value_parser = ["pavg", "decay", "consensus"])]
    method: Option<String>,
    /// Evaluate the bound grid only; no simulation.
    #[arg(long)]
    bounds_only: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Run the moment and gossip validators only.
    #[arg(long)]
    validate: bool,
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| CliError::config("--seeds", format!("`{t}`: {e}")))
        })
        .collect()
}

fn execute(args: Args) -> CliResult<i32> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => String::new(),
    };
    let overrides = Overrides {
        seeds: args.seeds.as_deref().map(parse_seeds).transpose()?,
        method: args
            .method
            .as_deref()
            .map(|m| m.parse::<Method>())
            .transpose()
            .map_err(|e| CliError::config("--method", e.to_string()))?,
        out: args.out.clone(),
    };
    let spec = parse_config_with(&text, &overrides)?;
    let dir = &spec.output.dir;
    if args.bounds_only || args.validate {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    if args.bounds_only {
        let path = dir.join("bounds.csv");
        let n = write_bounds(&spec, &path)?;
        println!("wrote {n} bound rows to {}", path.display());
        return Ok(0);
    }
    if args.validate {
        let lines = run_validators(&spec.base)?;
        let mut text = String::new();
        for l in &lines {
            println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.check, l.detail);
            text.push_str(&serde_json::to_string(l)?);
            text.push('\n');
        }
        let path = dir.join("validate.jsonl");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        return Ok(if lines.iter().all(|l| l.passed) { 0 } else { 2 });
    }
    let outcome = run_experiment(&spec, args.jobs)?;
    for s in outcome.summaries.iter().filter(|s| !s.ok()) {
        eprintln!("run {} failed: {}", s.id, s.error.as_deref().unwrap_or("unknown error"));
    }
    println!(
        "{} runs, {} failed, outputs in {}",
        outcome.summaries.len(),
        outcome.failures,
        dir.display()
    );
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let code = match execute(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

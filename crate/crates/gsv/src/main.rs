use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use gsv::cli::{run_experiment, write_outputs};
use gsv::config::{ExperimentConfig, OutputFormat, Task};
use gsv::error::Error;

/// Experiment runner for Gaussian stochastic volatility models of Volterra
/// type: simulation, deviation rates, option-price and implied-volatility
/// asymptotics, and moment-explosion certificates.
#[derive(Parser)]
#[command(name = "gsv", version, about)]
struct Cli {
    /// Task to run: simulate | rate | exit-rate | callprice | impliedvol |
    /// explode | verify. Must match the `task` key of the config.
    task: String,

    /// Path to the experiment config (flat key = value or JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Monte Carlo seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Output format override: json | csv | both.
    #[arg(long)]
    format: Option<String>,

    /// Print the report JSON to stdout as well.
    #[arg(long)]
    print: bool,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let task = Task::parse(&cli.task)?;
    let mut cfg = ExperimentConfig::from_file(&cli.config)?;
    if cfg.task != task {
        return Err(Error::ConfigInvalid {
            field: "task".into(),
            reason: format!(
                "command line asks for `{}` but the config declares `{}`",
                task.name(),
                cfg.task.name()
            ),
        });
    }
    if let Some(seed) = cli.seed {
        cfg.mc_seed = seed;
        cfg.echo.insert("mc_seed".into(), json!(seed));
    }
    if let Some(fmt) = &cli.format {
        cfg.format = OutputFormat::parse(fmt)?;
        cfg.echo.insert("format".into(), json!(fmt));
    }

    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("gsv-out"));

    let output = run_experiment(&cfg)?;
    let written = write_outputs(&output, &out_dir, cfg.format)?;
    if cli.print {
        print!("{}", gsv::cli::report_to_json(&output.report)?);
    }
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    Ok(output.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "{}",
                json!({"category": "VERIFY_FAILED", "message": "one or more checks failed"})
            );
            ExitCode::from(4)
        }
        Err(e) => {
            let payload = match &e {
                Error::ConfigInvalid { field, reason } => json!({
                    "category": e.category(),
                    "field": field,
                    "message": reason,
                }),
                other => json!({
                    "category": other.category(),
                    "message": other.to_string(),
                }),
            };
            eprintln!("{payload}");
            let code = if matches!(e, Error::ConfigInvalid { .. }) {
                2
            } else {
                3
            };
            ExitCode::from(code)
        }
    }
}

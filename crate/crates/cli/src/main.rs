use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use glt_lab::{exit_code, run, ExperimentConfig, ExperimentKind, RunOptions};

/// Run a matrix-sequence spectral experiment described by a JSON config.
#[derive(Parser, Debug)]
#[command(name = "glt-lab", version)]
struct Cli {
    experiment: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated matrix orders, e.g. 64,128,256
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("cannot read {}", cli.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    match config.experiment {
        Some(k) if k != cli.experiment => bail!(
            "config describes '{}' but '{}' was requested",
            k.name(),
            cli.experiment.name()
        ),
        _ => config.experiment = Some(cli.experiment),
    }
    if let Some(grid) = &cli.n_grid {
        config.n_grid = grid.clone();
    }
    if let Some(tol) = cli.tol {
        config.tolerance = Some(tol);
    }
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let options = RunOptions {
        no_cache: cli.no_cache,
    };
    match load(&cli).and_then(|c| run(c, &options)) {
        Ok(report) => {
            let verdict = match report.verdict {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "n/a",
            };
            println!(
                "{} {} verdict={verdict} cached={} out={}",
                report.experiment.name(),
                report.config_hash,
                report.cached,
                report.config.output.display()
            );
            ExitCode::from(exit_code(&report) as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

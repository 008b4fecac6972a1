use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mmlp_lab::harness::{self, ExperimentConfig, HarnessError};
use mmlp_lab::mollifier::{convergence_report, write_report_csv, DEFAULT_RESOLUTION};
use mmlp_lab::{Activation, Grid2D, TargetFunction};

#[derive(Parser)]
#[command(
    name = "mmlp-lab",
    version,
    about = "Train and compare MLP and MMLP approximants on singular targets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every run of a config and write its artifacts.
    Run {
        config: PathBuf,
        /// Overrides both the config's output_dir and $MMLP_LAB_OUTPUT_ROOT.
        #[arg(long)]
        out_root: Option<PathBuf>,
    },
    /// Parse and validate a config, then print its resolved form.
    Validate { config: PathBuf },
    /// Recompute the final metrics of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        /// Evaluation grid spacing; 2/h must be an even integer.
        #[arg(long)]
        grid: Option<f64>,
        /// Fail unless the checkpoint was produced from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the |F - f| field of a checkpoint as x,y,value CSV.
    ExportField {
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Print the mollifier convergence table as eps,sup_error,l2_error CSV.
    MollifierDemo {
        /// Strictly decreasing kernel widths.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0.125)]
        grid: f64,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = DemoTarget::Circle)]
        target: DemoTarget,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoTarget {
    Circle,
    Cone,
}

struct CliError {
    kind: &'static str,
    message: String,
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl CliError {
    fn new(kind: &'static str, e: impl std::fmt::Display) -> Self {
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

fn grid_arg(h: Option<f64>) -> Result<Option<Grid2D>, CliError> {
    h.map(Grid2D::from_spacing)
        .transpose()
        .map_err(|e| CliError::new("grid", e))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::new("json", e))?;
    println!("{text}");
    Ok(())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out_root } => {
            let cfg = ExperimentConfig::load(&config).map_err(HarnessError::from)?;
            let root = out_root.unwrap_or_else(|| harness::output_root(&cfg));
            let report = harness::run_experiment(&cfg, &root)?;
            print_json(&report)?;
            let diverged = report.diverged();
            if diverged > 0 {
                return Err(HarnessError::Diverged(diverged).into());
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config).map_err(HarnessError::from)?;
            print_json(&json!({
                "config_digest": cfg.digest(),
                "runs": cfg.runs().iter().map(|r| r.stem()).collect::<Vec<_>>(),
                "output_root": harness::output_root(&cfg),
                "config": cfg.to_json_value(),
            }))?;
        }
        Command::Eval {
            checkpoint,
            grid,
            config,
        } => {
            let expected = config
                .map(ExperimentConfig::load)
                .transpose()
                .map_err(HarnessError::from)?;
            let summary = harness::eval_checkpoint(&checkpoint, grid_arg(grid)?, expected.as_ref())?;
            print_json(&summary)?;
        }
        Command::ExportField { checkpoint, out, grid } => {
            let field = harness::export_field(&checkpoint, grid_arg(grid)?, &out)?;
            print_json(&json!({
                "out": out,
                "nodes": field.field().values().len(),
                "squared_mass": field.squared_mass(),
            }))?;
        }
        Command::MollifierDemo {
            eps,
            grid,
            resolution,
            target,
        } => {
            let grid = grid_arg(Some(grid))?.expect("grid given");
            let f = match target {
                DemoTarget::Circle => TargetFunction::default_circle(),
                DemoTarget::Cone => TargetFunction::default_cone(),
            };
            let rows = convergence_report(Activation::Gaussian, &eps, &f, grid, resolution)
                .map_err(|e| CliError::new("mollifier", e))?;
            write_report_csv(&rows, std::io::stdout().lock()).map_err(|e| CliError::new("io", e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind, "message": e.message }));
            ExitCode::FAILURE
        }
    }
}

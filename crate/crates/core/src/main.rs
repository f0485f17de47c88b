use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rwf::experiment::{
    export_matrices, output_root, run_probe, run_scenario, sweep, ForwardCache, ProbeConfig, RunReport, Scenario,
    Stage, StageError, SweepAxis,
};

#[derive(Parser)]
#[command(name = "rwf", version, about = "Reverse weak formulation inversion of elastic parameter maps")]
struct Cli {
    /// Output root directory. Defaults to $RWF_OUTPUT_ROOT, then `output`.
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report and artifacts.
    Run { config: PathBuf },
    /// Run a scenario once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// One of m, omega_count, noise, h.
        #[arg(long)]
        axis: String,
        /// Comma separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Assemble a scenario and write A, S_V, S_M and g as Matrix Market files.
    ExportMatrices { config: PathBuf },
    /// Estimate the degree of conservativity of a tensor field.
    ProbeConservativity { config: PathBuf },
}

fn summary(r: &RunReport) -> String {
    let errs: Vec<String> = r.errors.per_parameter.iter().map(|e| format!("{e:.3}%")).collect();
    format!(
        "{}: m = {}, errors [{}], joint {:.3}%, gap {:.3e}, max condition {:.3e}, {:.1} s",
        r.name,
        r.m,
        errs.join(", "),
        r.errors.joint,
        r.spectral_gap,
        r.max_condition,
        r.timings.total
    )
}

fn load(path: &PathBuf) -> Result<Scenario, StageError> {
    Scenario::load(path).map_err(|source| StageError { stage: Stage::Config, source })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = cli.output_root.unwrap_or_else(output_root);
    let cache = ForwardCache::new();
    let result: Result<(), StageError> = match cli.command {
        Command::Run { config } => load(&config).and_then(|s| run_scenario(&s, &root, &cache)).map(|r| {
            println!("{}", summary(&r));
        }),
        Command::Sweep { config, axis, values } => axis
            .parse::<SweepAxis>()
            .map_err(|source| StageError { stage: Stage::Config, source })
            .and_then(|axis| load(&config).and_then(|s| sweep(&s, axis, &values, &root, &cache)))
            .map(|reports| reports.iter().for_each(|r| println!("{}", summary(r)))),
        Command::ExportMatrices { config } => load(&config)
            .and_then(|s| export_matrices(&s, &root, &cache))
            .map(|dir| println!("matrices written to {}", dir.display())),
        Command::ProbeConservativity { config } => ProbeConfig::load(&config)
            .map_err(|source| StageError { stage: Stage::Config, source })
            .and_then(|cfg| run_probe(&cfg, &root))
            .map(|out| print!("{}", out.report.to_text())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

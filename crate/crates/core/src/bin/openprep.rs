use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use openprep::scenario::{
    builtin_scenario, list_scenarios, load_config, run_scenario, validate_config, OutputFormat,
    ScenarioConfig, ScenarioError,
};

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "openprep",
    version,
    about = "Preparation procedures for correlated system-environment states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or by built-in name.
    Run {
        #[arg(
            long,
            conflicts_with = "scenario",
            required_unless_present = "scenario"
        )]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Directory for `<scenario>.<ext>` when --output is not given.
        #[arg(long, env = "OPENPREP_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// Overrides the config seed (random scenario kinds only).
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the structural tolerance used to check literals.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// List built-in scenarios.
    List,
    /// Check a config file and print every finding.
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            for (name, description) in list_scenarios() {
                println!("{name:<26} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { path } => validate(&path),
        Command::Run {
            config,
            scenario,
            output,
            output_dir,
            format,
            seed,
            tolerance,
        } => {
            let loaded = match (config, scenario) {
                (Some(path), _) => load_config(&path),
                (None, Some(name)) => builtin_scenario(&name),
                (None, None) => unreachable!("clap requires one of --config and --scenario"),
            };
            let mut cfg = match loaded {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = tolerance {
                cfg.tolerances.structural = t;
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            run(&cfg, output, output_dir)
        }
    }
}

fn validate(path: &Path) -> ExitCode {
    match validate_config(path) {
        Ok(findings) if findings.is_empty() => {
            println!("{}: ok", path.display());
            ExitCode::SUCCESS
        }
        Ok(findings) => {
            for f in &findings {
                println!("{f}");
            }
            eprintln!("{}: {} finding(s)", path.display(), findings.len());
            ExitCode::from(EXIT_INVALID)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn run(cfg: &ScenarioConfig, output: Option<PathBuf>, output_dir: Option<PathBuf>) -> ExitCode {
    let report = match run_scenario(cfg) {
        Ok(r) => r,
        Err(e @ ScenarioError::Invalid(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let text = report.render(cfg.format);
    let target = output
        .or_else(|| output_dir.map(|d| d.join(format!("{}.{}", cfg.name, cfg.format.extension()))));
    match target {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                if let Err(e) = std::fs::create_dir_all(parent) {
                    eprintln!("error: cannot create {}: {e}", parent.display());
                    return ExitCode::from(EXIT_RUNTIME);
                }
            }
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    for p in report.procedures.iter().filter(|p| p.failed()) {
        let msg = p
            .error
            .as_ref()
            .or(p.tomography_error.as_ref())
            .expect("failed procedure has an error");
        eprintln!("procedure {} failed: {msg}", p.label);
    }
    if report.has_failures() {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}

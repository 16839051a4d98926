use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use areaflow::app::output::{self, load_run, update_run_file, CLASSIFICATION_FILE, VERIFICATION_FILE};
use areaflow::app::report::{classify_run, verify_run};
use areaflow::app::scenario::prepare;
use areaflow::app::{self, config::SolverKind, load_config, run_scenario, RunStatus};
use areaflow::geometry::curvature_conditions_report;
use areaflow::identities::run_identities;
use areaflow::Error;

#[derive(Parser)]
#[command(name = "areaflow", version, about = "Mean curvature flow of area decreasing maps into surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the curvature conditions of the config's domain and target.
    CheckCurvature { config: PathBuf },
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the checks of an existing run directory.
    Verify { run_dir: PathBuf },
    /// Classify the final state of an existing run directory.
    Classify { run_dir: PathBuf },
    /// Randomized algebraic identity suite.
    Identities {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn check_curvature(path: &Path) -> Result<i32, Error> {
    let cfg = load_config(path)?;
    let m = cfg.domain.build("domain")?;
    let n = cfg.target.build("target")?;
    print_json(&curvature_conditions_report(&m, &n, &cfg.curvature)?)?;
    Ok(app::EXIT_PASS)
}

fn run(path: &Path, out: Option<PathBuf>) -> Result<i32, Error> {
    let mut cfg = load_config(path)?;
    if out.is_some() {
        cfg.output_dir = out;
    }
    let started = output::unix_now();
    let result = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            return Ok(app::exit_code_for(&e));
        }
    };
    let dir = cfg.resolved_output_dir();
    let manifest = output::write_run(&dir, &cfg, &result, started)?;
    println!("{}", result.verification);
    if let Some(c) = &result.classification {
        println!("classification: {:?}", c.class);
    }
    println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
    Ok(result.exit_code())
}

fn verify(dir: &Path) -> Result<i32, Error> {
    let run = load_run(dir)?;
    let prep = match run.config.solver {
        SolverKind::Pointwise => None,
        _ => Some(prepare(&run.config)?),
    };
    let (report, _) = verify_run(&run.config, prep.as_ref(), &run.record, &run.snapshots)?;
    update_run_file(dir, VERIFICATION_FILE, &report, Some(report.pass))?;
    println!("{report}");
    Ok(if run.record.status == RunStatus::Aborted {
        app::EXIT_ABORT
    } else if report.pass {
        app::EXIT_PASS
    } else {
        app::EXIT_VERIFY_FAIL
    })
}

fn classify(dir: &Path) -> Result<i32, Error> {
    let run = load_run(dir)?;
    if run.config.solver == SolverKind::Pointwise {
        println!("pointwise run: nothing to classify");
        return Ok(app::EXIT_PASS);
    }
    let prep = prepare(&run.config)?;
    match classify_run(&run.config, Some(&prep), &run.record, &run.snapshots)? {
        Some(report) => {
            update_run_file(dir, CLASSIFICATION_FILE, &report, None)?;
            print_json(&report)?;
        }
        None => println!("run has no final state"),
    }
    Ok(app::EXIT_PASS)
}

fn identities(samples: usize, seed: u64) -> Result<i32, Error> {
    let report = run_identities(samples, seed)?;
    print_json(&report)?;
    Ok(if report.pass { app::EXIT_PASS } else { app::EXIT_VERIFY_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = app::configure_workers() {
        eprintln!("{e}");
        return ExitCode::from(app::EXIT_USAGE as u8);
    }
    let result = match cli.command {
        Command::CheckCurvature { config } => check_curvature(&config),
        Command::Run { config, out } => run(&config, out),
        Command::Verify { run_dir } => verify(&run_dir),
        Command::Classify { run_dir } => classify(&run_dir),
        Command::Identities { samples, seed } => identities(samples, seed),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(app::exit_code_for(&e) as u8)
        }
    }
}

use clap::{Args, Parser, Subcommand};
use npb_cli::config::{parse_config, RunSpec, CONFIG_REFERENCE};
use npb_cli::{execute_run, report, selftest, snapshot, timeseries, RunError};
use npb_core::timestepper::SchemeMode;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Periodic pseudo-spectral solver for coupled ionic electrodiffusion,
/// incompressible Boussinesq flow, and heat transport, with an entropy
/// and energy diagnostics suite.
#[derive(Parser)]
#[command(name = "npb", version, after_long_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn config_help() -> String {
    format!("Configuration keys and defaults:\n{CONFIG_REFERENCE}\n")
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Configuration file; omitted means all defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Scheme override.
    #[arg(long, value_parser = ["imex", "picard"])]
    mode: Option<String>,
    /// Grid resolution override (points per dimension).
    #[arg(long)]
    resolution: Option<usize>,
    /// Simulated horizon override.
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Advance one trajectory and emit the diagnostics time series.
    Run(RunArgs),
    /// Run a trajectory, fit exponential decay rates, and report the
    /// size-condition gate.
    DecayStudy(RunArgs),
    /// Repeat one configuration over the mollification ladder and report
    /// successive trajectory distances.
    EtaStudy(RunArgs),
    /// Execute the built-in verification battery at n = 16.
    Selftest,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

fn load_spec(args: &RunArgs) -> Result<RunSpec, RunError> {
    let mut spec = match &args.config {
        Some(path) => parse_config(path).map_err(|e| RunError::Config(e.to_string()))?,
        None => RunSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(mode) = &args.mode {
        spec.ctrl.mode = match mode.as_str() {
            "picard" => SchemeMode::Picard,
            _ => SchemeMode::ImexRk2,
        };
    }
    if let Some(n) = args.resolution {
        spec.grid_n = n;
    }
    if let Some(t) = args.t_end {
        spec.t_end = t;
    }
    Ok(spec)
}

fn ensure_out_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| RunError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_series(
    records: &[npb_core::diagnostics::DiagnosticsRecord],
    spec: &RunSpec,
    dir: &Path,
) -> Result<PathBuf, RunError> {
    let path = dir.join(&spec.timeseries_name);
    timeseries::write_timeseries(records, spec.params.n_species(), &path)
        .map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_run(args: &RunArgs) -> Result<(), RunError> {
    let spec = load_spec(args)?;
    ensure_out_dir(&args.out)?;
    match execute_run(&spec) {
        Ok(out) => {
            let path = write_series(&out.records, &spec, &args.out)?;
            println!(
                "run finished at t = {} after {} steps; wrote {}",
                out.final_state.time,
                out.steps,
                path.display()
            );
            if let Some(name) = &spec.snapshot_name {
                let snap_path = args.out.join(name);
                snapshot::write_snapshot(&out.final_state, spec.grid_n, &snap_path)
                    .map_err(|e| RunError::Io(e.to_string()))?;
                println!("wrote snapshot {}", snap_path.display());
            }
            Ok(())
        }
        Err(RunError::Aborted { message, records }) => {
            // Emit what we have so the abort is inspectable.
            let _ = write_series(&records, &spec, &args.out);
            Err(RunError::Aborted {
                message,
                records: Vec::new(),
            })
        }
        Err(e) => Err(e),
    }
}

fn cmd_decay_study(args: &RunArgs) -> Result<(), RunError> {
    let spec = load_spec(args)?;
    ensure_out_dir(&args.out)?;
    let study = report::decay_study(&spec)?;
    write_series(&study.records, &spec, &args.out)?;
    let path = args.out.join("decay_report.txt");
    std::fs::write(&path, &study.report)
        .map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;
    print!("{}", study.report);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_eta_study(args: &RunArgs) -> Result<(), RunError> {
    let spec = load_spec(args)?;
    ensure_out_dir(&args.out)?;
    let study = report::eta_study(&spec)?;
    let path = args.out.join("eta_report.txt");
    std::fs::write(&path, &study.report)
        .map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;
    print!("{}", study.report);
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::DecayStudy(args) => cmd_decay_study(args),
        Command::EtaStudy(args) => cmd_eta_study(args),
        Command::Selftest => {
            let ok = selftest::run_selftest(&mut std::io::stdout());
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SELFTEST)
            };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("npb: {err}");
            match err {
                RunError::Config(_) => ExitCode::from(EXIT_CONFIG),
                RunError::Aborted { .. } => ExitCode::from(EXIT_NUMERICAL),
                RunError::Io(_) => ExitCode::FAILURE,
            }
        }
    }
}

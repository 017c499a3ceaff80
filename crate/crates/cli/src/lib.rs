//! Batch front end: configuration, run orchestration, and bit-specified
//! outputs for the periodic electrodiffusion-convection solver.

pub mod config;
pub mod report;
pub mod selftest;
pub mod snapshot;
pub mod timeseries;

use config::RunSpec;
use npb_core::diagnostics::DiagnosticsRecord;
use npb_core::spectral::Grid;
use npb_core::state::make_initial_state;
use npb_core::timestepper;
use npb_core::SimState;

/// Records plus the final state of one trajectory.
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
    pub initial_means: Vec<f64>,
    pub steps: usize,
}

/// Failure classes mapped onto the process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or initial condition (exit code 2).
    Config(String),
    /// Numerical abort: invalid state or failed fixed point (exit 3).
    /// Carries the records up to and including the last valid state.
    Aborted {
        message: String,
        records: Vec<DiagnosticsRecord>,
    },
    /// Filesystem trouble (exit 1).
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Aborted { message, .. } => write!(f, "numerical abort: {message}"),
            RunError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Runs one trajectory, sampling diagnostics at the configured cadence.
pub fn execute_run(spec: &RunSpec) -> Result<RunOutput, RunError> {
    let grid = Grid::new(spec.grid_n).map_err(|e| RunError::Config(e.to_string()))?;
    spec.params
        .validate()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let initial = make_initial_state(&spec.ic, &spec.params, &grid, spec.seed)
        .map_err(|e| RunError::Config(e.to_string()))?;
    let initial_means: Vec<f64> = initial.concentrations.iter().map(|c| c.mean()).collect();

    let mut records = Vec::new();
    let mut record_error: Option<String> = None;
    let mut steps = 0usize;
    let result = timestepper::run(
        initial,
        &spec.params,
        &grid,
        &spec.ctrl,
        spec.t_end,
        spec.output_every,
        &mut |state, step| {
            steps = step;
            if record_error.is_none() {
                match DiagnosticsRecord::compute(state, &spec.params, &grid) {
                    Ok(rec) => records.push(rec),
                    Err(e) => record_error = Some(e.to_string()),
                }
            }
        },
    );
    if let Some(msg) = record_error {
        return Err(RunError::Aborted {
            message: format!("diagnostics evaluation failed: {msg}"),
            records,
        });
    }
    match result {
        Ok(final_state) => Ok(RunOutput {
            records,
            final_state,
            initial_means,
            steps,
        }),
        Err(abort) => {
            // Emit one final record for the last valid state so the
            // series ends where the run did.
            if let Ok(rec) = DiagnosticsRecord::compute(&abort.last_state, &spec.params, &grid) {
                if records.last().map(|r| r.time) != Some(rec.time) {
                    records.push(rec);
                }
            }
            Err(RunError::Aborted {
                message: abort.to_string(),
                records,
            })
        }
    }
}

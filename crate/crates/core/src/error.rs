use crate::state::ValidationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution must be even and >= 8, got {n}")]
    GridSize { n: usize },

    #[error("Poisson source is not charge-neutral: |mean| = {mean:e} exceeds tolerance {tol:e}")]
    NonNeutralSource { mean: f64, tol: f64 },

    #[error("temperature fell below half the floor: min T = {min} < T*/2 = {half_floor}")]
    TemperatureFloorViolated { min: f64, half_floor: f64 },

    #[error("Picard iteration did not converge in {max_iter} iterations (last change {change:e}); reduce dt")]
    PicardDiverged { max_iter: usize, change: f64 },

    #[error("state invalid after step at t = {time}: {report}")]
    StateInvalid { time: f64, report: ValidationReport },

    #[error("invalid initial condition: {0}")]
    InvalidIc(String),

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("mean must be positive, got {value}")]
    InvalidMean { value: f64 },

    #[error("decay fit needs at least {need} samples in the window, found {have}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("decay fit requires positive samples: y({time}) = {value}")]
    NonPositiveSample { time: f64, value: f64 },
}

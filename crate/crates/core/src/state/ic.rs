//! Deterministic initial-condition construction.
//!
//! Each field is a sum of terms: a constant offset, single Fourier modes,
//! and/or a seeded smooth random perturbation with spectrum
//! exp(-|k|^2/k0^2). Random perturbations are rescaled to a prescribed
//! sup-norm amplitude, so positivity of `base - amplitude` guarantees a
//! nonnegative field. Velocity fields are Leray-projected after assembly.

use super::{check_compatibility, validate_state, PhysParams, SimState, NONNEG_TOL};
use crate::error::Error;
use crate::spectral::{
    dealias, from_modes, leray_project, to_modes, Grid, ScalarField, VectorField,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One additive building block of an initial field.
#[derive(Debug, Clone, PartialEq)]
pub enum IcTerm {
    Constant {
        value: f64,
    },
    /// amplitude * sin(2*pi*k.x + phase).
    SingleMode {
        amplitude: f64,
        wavevector: [i64; 3],
        phase: f64,
    },
    /// Seeded mean-free random field with spectral envelope
    /// exp(-|k|^2/k0^2), rescaled to sup-norm `amplitude`.
    RandomSmooth {
        amplitude: f64,
        k0: f64,
    },
}

/// Sum of terms describing one scalar field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldIc {
    pub terms: Vec<IcTerm>,
}

impl FieldIc {
    pub fn constant(value: f64) -> Self {
        FieldIc {
            terms: vec![IcTerm::Constant { value }],
        }
    }

    pub fn zero() -> Self {
        FieldIc { terms: Vec::new() }
    }
}

/// Initial-condition description for the full state.
#[derive(Debug, Clone)]
pub struct InitialConditions {
    pub concentrations: Vec<FieldIc>,
    pub velocity: [FieldIc; 3],
    pub temperature: FieldIc,
}

impl InitialConditions {
    /// Neutral constant concentrations, zero velocity, constant temperature.
    pub fn uniform(n_species: usize, concentration: f64, temperature: f64) -> Self {
        InitialConditions {
            concentrations: vec![FieldIc::constant(concentration); n_species],
            velocity: [FieldIc::zero(), FieldIc::zero(), FieldIc::zero()],
            temperature: FieldIc::constant(temperature),
        }
    }
}

/// Stable per-field RNG stream: one seed per (run, field) pair.
fn stream_rng(seed: u64, field_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(field_index + 1)))
}

fn build_field(
    spec: &FieldIc,
    grid: &Grid,
    seed: u64,
    field_index: u64,
    name: &str,
) -> Result<ScalarField, Error> {
    let n = grid.n_per_dim() as i64;
    let mut field = ScalarField::zeros(grid);
    for term in &spec.terms {
        match term {
            IcTerm::Constant { value } => field.add_constant(*value),
            IcTerm::SingleMode {
                amplitude,
                wavevector,
                phase,
            } => {
                if wavevector.iter().any(|k| 2 * k.abs() >= n) {
                    return Err(Error::InvalidIc(format!(
                        "{name}: wavevector {wavevector:?} is not resolvable at n = {n}"
                    )));
                }
                let [kx, ky, kz] = *wavevector;
                let (a, ph) = (*amplitude, *phase);
                let mode = ScalarField::from_fn(grid, |x, y, z| {
                    a * (TWO_PI * (kx as f64 * x + ky as f64 * y + kz as f64 * z) + ph).sin()
                });
                field.add_scaled(&mode, 1.0);
            }
            IcTerm::RandomSmooth { amplitude, k0 } => {
                if *k0 <= 0.0 {
                    return Err(Error::InvalidIc(format!("{name}: k0 must be > 0")));
                }
                let pert = random_smooth(grid, &mut stream_rng(seed, field_index), *k0);
                let sup = pert.max_abs();
                if sup > 0.0 {
                    field.add_scaled(&pert, amplitude / sup);
                }
            }
        }
    }
    Ok(field)
}

/// Mean-free random field with Gaussian spectral envelope, dealiased so
/// trajectories start band-limited.
fn random_smooth(grid: &Grid, rng: &mut ChaCha8Rng, k0: f64) -> ScalarField {
    let mut white = ScalarField::zeros(grid);
    for v in white.values_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut modes = to_modes(&white, grid);
    let n = grid.n_per_dim();
    let mut idx = 0;
    for iz in 0..n {
        let kz = grid.wavenumber(iz) as f64;
        for iy in 0..n {
            let ky = grid.wavenumber(iy) as f64;
            for ix in 0..n {
                let kx = grid.wavenumber(ix) as f64;
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    modes[idx] = Complex::new(0.0, 0.0);
                } else {
                    modes[idx] *= (-k2 / (k0 * k0)).exp();
                }
                idx += 1;
            }
        }
    }
    dealias(&from_modes(modes, grid), grid)
}

/// Builds a `SimState` from the description; deterministic given `seed`.
///
/// The result must pass `validate_state` and global electroneutrality,
/// otherwise `InvalidIc` is returned.
pub fn make_initial_state(
    ic: &InitialConditions,
    params: &PhysParams,
    grid: &Grid,
    seed: u64,
) -> Result<SimState, Error> {
    if ic.concentrations.len() != params.n_species() {
        return Err(Error::InvalidIc(format!(
            "{} concentration fields specified but params define {} species",
            ic.concentrations.len(),
            params.n_species()
        )));
    }
    let mut concentrations = Vec::with_capacity(ic.concentrations.len());
    for (i, spec) in ic.concentrations.iter().enumerate() {
        concentrations.push(build_field(
            spec,
            grid,
            seed,
            i as u64,
            &format!("c_{}", i + 1),
        )?);
    }
    let base = ic.concentrations.len() as u64;
    let u0 = build_field(&ic.velocity[0], grid, seed, base, "u_1")?;
    let u1 = build_field(&ic.velocity[1], grid, seed, base + 1, "u_2")?;
    let u2 = build_field(&ic.velocity[2], grid, seed, base + 2, "u_3")?;
    let velocity = leray_project(&VectorField::new(u0, u1, u2), grid);
    let temperature = build_field(&ic.temperature, grid, seed, base + 3, "T")?;

    let state = SimState {
        time: 0.0,
        concentrations,
        velocity,
        temperature,
    };

    let report = validate_state(&state, params, NONNEG_TOL);
    if !report.is_ok() {
        return Err(Error::InvalidIc(format!(
            "initial state violates structural hypotheses: {report}"
        )));
    }
    let residual = check_compatibility(&state, params);
    if residual > 1e-12 {
        return Err(Error::InvalidIc(format!(
            "initial means are not electroneutral: residual {residual:e}"
        )));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16).unwrap()
    }

    #[test]
    fn uniform_state_is_valid() {
        let g = grid();
        let p = PhysParams::default();
        let ic = InitialConditions::uniform(2, 1.0, 1.0);
        let s = make_initial_state(&ic, &p, &g, 0).unwrap();
        assert_eq!(s.n_species(), 2);
        assert!(validate_state(&s, &p, NONNEG_TOL).is_ok());
    }

    #[test]
    fn positivity_violation_is_rejected() {
        let g = grid();
        let p = PhysParams::default();
        let mut ic = InitialConditions::uniform(2, 1.0, 1.0);
        ic.concentrations[0].terms.push(IcTerm::SingleMode {
            amplitude: 1.5,
            wavevector: [1, 0, 0],
            phase: 0.0,
        });
        match make_initial_state(&ic, &p, &g, 0) {
            Err(Error::InvalidIc(_)) => {}
            other => panic!("expected InvalidIc, got {other:?}"),
        }
    }

    #[test]
    fn non_neutral_means_are_rejected() {
        let g = grid();
        let p = PhysParams::default();
        let mut ic = InitialConditions::uniform(2, 1.0, 1.0);
        ic.concentrations[0] = FieldIc::constant(1.5);
        assert!(matches!(
            make_initial_state(&ic, &p, &g, 0),
            Err(Error::InvalidIc(_))
        ));
    }

    #[test]
    fn random_smooth_is_deterministic() {
        let g = grid();
        let p = PhysParams::default();
        let mut ic = InitialConditions::uniform(2, 1.0, 1.0);
        ic.concentrations[0].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.4,
            k0: 2.0,
        });
        ic.concentrations[1].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.4,
            k0: 2.0,
        });
        let a = make_initial_state(&ic, &p, &g, 42).unwrap();
        let b = make_initial_state(&ic, &p, &g, 42).unwrap();
        assert_eq!(a.concentrations[0], b.concentrations[0]);
        assert_eq!(a.concentrations[1], b.concentrations[1]);
        // Different fields draw from different streams.
        assert_ne!(a.concentrations[0], a.concentrations[1]);
        // And a different seed changes the draw.
        let c = make_initial_state(&ic, &p, &g, 43).unwrap();
        assert_ne!(a.concentrations[0], c.concentrations[0]);
    }

    #[test]
    fn velocity_is_projected_divergence_free() {
        let g = grid();
        let p = PhysParams::default();
        let mut ic = InitialConditions::uniform(2, 1.0, 1.0);
        // u1 depends on x only: not divergence-free before projection.
        ic.velocity[0] = FieldIc {
            terms: vec![IcTerm::SingleMode {
                amplitude: 0.2,
                wavevector: [1, 0, 0],
                phase: 0.0,
            }],
        };
        let s = make_initial_state(&ic, &p, &g, 1).unwrap();
        let div = crate::spectral::divergence(&s.velocity, &g);
        assert!(div.l2_norm() <= 1e-12);
    }
}

//! Time integration: an integrating-factor Heun scheme and a per-step
//! Picard fixed-point solve, plus the adaptive driver.
//!
//! Both schemes treat the linear diffusion exactly through the per-mode
//! heat propagators exp(-coeff*4*pi^2*|k|^2*dt), so only the advective,
//! electromigrative, and forcing terms are stepped explicitly and there
//! is no diffusive CFL restriction. Electro-fields are recomputed at
//! every stage; means of c_i and T and the zero mean of u are preserved
//! to rounding because the right-hand sides are conservative.

use crate::error::Error;
use crate::model::{advecting_velocity, momentum_rhs_with, np_rhs_with, temperature_rhs_with};
use crate::spectral::{diffuse_exact, Grid, ScalarField, VectorField};
use crate::state::{
    check_compatibility, compute_electro, validate_state, PhysParams, ReferenceValues, SimState,
    NONNEG_TOL,
};

/// Which per-step scheme the driver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeMode {
    ImexRk2,
    Picard,
}

/// Step-size and scheme controls.
#[derive(Debug, Clone)]
pub struct StepControl {
    pub dt: f64,
    pub cfl_target: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub mode: SchemeMode,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt: 1e-3,
            cfl_target: 0.4,
            dt_min: 1e-6,
            dt_max: 1e-2,
            mode: SchemeMode::ImexRk2,
            picard_tol: 1e-10,
            picard_max_iter: 50,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<(), Error> {
        let ordered = self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max;
        if !ordered {
            return Err(Error::InvalidParams(format!(
                "step sizes must satisfy 0 < dt_min <= dt <= dt_max, got {} <= {} <= {}",
                self.dt_min, self.dt, self.dt_max
            )));
        }
        let cfl_ok = self.cfl_target > 0.0 && self.cfl_target <= 1.0;
        if !cfl_ok {
            return Err(Error::InvalidParams(format!(
                "cfl_target must lie in (0, 1], got {}",
                self.cfl_target
            )));
        }
        if !self.picard_tol.is_finite() || self.picard_tol <= 0.0 {
            return Err(Error::InvalidParams("picard_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Slopes of the non-stiff right-hand side for every prognostic field.
struct Rhs {
    concentrations: Vec<ScalarField>,
    velocity: VectorField,
    temperature: ScalarField,
}

fn eval_rhs(
    state: &SimState,
    reference: &ReferenceValues,
    params: &PhysParams,
    grid: &Grid,
) -> Result<Rhs, Error> {
    let electro = compute_electro(state, params, grid)?;
    let advect = advecting_velocity(state, params, grid);
    // The three field groups are independent given (electro, advect).
    let (concentrations, (velocity, temperature)) = rayon::join(
        || np_rhs_with(state, &electro, &advect, params, grid),
        || {
            rayon::join(
                || momentum_rhs_with(state, &electro, &advect, reference, params, grid),
                || temperature_rhs_with(state, &advect, grid),
            )
        },
    );
    Ok(Rhs {
        concentrations: concentrations?,
        velocity,
        temperature,
    })
}

fn add_rhs(state: &mut SimState, rhs: &Rhs, factor: f64) {
    for (c, r) in state.concentrations.iter_mut().zip(&rhs.concentrations) {
        c.add_scaled(r, factor);
    }
    state.velocity.add_scaled(&rhs.velocity, factor);
    state.temperature.add_scaled(&rhs.temperature, factor);
}

/// Applies the exact diffusion propagators over one step of size dt.
/// Every field is independent; run them on the worker pool.
fn apply_diffusion(state: &mut SimState, params: &PhysParams, grid: &Grid, dt: f64) {
    rayon::scope(|s| {
        for c in &mut state.concentrations {
            s.spawn(move |_| *c = diffuse_exact(c, params.diffusivity, dt, grid));
        }
        let (v0, rest) = state.velocity.components_mut().split_at_mut(1);
        let (v1, v2) = rest.split_at_mut(1);
        s.spawn(move |_| v0[0] = diffuse_exact(&v0[0], params.viscosity, dt, grid));
        s.spawn(move |_| v1[0] = diffuse_exact(&v1[0], params.viscosity, dt, grid));
        s.spawn(move |_| v2[0] = diffuse_exact(&v2[0], params.viscosity, dt, grid));
        let t = &mut state.temperature;
        s.spawn(move |_| *t = diffuse_exact(t, params.thermal_diffusivity, dt, grid));
    });
}

fn validated(state: SimState, params: &PhysParams) -> Result<SimState, Error> {
    let report = validate_state(&state, params, NONNEG_TOL);
    if report.is_ok() {
        Ok(state)
    } else {
        Err(Error::StateInvalid {
            time: state.time,
            report,
        })
    }
}

/// One step of the integrating-factor Heun (two-stage, second order)
/// scheme:
///
/// predictor  q~      = E(dt) (q + dt k1)
/// corrector  q^{n+1} = E(dt) (q + dt/2 k1) + dt/2 k2,   k2 = N(q~)
pub fn imex_step(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
    ctrl: &StepControl,
) -> Result<SimState, Error> {
    let dt = ctrl.dt;
    let reference = ReferenceValues::new(state, params);
    let k1 = eval_rhs(state, &reference, params, grid)?;

    let mut predictor = state.clone();
    add_rhs(&mut predictor, &k1, dt);
    apply_diffusion(&mut predictor, params, grid, dt);
    predictor.time = state.time + dt;
    let k2 = eval_rhs(&predictor, &reference, params, grid)?;

    let mut next = state.clone();
    add_rhs(&mut next, &k1, 0.5 * dt);
    apply_diffusion(&mut next, params, grid, dt);
    add_rhs(&mut next, &k2, 0.5 * dt);
    next.time = state.time + dt;
    validated(next, params)
}

/// One step of the sequential fixed-point scheme. Within the step the
/// iterates advance in the order T, u, c_i:
///
///   T^(m)  from the advecting velocity J_eta u^(m-1),
///   u^(m)  from J_eta u^(m-1), buoyancy(T^(m), c^(m-1)), and the
///          electric force of (rho, psi)^(m-1),
///   c^(m)  from J_eta u^(m), T^(m), and psi^(m-1),
///
/// each through the trapezoidal integrating-factor update
/// q^(m) = E(dt)(q + dt/2 N(q)) + dt/2 N(endpoint iterates). The loop
/// stops when the summed relative L^2 change of all fields drops below
/// `picard_tol`; exceeding `picard_max_iter` fails with `PicardDiverged`
/// (the step size is too large for the contraction).
pub fn picard_step(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
    ctrl: &StepControl,
) -> Result<(SimState, usize), Error> {
    let dt = ctrl.dt;
    let reference = ReferenceValues::new(state, params);
    let k0 = eval_rhs(state, &reference, params, grid)?;

    // Frozen start-of-step part: E(dt)(q + dt/2 k0).
    let mut base = state.clone();
    add_rhs(&mut base, &k0, 0.5 * dt);
    apply_diffusion(&mut base, params, grid, dt);

    let mut work = state.clone();
    work.time = state.time + dt;
    let mut electro = compute_electro(&work, params, grid)?;

    for iteration in 1..=ctrl.picard_max_iter {
        let advect_prev = advecting_velocity(&work, params, grid);

        // Temperature endpoint slope uses the previous velocity iterate.
        let mut temp_new = base.temperature.clone();
        temp_new.add_scaled(&temperature_rhs_with(&work, &advect_prev, grid), 0.5 * dt);

        // Momentum: buoyancy from the fresh temperature, concentrations
        // and electric force from the previous iterate.
        let buoyancy_state = SimState {
            time: work.time,
            concentrations: work.concentrations.clone(),
            velocity: work.velocity.clone(),
            temperature: temp_new.clone(),
        };
        let mut vel_new = base.velocity.clone();
        vel_new.add_scaled(
            &momentum_rhs_with(&buoyancy_state, &electro, &advect_prev, &reference, params, grid),
            0.5 * dt,
        );

        // Concentrations: fresh velocity and temperature, previous psi.
        let advect_new = advecting_velocity(
            &SimState {
                time: work.time,
                concentrations: Vec::new(),
                velocity: vel_new.clone(),
                temperature: temp_new.clone(),
            },
            params,
            grid,
        );
        let conc_state = SimState {
            time: work.time,
            concentrations: work.concentrations.clone(),
            velocity: vel_new.clone(),
            temperature: temp_new.clone(),
        };
        // Leaving the admissible set mid-iteration (temperature floor,
        // lost neutrality) is contraction failure, not a model error.
        let diverged = |_| Error::PicardDiverged {
            max_iter: iteration,
            change: f64::INFINITY,
        };
        let conc_rhs =
            np_rhs_with(&conc_state, &electro, &advect_new, params, grid).map_err(diverged)?;
        let mut conc_new = base.concentrations.clone();
        for (c, r) in conc_new.iter_mut().zip(&conc_rhs) {
            c.add_scaled(r, 0.5 * dt);
        }

        let mut change = temp_new.sub(&work.temperature).l2_norm()
            / (work.temperature.l2_norm() + 1e-14);
        for j in 0..3 {
            change += vel_new
                .component(j)
                .sub(work.velocity.component(j))
                .l2_norm()
                / (work.velocity.component(j).l2_norm() + 1e-14);
        }
        for (new, old) in conc_new.iter().zip(&work.concentrations) {
            change += new.sub(old).l2_norm() / (old.l2_norm() + 1e-14);
        }

        work.temperature = temp_new;
        work.velocity = vel_new;
        work.concentrations = conc_new;
        if !work.is_finite() {
            return Err(Error::PicardDiverged {
                max_iter: iteration,
                change: f64::INFINITY,
            });
        }
        electro = compute_electro(&work, params, grid).map_err(diverged)?;

        if change <= ctrl.picard_tol {
            return validated(work, params).map(|s| (s, iteration));
        }
    }
    Err(Error::PicardDiverged {
        max_iter: ctrl.picard_max_iter,
        change: f64::NAN,
    })
}

/// Failure bundle from [`run`]: the error plus the last valid state, so
/// callers can still emit a final diagnostic record.
#[derive(Debug)]
pub struct RunAbort {
    pub error: Error,
    pub last_state: Box<SimState>,
}

impl std::fmt::Display for RunAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted at t = {}: {}", self.last_state.time, self.error)
    }
}

impl std::error::Error for RunAbort {}

/// Advances `state` to `t_end`, adapting dt to
/// cfl_target * spacing / max|J_eta u| clamped to [dt_min, dt_max], and
/// invoking `hook(state, step)` at step 0, every `every` steps, and at
/// the final step. Deterministic given inputs.
pub fn run(
    state: SimState,
    params: &PhysParams,
    grid: &Grid,
    ctrl: &StepControl,
    t_end: f64,
    every: usize,
    hook: &mut dyn FnMut(&SimState, usize),
) -> Result<SimState, RunAbort> {
    let every = every.max(1);
    let abort = |error, state: &SimState| RunAbort {
        error,
        last_state: Box::new(state.clone()),
    };

    let report = validate_state(&state, params, NONNEG_TOL);
    if !report.is_ok() {
        let time = state.time;
        return Err(abort(Error::StateInvalid { time, report }, &state));
    }
    let residual = check_compatibility(&state, params);
    let tol = 1e-10
        * state
            .concentrations
            .iter()
            .map(|c| c.l2_norm())
            .fold(0.0, f64::max)
        + 1e-12;
    if residual > tol {
        return Err(abort(
            Error::InvalidIc(format!(
                "initial state fails electroneutrality: residual {residual:e}"
            )),
            &state,
        ));
    }

    let mut current = state;
    hook(&current, 0);
    let mut step = 0usize;
    let end_tol = 1e-12 * t_end.abs().max(1.0);
    while current.time < t_end - end_tol {
        let vmax = advecting_velocity(&current, params, grid).max_abs();
        let mut dt = if vmax > 0.0 {
            (ctrl.cfl_target * grid.spacing() / vmax).clamp(ctrl.dt_min, ctrl.dt_max)
        } else {
            ctrl.dt_max
        };
        dt = dt.min(t_end - current.time);
        let step_ctrl = StepControl {
            dt,
            ..ctrl.clone()
        };
        let next = match ctrl.mode {
            SchemeMode::ImexRk2 => imex_step(&current, params, grid, &step_ctrl),
            SchemeMode::Picard => {
                picard_step(&current, params, grid, &step_ctrl).map(|(s, _)| s)
            }
        };
        match next {
            Ok(s) => current = s,
            Err(e) => return Err(abort(e, &current)),
        }
        step += 1;
        if step.is_multiple_of(every) {
            hook(&current, step);
        }
    }
    if !step.is_multiple_of(every) {
        hook(&current, step);
    }
    Ok(current)
}

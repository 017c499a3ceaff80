//! The functionals the long-time estimates are built from, their
//! inequality checks, and exponential-rate fitting.
//!
//! Conventions: integrals are grid averages over the unit torus;
//! relative entropies clamp negative concentration values to zero with
//! 0*log(0) = 0; square roots act on max(c, 0).

use crate::error::Error;
use crate::model::charge_transport_pairing;
use crate::spectral::{gradient, mollify, Grid, ScalarField};
use crate::state::{compute_electro, ElectroFields, PhysParams, SimState};

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Relative entropy integral(c log(c/cbar)) dx.
///
/// Nonnegative for any nonnegative c with mean cbar, and zero iff
/// c == cbar.
pub fn entropy(c: &ScalarField, cbar: f64) -> Result<f64, Error> {
    if !cbar.is_finite() || cbar <= 0.0 {
        return Err(Error::InvalidMean { value: cbar });
    }
    let log_cbar = cbar.ln();
    let sum: f64 = c
        .values()
        .iter()
        .map(|&v| {
            let w = v.max(0.0);
            xlogx(w) - w * log_cbar
        })
        .sum();
    Ok(sum / c.len() as f64)
}

/// Total relative entropy E = sum_i integral(c_i log(c_i/cbar_i)).
pub fn total_entropy(state: &SimState) -> Result<f64, Error> {
    let mut e = 0.0;
    for c in &state.concentrations {
        e += entropy(c, c.mean())?;
    }
    Ok(e)
}

/// The Lyapunov energy
/// epsilon*||grad J_eta psi||^2 + ||u||^2 + 2 k_B N_A T* E.
pub fn energy_functional(
    state: &SimState,
    electro: &ElectroFields,
    params: &PhysParams,
    grid: &Grid,
) -> Result<f64, Error> {
    let grad_psi_moll = gradient(&mollify(&electro.psi, params.eta, grid), grid);
    let field_energy = params.permittivity * grad_psi_moll.l2_norm().powi(2);
    let kinetic = state.velocity.l2_norm().powi(2);
    let entropic =
        2.0 * params.k_boltzmann * params.n_avogadro * params.t_star * total_entropy(state)?;
    Ok(field_energy + kinetic + entropic)
}

/// The matching dissipation
/// (2D/epsilon)*||J_eta rho||^2 + nu*||grad u||^2
/// + (D k_B N_A T* / 2) * sum_i ||grad sqrt(c_i)||^2.
pub fn dissipation_functional(
    state: &SimState,
    electro: &ElectroFields,
    params: &PhysParams,
    grid: &Grid,
) -> f64 {
    let rho_moll = mollify(&electro.rho, params.eta, grid);
    let charge = 2.0 * params.diffusivity / params.permittivity * rho_moll.l2_norm().powi(2);

    let mut grad_u_sq = 0.0;
    for j in 0..3 {
        grad_u_sq += gradient(state.velocity.component(j), grid).l2_norm().powi(2);
    }
    let viscous = params.viscosity * grad_u_sq;

    let mut sqrt_c_grad_sq = 0.0;
    for c in &state.concentrations {
        let mut root = c.clone();
        for v in root.values_mut() {
            *v = v.max(0.0).sqrt();
        }
        sqrt_c_grad_sq += gradient(&root, grid).l2_norm().powi(2);
    }
    let fisher = 0.5
        * params.diffusivity
        * params.k_boltzmann
        * params.n_avogadro
        * params.t_star
        * sqrt_c_grad_sq;

    charge + viscous + fisher
}

/// Pinsker-type margin 2*cbar*E(c) - ||c - cbar||_1^2; nonnegative when
/// the L^1 deviation is controlled by the relative entropy with the
/// standard constant C = 2*cbar.
pub fn ckp_check(c: &ScalarField, cbar: f64) -> Result<f64, Error> {
    let e = entropy(c, cbar)?;
    let l1: f64 =
        c.values().iter().map(|v| (v - cbar).abs()).sum::<f64>() / c.len() as f64;
    Ok(2.0 * cbar * e - l1 * l1)
}

/// Both sides of the mollifier L log L estimate: returns
/// (integral(J_eta f log J_eta f), integral(f log f)); the left side never
/// exceeds the right (up to rounding) for nonnegative f.
pub fn llogl_mollifier_check(f: &ScalarField, eta: f64, grid: &Grid) -> (f64, f64) {
    let smoothed = mollify(f, eta, grid);
    let lhs =
        smoothed.values().iter().map(|&v| xlogx(v.max(0.0))).sum::<f64>() / f.len() as f64;
    let rhs = f.values().iter().map(|&v| xlogx(v.max(0.0))).sum::<f64>() / f.len() as f64;
    (lhs, rhs)
}

/// Normalized residual of the transport-potential cancellation
/// <J_eta u . grad rho, J J psi> + <rho grad(J J psi), J_eta u> = 0.
pub fn cancellation_residual(
    state: &SimState,
    electro: &ElectroFields,
    params: &PhysParams,
    grid: &Grid,
) -> f64 {
    let pairing = charge_transport_pairing(state, electro, params, grid);
    let scale = state.velocity.l2_norm()
        * electro.rho.l2_norm()
        * electro.grad_psi_moll.l2_norm();
    pairing.abs() / (scale + f64::MIN_POSITIVE)
}

/// Fitted exponential decay of a positive time series.
#[derive(Debug, Clone)]
pub struct DecayFit {
    /// y ~ amplitude * exp(-rate * t).
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares line through (t, log y) over the window; rate is the
/// negated slope. Requires at least 8 strictly positive samples.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, Error> {
    let samples: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            have: samples.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    if let Some(&(t, y)) = samples.iter().find(|(_, y)| *y <= 0.0) {
        return Err(Error::NonPositiveSample { time: t, value: y });
    }
    let n = samples.len() as f64;
    let xm = samples.iter().map(|(t, _)| t).sum::<f64>() / n;
    let ym = samples.iter().map(|(_, y)| y.ln()).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|(t, _)| (t - xm).powi(2)).sum();
    let sxy: f64 = samples
        .iter()
        .map(|(t, y)| (t - xm) * (y.ln() - ym))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * xm;
    let ss_tot: f64 = samples.iter().map(|(_, y)| (y.ln() - ym).powi(2)).sum();
    let ss_res: f64 = samples
        .iter()
        .map(|(t, y)| (y.ln() - (intercept + slope * t)).powi(2))
        .sum();
    // A numerically constant series is a perfect fit with zero rate.
    let r_squared = if ss_tot > 1e-24 * n * (1.0 + ym * ym) {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
        window,
    })
}

/// Size-condition gate for unconditional decay:
/// threshold = D k_B N_A T* nu / (4 C alpha_S^2), infinite when
/// alpha_S = 0 (the decay then holds unconditionally). Returns
/// (threshold, max mean <= threshold).
pub fn smallness_check(params: &PhysParams, initial_means: &[f64]) -> (f64, bool) {
    let threshold = if params.alpha_s == 0.0 {
        f64::INFINITY
    } else {
        params.diffusivity * params.k_boltzmann * params.n_avogadro * params.t_star
            * params.viscosity
            / (4.0 * params.smallness_c * params.alpha_s * params.alpha_s)
    };
    let max_mean = initial_means.iter().copied().fold(0.0f64, f64::max);
    (threshold, max_mean <= threshold)
}

/// One time-stamped row of the diagnostics suite.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub entropy_e: f64,
    pub energy_cal_e: f64,
    pub dissipation_cal_d: f64,
    pub temp_l2_dev: f64,
    pub u_l2: f64,
    pub cancellation_residual: f64,
    pub ckp_margin: f64,
    pub min_t: f64,
    pub min_c: Vec<f64>,
    pub conc_l1_dev: Vec<f64>,
}

impl DiagnosticsRecord {
    /// Evaluates every functional on a snapshot. The species means used
    /// as entropy references are the current (invariant) field means.
    pub fn compute(state: &SimState, params: &PhysParams, grid: &Grid) -> Result<Self, Error> {
        let electro = compute_electro(state, params, grid)?;
        let entropy_e = total_entropy(state)?;
        let energy_cal_e = energy_functional(state, &electro, params, grid)?;
        let dissipation_cal_d = dissipation_functional(state, &electro, params, grid);

        let mut temp_dev = state.temperature.clone();
        temp_dev.add_constant(-state.temperature.mean());
        let temp_l2_dev = temp_dev.l2_norm();

        let mut ckp_margin = f64::INFINITY;
        let mut conc_l1_dev = Vec::with_capacity(state.n_species());
        let mut min_c = Vec::with_capacity(state.n_species());
        for c in &state.concentrations {
            let cbar = c.mean();
            ckp_margin = ckp_margin.min(ckp_check(c, cbar)?);
            let l1 =
                c.values().iter().map(|v| (v - cbar).abs()).sum::<f64>() / c.len() as f64;
            conc_l1_dev.push(l1);
            min_c.push(c.min());
        }

        Ok(DiagnosticsRecord {
            time: state.time,
            entropy_e,
            energy_cal_e,
            dissipation_cal_d,
            temp_l2_dev,
            u_l2: state.velocity.l2_norm(),
            cancellation_residual: cancellation_residual(state, &electro, params, grid),
            ckp_margin,
            min_t: state.temperature.min(),
            min_c,
            conc_l1_dev,
        })
    }
}

/// The exact signed terms of the energy identity
/// d/dt(E) = -dissipation + forcing, used to audit the discrete budget
/// |E(t+dt) - E(t) + dt*dissipation - dt*forcing| = O(dt^2).
#[derive(Debug, Clone)]
pub struct EnergyBudget {
    pub energy: f64,
    pub dissipation: f64,
    pub forcing: f64,
}

pub fn energy_budget(
    state: &SimState,
    electro: &ElectroFields,
    params: &PhysParams,
    grid: &Grid,
) -> Result<EnergyBudget, Error> {
    let energy = energy_functional(state, electro, params, grid)?;

    let e_over_kb = params.e_charge / params.k_boltzmann;
    let two_kbnat = 2.0 * params.k_boltzmann * params.n_avogadro * params.t_star;

    // Charge part: (2D/eps)||J rho||^2 plus the migration quadratic form
    // (2 D e^2 N_A / k_B) sum_i z_i^2 integral(c_i/T |grad JJpsi|^2).
    let rho_moll = mollify(&electro.rho, params.eta, grid);
    let mut dissipation =
        2.0 * params.diffusivity / params.permittivity * rho_moll.l2_norm().powi(2);
    let mut migration_sq = 0.0;
    for (c, &z) in state.concentrations.iter().zip(&params.valences) {
        let mut acc = 0.0;
        for j in 0..3 {
            let gj = electro.grad_psi_moll.component(j).values();
            acc += c
                .values()
                .iter()
                .zip(state.temperature.values())
                .zip(gj)
                .map(|((&cv, &tv), &gv)| cv.max(0.0) / tv * gv * gv)
                .sum::<f64>()
                / c.len() as f64;
        }
        migration_sq += z * z * acc;
    }
    dissipation += 2.0
        * params.diffusivity
        * params.e_charge
        * params.e_charge
        * params.n_avogadro
        / params.k_boltzmann
        * migration_sq;

    // Viscous part: 2 nu ||grad u||^2.
    let mut grad_u_sq = 0.0;
    for j in 0..3 {
        grad_u_sq += gradient(state.velocity.component(j), grid).l2_norm().powi(2);
    }
    dissipation += 2.0 * params.viscosity * grad_u_sq;

    // Entropy part: 2 k_B N_A T* D sum_i ||(grad c_i + (e/k_B) z_i c_i
    // grad(JJpsi)/T)/sqrt(c_i)||^2, and its cross forcing term.
    let mut entropy_dissipation = 0.0;
    let mut entropy_forcing = 0.0;
    for (c, &z) in state.concentrations.iter().zip(&params.valences) {
        let grad_c = gradient(c, grid);
        let len = c.len() as f64;
        let mut quad = 0.0;
        let mut cross = 0.0;
        for j in 0..3 {
            let gc = grad_c.component(j).values();
            let gp = electro.grad_psi_moll.component(j).values();
            for (((&cv, &tv), &gcv), &gpv) in c
                .values()
                .iter()
                .zip(state.temperature.values())
                .zip(gc)
                .zip(gp)
            {
                let cpos = cv.max(0.0);
                let drift = e_over_kb * z * cpos / tv * gpv;
                let total = gcv + drift;
                if cpos > 0.0 {
                    quad += total * total / cpos;
                }
                cross += total * (e_over_kb * z / tv * gpv);
            }
        }
        entropy_dissipation += quad / len;
        entropy_forcing += cross / len;
    }
    dissipation += two_kbnat * params.diffusivity * entropy_dissipation;

    // Buoyancy power 2g integral((alpha_T(T - T_r) - alpha_S(S - S_r)) u_3)
    // with reference values at the invariant means.
    let t_r = state.temperature.mean();
    let salinity = crate::state::ReferenceValues::salinity(state, params, grid);
    let s_r = salinity.mean();
    let u3 = state.velocity.component(2);
    let mut buoyancy_power = 0.0;
    for ((&tv, &sv), &uv) in state
        .temperature
        .values()
        .iter()
        .zip(salinity.values())
        .zip(u3.values())
    {
        buoyancy_power +=
            (params.alpha_t * (tv - t_r) - params.alpha_s * (sv - s_r)) * uv;
    }
    buoyancy_power *= 2.0 * params.gravity / state.temperature.len() as f64;

    // The advection/potential pairing vanishes analytically; keep its
    // rounding-level value so the identity stays exact.
    let pairing = -2.0 * charge_transport_pairing(state, electro, params, grid);

    let forcing = buoyancy_power
        + two_kbnat * params.diffusivity * entropy_forcing
        + pairing;

    Ok(EnergyBudget {
        energy,
        dissipation,
        forcing,
    })
}

//! Prognostic state, physical parameters, derived electric fields, and
//! validation of the structural hypotheses (nonnegative concentrations,
//! temperature floor, electroneutral means, mean-free velocity).

mod ic;

pub use ic::{make_initial_state, FieldIc, IcTerm, InitialConditions};

use crate::error::Error;
use crate::spectral::{poisson_with_mollified_gradient, Grid, ScalarField, VectorField};

/// Default tolerance for nonnegativity / floor undershoot. The continuous
/// model preserves c_i >= 0 and T >= T*; the discretization may undershoot
/// by spectral rounding. Violations beyond this abort the run rather than
/// clip, since clipping would silently break mass conservation.
pub const NONNEG_TOL: f64 = 1e-8;

/// Physical constants and run-level model parameters.
///
/// Defaults are nondimensional: e = k_B = N_A = 1. SI values can be set in
/// the configuration; every diagnostic formula uses the symbols, never
/// baked-in numerics.
#[derive(Debug, Clone)]
pub struct PhysParams {
    /// Shared ionic diffusivity D > 0 (equal for all species).
    pub diffusivity: f64,
    /// Kinematic viscosity nu > 0.
    pub viscosity: f64,
    /// Thermal diffusivity kappa > 0.
    pub thermal_diffusivity: f64,
    /// Dielectric permittivity epsilon > 0.
    pub permittivity: f64,
    /// Elementary charge e > 0.
    pub e_charge: f64,
    /// Boltzmann constant k_B > 0.
    pub k_boltzmann: f64,
    /// Avogadro constant N_A > 0.
    pub n_avogadro: f64,
    /// Gravitational acceleration g >= 0.
    pub gravity: f64,
    /// Thermal expansion coefficient alpha_T >= 0.
    pub alpha_t: f64,
    /// Saline expansion coefficient alpha_S >= 0.
    pub alpha_s: f64,
    /// Valences z_i, one per species.
    pub valences: Vec<f64>,
    /// Molar masses M_i > 0, one per species.
    pub molar_masses: Vec<f64>,
    /// Temperature floor T* > 0.
    pub t_star: f64,
    /// Mollification parameter eta >= 0; eta = 0 disables the mollifier.
    pub eta: f64,
    /// Assumed domain constant C in the smallness threshold
    /// D k_B N_A T* nu / (4 C alpha_S^2).
    pub smallness_c: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            diffusivity: 1.0,
            viscosity: 1.0,
            thermal_diffusivity: 1.0,
            permittivity: 1.0,
            e_charge: 1.0,
            k_boltzmann: 1.0,
            n_avogadro: 1.0,
            gravity: 1.0,
            alpha_t: 0.0,
            alpha_s: 0.0,
            valences: vec![1.0, -1.0],
            molar_masses: vec![1.0, 1.0],
            t_star: 1.0,
            eta: 0.0,
            smallness_c: 1.0,
        }
    }
}

impl PhysParams {
    pub fn n_species(&self) -> usize {
        self.valences.len()
    }

    /// Faraday constant F = e * N_A.
    pub fn faraday(&self) -> f64 {
        self.e_charge * self.n_avogadro
    }

    /// Molar gas constant R = k_B * N_A.
    pub fn gas_constant(&self) -> f64 {
        self.k_boltzmann * self.n_avogadro
    }

    pub fn validate(&self) -> Result<(), Error> {
        let pos = [
            (self.diffusivity, "D"),
            (self.viscosity, "nu"),
            (self.thermal_diffusivity, "kappa"),
            (self.permittivity, "epsilon"),
            (self.e_charge, "e_charge"),
            (self.k_boltzmann, "k_B"),
            (self.n_avogadro, "N_A"),
            (self.t_star, "T_star"),
            (self.smallness_c, "smallness_C"),
        ];
        for (v, name) in pos {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let nonneg = [
            (self.gravity, "g"),
            (self.alpha_t, "alpha_T"),
            (self.alpha_s, "alpha_S"),
            (self.eta, "eta"),
        ];
        for (v, name) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.valences.is_empty() {
            return Err(Error::InvalidParams("need at least one ionic species".into()));
        }
        if self.valences.len() != self.molar_masses.len() {
            return Err(Error::InvalidParams(format!(
                "valences ({}) and molar_masses ({}) must have the same length",
                self.valences.len(),
                self.molar_masses.len()
            )));
        }
        if let Some(m) = self.molar_masses.iter().find(|m| !m.is_finite() || **m <= 0.0) {
            return Err(Error::InvalidParams(format!(
                "molar masses must be > 0, got {m}"
            )));
        }
        Ok(())
    }
}

/// The prognostic fields at one time instant.
#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub concentrations: Vec<ScalarField>,
    pub velocity: VectorField,
    pub temperature: ScalarField,
}

impl SimState {
    pub fn n_species(&self) -> usize {
        self.concentrations.len()
    }

    pub fn is_finite(&self) -> bool {
        self.concentrations.iter().all(|c| c.is_finite())
            && self.velocity.is_finite()
            && self.temperature.is_finite()
    }

    /// Relative L^2 distance to another state, aggregated over all fields.
    pub fn relative_l2_distance(&self, other: &SimState) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.concentrations.iter().zip(&other.concentrations) {
            num += a.sub(b).l2_norm().powi(2);
            den += b.l2_norm().powi(2);
        }
        for j in 0..3 {
            num += self
                .velocity
                .component(j)
                .sub(other.velocity.component(j))
                .l2_norm()
                .powi(2);
            den += other.velocity.component(j).l2_norm().powi(2);
        }
        num += self.temperature.sub(&other.temperature).l2_norm().powi(2);
        den += other.temperature.l2_norm().powi(2);
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// Charge density, electric potential, and the mollified potential
/// gradient, all consistent with one `SimState`.
#[derive(Debug, Clone)]
pub struct ElectroFields {
    /// rho = e * N_A * sum_i z_i c_i.
    pub rho: ScalarField,
    /// Zero-mean potential solving -epsilon * Laplacian(psi) = rho.
    pub psi: ScalarField,
    /// grad(J_eta J_eta psi), the force/flux kernel of the mollified system.
    pub grad_psi_moll: VectorField,
}

/// Solves the electrostatics for a state: charge density, potential in the
/// zero-mean gauge, and the doubly-mollified potential gradient.
pub fn compute_electro(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
) -> Result<ElectroFields, Error> {
    let f = params.faraday();
    let mut rho = ScalarField::zeros(grid);
    for (c, &z) in state.concentrations.iter().zip(&params.valences) {
        rho.add_scaled(c, f * z);
    }
    let (psi, grad_psi_moll) =
        poisson_with_mollified_gradient(&rho, params.permittivity, params.eta, grid)?;
    Ok(ElectroFields {
        rho,
        psi,
        grad_psi_moll,
    })
}

/// Residual of the global electroneutrality condition
/// |sum_i e N_A z_i mean(c_i)|; the caller compares against a tolerance.
pub fn check_compatibility(state: &SimState, params: &PhysParams) -> f64 {
    let f = params.faraday();
    state
        .concentrations
        .iter()
        .zip(&params.valences)
        .map(|(c, &z)| f * z * c.mean())
        .sum::<f64>()
        .abs()
}

/// One structural-hypothesis violation found by [`validate_state`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeConcentration { species: usize, min: f64 },
    TemperatureFloor { min: f64, floor: f64 },
    NonzeroMeanVelocity { component: usize, mean: f64 },
    NonFiniteField { name: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NegativeConcentration { species, min } => {
                write!(f, "c_{} has min {min:e} below tolerance", species + 1)
            }
            Violation::TemperatureFloor { min, floor } => {
                write!(f, "temperature min {min} fell below floor {floor}")
            }
            Violation::NonzeroMeanVelocity { component, mean } => {
                write!(f, "u_{} has nonzero mean {mean:e}", component + 1)
            }
            Violation::NonFiniteField { name } => write!(f, "{name} contains NaN/Inf"),
        }
    }
}

/// Report-style result of [`validate_state`]: empty means admissible.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks nonnegativity of concentrations, the temperature floor, and the
/// mean-free velocity, each against `tol`. Returns a report rather than
/// failing, so callers decide severity.
pub fn validate_state(state: &SimState, params: &PhysParams, tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, c) in state.concentrations.iter().enumerate() {
        if !c.is_finite() {
            violations.push(Violation::NonFiniteField {
                name: format!("c_{}", i + 1),
            });
            continue;
        }
        let min = c.min();
        if min < -tol {
            violations.push(Violation::NegativeConcentration { species: i, min });
        }
    }
    if !state.temperature.is_finite() {
        violations.push(Violation::NonFiniteField {
            name: "temperature".into(),
        });
    } else {
        let min_t = state.temperature.min();
        if min_t < params.t_star - tol {
            violations.push(Violation::TemperatureFloor {
                min: min_t,
                floor: params.t_star,
            });
        }
    }
    if !state.velocity.is_finite() {
        violations.push(Violation::NonFiniteField {
            name: "velocity".into(),
        });
    } else {
        for j in 0..3 {
            let mean = state.velocity.component(j).mean();
            if mean.abs() > tol {
                violations.push(Violation::NonzeroMeanVelocity { component: j, mean });
            }
        }
    }
    ValidationReport { violations }
}

/// Reference values frozen at initialization: T_r = mean(T_0) and
/// S_r = sum_i mean(c_i(0)) M_i, plus the invariant species means used by
/// the long-time diagnostics.
#[derive(Debug, Clone)]
pub struct ReferenceValues {
    pub t_r: f64,
    pub s_r: f64,
    pub initial_means: Vec<f64>,
}

impl ReferenceValues {
    pub fn new(initial: &SimState, params: &PhysParams) -> Self {
        let initial_means: Vec<f64> = initial.concentrations.iter().map(|c| c.mean()).collect();
        let s_r = initial_means
            .iter()
            .zip(&params.molar_masses)
            .map(|(m, w)| m * w)
            .sum();
        ReferenceValues {
            t_r: initial.temperature.mean(),
            s_r,
            initial_means,
        }
    }

    /// Salinity field S = sum_i c_i M_i.
    pub fn salinity(state: &SimState, params: &PhysParams, grid: &Grid) -> ScalarField {
        let mut s = ScalarField::zeros(grid);
        for (c, &m) in state.concentrations.iter().zip(&params.molar_masses) {
            s.add_scaled(c, m);
        }
        s
    }

    /// Buoyancy density beta = 1 - alpha_T (T - T_r) + alpha_S (S - S_r)
    /// (beta_0 = 1).
    pub fn buoyancy_density(
        &self,
        state: &SimState,
        params: &PhysParams,
        grid: &Grid,
    ) -> ScalarField {
        let s = Self::salinity(state, params, grid);
        let mut beta = ScalarField::constant(grid, 1.0);
        let t = &state.temperature;
        for ((b, &tv), &sv) in beta
            .values_mut()
            .iter_mut()
            .zip(t.values())
            .zip(s.values())
        {
            *b = 1.0 - params.alpha_t * (tv - self.t_r) + params.alpha_s * (sv - self.s_r);
        }
        beta
    }
}

//! Nonlinear right-hand sides of the coupled system, in conservative
//! (divergence) form and dealiased.
//!
//! The stiff linear diffusion terms (D, nu, kappa Laplacians) are NOT
//! included here: the integrator applies them exactly through
//! [`crate::spectral::diffuse_exact`], which removes the diffusive CFL
//! limit. Advection is written as div(u q) rather than u.grad(q); the two
//! agree in the continuum because div(u) = 0, and the divergence form is
//! conservative under discretization, making every returned scalar field
//! mean-free to rounding.
//!
//! All quadratic products are formed pointwise in physical space and
//! dealiased by the 2/3 rule; the cubic electromigration flux
//! (1/T) c_i grad(J J psi) is formed pairwise with dealiasing between
//! stages.

use crate::error::Error;
use crate::spectral::{
    divergence_masked, inner, mollify_vector, ForceAssembly, Grid, ScalarField, VectorField,
};
use crate::state::{ElectroFields, PhysParams, ReferenceValues, SimState};
use rayon::prelude::*;

/// The advecting field of the mollified system: J_eta u.
pub fn advecting_velocity(state: &SimState, params: &PhysParams, grid: &Grid) -> VectorField {
    mollify_vector(&state.velocity, params.eta, grid)
}

/// Divergence with the 2/3-rule mask fused into the spectral pass.
fn div_dealiased(v: &VectorField, grid: &Grid) -> ScalarField {
    divergence_masked(v, grid)
}

/// Dealias via one forward/inverse pair.
fn masked(f: &ScalarField, grid: &Grid) -> ScalarField {
    crate::spectral::dealias(f, grid)
}

/// Non-stiff part of the concentration equations: for each species i,
/// -div((J_eta u) c_i) + D (e/k_B) div(z_i (1/T) c_i grad(J J psi)).
///
/// Fails with `TemperatureFloorViolated` when min T < T*/2, where the
/// 1/T factor can no longer be evaluated safely.
pub fn np_rhs(
    state: &SimState,
    electro: &ElectroFields,
    params: &PhysParams,
    grid: &Grid,
) -> Result<Vec<ScalarField>, Error> {
    let advect = advecting_velocity(state, params, grid);
    np_rhs_with(state, electro, &advect, params, grid)
}

pub(crate) fn np_rhs_with(
    state: &SimState,
    electro: &ElectroFields,
    advect: &VectorField,
    params: &PhysParams,
    grid: &Grid,
) -> Result<Vec<ScalarField>, Error> {
    let min_t = state.temperature.min();
    if min_t < params.t_star / 2.0 {
        return Err(Error::TemperatureFloorViolated {
            min: min_t,
            half_floor: params.t_star / 2.0,
        });
    }
    let inv_t: Vec<f64> = state.temperature.values().iter().map(|t| 1.0 / t).collect();
    let migration_coeff = params.diffusivity * params.e_charge / params.k_boltzmann;

    // Species are independent given the shared electro/advection fields.
    let out = state
        .concentrations
        .par_iter()
        .zip(params.valences.par_iter())
        .map(|(c, &z)| {
            // Mobility c_i / T, dealiased before meeting the third factor.
            let mut mobility = c.clone();
            for (m, it) in mobility.values_mut().iter_mut().zip(&inv_t) {
                *m *= it;
            }
            let mobility = masked(&mobility, grid);

            let mut flux = VectorField::zeros(grid);
            for j in 0..3 {
                let fj = flux.component_mut(j);
                let uj = advect.component(j).values();
                let ej = electro.grad_psi_moll.component(j).values();
                for (((f, &cv), (&u, &e)), &m) in fj
                    .values_mut()
                    .iter_mut()
                    .zip(c.values())
                    .zip(uj.iter().zip(ej))
                    .zip(mobility.values())
                {
                    *f = -u * cv + migration_coeff * z * m * e;
                }
            }
            div_dealiased(&flux, grid)
        })
        .collect();
    Ok(out)
}

/// Non-stiff, Leray-projected momentum right-hand side:
/// P[ -div((J_eta u) x u) + g(alpha_T (T - T_r) - alpha_S (S - S_r)) e_3
///    - J_eta(rho grad(J J psi)) ].
///
/// The k=0 mode of the result is pinned to zero: the mean force vanishes
/// analytically (reference values track the invariant means, and the
/// electric force integrates to zero), so any residue is rounding.
pub fn momentum_rhs(
    state: &SimState,
    electro: &ElectroFields,
    reference: &ReferenceValues,
    params: &PhysParams,
    grid: &Grid,
) -> VectorField {
    let advect = advecting_velocity(state, params, grid);
    momentum_rhs_with(state, electro, &advect, reference, params, grid)
}

pub(crate) fn momentum_rhs_with(
    state: &SimState,
    electro: &ElectroFields,
    advect: &VectorField,
    reference: &ReferenceValues,
    params: &PhysParams,
    grid: &Grid,
) -> VectorField {
    let mut assembly = ForceAssembly::new(grid);

    // Advection of each velocity component, as a flux divergence.
    let mut flux = VectorField::zeros(grid);
    for i in 0..3 {
        for j in 0..3 {
            let fj = flux.component_mut(j);
            let uj = advect.component(j).values();
            let vi = state.velocity.component(i).values();
            for ((f, &u), &v) in fj.values_mut().iter_mut().zip(uj).zip(vi) {
                *f = -u * v;
            }
        }
        assembly.add_flux_divergence(i, &flux);
    }

    // Buoyancy acts along e_3; linear in the (band-limited) fields.
    let salinity = ReferenceValues::salinity(state, params, grid);
    let mut buoyancy = ScalarField::zeros(grid);
    for ((f, &t), &s) in buoyancy
        .values_mut()
        .iter_mut()
        .zip(state.temperature.values())
        .zip(salinity.values())
    {
        *f = params.gravity
            * (params.alpha_t * (t - reference.t_r) - params.alpha_s * (s - reference.s_r));
    }
    assembly.add_mollified(2, &buoyancy, 0.0, 1.0);

    // Electric force J_eta(rho grad(J J psi)), quadratic product.
    for j in 0..3 {
        let ej = electro.rho.mul(electro.grad_psi_moll.component(j));
        assembly.add_mollified(j, &ej, params.eta, -1.0);
    }

    // Mask, project, and pin the mean mode in one spectral pass. The mean
    // force vanishes analytically, so the pinning only removes rounding.
    assembly.project()
}

/// Non-stiff part of the heat equation: -div((J_eta u) T).
pub fn temperature_rhs(state: &SimState, params: &PhysParams, grid: &Grid) -> ScalarField {
    let advect = advecting_velocity(state, params, grid);
    temperature_rhs_with(state, &advect, grid)
}

pub(crate) fn temperature_rhs_with(
    state: &SimState,
    advect: &VectorField,
    grid: &Grid,
) -> ScalarField {
    let mut flux = VectorField::zeros(grid);
    for j in 0..3 {
        let fj = flux.component_mut(j);
        let uj = advect.component(j).values();
        for ((f, &u), &t) in fj
            .values_mut()
            .iter_mut()
            .zip(uj)
            .zip(state.temperature.values())
        {
            *f = -u * t;
        }
    }
    div_dealiased(&flux, grid)
}

/// Both sides of the charge-potential transport identity
/// <J_eta u . grad(rho), J J psi> + <rho grad(J J psi), J_eta u> = 0,
/// returned as their (signed) sum for residual monitoring.
pub fn charge_transport_pairing(
    state: &SimState,
    electro: &ElectroFields,
    params: &PhysParams,
    grid: &Grid,
) -> f64 {
    let advect = advecting_velocity(state, params, grid);
    let jj_psi = crate::spectral::mollify(
        &crate::spectral::mollify(&electro.psi, params.eta, grid),
        params.eta,
        grid,
    );
    let grad_rho = crate::spectral::gradient(&electro.rho, grid);
    let mut u_dot_grad_rho = ScalarField::zeros(grid);
    for j in 0..3 {
        let term = advect.component(j).mul(grad_rho.component(j));
        u_dot_grad_rho.add_scaled(&term, 1.0);
    }
    let first = inner(&u_dot_grad_rho, &jj_psi);
    let mut second = 0.0;
    for j in 0..3 {
        second += inner(
            &electro.rho.mul(electro.grad_psi_moll.component(j)),
            advect.component(j),
        );
    }
    first + second
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{divergence, gradient, mollify};
    use crate::state::{compute_electro, InitialConditions, IcTerm, FieldIc, make_initial_state};

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn constant_state(g: &Grid, c: &[f64], t: f64) -> SimState {
        SimState {
            time: 0.0,
            concentrations: c.iter().map(|&v| ScalarField::constant(g, v)).collect(),
            velocity: VectorField::zeros(g),
            temperature: ScalarField::constant(g, t),
        }
    }

    #[test]
    fn steady_state_maps_to_zero_rhs() {
        let g = grid(16);
        let p = PhysParams {
            alpha_t: 1.0,
            alpha_s: 1.0,
            eta: 0.1,
            ..PhysParams::default()
        };
        let s = constant_state(&g, &[1.0, 1.0], 1.5);
        let refv = ReferenceValues::new(&s, &p);
        let ef = compute_electro(&s, &p, &g).unwrap();

        let nrhs = np_rhs(&s, &ef, &p, &g).unwrap();
        for r in &nrhs {
            assert!(r.max_abs() <= 1e-13);
        }
        let mrhs = momentum_rhs(&s, &ef, &refv, &p, &g);
        assert!(mrhs.l2_norm() <= 1e-13);
        let trhs = temperature_rhs(&s, &p, &g);
        assert!(trhs.max_abs() <= 1e-13);
    }

    #[test]
    fn np_rhs_zero_without_velocity_and_charge() {
        let g = grid(16);
        let p = PhysParams::default();
        let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
        // Neutral perturbation: both species carry the same bump.
        let bump = ScalarField::from_fn(&g, |x, _, _| 0.2 * (TWO_PI * x).sin());
        s.concentrations[0].add_scaled(&bump, 1.0);
        s.concentrations[1].add_scaled(&bump, 1.0);
        let ef = compute_electro(&s, &p, &g).unwrap();
        assert!(ef.rho.max_abs() < 1e-13);
        let rhs = np_rhs(&s, &ef, &p, &g).unwrap();
        for r in &rhs {
            assert!(r.max_abs() <= 1e-12);
        }
    }

    #[test]
    fn np_rhs_matches_product_rule_oracle() {
        // c1 = 1 + 0.3 sin(2 pi x), c2 = 1, T = 1, u = 0, eta = 0:
        // for species 1 the flux is c1 grad(psi) with
        // psi = 0.3 sin(2 pi x)/(4 pi^2), so the right-hand side is
        // d/dx (c1 psi') = 0.3(-sin(2 pi x) + 0.3 cos(4 pi x)).
        // Species 2 reduces to -Laplacian(psi) = 0.3 sin(2 pi x).
        let g = grid(64);
        let p = PhysParams::default();
        let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
        s.concentrations[0] =
            ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.3 * (TWO_PI * x).sin());
        let ef = compute_electro(&s, &p, &g).unwrap();
        let rhs = np_rhs(&s, &ef, &p, &g).unwrap();

        let expect0 = ScalarField::from_fn(&g, |x, _, _| {
            0.3 * (-(TWO_PI * x).sin() + 0.3 * (2.0 * TWO_PI * x).cos())
        });
        assert!(rhs[0].sub(&expect0).max_abs() < 1e-12);

        let expect1 = ScalarField::from_fn(&g, |x, _, _| 0.3 * (TWO_PI * x).sin());
        assert!(rhs[1].sub(&expect1).max_abs() < 1e-12);
    }

    #[test]
    fn rhs_fields_are_mean_free() {
        let g = grid(16);
        let p = PhysParams {
            eta: 0.05,
            alpha_t: 0.7,
            alpha_s: 0.3,
            ..PhysParams::default()
        };
        let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
        ic.concentrations[0].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.3,
            k0: 2.0,
        });
        ic.concentrations[1].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.3,
            k0: 2.0,
        });
        ic.velocity[0] = FieldIc {
            terms: vec![IcTerm::RandomSmooth {
                amplitude: 0.2,
                k0: 2.0,
            }],
        };
        ic.temperature.terms.push(IcTerm::RandomSmooth {
            amplitude: 0.1,
            k0: 2.0,
        });
        let s = make_initial_state(&ic, &p, &g, 7).unwrap();
        let refv = ReferenceValues::new(&s, &p);
        let ef = compute_electro(&s, &p, &g).unwrap();

        for r in np_rhs(&s, &ef, &p, &g).unwrap() {
            assert!(r.mean().abs() <= 1e-13);
        }
        assert!(temperature_rhs(&s, &p, &g).mean().abs() <= 1e-13);
        let m = momentum_rhs(&s, &ef, &refv, &p, &g);
        for j in 0..3 {
            assert!(m.component(j).mean().abs() <= 1e-15);
        }
    }

    #[test]
    fn buoyancy_divergence_free_mode_passes_projection() {
        let g = grid(16);
        let p = PhysParams {
            alpha_t: 1.0,
            ..PhysParams::default()
        };
        let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
        let pert = ScalarField::from_fn(&g, |x, _, _| 0.1 * (TWO_PI * x).sin());
        s.temperature.add_scaled(&pert, 1.0);
        let refv = ReferenceValues {
            t_r: 1.0,
            s_r: 2.0,
            initial_means: vec![1.0, 1.0],
        };
        let ef = compute_electro(&s, &p, &g).unwrap();
        let m = momentum_rhs(&s, &ef, &refv, &p, &g);
        assert!(m.component(2).sub(&pert).max_abs() < 1e-13);
        assert!(m.component(0).max_abs() < 1e-13);
        assert!(m.component(1).max_abs() < 1e-13);
    }

    #[test]
    fn buoyancy_gradient_mode_is_absorbed() {
        let g = grid(16);
        let p = PhysParams {
            alpha_t: 1.0,
            ..PhysParams::default()
        };
        let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
        let pert = ScalarField::from_fn(&g, |_, _, z| 0.1 * (TWO_PI * z).sin());
        s.temperature.add_scaled(&pert, 1.0);
        let refv = ReferenceValues {
            t_r: 1.0,
            s_r: 2.0,
            initial_means: vec![1.0, 1.0],
        };
        let ef = compute_electro(&s, &p, &g).unwrap();
        let m = momentum_rhs(&s, &ef, &refv, &p, &g);
        assert!(m.l2_norm() <= 1e-13);
    }

    #[test]
    fn temperature_rhs_examples() {
        let g = grid(16);
        let p = PhysParams::default();

        let s0 = constant_state(&g, &[1.0, 1.0], 1.3);
        assert!(temperature_rhs(&s0, &p, &g).max_abs() < 1e-14);

        // Constant T advected by any divergence-free u.
        let mut s1 = constant_state(&g, &[1.0, 1.0], 2.0);
        s1.velocity = VectorField::new(
            ScalarField::from_fn(&g, |_, y, _| (TWO_PI * y).sin()),
            ScalarField::from_fn(&g, |_, _, z| (TWO_PI * z).cos()),
            ScalarField::zeros(&g),
        );
        assert!(temperature_rhs(&s1, &p, &g).max_abs() < 1e-12);

        // u = (sin(2 pi y), 0, 0), T = sin(2 pi x):
        // -div(uT) = -2 pi sin(2 pi y) cos(2 pi x).
        let mut s2 = constant_state(&g, &[1.0, 1.0], 0.0);
        s2.temperature = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
        s2.velocity = VectorField::new(
            ScalarField::from_fn(&g, |_, y, _| (TWO_PI * y).sin()),
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
        );
        let rhs = temperature_rhs(&s2, &p, &g);
        let expect = ScalarField::from_fn(&g, |x, y, _| {
            -TWO_PI * (TWO_PI * y).sin() * (TWO_PI * x).cos()
        });
        assert!(rhs.sub(&expect).max_abs() < 1e-11);
    }

    #[test]
    fn temperature_floor_guard_fires() {
        let g = grid(16);
        let p = PhysParams::default();
        let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
        s.temperature = ScalarField::constant(&g, 0.4); // below T*/2 = 0.5
        let ef = compute_electro(&s, &p, &g).unwrap();
        assert!(matches!(
            np_rhs(&s, &ef, &p, &g),
            Err(Error::TemperatureFloorViolated { .. })
        ));
    }

    #[test]
    fn charge_transport_cancellation_on_random_states() {
        let g = grid(32);
        let p = PhysParams {
            eta: 0.05,
            ..PhysParams::default()
        };
        let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
        ic.concentrations[0].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.3,
            k0: 3.0,
        });
        ic.velocity[0] = FieldIc {
            terms: vec![IcTerm::RandomSmooth {
                amplitude: 0.5,
                k0: 3.0,
            }],
        };
        ic.velocity[1] = FieldIc {
            terms: vec![IcTerm::RandomSmooth {
                amplitude: 0.5,
                k0: 3.0,
            }],
        };
        let s = make_initial_state(&ic, &p, &g, 11).unwrap();
        let ef = compute_electro(&s, &p, &g).unwrap();
        let sum = charge_transport_pairing(&s, &ef, &p, &g);
        let scale = s.velocity.l2_norm() * ef.rho.l2_norm() * ef.grad_psi_moll.l2_norm();
        assert!(sum.abs() <= 1e-10 * scale.max(1e-30));
    }

    #[test]
    fn entropy_advection_cancellation() {
        let g = grid(32);
        let p = PhysParams {
            eta: 0.02,
            ..PhysParams::default()
        };
        let mut ic = InitialConditions::uniform(2, 1.0, 1.0);
        ic.concentrations[0].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.4,
            k0: 2.0,
        });
        ic.concentrations[1].terms.push(IcTerm::RandomSmooth {
            amplitude: 0.4,
            k0: 2.0,
        });
        ic.velocity[0] = FieldIc {
            terms: vec![IcTerm::RandomSmooth {
                amplitude: 0.6,
                k0: 2.0,
            }],
        };
        ic.velocity[2] = FieldIc {
            terms: vec![IcTerm::RandomSmooth {
                amplitude: 0.6,
                k0: 2.0,
            }],
        };
        let s = make_initial_state(&ic, &p, &g, 5).unwrap();
        let advect = advecting_velocity(&s, &p, &g);
        for c in &s.concentrations {
            let grad_c = gradient(c, &g);
            let mut u_grad_c = ScalarField::zeros(&g);
            for j in 0..3 {
                u_grad_c.add_scaled(&advect.component(j).mul(grad_c.component(j)), 1.0);
            }
            let mut log_c = c.clone();
            for v in log_c.values_mut() {
                *v = v.ln();
            }
            let pairing = inner(&u_grad_c, &log_c);
            let bound = 1e-9
                * s.velocity.l2_norm()
                * (0..3).map(|j| grad_c.component(j).l2_norm().powi(2)).sum::<f64>().sqrt();
            assert!(pairing.abs() <= bound.max(1e-14));
        }
    }

    #[test]
    fn mollified_advection_consistency() {
        // momentum advection with eta > 0 uses J_eta u: check against an
        // explicitly mollified field.
        let g = grid(16);
        let p = PhysParams {
            eta: 0.2,
            ..PhysParams::default()
        };
        let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
        s.velocity = VectorField::new(
            ScalarField::from_fn(&g, |_, y, _| 0.3 * (TWO_PI * y).sin()),
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
        );
        let advect = advecting_velocity(&s, &p, &g);
        let expect = mollify(s.velocity.component(0), 0.2, &g);
        assert!(advect.component(0).sub(&expect).max_abs() < 1e-14);
        // J_eta u stays divergence-free.
        assert!(divergence(&advect, &g).l2_norm() < 1e-13);
    }
}

//! Trajectory-level properties: the discrete energy budget closes at
//! O(dt^2), the Lyapunov energy decays monotonically once the thermal
//! forcing is spent, and the mollified trajectories are Cauchy in eta.

use npb_core::diagnostics::{energy_budget, energy_functional};
use npb_core::spectral::Grid;
use npb_core::state::{
    compute_electro, make_initial_state, FieldIc, IcTerm, InitialConditions,
};
use npb_core::timestepper::{imex_step, run, SchemeMode, StepControl};
use npb_core::PhysParams;

fn params(eta: f64, alpha_s: f64) -> PhysParams {
    PhysParams {
        diffusivity: 0.1,
        viscosity: 0.08,
        thermal_diffusivity: 0.15,
        alpha_t: 0.5,
        alpha_s,
        eta,
        ..PhysParams::default()
    }
}

fn smooth_ic() -> InitialConditions {
    let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
    ic.concentrations[0].terms.push(IcTerm::SingleMode {
        amplitude: 0.25,
        wavevector: [1, 0, 0],
        phase: 0.0,
    });
    ic.concentrations[1].terms.push(IcTerm::SingleMode {
        amplitude: 0.2,
        wavevector: [0, 1, 0],
        phase: 0.7,
    });
    ic.velocity[0] = FieldIc {
        terms: vec![IcTerm::SingleMode {
            amplitude: 0.25,
            wavevector: [0, 1, 0],
            phase: 0.0,
        }],
    };
    ic.velocity[2] = FieldIc {
        terms: vec![IcTerm::SingleMode {
            amplitude: 0.2,
            wavevector: [1, 0, 0],
            phase: 1.3,
        }],
    };
    ic.temperature.terms.push(IcTerm::SingleMode {
        amplitude: 0.08,
        wavevector: [0, 0, 1],
        phase: 0.0,
    });
    ic
}

/// |E(t+dt) - E(t) + dt*D(t) - dt*F(t)| shrinks ~4x when dt halves.
#[test]
fn energy_budget_closes_at_second_order() {
    let grid = Grid::new(16).unwrap();
    let p = params(0.05, 0.0);
    let s0 = make_initial_state(&smooth_ic(), &p, &grid, 12).unwrap();

    let residual = |dt: f64| {
        let ef = compute_electro(&s0, &p, &grid).unwrap();
        let budget = energy_budget(&s0, &ef, &p, &grid).unwrap();
        let ctrl = StepControl {
            dt,
            ..StepControl::default()
        };
        let s1 = imex_step(&s0, &p, &grid, &ctrl).unwrap();
        let ef1 = compute_electro(&s1, &p, &grid).unwrap();
        let e1 = energy_functional(&s1, &ef1, &p, &grid).unwrap();
        (e1 - budget.energy + dt * budget.dissipation - dt * budget.forcing).abs()
    };

    let r_coarse = residual(4e-3);
    let r_fine = residual(2e-3);
    let ratio = r_coarse / r_fine;
    assert!(
        r_coarse < 1e-4,
        "budget residual unexpectedly large: {r_coarse:e}"
    );
    assert!(
        (2.7..6.0).contains(&ratio),
        "budget residual should shrink ~4x per halving, got {ratio} ({r_coarse:e} vs {r_fine:e})"
    );
}

/// With alpha_S = 0, the energy series is non-increasing (to a tolerance
/// of 1e-8 * E(0) per step) once the thermal forcing term has become
/// negligible relative to the energy.
#[test]
fn energy_is_monotone_after_thermal_transient() {
    let grid = Grid::new(16).unwrap();
    // Fast thermal decay and a small thermal amplitude so the forcing
    // term becomes negligible well inside the horizon.
    let p = PhysParams {
        thermal_diffusivity: 0.3,
        ..params(0.02, 0.0)
    };
    let mut ic = smooth_ic();
    ic.temperature = FieldIc {
        terms: vec![
            IcTerm::Constant { value: 1.2 },
            IcTerm::SingleMode {
                amplitude: 0.03,
                wavevector: [0, 0, 1],
                phase: 0.0,
            },
        ],
    };
    let s0 = make_initial_state(&ic, &p, &grid, 3).unwrap();

    let mut series: Vec<(f64, f64, f64)> = Vec::new();
    let ctrl = StepControl {
        dt_max: 2e-3,
        ..StepControl::default()
    };
    run(s0, &p, &grid, &ctrl, 1.0, 5, &mut |s, _| {
        let ef = compute_electro(s, &p, &grid).unwrap();
        let e = energy_functional(s, &ef, &p, &grid).unwrap();
        let mut dev = s.temperature.clone();
        dev.add_constant(-s.temperature.mean());
        series.push((s.time, e, dev.l2_norm()));
    })
    .unwrap();

    let e0 = series[0].1;
    let mut checked = 0;
    for pair in series.windows(2) {
        let (_, e_prev, temp_dev) = pair[0];
        let (_, e_next, _) = pair[1];
        if temp_dev * temp_dev < 1e-6 * e_prev {
            checked += 1;
            assert!(
                e_next <= e_prev + 1e-8 * e0,
                "energy increased after transient: {e_prev} -> {e_next}"
            );
        }
    }
    assert!(checked > 10, "transient never ended; only {checked} windows checked");
}

/// Successive differences ||u_eta - u_(eta/2)|| in L^2(0,T;L^2) decrease
/// strictly along the ladder eta = 0.4, 0.2, 0.1, 0.05.
#[test]
fn velocity_trajectories_are_cauchy_in_eta() {
    let grid = Grid::new(16).unwrap();
    let etas = [0.4, 0.2, 0.1, 0.05, 0.025];
    let dt = 2e-3;
    let t_end = 0.1;

    let trajectory = |eta: f64| -> Vec<npb_core::VectorField> {
        let p = params(eta, 0.0);
        let s0 = make_initial_state(&smooth_ic(), &p, &grid, 8).unwrap();
        let ctrl = StepControl {
            dt,
            dt_min: dt,
            dt_max: dt,
            mode: SchemeMode::ImexRk2,
            ..StepControl::default()
        };
        let mut velocities = Vec::new();
        run(s0, &p, &grid, &ctrl, t_end, 1, &mut |s, _| {
            velocities.push(s.velocity.clone());
        })
        .unwrap();
        velocities
    };

    let runs: Vec<_> = etas.iter().map(|&e| trajectory(e)).collect();
    let mut diffs = Vec::new();
    for pair in runs.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert_eq!(a.len(), b.len());
        let mut acc = 0.0;
        for (va, vb) in a.iter().zip(b) {
            let mut sq = 0.0;
            for j in 0..3 {
                sq += va.component(j).sub(vb.component(j)).l2_norm().powi(2);
            }
            acc += sq * dt;
        }
        diffs.push(acc.sqrt());
    }
    for pair in diffs.windows(2) {
        assert!(
            pair[1] < pair[0],
            "eta ladder differences not strictly decreasing: {diffs:?}"
        );
    }
}

//! Built-in verification battery: the per-operation example values and
//! the randomized inequality sweeps, all at n = 16. `npb selftest` exits
//! nonzero iff any check fails.

use npb_core::diagnostics::{
    cancellation_residual, ckp_check, decay_fit, dissipation_functional, energy_functional,
    entropy, llogl_mollifier_check, smallness_check,
};
use npb_core::spectral::{
    dealias, divergence, gradient, laplacian, leray_project, mollify, poisson_solve, Grid,
    ScalarField, VectorField,
};
use npb_core::state::{
    check_compatibility, compute_electro, make_initial_state, validate_state, FieldIc, IcTerm,
    InitialConditions, ReferenceValues, NONNEG_TOL,
};
use npb_core::timestepper::{imex_step, picard_step, run, StepControl};
use npb_core::PhysParams;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const FOUR_PI_SQ: f64 = 39.47841760435743;

type Check = (&'static str, fn() -> Result<(), String>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn grid() -> Grid {
    Grid::new(16).expect("n=16 is valid")
}

fn constant_state(g: &Grid, c: &[f64], t: f64) -> npb_core::SimState {
    npb_core::SimState {
        time: 0.0,
        concentrations: c.iter().map(|&v| ScalarField::constant(g, v)).collect(),
        velocity: VectorField::zeros(g),
        temperature: ScalarField::constant(g, t),
    }
}

fn check_spectral_derivatives() -> Result<(), String> {
    let g = grid();
    let f = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
    let grad = gradient(&f, &g);
    let expect = ScalarField::from_fn(&g, |x, _, _| TWO_PI * (TWO_PI * x).cos());
    let err = grad.component(0).sub(&expect).max_abs();
    ensure(err < 1e-11, format!("gradient error {err:e}"))?;
    let lap = laplacian(&f, &g);
    let mut lap_expect = f.clone();
    lap_expect.scale(-FOUR_PI_SQ);
    let lap_err = lap.sub(&lap_expect).max_abs();
    ensure(lap_err < 1e-10, format!("laplacian error {lap_err:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut r = ScalarField::zeros(&g);
    for v in r.values_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let r = dealias(&r, &g);
    let comp = divergence(&gradient(&r, &g), &g).sub(&laplacian(&r, &g)).l2_norm();
    ensure(
        comp <= 1e-12 * laplacian(&r, &g).l2_norm(),
        format!("div(grad) vs laplacian mismatch {comp:e}"),
    )
}

fn check_mollifier_algebra() -> Result<(), String> {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut f = ScalarField::zeros(&g);
    for v in f.values_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let semi = mollify(&mollify(&f, 0.06, &g), 0.14, &g)
        .sub(&mollify(&f, 0.2, &g))
        .max_abs();
    ensure(semi <= 1e-13, format!("semigroup defect {semi:e}"))?;
    let m = mollify(&f, 0.3, &g);
    let dm = (m.mean() - f.mean()).abs();
    ensure(dm <= 1e-14, format!("mean drift {dm:e}"))?;
    let single = ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.5 * (TWO_PI * x).sin());
    let sm = mollify(&single, 0.1, &g);
    let factor = (-0.1f64).exp();
    let expect = ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.5 * factor * (TWO_PI * x).sin());
    let e = sm.sub(&expect).max_abs();
    ensure(e < 1e-13, format!("single-mode mollify error {e:e}"))
}

fn check_poisson_and_leray() -> Result<(), String> {
    let g = grid();
    let rho = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
    let psi = poisson_solve(&rho, 1.0, &g).map_err(|e| e.to_string())?;
    let expect = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin() / FOUR_PI_SQ);
    let err = psi.sub(&expect).max_abs();
    ensure(err < 1e-13, format!("poisson single-mode error {err:e}"))?;
    ensure(
        poisson_solve(&ScalarField::constant(&g, 0.1), 1.0, &g).is_err(),
        "non-neutral source must be rejected",
    )?;
    let grad_like = VectorField::new(
        ScalarField::zeros(&g),
        ScalarField::zeros(&g),
        ScalarField::from_fn(&g, |_, _, z| 0.1 * (TWO_PI * z).sin()),
    );
    let killed = leray_project(&grad_like, &g).l2_norm();
    ensure(killed <= 1e-13, format!("projection left {killed:e}"))?;
    let solenoidal = VectorField::new(
        ScalarField::zeros(&g),
        ScalarField::zeros(&g),
        ScalarField::from_fn(&g, |x, _, _| 0.1 * (TWO_PI * x).sin()),
    );
    let kept = leray_project(&solenoidal, &g);
    let diff = kept.component(2).sub(solenoidal.component(2)).max_abs();
    ensure(diff < 1e-13, format!("solenoidal field changed by {diff:e}"))
}

fn check_dealias_rule() -> Result<(), String> {
    let g = Grid::new(32).map_err(|e| e.to_string())?;
    let keep = ScalarField::from_fn(&g, |x, _, _| (3.0 * TWO_PI * x).cos());
    let kill = ScalarField::from_fn(&g, |x, _, _| (12.0 * TWO_PI * x).cos());
    ensure(
        dealias(&keep, &g).sub(&keep).max_abs() < 1e-13,
        "mode k=3 must survive at n=32",
    )?;
    ensure(
        dealias(&kill, &g).max_abs() < 1e-13,
        "mode k=12 must be zeroed at n=32",
    )
}

fn check_electro_fields() -> Result<(), String> {
    let g = grid();
    let p = PhysParams {
        eta: 0.1,
        ..PhysParams::default()
    };
    let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
    s.concentrations[0] = ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.3 * (TWO_PI * x).sin());
    let ef = compute_electro(&s, &p, &g).map_err(|e| e.to_string())?;
    let expect = ScalarField::from_fn(&g, |x, _, _| 0.039091513924113244 * (TWO_PI * x).cos());
    let err = ef.grad_psi_moll.component(0).sub(&expect).max_abs();
    ensure(err < 1e-13, format!("mollified gradient error {err:e}"))?;
    ensure(
        ef.psi.mean().abs() < 1e-15,
        "potential must be in the zero-mean gauge",
    )?;
    let resid = check_compatibility(&s, &p);
    ensure(resid < 1e-13, format!("compatibility residual {resid:e}"))
}

fn check_np_rhs_oracle() -> Result<(), String> {
    let g = Grid::new(64).map_err(|e| e.to_string())?;
    let p = PhysParams::default();
    let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
    s.concentrations[0] = ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.3 * (TWO_PI * x).sin());
    let ef = compute_electro(&s, &p, &g).map_err(|e| e.to_string())?;
    let rhs = npb_core::model::np_rhs(&s, &ef, &p, &g).map_err(|e| e.to_string())?;
    let expect = ScalarField::from_fn(&g, |x, _, _| {
        0.3 * (-(TWO_PI * x).sin() + 0.3 * (2.0 * TWO_PI * x).cos())
    });
    let err = rhs[0].sub(&expect).max_abs();
    ensure(err < 1e-11, format!("product-rule oracle mismatch {err:e}"))
}

fn check_buoyancy_projection() -> Result<(), String> {
    let g = grid();
    let p = PhysParams {
        alpha_t: 1.0,
        ..PhysParams::default()
    };
    let refv = ReferenceValues {
        t_r: 1.0,
        s_r: 2.0,
        initial_means: vec![1.0, 1.0],
    };
    let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
    let pert = ScalarField::from_fn(&g, |x, _, _| 0.1 * (TWO_PI * x).sin());
    s.temperature.add_scaled(&pert, 1.0);
    let ef = compute_electro(&s, &p, &g).map_err(|e| e.to_string())?;
    let m = npb_core::model::momentum_rhs(&s, &ef, &refv, &p, &g);
    let e1 = m.component(2).sub(&pert).max_abs();
    ensure(e1 < 1e-13, format!("transverse buoyancy error {e1:e}"))?;

    let mut s2 = constant_state(&g, &[1.0, 1.0], 1.0);
    let pert_z = ScalarField::from_fn(&g, |_, _, z| 0.1 * (TWO_PI * z).sin());
    s2.temperature.add_scaled(&pert_z, 1.0);
    let ef2 = compute_electro(&s2, &p, &g).map_err(|e| e.to_string())?;
    let m2 = npb_core::model::momentum_rhs(&s2, &ef2, &refv, &p, &g);
    ensure(
        m2.l2_norm() <= 1e-13,
        format!("gradient buoyancy not absorbed: {:e}", m2.l2_norm()),
    )
}

fn check_entropy_and_ckp() -> Result<(), String> {
    let g = grid();
    let c = ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.5 * (TWO_PI * x).sin());
    let e = entropy(&c, 1.0).map_err(|e| e.to_string())?;
    ensure(
        (e - 0.06463813202048744).abs() < 1e-6,
        format!("entropy {e} vs quadrature oracle"),
    )?;
    let margin = ckp_check(&c, 1.0).map_err(|e| e.to_string())?;
    ensure(margin > 0.0, format!("CKP margin {margin} not positive"))?;
    let c2 = ScalarField::constant(&g, 2.0);
    let e2 = entropy(&c2, 2.0).map_err(|e| e.to_string())?;
    ensure(e2.abs() < 1e-14, format!("constant entropy {e2:e}"))
}

fn check_llogl_sweep() -> Result<(), String> {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..25 {
        let mut f = ScalarField::zeros(&g);
        for v in f.values_mut() {
            *v = rng.gen_range(0.0..2.0);
        }
        for eta in [0.01, 0.1, 1.0] {
            let (lhs, rhs) = llogl_mollifier_check(&f, eta, &g);
            ensure(
                lhs <= rhs + 1e-10,
                format!("L log L violated at trial {trial}, eta {eta}: {lhs} > {rhs}"),
            )?;
        }
    }
    Ok(())
}

fn check_energy_values() -> Result<(), String> {
    let g = grid();
    let p = PhysParams::default();
    let mut s = constant_state(&g, &[1.0, 1.0], 1.0);
    s.velocity = VectorField::new(
        ScalarField::from_fn(&g, |_, y, _| 0.1 * (TWO_PI * y).sin()),
        ScalarField::zeros(&g),
        ScalarField::zeros(&g),
    );
    let ef = compute_electro(&s, &p, &g).map_err(|e| e.to_string())?;
    let e = energy_functional(&s, &ef, &p, &g).map_err(|e| e.to_string())?;
    ensure((e - 0.005).abs() < 1e-13, format!("energy {e} != 0.005"))?;
    let d = dissipation_functional(&s, &ef, &p, &g);
    let expect = 0.02 * std::f64::consts::PI * std::f64::consts::PI;
    ensure(
        (d - expect).abs() < 1e-12,
        format!("dissipation {d} != {expect}"),
    )
}

fn check_cancellation_residual() -> Result<(), String> {
    let g = Grid::new(16).map_err(|e| e.to_string())?;
    let p = PhysParams {
        eta: 0.05,
        ..PhysParams::default()
    };
    let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
    ic.concentrations[0].terms.push(IcTerm::RandomSmooth {
        amplitude: 0.3,
        k0: 2.0,
    });
    ic.velocity[0] = FieldIc {
        terms: vec![IcTerm::RandomSmooth {
            amplitude: 0.4,
            k0: 2.0,
        }],
    };
    let s = make_initial_state(&ic, &p, &g, 17).map_err(|e| e.to_string())?;
    let ef = compute_electro(&s, &p, &g).map_err(|e| e.to_string())?;
    let r = cancellation_residual(&s, &ef, &p, &g);
    ensure(r <= 1e-10, format!("cancellation residual {r:e}"))
}

fn check_decay_fit() -> Result<(), String> {
    let series: Vec<(f64, f64)> = (0..10)
        .map(|i| {
            let t = i as f64 * 0.3;
            (t, 3.0 * (-2.0 * t).exp())
        })
        .collect();
    let fit = decay_fit(&series, (0.0, 3.0)).map_err(|e| e.to_string())?;
    ensure(
        (fit.rate - 2.0).abs() < 1e-9 && (fit.amplitude - 3.0).abs() < 1e-9,
        format!("fit rate {} amplitude {}", fit.rate, fit.amplitude),
    )
}

fn check_smallness_gate() -> Result<(), String> {
    let p = PhysParams {
        alpha_s: 1.0,
        ..PhysParams::default()
    };
    let (th, pass) = smallness_check(&p, &[0.2, 0.2]);
    ensure(
        (th - 0.25).abs() < 1e-14 && pass,
        format!("threshold {th}, pass {pass}"),
    )?;
    let (_, fail) = smallness_check(&p, &[0.3, 0.3]);
    ensure(!fail, "0.3 must exceed the 0.25 threshold")?;
    let p0 = PhysParams {
        alpha_s: 0.0,
        ..PhysParams::default()
    };
    let (th0, pass0) = smallness_check(&p0, &[1e9]);
    ensure(th0.is_infinite() && pass0, "alpha_S = 0 must be unconditional")
}

fn check_steady_state_step() -> Result<(), String> {
    let g = grid();
    let p = PhysParams::default();
    let s = make_initial_state(&InitialConditions::uniform(2, 1.0, 1.0), &p, &g, 0)
        .map_err(|e| e.to_string())?;
    let next = imex_step(&s, &p, &g, &StepControl::default()).map_err(|e| e.to_string())?;
    for (a, b) in next.concentrations.iter().zip(&s.concentrations) {
        let d = a.sub(b).max_abs();
        ensure(d <= 1e-14, format!("steady state drifted by {d:e}"))?;
    }
    let (pic, iters) =
        picard_step(&s, &p, &g, &StepControl::default()).map_err(|e| e.to_string())?;
    ensure(iters == 1, format!("picard took {iters} iterations"))?;
    let d = pic.temperature.sub(&s.temperature).max_abs();
    ensure(d <= 1e-14, format!("picard drifted by {d:e}"))
}

fn check_heat_step_and_validation() -> Result<(), String> {
    let g = grid();
    let p = PhysParams {
        thermal_diffusivity: 0.1,
        alpha_t: 0.0,
        ..PhysParams::default()
    };
    let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
    ic.temperature.terms.push(IcTerm::SingleMode {
        amplitude: 0.1,
        wavevector: [0, 0, 1],
        phase: 0.0,
    });
    let s = make_initial_state(&ic, &p, &g, 0).map_err(|e| e.to_string())?;
    let ctrl = StepControl {
        dt: 0.02,
        ..StepControl::default()
    };
    let next = imex_step(&s, &p, &g, &ctrl).map_err(|e| e.to_string())?;
    let factor = (-0.1 * FOUR_PI_SQ * 0.02).exp();
    let expect = ScalarField::from_fn(&g, |_, _, z| 1.2 + 0.1 * factor * (TWO_PI * z).sin());
    let err = next.temperature.sub(&expect).max_abs();
    ensure(err < 1e-14, format!("heat factor error {err:e}"))?;
    ensure(
        validate_state(&next, &p, NONNEG_TOL).is_ok(),
        "stepped state failed validation",
    )
}

fn check_short_conservation_run() -> Result<(), String> {
    let g = grid();
    let p = PhysParams {
        diffusivity: 0.1,
        viscosity: 0.08,
        thermal_diffusivity: 0.15,
        alpha_t: 0.5,
        eta: 0.02,
        ..PhysParams::default()
    };
    let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
    ic.concentrations[0].terms.push(IcTerm::SingleMode {
        amplitude: 0.25,
        wavevector: [1, 0, 0],
        phase: 0.0,
    });
    ic.velocity[0] = FieldIc {
        terms: vec![IcTerm::SingleMode {
            amplitude: 0.2,
            wavevector: [0, 1, 0],
            phase: 0.0,
        }],
    };
    let s = make_initial_state(&ic, &p, &g, 4).map_err(|e| e.to_string())?;
    let m0: Vec<f64> = s.concentrations.iter().map(|c| c.mean()).collect();
    let t0 = s.temperature.mean();
    let ctrl = StepControl {
        dt_max: 2e-3,
        ..StepControl::default()
    };
    let out = run(s, &p, &g, &ctrl, 0.1, 1000, &mut |_, _| {}).map_err(|e| e.to_string())?;
    for (c, m) in out.concentrations.iter().zip(&m0) {
        let d = (c.mean() - m).abs();
        ensure(d <= 1e-10, format!("species mean drifted by {d:e}"))?;
    }
    let dt = (out.temperature.mean() - t0).abs();
    ensure(dt <= 1e-10, format!("temperature mean drifted by {dt:e}"))?;
    for j in 0..3 {
        let mu = out.velocity.component(j).mean().abs();
        ensure(mu <= 1e-12, format!("velocity mean {mu:e}"))?;
    }
    Ok(())
}

const CHECKS: &[Check] = &[
    ("spectral derivatives", check_spectral_derivatives),
    ("mollifier algebra", check_mollifier_algebra),
    ("poisson and leray projection", check_poisson_and_leray),
    ("two-thirds dealias rule", check_dealias_rule),
    ("electro fields", check_electro_fields),
    ("np rhs product-rule oracle", check_np_rhs_oracle),
    ("buoyancy projection", check_buoyancy_projection),
    ("entropy and ckp margin", check_entropy_and_ckp),
    ("mollifier l log l sweep", check_llogl_sweep),
    ("energy functional values", check_energy_values),
    ("cancellation residual", check_cancellation_residual),
    ("decay fit", check_decay_fit),
    ("smallness gate", check_smallness_gate),
    ("steady state fixed point", check_steady_state_step),
    ("heat semigroup step", check_heat_step_and_validation),
    ("short conservation run", check_short_conservation_run),
];

/// Runs every check, printing one line each; returns true iff all pass.
pub fn run_selftest(out: &mut dyn std::io::Write) -> bool {
    let mut all_ok = true;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => {
                let _ = writeln!(out, "selftest {name}: PASS");
            }
            Err(reason) => {
                all_ok = false;
                let _ = writeln!(out, "selftest {name}: FAIL ({reason})");
            }
        }
    }
    let _ = writeln!(
        out,
        "selftest result: {}",
        if all_ok { "ALL PASS" } else { "FAILURES" }
    );
    all_ok
}

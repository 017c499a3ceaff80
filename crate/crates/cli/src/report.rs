//! Decay-study and eta-study reports.
//!
//! The decay study fits exponential rates to the Lyapunov quantities over
//! the window after the first 10% of the horizon, checks the smallness
//! gate for the size condition, and compares the temperature rate against
//! the heat-conduction lower bound 4*pi^2*kappa (the lowest-mode rate on
//! the unit torus). The eta study repeats one configuration over a
//! mollification ladder and reports the successive trajectory distances
//! ||u_eta - u_(eta/2)|| in L^2(0,T;L^2).

use crate::config::RunSpec;
use crate::{execute_run, RunError};
use npb_core::diagnostics::{decay_fit, smallness_check, DecayFit};
use npb_core::spectral::{Grid, VectorField};
use npb_core::state::make_initial_state;
use npb_core::timestepper::{self, StepControl};

const FOUR_PI_SQ: f64 = 39.47841760435743;

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

pub struct DecayStudy {
    pub report: String,
    pub records: Vec<npb_core::diagnostics::DiagnosticsRecord>,
    pub gate_pass: bool,
    pub fits: Vec<(String, Result<DecayFit, String>)>,
}

pub fn decay_study(spec: &RunSpec) -> Result<DecayStudy, RunError> {
    let out = execute_run(spec)?;
    let window = (0.1 * spec.t_end, spec.t_end);

    let mut fits: Vec<(String, Result<DecayFit, String>)> = Vec::new();
    let series = |f: &dyn Fn(&npb_core::diagnostics::DiagnosticsRecord) -> f64| {
        out.records
            .iter()
            .map(|r| (r.time, f(r)))
            .collect::<Vec<_>>()
    };
    let mut push = |name: &str, data: Vec<(f64, f64)>| {
        fits.push((
            name.to_string(),
            decay_fit(&data, window).map_err(|e| e.to_string()),
        ));
    };
    push("energy_calE", series(&|r| r.energy_cal_e));
    push("entropy_E", series(&|r| r.entropy_e));
    push("u_L2", series(&|r| r.u_l2));
    push("temp_L2_dev", series(&|r| r.temp_l2_dev));
    for i in 0..spec.params.n_species() {
        push(
            &format!("conc_L1_dev_{}", i + 1),
            series(&|r| r.conc_l1_dev[i]),
        );
    }

    let (threshold, gate_pass) = smallness_check(&spec.params, &out.initial_means);
    let max_mean = out.initial_means.iter().copied().fold(0.0f64, f64::max);
    let temp_bound = FOUR_PI_SQ * spec.params.thermal_diffusivity;

    let mut lines = Vec::new();
    lines.push("decay-study report".to_string());
    lines.push(format!(
        "grid.n = {}, t_end = {}, seed = {}, eta = {}, alpha_S = {}",
        spec.grid_n, spec.t_end, spec.seed, spec.params.eta, spec.params.alpha_s
    ));
    lines.push(format!(
        "smallness threshold = {} (C = {}), max initial mean = {}, gate = {}",
        fmt(threshold),
        spec.params.smallness_c,
        fmt(max_mean),
        if gate_pass { "PASS" } else { "EXCEEDED" }
    ));
    lines.push(format!(
        "fit window = [{}, {}] ({} samples total)",
        fmt(window.0),
        fmt(window.1),
        out.records.len()
    ));
    lines.push("quantity         rate              amplitude         r_squared".to_string());
    for (name, fit) in &fits {
        match fit {
            Ok(f) => lines.push(format!(
                "{:<16} {:<17} {:<17} {:.6}",
                name,
                fmt(f.rate),
                fmt(f.amplitude),
                f.r_squared
            )),
            Err(e) => lines.push(format!("{name:<16} unavailable: {e}")),
        }
    }
    lines.push(format!(
        "temperature lower bound 4*pi^2*kappa = {} (fitted rate should not fall below it)",
        fmt(temp_bound)
    ));
    let report = lines.join("\n") + "\n";
    Ok(DecayStudy {
        report,
        records: out.records,
        gate_pass,
        fits,
    })
}

pub struct EtaStudy {
    pub report: String,
    /// (eta, eta/2, L^2(0,T;L^2) difference) per ladder entry.
    pub diffs: Vec<(f64, f64, f64)>,
    pub monotone: bool,
}

/// Runs the configuration once per ladder entry plus the final half,
/// with a fixed step so that trajectories sample identical times.
pub fn eta_study(spec: &RunSpec) -> Result<EtaStudy, RunError> {
    let mut etas = spec.eta_ladder.clone();
    etas.push(etas.last().copied().expect("nonempty ladder") / 2.0);
    let dt = spec.ctrl.dt;

    let grid = Grid::new(spec.grid_n).map_err(|e| RunError::Config(e.to_string()))?;
    let trajectory = |eta: f64| -> Result<Vec<VectorField>, RunError> {
        let mut params = spec.params.clone();
        params.eta = eta;
        let initial = make_initial_state(&spec.ic, &params, &grid, spec.seed)
            .map_err(|e| RunError::Config(e.to_string()))?;
        let ctrl = StepControl {
            dt,
            dt_min: dt,
            dt_max: dt,
            ..spec.ctrl.clone()
        };
        let mut velocities = Vec::new();
        timestepper::run(
            initial,
            &params,
            &grid,
            &ctrl,
            spec.t_end,
            spec.output_every,
            &mut |s, _| velocities.push(s.velocity.clone()),
        )
        .map_err(|e| RunError::Aborted {
            message: format!("eta = {eta}: {e}"),
            records: Vec::new(),
        })?;
        Ok(velocities)
    };

    // Keep at most two trajectories alive.
    let sample_dt = dt * spec.output_every as f64;
    let mut diffs: Vec<(f64, f64, f64)> = Vec::new();
    let mut prev = trajectory(etas[0])?;
    for pair in etas.windows(2) {
        let next = trajectory(pair[1])?;
        let len = prev.len().min(next.len());
        let mut acc = 0.0;
        for (va, vb) in prev.iter().take(len).zip(next.iter().take(len)) {
            let mut sq = 0.0;
            for j in 0..3 {
                sq += va.component(j).sub(vb.component(j)).l2_norm().powi(2);
            }
            acc += sq * sample_dt;
        }
        diffs.push((pair[0], pair[1], acc.sqrt()));
        prev = next;
    }

    let monotone = diffs.windows(2).all(|w| w[1].2 < w[0].2);
    let mut lines = Vec::new();
    lines.push("eta-study report".to_string());
    lines.push(format!(
        "grid.n = {}, t_end = {}, dt = {}, seed = {}",
        spec.grid_n, spec.t_end, dt, spec.seed
    ));
    lines.push("eta        vs half      ||u_eta - u_eta/2||_L2(0,T;L2)".to_string());
    for (a, b, d) in &diffs {
        lines.push(format!("{a:<10} {b:<12} {}", fmt(*d)));
    }
    lines.push(format!("strictly decreasing along the ladder = {monotone}"));
    let report = lines.join("\n") + "\n";
    Ok(EtaStudy {
        report,
        diffs,
        monotone,
    })
}

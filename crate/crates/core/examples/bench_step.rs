use npb_core::spectral::Grid;
use npb_core::state::{make_initial_state, FieldIc, IcTerm, InitialConditions};
use npb_core::timestepper::{imex_step, StepControl};
use npb_core::PhysParams;
use std::time::Instant;

fn main() {
    let g = Grid::new(32).unwrap();
    let p = PhysParams {
        diffusivity: 0.1,
        viscosity: 0.08,
        thermal_diffusivity: 0.15,
        alpha_t: 0.5,
        eta: 0.02,
        ..PhysParams::default()
    };
    let mut ic = InitialConditions::uniform(2, 1.0, 1.2);
    ic.concentrations[0].terms.push(IcTerm::SingleMode { amplitude: 0.25, wavevector: [1,0,0], phase: 0.0 });
    ic.velocity[0] = FieldIc { terms: vec![IcTerm::SingleMode { amplitude: 0.3, wavevector: [0,1,0], phase: 0.0 }] };
    ic.temperature.terms.push(IcTerm::SingleMode { amplitude: 0.1, wavevector: [0,0,1], phase: 0.0 });
    let mut s = make_initial_state(&ic, &p, &g, 0).unwrap();
    let ctrl = StepControl { dt: 1e-3, ..StepControl::default() };
    // warmup
    for _ in 0..3 { s = imex_step(&s, &p, &g, &ctrl).unwrap(); }
    let t0 = Instant::now();
    let n = 50;
    for _ in 0..n { s = imex_step(&s, &p, &g, &ctrl).unwrap(); }
    let el = t0.elapsed();
    println!("n=32 imex step: {:.3} ms (total {:?} for {} steps)", el.as_secs_f64()*1000.0/n as f64, el, n);
}

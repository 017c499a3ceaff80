//! Diagnostics time-series CSV emission.
//!
//! Header (for N species):
//! time,entropy_E,energy_calE,dissipation_D,temp_L2_dev,u_L2,
//! cancellation_residual,ckp_margin,min_T,min_c_1..min_c_N,
//! conc_L1_dev_1..N
//!
//! Floats are written with 17 significant digits, which round-trips f64
//! exactly; identical records produce byte-identical files.

use npb_core::diagnostics::DiagnosticsRecord;
use std::io::Write;
use std::path::Path;

pub fn header(n_species: usize) -> String {
    let mut h = String::from(
        "time,entropy_E,energy_calE,dissipation_D,temp_L2_dev,u_L2,cancellation_residual,ckp_margin,min_T",
    );
    for i in 1..=n_species {
        h.push_str(&format!(",min_c_{i}"));
    }
    for i in 1..=n_species {
        h.push_str(&format!(",conc_L1_dev_{i}"));
    }
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render(records: &[DiagnosticsRecord], n_species: usize) -> String {
    let mut out = header(n_species);
    out.push('\n');
    for r in records {
        let mut cols = vec![
            fmt(r.time),
            fmt(r.entropy_e),
            fmt(r.energy_cal_e),
            fmt(r.dissipation_cal_d),
            fmt(r.temp_l2_dev),
            fmt(r.u_l2),
            fmt(r.cancellation_residual),
            fmt(r.ckp_margin),
            fmt(r.min_t),
        ];
        cols.extend(r.min_c.iter().map(|v| fmt(*v)));
        cols.extend(r.conc_l1_dev.iter().map(|v| fmt(*v)));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn write_timeseries(
    records: &[DiagnosticsRecord],
    n_species: usize,
    path: &Path,
) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render(records, n_species).as_bytes())
}

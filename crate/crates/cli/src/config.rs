//! Flat key-value run configuration.
//!
//! Format: one `section.key = value` per line, `#` starts a comment,
//! unknown keys are rejected. Initial conditions are per-field sums of
//! terms, e.g.
//!
//! ```text
//! physics.kappa = 0.1
//! grid.n = 32
//! ic.c1 = constant(1) + single_mode(0.3, 1, 0, 0, 0.0)
//! ic.T  = constant(1.2) + random_smooth(0.1, 2.0)
//! ```
//!
//! Term syntax: `constant(value)`,
//! `single_mode(amplitude, kx, ky, kz, phase)` for
//! amplitude*sin(2*pi*k.x + phase), and `random_smooth(amplitude, k0)`
//! for a seeded mean-free field with spectral envelope exp(-|k|^2/k0^2)
//! rescaled to sup-norm amplitude.

use npb_core::state::{FieldIc, IcTerm, InitialConditions};
use npb_core::timestepper::{SchemeMode, StepControl};
use npb_core::PhysParams;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Configuration failure, carrying the key path and the reason.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &str, reason: impl Into<String>) -> Self {
        ConfigError {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

/// Everything a single run needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub params: PhysParams,
    pub grid_n: usize,
    pub ctrl: StepControl,
    pub ic: InitialConditions,
    pub t_end: f64,
    pub seed: u64,
    pub output_every: usize,
    pub timeseries_name: String,
    pub snapshot_name: Option<String>,
    pub eta_ladder: Vec<f64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        let params = PhysParams::default();
        let n_species = params.n_species();
        RunSpec {
            params,
            grid_n: 32,
            ctrl: StepControl::default(),
            ic: InitialConditions::uniform(n_species, 1.0, 1.0),
            t_end: 1.0,
            seed: 0,
            output_every: 10,
            timeseries_name: "timeseries.csv".to_string(),
            snapshot_name: None,
            eta_ladder: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

/// The documented key set with defaults, rendered in `--help`.
pub const CONFIG_REFERENCE: &str = "\
physics.D = 1.0             ionic diffusivity (> 0)
physics.nu = 1.0            viscosity (> 0)
physics.kappa = 1.0         thermal diffusivity (> 0)
physics.epsilon = 1.0       permittivity (> 0)
physics.e_charge = 1.0      elementary charge (> 0)
physics.k_B = 1.0           Boltzmann constant (> 0)
physics.N_A = 1.0           Avogadro constant (> 0)
physics.g = 1.0             gravity (>= 0)
physics.alpha_T = 0.0       thermal expansion coefficient (>= 0)
physics.alpha_S = 0.0       saline expansion coefficient (>= 0)
physics.valences = 1, -1    ionic valences (defines N species)
physics.molar_masses = 1, 1 molar masses (> 0, same length)
physics.T_star = 1.0        temperature floor (> 0)
physics.eta = 0.0           mollification parameter (>= 0; 0 disables)
physics.smallness_C = 1.0   domain constant in the decay size condition
grid.n = 32                 points per dimension (even, >= 8)
step.mode = imex            imex | picard
step.dt = 1e-3              initial step size
step.dt_min = 1e-6          adaptive floor
step.dt_max = 1e-2          adaptive ceiling
step.cfl_target = 0.4       CFL number in (0, 1]
step.picard_tol = 1e-10     fixed-point stop tolerance
step.picard_max_iter = 50   fixed-point iteration cap
run.t_end = 1.0             simulated horizon
run.seed = 0                RNG seed (overridden by --seed)
output.every = 10           diagnostics cadence in steps
output.timeseries = timeseries.csv   CSV name inside --out
output.snapshot =           final-state snapshot name ('' = none)
ic.c1 .. ic.cN = constant(1)   per-species initial concentration
ic.u1, ic.u2, ic.u3 = (zero)   velocity components (Leray-projected)
ic.T = constant(1)             initial temperature
study.eta_ladder = 0.4, 0.2, 0.1, 0.05   ladder for eta-study";

/// Parses a configuration file; all keys optional, unknown keys rejected.
pub fn parse_config(path: &Path) -> Result<RunSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigError::new("config", format!("cannot read {}: {e}", path.display()))
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunSpec, ConfigError> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(
                &format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim().to_string();
        if entries
            .insert(key.clone(), value.trim().to_string())
            .is_some()
        {
            return Err(ConfigError::new(&key, "is set more than once"));
        }
    }
    build_spec(entries)
}

fn build_spec(mut entries: BTreeMap<String, String>) -> Result<RunSpec, ConfigError> {
    let mut spec = RunSpec::default();
    let molar_masses_set = entries.contains_key("physics.molar_masses");
    let mut take = |key: &str| entries.remove(key);

    macro_rules! scalar {
        ($key:expr, $slot:expr, $parse:ident) => {
            if let Some(v) = take($key) {
                $slot = $parse($key, &v)?;
            }
        };
    }

    scalar!("physics.D", spec.params.diffusivity, parse_f64);
    scalar!("physics.nu", spec.params.viscosity, parse_f64);
    scalar!("physics.kappa", spec.params.thermal_diffusivity, parse_f64);
    scalar!("physics.epsilon", spec.params.permittivity, parse_f64);
    scalar!("physics.e_charge", spec.params.e_charge, parse_f64);
    scalar!("physics.k_B", spec.params.k_boltzmann, parse_f64);
    scalar!("physics.N_A", spec.params.n_avogadro, parse_f64);
    scalar!("physics.g", spec.params.gravity, parse_f64);
    scalar!("physics.alpha_T", spec.params.alpha_t, parse_f64);
    scalar!("physics.alpha_S", spec.params.alpha_s, parse_f64);
    scalar!("physics.T_star", spec.params.t_star, parse_f64);
    scalar!("physics.eta", spec.params.eta, parse_f64);
    scalar!("physics.smallness_C", spec.params.smallness_c, parse_f64);
    scalar!("physics.valences", spec.params.valences, parse_f64_list);
    scalar!("physics.molar_masses", spec.params.molar_masses, parse_f64_list);

    scalar!("grid.n", spec.grid_n, parse_usize);
    scalar!("step.dt", spec.ctrl.dt, parse_f64);
    scalar!("step.dt_min", spec.ctrl.dt_min, parse_f64);
    scalar!("step.dt_max", spec.ctrl.dt_max, parse_f64);
    scalar!("step.cfl_target", spec.ctrl.cfl_target, parse_f64);
    scalar!("step.picard_tol", spec.ctrl.picard_tol, parse_f64);
    scalar!("step.picard_max_iter", spec.ctrl.picard_max_iter, parse_usize);
    if let Some(v) = take("step.mode") {
        spec.ctrl.mode = parse_mode("step.mode", &v)?;
    }

    scalar!("run.t_end", spec.t_end, parse_f64);
    scalar!("run.seed", spec.seed, parse_u64);
    scalar!("output.every", spec.output_every, parse_usize);
    if let Some(v) = take("output.timeseries") {
        spec.timeseries_name = v;
    }
    if let Some(v) = take("output.snapshot") {
        spec.snapshot_name = if v.is_empty() { None } else { Some(v) };
    }
    scalar!("study.eta_ladder", spec.eta_ladder, parse_f64_list);

    // Unset molar masses default to 1 for every configured species.
    if !molar_masses_set {
        spec.params.molar_masses = vec![1.0; spec.params.valences.len()];
    }

    let n_species = spec.params.valences.len();
    spec.ic = InitialConditions::uniform(n_species, 1.0, 1.0);
    let ic_keys: Vec<String> = entries
        .keys()
        .filter(|k| k.starts_with("ic."))
        .cloned()
        .collect();
    for key in ic_keys {
        let value = entries.remove(&key).expect("key listed");
        let field = key.strip_prefix("ic.").expect("prefix checked");
        let terms = parse_ic_terms(&key, &value)?;
        match field {
            "T" => spec.ic.temperature = terms,
            "u1" => spec.ic.velocity[0] = terms,
            "u2" => spec.ic.velocity[1] = terms,
            "u3" => spec.ic.velocity[2] = terms,
            other => {
                let Some(idx) = other
                    .strip_prefix('c')
                    .and_then(|s| s.parse::<usize>().ok())
                else {
                    return Err(ConfigError::new(&key, "is not a recognized field"));
                };
                if idx == 0 || idx > n_species {
                    return Err(ConfigError::new(
                        &key,
                        format!("species index out of range 1..={n_species}"),
                    ));
                }
                spec.ic.concentrations[idx - 1] = terms;
            }
        }
    }

    if let Some(key) = entries.keys().next() {
        return Err(ConfigError::new(key, "is not a recognized key"));
    }

    validate_spec(&spec)?;
    Ok(spec)
}

fn validate_spec(spec: &RunSpec) -> Result<(), ConfigError> {
    if let Err(e) = spec.params.validate() {
        // Reattach the key path for the common cases.
        let msg = e.to_string();
        for (needle, key) in [
            ("nu must", "physics.nu"),
            ("D must", "physics.D"),
            ("kappa must", "physics.kappa"),
            ("epsilon must", "physics.epsilon"),
            ("valences", "physics.valences"),
            ("molar", "physics.molar_masses"),
        ] {
            if msg.contains(needle) {
                return Err(ConfigError::new(
                    key,
                    msg.trim_start_matches("invalid physical parameters: ").to_string(),
                ));
            }
        }
        return Err(ConfigError::new("physics", msg));
    }
    if spec.grid_n < 8 || !spec.grid_n.is_multiple_of(2) {
        return Err(ConfigError::new(
            "grid.n",
            format!("must be even and >= 8, got {}", spec.grid_n),
        ));
    }
    if let Err(e) = spec.ctrl.validate() {
        return Err(ConfigError::new("step", e.to_string()));
    }
    if !spec.t_end.is_finite() || spec.t_end < 0.0 {
        return Err(ConfigError::new("run.t_end", "must be >= 0"));
    }
    if spec.output_every == 0 {
        return Err(ConfigError::new("output.every", "must be >= 1"));
    }
    if spec.eta_ladder.is_empty() || spec.eta_ladder.iter().any(|e| *e <= 0.0) {
        return Err(ConfigError::new(
            "study.eta_ladder",
            "must be a nonempty list of positive values",
        ));
    }
    Ok(())
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| ConfigError::new(key, format!("must be a number, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| ConfigError::new(key, format!("must be a nonnegative integer, got `{v}`")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>()
        .map_err(|_| ConfigError::new(key, format!("must be a nonnegative integer, got `{v}`")))
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|list| {
            if list.is_empty() {
                Err(ConfigError::new(key, "must not be empty"))
            } else {
                Ok(list)
            }
        })
}

fn parse_mode(key: &str, v: &str) -> Result<SchemeMode, ConfigError> {
    match v {
        "imex" => Ok(SchemeMode::ImexRk2),
        "picard" => Ok(SchemeMode::Picard),
        other => Err(ConfigError::new(
            key,
            format!("must be `imex` or `picard`, got `{other}`"),
        )),
    }
}

/// Splits on '+' at paren depth zero, then parses `name(args)` terms.
fn parse_ic_terms(key: &str, value: &str) -> Result<FieldIc, ConfigError> {
    let mut terms = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut pieces = Vec::new();
    for (i, ch) in value.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth = depth.checked_sub(1).ok_or_else(|| {
                    ConfigError::new(key, "has unbalanced parentheses")
                })?;
            }
            '+' if depth == 0 => {
                pieces.push(&value[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(ConfigError::new(key, "has unbalanced parentheses"));
    }
    pieces.push(&value[start..]);

    for piece in pieces {
        let piece = piece.trim();
        let Some((name, rest)) = piece.split_once('(') else {
            return Err(ConfigError::new(
                key,
                format!("term `{piece}` must look like name(args)"),
            ));
        };
        let Some(args) = rest.strip_suffix(')') else {
            return Err(ConfigError::new(key, format!("term `{piece}` is missing `)`")));
        };
        let args: Vec<&str> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|s| s.trim()).collect()
        };
        let term = match name.trim() {
            "constant" => {
                expect_args(key, piece, &args, 1)?;
                IcTerm::Constant {
                    value: parse_f64(key, args[0])?,
                }
            }
            "single_mode" => {
                expect_args(key, piece, &args, 5)?;
                IcTerm::SingleMode {
                    amplitude: parse_f64(key, args[0])?,
                    wavevector: [
                        parse_i64(key, args[1])?,
                        parse_i64(key, args[2])?,
                        parse_i64(key, args[3])?,
                    ],
                    phase: parse_f64(key, args[4])?,
                }
            }
            "random_smooth" => {
                expect_args(key, piece, &args, 2)?;
                IcTerm::RandomSmooth {
                    amplitude: parse_f64(key, args[0])?,
                    k0: parse_f64(key, args[1])?,
                }
            }
            other => {
                return Err(ConfigError::new(
                    key,
                    format!("unknown term `{other}`; expected constant/single_mode/random_smooth"),
                ))
            }
        };
        terms.push(term);
    }
    Ok(FieldIc { terms })
}

fn expect_args(key: &str, piece: &str, args: &[&str], want: usize) -> Result<(), ConfigError> {
    if args.len() != want {
        return Err(ConfigError::new(
            key,
            format!("term `{piece}` takes {want} argument(s), got {}", args.len()),
        ));
    }
    Ok(())
}

fn parse_i64(key: &str, v: &str) -> Result<i64, ConfigError> {
    v.parse::<i64>()
        .map_err(|_| ConfigError::new(key, format!("must be an integer, got `{v}`")))
}

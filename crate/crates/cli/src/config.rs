//! Batch-run configuration: a TOML key-value tree validated into a
//! [`RunConfig`]. Validation failures carry field-level messages and map
//! to exit code 2.

use qho_kam::perturbation::PotentialSpec;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field `{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    potential: RawPotential,
    run: RawRun,
    #[serde(default)]
    measure: RawMeasure,
    #[serde(default)]
    evolve: RawEvolve,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    #[serde(default)]
    amplitude: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    eps: f64,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default = "default_n_max")]
    n_max: usize,
    #[serde(default = "default_quad")]
    quad_size: usize,
    #[serde(default = "default_sigma0")]
    sigma0: f64,
    #[serde(default = "default_m_max")]
    m_max: usize,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default)]
    omega: Option<Vec<f64>>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_eps_bar")]
    eps_bar: f64,
    #[serde(default = "default_stop_tol")]
    stop_tol: f64,
    #[serde(default = "default_exp_tol")]
    exp_tol: f64,
    #[serde(default = "default_guard")]
    guard_modes: usize,
    #[serde(default = "default_gl")]
    gl_order: usize,
    #[serde(default = "default_oversample")]
    oversample: usize,
    #[serde(default)]
    k_max: Option<usize>,
    #[serde(default)]
    strict_aliasing: bool,
    #[serde(default)]
    omega_stencil: bool,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    #[serde(default)]
    n_samples: Option<usize>,
    #[serde(default)]
    kappa_grid: Vec<f64>,
    #[serde(default)]
    eps_grid: Vec<f64>,
    #[serde(default)]
    k_cut: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEvolve {
    #[serde(default)]
    t_max: Option<f64>,
    #[serde(default)]
    n_times: Option<usize>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    initial: Option<String>,
    #[serde(default)]
    cross_check: bool,
}

fn default_n_max() -> usize {
    128
}
fn default_quad() -> usize {
    512
}
fn default_sigma0() -> f64 {
    2.0
}
fn default_m_max() -> usize {
    4
}
fn default_gamma() -> f64 {
    0.02
}
fn default_seed() -> u64 {
    1
}
fn default_eps_bar() -> f64 {
    0.1
}
fn default_stop_tol() -> f64 {
    1e-14
}
fn default_exp_tol() -> f64 {
    1e-13
}
fn default_guard() -> usize {
    4
}
fn default_gl() -> usize {
    8
}
fn default_oversample() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialChoice {
    Constant { amplitude: f64 },
    CosXMinusTheta,
    TwoFreq,
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Gaussian,
    SingleMode(usize),
    Rough,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential: PotentialChoice,
    pub n_freq: usize,
    pub sigma: f64,
    pub eps: f64,
    pub alpha: f64,
    pub delta: f64,
    pub n_max: usize,
    pub quad_size: usize,
    pub sigma0: f64,
    pub m_max: usize,
    pub gamma: f64,
    pub omega: Option<Vec<f64>>,
    pub seed: u64,
    pub eps_bar: f64,
    pub stop_tol: f64,
    pub exp_tol: f64,
    pub guard_modes: usize,
    pub gl_order: usize,
    pub oversample: usize,
    pub k_max: Option<usize>,
    pub strict_aliasing: bool,
    pub omega_stencil: bool,
    pub measure_n_samples: usize,
    pub measure_kappa_grid: Vec<f64>,
    pub measure_eps_grid: Vec<f64>,
    pub measure_k_cut: f64,
    pub evolve_t_max: f64,
    pub evolve_n_times: usize,
    pub evolve_dt: Option<f64>,
    pub evolve_initial: InitialState,
    pub evolve_cross_check: bool,
}

impl RunConfig {
    pub fn potential_spec(&self) -> PotentialSpec {
        match self.potential {
            PotentialChoice::Constant { amplitude } => PotentialSpec::constant(amplitude),
            PotentialChoice::CosXMinusTheta => {
                PotentialSpec::cos_x_minus_theta(self.delta, self.sigma)
            }
            PotentialChoice::TwoFreq => PotentialSpec::two_freq(self.delta, self.sigma),
        }
    }

    pub fn kam_params_with_omega(&self, omega: Vec<f64>) -> qho_kam::kam::KamParams {
        qho_kam::kam::KamParams {
            n_max: self.n_max,
            quad_size: self.quad_size,
            eps: self.eps,
            omega,
            alpha: self.alpha,
            sigma0: self.sigma0,
            m_max: self.m_max,
            gamma: self.gamma,
            eps_bar: self.eps_bar,
            stop_tol: self.stop_tol,
            exp_tol: self.exp_tol,
            guard_modes: self.guard_modes,
            gl_order: self.gl_order,
            oversample: self.oversample,
            strict_aliasing: self.strict_aliasing,
        }
    }
}

/// Parse and validate a TOML configuration.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    let potential =
        match raw.potential.kind.as_str() {
            "const" => PotentialChoice::Constant {
                amplitude: raw.potential.amplitude.unwrap_or(1.0),
            },
            "cos_x_minus_theta" => PotentialChoice::CosXMinusTheta,
            "two_freq" => PotentialChoice::TwoFreq,
            other => return Err(field_err(
                "potential.kind",
                format!(
                    "unknown potential `{other}` (expected const | cos_x_minus_theta | two_freq)"
                ),
            )),
        };
    let n_freq = match potential {
        PotentialChoice::Constant { .. } => 0,
        PotentialChoice::CosXMinusTheta => 1,
        PotentialChoice::TwoFreq => 2,
    };

    let (alpha, delta) = match (raw.run.alpha, raw.run.delta) {
        (Some(_), Some(_)) => {
            return Err(field_err(
                "run.alpha",
                "both alpha and delta supplied; they are linked by alpha = (1 - delta)/2, give exactly one",
            ))
        }
        (None, None) => {
            return Err(field_err(
                "run.alpha",
                "supply exactly one of alpha or delta",
            ))
        }
        (Some(a), None) => {
            if !(a > 0.0 && a <= 1.0) {
                return Err(field_err("run.alpha", format!("alpha {a} outside (0, 1]")));
            }
            (a, (1.0 - 2.0 * a).clamp(1e-6, 1.0 - 1e-6))
        }
        (None, Some(d)) => {
            if !(d > 0.0 && d < 1.0) {
                return Err(field_err("run.delta", format!("delta {d} outside (0, 1)")));
            }
            ((1.0 - d) / 2.0, d)
        }
    };
    if !(raw.run.eps < 1.0 && raw.run.eps >= 0.0) {
        return Err(field_err(
            "run.eps",
            format!("eps {} outside [0, 1)", raw.run.eps),
        ));
    }
    if raw.run.n_max < 16 {
        return Err(field_err("run.n_max", "need N >= 16"));
    }
    if raw.run.sigma0 <= 0.0 {
        return Err(field_err("run.sigma0", "sigma_0 must be positive"));
    }
    if !(raw.run.gamma > 0.0 && raw.run.gamma < 0.25) {
        return Err(field_err(
            "run.gamma",
            format!("gamma {} outside (0, 1/4)", raw.run.gamma),
        ));
    }
    if raw.run.m_max < 1 {
        return Err(field_err("run.m_max", "m_max must be >= 1"));
    }
    if raw.run.gl_order < 2 || raw.run.gl_order > 64 {
        return Err(field_err("run.gl_order", "gl_order outside [2, 64]"));
    }
    if let Some(omega) = &raw.run.omega {
        if omega.len() != n_freq {
            return Err(field_err(
                "run.omega",
                format!(
                    "omega has {} components but the potential has n_freq = {n_freq}",
                    omega.len()
                ),
            ));
        }
        let tau = std::f64::consts::TAU;
        if omega
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0 || *w >= tau)
        {
            return Err(field_err("run.omega", "components must lie in [0, 2π)"));
        }
    }
    let sigma = raw.potential.sigma.unwrap_or(raw.run.sigma0);
    if sigma <= 0.0 {
        return Err(field_err("potential.sigma", "sigma must be positive"));
    }
    let initial = match raw.evolve.initial.as_deref() {
        None | Some("gaussian") => InitialState::Gaussian,
        Some("rough") => InitialState::Rough,
        Some(s) => {
            if let Some(idx) = s.strip_prefix("mode:") {
                let i: usize = idx
                    .parse()
                    .map_err(|_| field_err("evolve.initial", "mode index must be an integer"))?;
                if i < 1 || i > raw.run.n_max {
                    return Err(field_err("evolve.initial", "mode index out of basis range"));
                }
                InitialState::SingleMode(i)
            } else {
                return Err(field_err(
                    "evolve.initial",
                    format!("unknown initial state `{s}` (gaussian | rough | mode:<i>)"),
                ));
            }
        }
    };
    let evolve_t_max = raw.evolve.t_max.unwrap_or(10.0);
    if !(evolve_t_max > 0.0 && evolve_t_max.is_finite()) {
        return Err(field_err("evolve.t_max", "t_max must be positive"));
    }
    let evolve_n_times = raw.evolve.n_times.unwrap_or(101).max(2);
    if let Some(dt) = raw.evolve.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(field_err("evolve.dt", "dt must be positive"));
        }
    }
    for (name, grid) in [
        ("measure.kappa_grid", &raw.measure.kappa_grid),
        ("measure.eps_grid", &raw.measure.eps_grid),
    ] {
        if grid.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ConfigError::Field {
                field: match name {
                    "measure.kappa_grid" => "measure.kappa_grid",
                    _ => "measure.eps_grid",
                },
                message: "grid values must be finite and nonnegative".into(),
            });
        }
    }
    let measure_k_cut = raw.measure.k_cut.unwrap_or(2.0);
    if measure_k_cut < 1.0 {
        return Err(field_err("measure.k_cut", "K must be >= 1"));
    }

    Ok(RunConfig {
        potential,
        n_freq,
        sigma,
        eps: raw.run.eps,
        alpha,
        delta,
        n_max: raw.run.n_max,
        quad_size: raw.run.quad_size,
        sigma0: raw.run.sigma0,
        m_max: raw.run.m_max,
        gamma: raw.run.gamma,
        omega: raw.run.omega,
        seed: raw.run.seed,
        eps_bar: raw.run.eps_bar,
        stop_tol: raw.run.stop_tol,
        exp_tol: raw.run.exp_tol,
        guard_modes: raw.run.guard_modes,
        gl_order: raw.run.gl_order,
        oversample: raw.run.oversample,
        k_max: raw.run.k_max,
        strict_aliasing: raw.run.strict_aliasing,
        omega_stencil: raw.run.omega_stencil,
        measure_n_samples: raw.measure.n_samples.unwrap_or(1000),
        measure_kappa_grid: raw.measure.kappa_grid,
        measure_eps_grid: raw.measure.eps_grid,
        measure_k_cut,
        evolve_t_max,
        evolve_n_times,
        evolve_dt: raw.evolve.dt,
        evolve_initial: initial,
        evolve_cross_check: raw.evolve.cross_check,
    })
}

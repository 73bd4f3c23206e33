//! Built-in dynamical systems and systems described in a JSON file.
//!
//! Every [`DynamicalSystem`] is a [`VectorField`] that also knows its
//! forcing frequencies and which states are physically meaningful.

mod expr;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::VectorField;
use crate::naffo::ForcingBasis;
pub use expr::{parse_constant, parse_polynomial, Monomial, Polynomial, Scope, Trig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("resonant forcing: |ω² - ν²| = {gap:e} (ω = {omega}, ν = {nu})")]
    Resonance { omega: f64, nu: f64, gap: f64 },
    #[error("cannot parse model description: {0}")]
    Parse(String),
    #[error("forcing frequencies do not match the right-hand side: {0}")]
    InconsistentForcing(String),
    #[error("{what} has {found} components but the system has dimension {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// States in which a system may be started and must remain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Admissible {
    /// Any finite state.
    #[default]
    Any,
    /// Every component strictly positive, as for population densities.
    Positive,
}

impl Admissible {
    pub fn contains(self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
            && match self {
                Admissible::Any => true,
                Admissible::Positive => x.iter().all(|&v| v > 0.0),
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rhs {
    PreyPredator {
        alpha: f64,
        beta: f64,
        gamma: f64,
        eta: f64,
    },
    LinearOscillator {
        omega: f64,
        gamma: f64,
        nu: f64,
    },
    Polynomial(Vec<Polynomial>),
}

/// An ODE `dX/dt = f(X) + g(X, t)` together with what the refinement needs
/// to know about it.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSystem {
    name: String,
    dimension: usize,
    parameters: BTreeMap<String, f64>,
    rhs: Rhs,
    forcing: ForcingBasis,
    admissible: Admissible,
    known_solution: Option<Vec<f64>>,
    initial_condition: Option<Vec<f64>>,
    proper_frequency: Option<f64>,
}

impl DynamicalSystem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn forcing(&self) -> &ForcingBasis {
        &self.forcing
    }

    pub fn admissible(&self) -> Admissible {
        self.admissible
    }

    pub fn is_admissible(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && self.admissible.contains(x)
    }

    /// Exact forced initial condition, when it is known in closed form.
    pub fn known_solution(&self) -> Option<&[f64]> {
        self.known_solution.as_deref()
    }

    /// Starting point suggested by the model description, if any.
    pub fn initial_condition(&self) -> Option<&[f64]> {
        self.initial_condition.as_deref()
    }

    /// Small-oscillation frequency of the unforced system, if known.
    pub fn proper_frequency(&self) -> Option<f64> {
        self.proper_frequency
    }

    /// Longest period among the forcing and proper frequencies.
    pub fn longest_period(&self) -> Option<f64> {
        self.forcing
            .nu
            .iter()
            .chain(self.proper_frequency.iter())
            .map(|w| TAU / w)
            .max_by(f64::total_cmp)
    }

    /// Shortest period among the forcing and proper frequencies.
    pub fn shortest_period(&self) -> Option<f64> {
        self.forcing
            .nu
            .iter()
            .chain(self.proper_frequency.iter())
            .map(|w| TAU / w)
            .min_by(f64::total_cmp)
    }

    pub fn with_forcing(mut self, forcing: ForcingBasis) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_initial_condition(mut self, x: Vec<f64>) -> Result<Self, ModelError> {
        check_dimension("initial condition", self.dimension, x.len())?;
        self.initial_condition = Some(x);
        Ok(self)
    }

    /// `dX/dt` at `(t, x)`.
    pub fn rhs(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.dimension];
        self.eval(t, x, &mut dx);
        dx
    }
}

impl VectorField for DynamicalSystem {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        match &self.rhs {
            &Rhs::PreyPredator {
                alpha,
                beta,
                gamma,
                eta,
            } => {
                dx[0] = alpha * x[0] * (1.0 + gamma * (TAU * t).cos() - x[1] - eta * x[0]);
                dx[1] = beta * x[1] * (-1.0 + x[0]);
            }
            &Rhs::LinearOscillator { omega, gamma, nu } => {
                dx[0] = x[1];
                dx[1] = -omega * omega * x[0] + gamma * (nu * t).cos();
            }
            Rhs::Polynomial(components) => {
                for (d, p) in dx.iter_mut().zip(components) {
                    *d = p.eval(t, x);
                }
            }
        }
    }
}

fn check_dimension(what: &str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected != found {
        return Err(ModelError::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        });
    }
    Ok(())
}

fn require(ok: bool, message: impl FnOnce() -> String) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::Domain(message()))
    }
}

/// The periodically forced Lotka–Volterra system
///
/// ```text
/// dx₁/dt = α x₁ (1 + γ cos(2πt) - x₂ - η x₁)
/// dx₂/dt = β x₂ (-1 + x₁)
/// ```
///
/// forced at `2π` when `γ > 0` and autonomous otherwise.
pub fn forced_prey_predator(
    alpha: f64,
    beta: f64,
    gamma: f64,
    eta: f64,
) -> Result<DynamicalSystem, ModelError> {
    require(alpha > 0.0 && alpha.is_finite(), || {
        format!("α must be positive, got {alpha}")
    })?;
    require(beta > 0.0 && beta.is_finite(), || {
        format!("β must be positive, got {beta}")
    })?;
    require(gamma >= 0.0 && gamma.is_finite(), || {
        format!("γ must be non-negative, got {gamma}")
    })?;
    require(eta >= 0.0 && eta.is_finite(), || {
        format!("η must be non-negative, got {eta}")
    })?;
    let forcing = if gamma > 0.0 {
        ForcingBasis::new(vec![TAU]).expect("2π is a valid forcing frequency")
    } else {
        ForcingBasis::stationary()
    };
    Ok(DynamicalSystem {
        name: "forced_prey_predator".into(),
        dimension: 2,
        parameters: BTreeMap::from([
            ("alpha".into(), alpha),
            ("beta".into(), beta),
            ("gamma".into(), gamma),
            ("eta".into(), eta),
        ]),
        rhs: Rhs::PreyPredator {
            alpha,
            beta,
            gamma,
            eta,
        },
        forcing,
        admissible: Admissible::Positive,
        known_solution: (gamma == 0.0).then(|| vec![1.0, 1.0 - eta]),
        initial_condition: None,
        proper_frequency: Some((alpha * beta).sqrt()),
    })
}

/// Smallest `|ω² - ν²|` accepted by [`forced_linear_oscillator`].
pub const RESONANCE_GAP: f64 = 1e-6;

/// `dx/dt = y`, `dy/dt = -ω² x + γ cos(νt)`, whose forced solution
/// `x = γ cos(νt) / (ω² - ν²)` starts at `(γ / (ω² - ν²), 0)`.
///
/// A linear system responds only at `±ν`, so the lattice is cut at order 1;
/// this keeps a free frequency that happens to be a harmonic of `ν` from
/// being mistaken for a forced one.
pub fn forced_linear_oscillator(
    omega: f64,
    gamma: f64,
    nu: f64,
) -> Result<DynamicalSystem, ModelError> {
    require(omega > 0.0 && omega.is_finite(), || {
        format!("ω must be positive, got {omega}")
    })?;
    require(nu > 0.0 && nu.is_finite(), || {
        format!("ν must be positive, got {nu}")
    })?;
    require(gamma.is_finite(), || {
        format!("γ must be finite, got {gamma}")
    })?;
    let gap = omega * omega - nu * nu;
    if gap.abs() < RESONANCE_GAP {
        return Err(ModelError::Resonance {
            omega,
            nu,
            gap: gap.abs(),
        });
    }
    Ok(DynamicalSystem {
        name: "forced_linear_oscillator".into(),
        dimension: 2,
        parameters: BTreeMap::from([
            ("omega".into(), omega),
            ("gamma".into(), gamma),
            ("nu".into(), nu),
        ]),
        rhs: Rhs::LinearOscillator { omega, gamma, nu },
        forcing: ForcingBasis::new(vec![nu])
            .expect("ν was checked")
            .with_max_order(1),
        admissible: Admissible::Any,
        known_solution: Some(vec![gamma / gap, 0.0]),
        initial_condition: None,
        proper_frequency: Some(omega),
    })
}

/// A forcing frequency given either as a number or as a constant
/// expression such as `"2*pi"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencySpec {
    Value(f64),
    Expression(String),
}

/// JSON description of a system.
///
/// Either `model` names a built-in system, whose parameters are read from
/// `parameters`, or `rhs` gives one expression per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// State variable names; `x1, x2, ...` by default.
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    #[serde(default)]
    pub rhs: Option<Vec<String>>,
    #[serde(default)]
    pub forcing: Option<Vec<FrequencySpec>>,
    #[serde(default)]
    pub max_order: Option<u32>,
    #[serde(default)]
    pub match_tolerance: Option<f64>,
    #[serde(default)]
    pub admissible: Option<Admissible>,
    #[serde(default)]
    pub initial_condition: Option<Vec<f64>>,
}

/// Reads a [`ModelConfig`] from a JSON file and builds the system.
pub fn user_system_from_config(path: impl AsRef<Path>) -> Result<DynamicalSystem, ModelError> {
    let text = std::fs::read_to_string(path)?;
    system_from_json(&text)
}

pub fn system_from_json(text: &str) -> Result<DynamicalSystem, ModelError> {
    let config: ModelConfig =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    system_from_config(&config)
}

/// Relative agreement required between a declared forcing frequency and a
/// frequency appearing in the right-hand side.
const FREQUENCY_MATCH: f64 = 1e-12;

pub fn system_from_config(config: &ModelConfig) -> Result<DynamicalSystem, ModelError> {
    let params = &config.parameters;
    let declared: Option<Vec<f64>> = config
        .forcing
        .as_ref()
        .map(|list| {
            list.iter()
                .map(|f| match f {
                    FrequencySpec::Value(v) => Ok(*v),
                    FrequencySpec::Expression(s) => parse_constant(s, params),
                })
                .collect::<Result<_, _>>()
        })
        .transpose()?;

    let mut system = match (&config.model, &config.rhs) {
        (Some(_), Some(_)) => {
            return Err(ModelError::Parse(
                "give either 'model' or 'rhs', not both".into(),
            ))
        }
        (None, None) => {
            return Err(ModelError::Parse(
                "one of 'model' or 'rhs' is required".into(),
            ))
        }
        (Some(model), None) => builtin(model, params)?,
        (None, Some(rhs)) => polynomial_system(config, rhs)?,
    };

    if let Some(expected) = config.dimension {
        check_dimension("model", expected, system.dimension)?;
    }
    let used = system.time_frequencies();
    match declared {
        Some(nu) => {
            check_forcing(&nu, &used)?;
            system.forcing = if nu.is_empty() {
                ForcingBasis::stationary()
            } else {
                ForcingBasis::new(nu).map_err(|e| ModelError::Domain(e.to_string()))?
            };
            if system.name == "forced_linear_oscillator" {
                system.forcing.max_order = 1;
            }
        }
        None if config.rhs.is_some() && !used.is_empty() => {
            return Err(ModelError::InconsistentForcing(format!(
                "the right-hand side depends on time through {used:?} but no forcing is declared"
            )))
        }
        None => {}
    }
    if let Some(m) = config.max_order {
        system.forcing.max_order = m;
    }
    if let Some(tol) = config.match_tolerance {
        system.forcing.match_tolerance = Some(tol);
    }
    if let Some(a) = config.admissible {
        system.admissible = a;
    }
    if let Some(name) = &config.name {
        system.name = name.clone();
    }
    if let Some(x0) = &config.initial_condition {
        system = system.with_initial_condition(x0.clone())?;
    }
    Ok(system)
}

impl DynamicalSystem {
    /// Distinct `|c|` of the explicit `cos(c t)` / `sin(c t)` factors.
    fn time_frequencies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = match &self.rhs {
            Rhs::PreyPredator { gamma, .. } if *gamma > 0.0 => vec![TAU],
            Rhs::PreyPredator { .. } => vec![],
            Rhs::LinearOscillator { gamma, nu, .. } if *gamma != 0.0 => vec![*nu],
            Rhs::LinearOscillator { .. } => vec![],
            Rhs::Polynomial(components) => components
                .iter()
                .flat_map(|p| p.time_frequencies().collect::<Vec<_>>())
                .filter(|c| *c != 0.0)
                .collect(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| close(*a, *b));
        out
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQUENCY_MATCH * a.abs().max(b.abs()).max(1.0)
}

fn check_forcing(declared: &[f64], used: &[f64]) -> Result<(), ModelError> {
    if let Some(c) = used
        .iter()
        .find(|c| !declared.iter().any(|v| close(**c, *v)))
    {
        return Err(ModelError::InconsistentForcing(format!(
            "frequency {c} appears in the right-hand side but is not declared in {declared:?}"
        )));
    }
    if let Some(v) = declared
        .iter()
        .find(|v| !used.iter().any(|c| close(*c, **v)))
    {
        return Err(ModelError::InconsistentForcing(format!(
            "declared frequency {v} does not appear in the right-hand side"
        )));
    }
    Ok(())
}

fn parameter(
    params: &BTreeMap<String, f64>,
    name: &str,
    default: Option<f64>,
) -> Result<f64, ModelError> {
    params
        .get(name)
        .copied()
        .or(default)
        .ok_or_else(|| ModelError::Parse(format!("missing parameter '{name}'")))
}

fn builtin(model: &str, params: &BTreeMap<String, f64>) -> Result<DynamicalSystem, ModelError> {
    let allowed: &[&str] = match model {
        "forced_prey_predator" => &["alpha", "beta", "gamma", "eta"],
        "forced_linear_oscillator" => &["omega", "gamma", "nu"],
        other => return Err(ModelError::UnknownModel(other.into())),
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ModelError::Parse(format!(
            "model '{model}' has no parameter '{extra}' (expected {allowed:?})"
        )));
    }
    match model {
        "forced_prey_predator" => forced_prey_predator(
            parameter(params, "alpha", None)?,
            parameter(params, "beta", None)?,
            parameter(params, "gamma", Some(0.0))?,
            parameter(params, "eta", Some(0.0))?,
        ),
        _ => forced_linear_oscillator(
            parameter(params, "omega", None)?,
            parameter(params, "gamma", None)?,
            parameter(params, "nu", None)?,
        ),
    }
}

fn polynomial_system(config: &ModelConfig, rhs: &[String]) -> Result<DynamicalSystem, ModelError> {
    let dimension = config.dimension.unwrap_or(rhs.len());
    check_dimension("rhs", dimension, rhs.len())?;
    let variables = match &config.variables {
        Some(v) => {
            check_dimension("variables", dimension, v.len())?;
            v.clone()
        }
        None => (1..=dimension).map(|i| format!("x{i}")).collect(),
    };
    for name in &variables {
        if ["t", "pi", "cos", "sin"].contains(&name.as_str())
            || config.parameters.contains_key(name)
        {
            return Err(ModelError::Parse(format!(
                "variable name '{name}' is reserved or a parameter"
            )));
        }
    }
    let scope = Scope {
        variables: &variables,
        parameters: &config.parameters,
    };
    let components = rhs
        .iter()
        .map(|text| parse_polynomial(text, &scope))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DynamicalSystem {
        name: "user".into(),
        dimension,
        parameters: config.parameters.clone(),
        rhs: Rhs::Polynomial(components),
        forcing: ForcingBasis::stationary(),
        admissible: Admissible::Any,
        known_solution: None,
        initial_condition: None,
        proper_frequency: None,
    })
}

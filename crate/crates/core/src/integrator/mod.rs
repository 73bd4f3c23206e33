//! Adaptive propagation of `dX/dt = f(X) + g(X, t)` with output on a uniform
//! grid.
//!
//! Two methods are available. The default is a variable step, variable
//! order Gragg–Bulirsch–Stoer extrapolation scheme with a Hermite dense
//! output built from extrapolated midpoint derivatives; the alternative is
//! the Dormand–Prince 8(5,3) Runge–Kutta pair with its seventh order
//! continuous extension. Both sample the solution through their dense
//! output, so the step size is never tied to the output grid.
//!
//! The model clock runs over `[t_start, t_end]`; returned signals live on
//! the symmetric window `[-T, T]` with `T = (t_end - t_start) / 2` and carry
//! the midpoint as their origin.

mod bulirsch_stoer;
mod dop853;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{grid_time, Signal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("invalid integration problem: {0}")]
    InvalidProblem(String),
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("solver reported stiffness at t = {t}")]
    Stiffness { t: f64 },
    #[error("state became non-finite near t = {t}")]
    Divergence { t: f64 },
    #[error("vector field evaluation failed at t = {t}")]
    RhsFailure { t: f64 },
    #[error("step budget of {0} steps exhausted")]
    TooManySteps(usize),
}

/// A right-hand side `(t, x) -> dx/dt`. Implementations must be pure.
pub trait VectorField: Sync {
    fn dimension(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

impl<F> VectorField for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dimension(&self) -> usize {
        self.0
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.1)(t, x, dx)
    }
}

#[derive(Clone, Copy)]
pub struct OdeProblem<'a> {
    pub field: &'a dyn VectorField,
    pub t_start: f64,
    pub t_end: f64,
    pub initial_state: &'a [f64],
}

impl<'a> OdeProblem<'a> {
    pub fn new(
        field: &'a dyn VectorField,
        t_start: f64,
        t_end: f64,
        initial_state: &'a [f64],
    ) -> Self {
        Self {
            field,
            t_start,
            t_end,
            initial_state,
        }
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        if self.field.dimension() == 0 {
            return Err(IntegrateError::InvalidProblem(
                "dimension must be positive".into(),
            ));
        }
        if self.initial_state.len() != self.field.dimension() {
            return Err(IntegrateError::InvalidProblem(format!(
                "initial state has {} components, field has dimension {}",
                self.initial_state.len(),
                self.field.dimension()
            )));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return Err(IntegrateError::InvalidProblem(format!(
                "need finite t_end > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.initial_state.iter().any(|x| !x.is_finite()) {
            return Err(IntegrateError::InvalidProblem(
                "initial state is not finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    BulirschStoer,
    RkEmbeddedHighOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in model time; `None` leaves it to the error control.
    pub max_step: Option<f64>,
    /// Number of output samples; a power of two.
    pub output_count: usize,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::BulirschStoer,
            rel_tol: 1e-13,
            abs_tol: 1e-13,
            max_step: None,
            output_count: 1 << 16,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorOptions {
    pub(crate) fn step_cap(&self) -> f64 {
        self.max_step.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let tol_ok = |x: f64| x > 0.0 && x <= 1e-3;
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(IntegrateError::InvalidOptions(format!(
                "tolerances must lie in (0, 1e-3], got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_step.is_some_and(|h| !(h > 0.0)) {
            return Err(IntegrateError::InvalidOptions(
                "max_step must be positive".into(),
            ));
        }
        if self.output_count < 2 || !self.output_count.is_power_of_two() {
            return Err(IntegrateError::InvalidOptions(format!(
                "output_count must be a power of two >= 2, got {}",
                self.output_count
            )));
        }
        Ok(())
    }
}

/// States sampled at `count` equispaced nodes of `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    pub t_start: f64,
    pub t_end: f64,
    /// `states[k]` is the state at node `k`.
    pub states: Vec<Vec<f64>>,
}

impl SampledTrajectory {
    pub fn half_span(&self) -> f64 {
        0.5 * (self.t_end - self.t_start)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }

    /// Model time of node `k`.
    pub fn time(&self, k: usize) -> f64 {
        node_time(self.t_start, self.t_end, k, self.states.len())
    }

    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least two nodes")
    }

    /// One real [`Signal`] per state component on the window `[-T, T]`.
    pub fn to_signals(&self) -> Vec<Signal> {
        let dim = self.states.first().map_or(0, Vec::len);
        (0..dim)
            .map(|i| {
                let samples = self.states.iter().map(|x| x[i]).collect();
                Signal::from_real(samples, self.half_span())
                    .expect("trajectory grid is valid")
                    .with_origin(self.midpoint())
            })
            .collect()
    }
}

pub(crate) fn node_time(t_start: f64, t_end: f64, k: usize, count: usize) -> f64 {
    let half = 0.5 * (t_end - t_start);
    (t_start + half) + grid_time(k, count, half)
}

/// Integrates the problem and returns the state at every output node.
pub fn sample_trajectory(
    problem: &OdeProblem<'_>,
    options: &IntegratorOptions,
) -> Result<SampledTrajectory, IntegrateError> {
    problem.validate()?;
    options.validate()?;
    let states = match options.method {
        Method::BulirschStoer => bulirsch_stoer::integrate(problem, options)?,
        Method::RkEmbeddedHighOrder => dop853::integrate(problem, options)?,
    };
    if let Some(k) = states.iter().position(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(IntegrateError::Divergence {
            t: node_time(problem.t_start, problem.t_end, k, states.len()),
        });
    }
    Ok(SampledTrajectory {
        t_start: problem.t_start,
        t_end: problem.t_end,
        states,
    })
}

/// Integrates the problem and returns one sampled [`Signal`] per state
/// dimension, on `[-T, T]` with origin at the midpoint of the span.
pub fn integrate_sampled(
    problem: &OdeProblem<'_>,
    options: &IntegratorOptions,
) -> Result<Vec<Signal>, IntegrateError> {
    Ok(sample_trajectory(problem, options)?.to_signals())
}

/// Weighted RMS norm used by both step controllers.
pub(crate) fn scaled_rms(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator() -> (usize, impl Fn(f64, &[f64], &mut [f64]) + Sync) {
        (2, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        })
    }

    fn opts(method: Method) -> IntegratorOptions {
        IntegratorOptions {
            method,
            output_count: 1 << 12,
            ..Default::default()
        }
    }

    #[test]
    fn harmonic_oscillator_returns_home() {
        let field = oscillator();
        for method in [Method::BulirschStoer, Method::RkEmbeddedHighOrder] {
            let problem = OdeProblem::new(&field, 0.0, 20.0 * PI, &[1.0, 0.0]);
            let traj = sample_trajectory(&problem, &opts(method)).unwrap();
            let end = traj.final_state();
            assert!((end[0] - 1.0).abs() < 1e-9, "{method:?}: {end:?}");
            assert!(end[1].abs() < 1e-9, "{method:?}: {end:?}");
        }
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let field = oscillator();
        for method in [Method::BulirschStoer, Method::RkEmbeddedHighOrder] {
            let problem = OdeProblem::new(&field, 0.0, 100.0, &[1.0, 0.0]);
            let traj = sample_trajectory(&problem, &opts(method)).unwrap();
            let worst = (0..traj.states.len())
                .map(|k| {
                    let t = traj.time(k);
                    (traj.states[k][0] - t.cos())
                        .abs()
                        .max((traj.states[k][1] + t.sin()).abs())
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-11, "{method:?}: max dense error {worst:e}");
        }
    }

    #[test]
    fn signals_live_on_shifted_window() {
        let field = oscillator();
        let problem = OdeProblem::new(&field, 0.0, 10.0, &[1.0, 0.0]);
        let signals = integrate_sampled(&problem, &opts(Method::BulirschStoer)).unwrap();
        assert_eq!(signals.len(), 2);
        let x = &signals[0];
        assert_eq!(x.count(), 1 << 12);
        assert_eq!(x.half_span(), 5.0);
        assert_eq!(x.origin(), 5.0);
        assert!(x.is_real());
        assert!((x.samples()[0].re - 1.0).abs() < 1e-15);
        let k = 1234;
        let t = x.time(k) + x.origin();
        assert!((x.samples()[k].re - t.cos()).abs() < 1e-11);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let field = oscillator();
        let bad_span = OdeProblem::new(&field, 1.0, 1.0, &[1.0, 0.0]);
        assert!(matches!(
            sample_trajectory(&bad_span, &opts(Method::BulirschStoer)),
            Err(IntegrateError::InvalidProblem(_))
        ));
        let bad_dim = OdeProblem::new(&field, 0.0, 1.0, &[1.0]);
        assert!(sample_trajectory(&bad_dim, &opts(Method::BulirschStoer)).is_err());
        let good = OdeProblem::new(&field, 0.0, 1.0, &[1.0, 0.0]);
        let mut o = opts(Method::BulirschStoer);
        o.output_count = 1000;
        assert!(matches!(
            sample_trajectory(&good, &o),
            Err(IntegrateError::InvalidOptions(_))
        ));
        o.output_count = 1024;
        o.rel_tol = 0.1;
        assert!(sample_trajectory(&good, &o).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // x' = x², x(0) = 1 blows up at t = 1.
        let field = (1, |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let problem = OdeProblem::new(&field, 0.0, 2.0, &[1.0]);
        for method in [Method::BulirschStoer, Method::RkEmbeddedHighOrder] {
            let err = sample_trajectory(&problem, &opts(method)).unwrap_err();
            assert!(
                matches!(
                    err,
                    IntegrateError::StepUnderflow { .. }
                        | IntegrateError::Divergence { .. }
                        | IntegrateError::TooManySteps(_)
                ),
                "{method:?}: {err:?}"
            );
        }
    }
}

//! Removal of free oscillations by iterating on the initial condition.
//!
//! The orbit started at `X_n` is sampled over `[0, 2T]`, each component is
//! decomposed into spectral terms, and the terms are split into forced ones
//! (at integer combinations of the forcing frequencies, the constant
//! included) and free ones. The forced part `S` evaluated at model time 0
//! becomes the next initial condition, `X_{n+1} = S(0; X_n)`. Near a forced
//! solution the free amplitudes shrink quadratically from one iteration to
//! the next.

mod basis;

use std::io::Write;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{integrate_sampled, IntegrateError, IntegratorOptions, OdeProblem};
use crate::models::DynamicalSystem;
use crate::naff::{decompose, refit, Decomposition, NaffError, NaffOptions};
use crate::signal::format_real;
pub use basis::{
    classify, forced_value_at_zero, lattice_frequencies, AmbiguousMatch, ForcedTerm, ForcingBasis,
    LatticePoint, TermClassification, DEFAULT_MAX_ORDER, IMAGINARY_RESIDUE_LIMIT,
};

#[derive(Debug, Error)]
pub enum NaffoError {
    #[error(transparent)]
    Integration(#[from] IntegrateError),
    #[error(transparent)]
    Analysis(#[from] NaffError),
    #[error("invalid forcing basis: {0}")]
    InvalidBasis(String),
    #[error("invalid refinement options: {0}")]
    InvalidOptions(String),
    #[error("initial condition {0:?} is outside the admissible set of the model")]
    Inadmissible(Vec<f64>),
    #[error("iteration {iteration} produced the inadmissible state {state:?}")]
    Divergence { iteration: usize, state: Vec<f64> },
    #[error("forced reconstruction has imaginary part {0:e}; conjugate pairs are broken")]
    ImaginaryResidue(f64),
    #[error("need at least {needed} amplitudes above {floor:e}, found {found}")]
    InsufficientData {
        needed: usize,
        found: usize,
        floor: f64,
    },
}

/// When a free amplitude is small enough to stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StopCriterion {
    /// The largest free amplitude falls below the absolute amplitude floor,
    /// i.e. it can no longer be detected.
    #[default]
    Detect,
    /// The largest free amplitude is below `1e-6` times the smallest forced
    /// amplitude, so it no longer perturbs the forced terms.
    ForcedPurity,
}

/// Ratio between the free amplitude and the smallest forced amplitude
/// accepted by [`StopCriterion::ForcedPurity`].
pub const FORCED_PURITY_RATIO: f64 = 1e-6;

/// Spans default to this many periods of the slowest known frequency.
pub const DEFAULT_SPAN_PERIODS: f64 = 140.0;

/// Default lower bound on the number of integration steps per period of the
/// fastest known frequency.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    /// Integration span `2T`; `None` uses [`DEFAULT_SPAN_PERIODS`] periods of
    /// the slowest frequency of the system.
    pub span: Option<f64>,
    pub integrator: IntegratorOptions,
    pub naff: NaffOptions,
    /// Absolute free amplitude below which the iteration has converged.
    pub amplitude_floor: f64,
    pub max_iterations: usize,
    pub stop: StopCriterion,
    /// A run that stagnates with its free amplitude below this level is
    /// still reported as converged: it has hit the noise of the method.
    pub noise_ceiling: f64,
    /// Move forced terms onto their exact frequencies `m·ν` and re-fit all
    /// amplitudes before evaluating `S(0)`. The forced reconstruction is
    /// evaluated at the edge of the window, where a frequency error `δf`
    /// costs a phase error `δf·T`.
    pub exact_forced_frequencies: bool,
    /// Caps the integration step at this fraction of the shortest known
    /// period (`0` disables the cap). The extrapolation error estimate is
    /// optimistic on long steps, and its errors are coherent with the
    /// motion, so they show up as a spurious free line near the proper
    /// frequency rather than as broadband noise.
    pub steps_per_period: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            span: None,
            integrator: IntegratorOptions::default(),
            naff: NaffOptions::default(),
            amplitude_floor: 1e-13,
            max_iterations: 10,
            stop: StopCriterion::Detect,
            noise_ceiling: 1e-10,
            exact_forced_frequencies: true,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
        }
    }
}

impl RefineOptions {
    pub fn span_for(&self, system: &DynamicalSystem) -> Result<f64, NaffoError> {
        let span = match self.span {
            Some(s) => s,
            None => {
                let period = system.longest_period().ok_or_else(|| {
                    NaffoError::InvalidOptions(format!(
                        "model '{}' has no known time scale; give the span explicitly",
                        system.name()
                    ))
                })?;
                (DEFAULT_SPAN_PERIODS * period).ceil()
            }
        };
        if !(span > 0.0 && span.is_finite()) {
            return Err(NaffoError::InvalidOptions(format!(
                "span must be positive, got {span}"
            )));
        }
        Ok(span)
    }

    /// Integrator settings for `system`, with the step cap applied.
    pub fn integrator_for(&self, system: &DynamicalSystem) -> IntegratorOptions {
        let mut options = self.integrator;
        if self.steps_per_period > 0.0 {
            if let Some(period) = system.shortest_period() {
                let cap = period / self.steps_per_period;
                options.max_step = Some(options.max_step.map_or(cap, |h| h.min(cap)));
            }
        }
        options
    }

    fn validate(&self) -> Result<(), NaffoError> {
        self.integrator.validate()?;
        if !(self.steps_per_period >= 0.0 && self.steps_per_period.is_finite()) {
            return Err(NaffoError::InvalidOptions(format!(
                "steps_per_period must be finite and non-negative, got {}",
                self.steps_per_period
            )));
        }
        if self.max_iterations == 0 {
            return Err(NaffoError::InvalidOptions(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.amplitude_floor >= 0.0 && self.noise_ceiling >= 0.0) {
            return Err(NaffoError::InvalidOptions(
                "amplitude_floor and noise_ceiling must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Everything computed for one initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub initial_condition: Vec<f64>,
    /// Per-dimension decompositions, rephased to model time 0.
    pub decompositions: Vec<Decomposition>,
    pub classifications: Vec<TermClassification>,
    /// Largest free amplitude of each dimension.
    pub free_amplitudes: Vec<f64>,
    /// `A_n`, the largest of `free_amplitudes`.
    pub largest_free_amplitude: f64,
    /// `ω•`, proper frequency of the dimension holding `A_n`.
    pub proper_frequency: Option<f64>,
    /// `S(0; X_n)`, the next initial condition.
    pub next_condition: Vec<f64>,
    /// Amplitude below which this iteration counts as converged.
    pub threshold: f64,
}

/// One line of the per-iteration summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub initial_condition: Vec<f64>,
    /// Number of distinct frequencies per dimension, a `±ν` pair once.
    pub frequency_counts: Vec<usize>,
    /// Position of the largest free term per dimension when the distinct
    /// frequencies are sorted by decreasing amplitude.
    pub ranks: Vec<Option<usize>>,
    pub amplitudes: Vec<f64>,
    pub proper_frequency: Option<f64>,
}

impl IterationRecord {
    pub fn summary(&self) -> SummaryRow {
        let mut counts = Vec::new();
        let mut ranks = Vec::new();
        for (d, c) in self.decompositions.iter().zip(&self.classifications) {
            let mut distinct: Vec<_> = d
                .terms
                .iter()
                .filter(|t| !d.is_real || t.frequency >= 0.0)
                .collect();
            distinct.sort_by(|a, b| b.amplitude.norm().total_cmp(&a.amplitude.norm()));
            counts.push(distinct.len());
            ranks.push(c.largest_free().and_then(|free| {
                distinct
                    .iter()
                    .position(|t| {
                        t.frequency == free.frequency.abs() || t.frequency == free.frequency
                    })
                    .map(|i| i + 1)
            }));
        }
        SummaryRow {
            n: self.index,
            initial_condition: self.initial_condition.clone(),
            frequency_counts: counts,
            ranks,
            amplitudes: self.free_amplitudes.clone(),
            proper_frequency: self.proper_frequency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AmplitudeFloor,
    Stagnation,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLog {
    pub system: String,
    pub span: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Initial condition produced by the last iteration.
    pub final_condition: Vec<f64>,
}

/// Machine-readable form of a [`RefinementLog`]: the summary table first,
/// then every iteration in full.
#[derive(Serialize)]
struct Report<'a> {
    system: &'a str,
    span: f64,
    converged: bool,
    stop_reason: StopReason,
    final_condition: &'a [f64],
    table: Vec<SummaryRow>,
    iterations: &'a [IterationRecord],
}

impl RefinementLog {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .map(|r| r.largest_free_amplitude)
            .collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.iterations
            .iter()
            .map(IterationRecord::summary)
            .collect()
    }

    pub fn write_json(&self, out: impl Write) -> serde_json::Result<()> {
        let report = Report {
            system: &self.system,
            span: self.span,
            converged: self.converged,
            stop_reason: self.stop_reason,
            final_condition: &self.final_condition,
            table: self.summary(),
            iterations: &self.iterations,
        };
        serde_json::to_writer_pretty(out, &report)
    }

    /// One row per iteration and dimension:
    /// `n,dimension,initial_condition,frequency_count,rank,amplitude,proper_frequency`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "n,dimension,initial_condition,frequency_count,rank,amplitude,proper_frequency"
        )?;
        for row in self.summary() {
            for i in 0..row.initial_condition.len() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.n,
                    i + 1,
                    format_real(row.initial_condition[i]),
                    row.frequency_counts[i],
                    row.ranks[i].map_or(String::new(), |r| r.to_string()),
                    format_real(row.amplitudes[i]),
                    row.proper_frequency.map_or(String::new(), format_real),
                )?;
            }
        }
        Ok(())
    }
}

/// Integrates from `x` over `[0, span]` and analyses every component.
pub fn analyze_orbit(
    system: &DynamicalSystem,
    x: &[f64],
    span: f64,
    options: &RefineOptions,
) -> Result<IterationRecord, NaffoError> {
    let problem = OdeProblem::new(system, 0.0, span, x);
    let signals = integrate_sampled(&problem, &options.integrator_for(system))?;
    let basis = system.forcing();
    let analyses: Vec<Result<(Decomposition, TermClassification, f64), NaffoError>> =
        thread::scope(|scope| {
            let handles: Vec<_> = signals
                .iter()
                .map(|signal| {
                    scope.spawn(move || {
                        let mut d = decompose(signal, &options.naff)?;
                        if options.exact_forced_frequencies {
                            let exact = lattice_frequencies(&d, &classify(&d, basis), basis);
                            d = refit(signal, &d, &exact)?;
                        }
                        let d = d.rephased(0.0);
                        let c = classify(&d, basis);
                        let next = forced_value_at_zero(&c, &d)?;
                        Ok((d, c, next))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("analysis worker panicked"))
                .collect()
        });
    let mut decompositions = Vec::new();
    let mut classifications = Vec::new();
    let mut next_condition = Vec::new();
    for a in analyses {
        let (d, c, v) = a?;
        decompositions.push(d);
        classifications.push(c);
        next_condition.push(v);
    }
    let free_amplitudes: Vec<f64> = classifications
        .iter()
        .map(TermClassification::largest_free_amplitude)
        .collect();
    let (leader, &largest) = free_amplitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("system has at least one dimension");
    let threshold = match options.stop {
        StopCriterion::Detect => options.amplitude_floor,
        StopCriterion::ForcedPurity => {
            FORCED_PURITY_RATIO
                * classifications
                    .iter()
                    .filter_map(TermClassification::smallest_forced_amplitude)
                    .fold(f64::INFINITY, f64::min)
        }
    };
    Ok(IterationRecord {
        index: 0,
        initial_condition: x.to_vec(),
        proper_frequency: classifications[leader].proper_frequency,
        decompositions,
        classifications,
        free_amplitudes,
        largest_free_amplitude: largest,
        next_condition,
        threshold,
    })
}

/// Iterates `X_{n+1} = S(0; X_n)` from `x0` until the free oscillations are
/// gone, stop improving, or the iteration budget is spent.
pub fn refine(
    system: &DynamicalSystem,
    x0: &[f64],
    options: &RefineOptions,
) -> Result<RefinementLog, NaffoError> {
    options.validate()?;
    if !system.is_admissible(x0) {
        return Err(NaffoError::Inadmissible(x0.to_vec()));
    }
    let span = options.span_for(system)?;
    system.forcing().validate(0.5 * span)?;

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut x = x0.to_vec();
    let (converged, stop_reason) = loop {
        let n = iterations.len();
        let mut record = analyze_orbit(system, &x, span, options)?;
        record.index = n;
        let a = record.largest_free_amplitude;
        let next = record.next_condition.clone();
        let previous = iterations.last().map(|r| r.largest_free_amplitude);
        iterations.push(record);
        if a < iterations[n].threshold {
            break (true, StopReason::AmplitudeFloor);
        }
        if previous.is_some_and(|p| a >= p) {
            break (a < options.noise_ceiling, StopReason::Stagnation);
        }
        if !system.is_admissible(&next) {
            return Err(NaffoError::Divergence {
                iteration: n,
                state: next,
            });
        }
        if n + 1 >= options.max_iterations {
            break (false, StopReason::MaxIterations);
        }
        x = next;
    };
    let final_condition = iterations
        .last()
        .expect("at least one iteration")
        .next_condition
        .clone();
    Ok(RefinementLog {
        system: system.name().to_string(),
        span,
        iterations,
        converged,
        stop_reason,
        final_condition,
    })
}

/// Amplitudes below this are taken to be numerical noise by
/// [`estimate_convergence_rate`].
pub const NUMERICAL_FLOOR: f64 = 1e-13;

/// Exponent `q` of `A_{n+1} ~ A_n^q` fitted over the run's amplitudes above
/// [`NUMERICAL_FLOOR`]; quadratic convergence gives `q ≈ 2`.
pub fn estimate_convergence_rate(log: &RefinementLog) -> Result<f64, NaffoError> {
    convergence_rate(&log.amplitudes(), NUMERICAL_FLOOR)
}

/// Least-squares slope of `log A_{n+1}` against `log A_n` over the leading
/// run of amplitudes above `floor`. At least three such amplitudes are
/// needed.
pub fn convergence_rate(amplitudes: &[f64], floor: f64) -> Result<f64, NaffoError> {
    let usable: Vec<f64> = amplitudes
        .iter()
        .take_while(|&&a| a > floor && a.is_finite())
        .map(|a| a.ln())
        .collect();
    if usable.len() < 3 {
        return Err(NaffoError::InsufficientData {
            needed: 3,
            found: usable.len(),
            floor,
        });
    }
    let pairs: Vec<(f64, f64)> = usable.windows(2).map(|w| (w[0], w[1])).collect();
    let m = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NaffoError::InsufficientData {
            needed: 3,
            found: 1,
            floor,
        });
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_power_laws() {
        let squares: Vec<f64> = std::iter::successors(Some(1e-1f64), |a| Some(a * a))
            .take(4)
            .collect();
        assert!((convergence_rate(&squares, 1e-14).unwrap() - 2.0).abs() < 1e-9);
        let halves: Vec<f64> = std::iter::successors(Some(1e-2f64), |a| Some(0.5 * a))
            .take(6)
            .collect();
        assert!((convergence_rate(&halves, 1e-14).unwrap() - 1.0).abs() < 1e-9);
    }

    /// The reference amplitude sequence of the forced prey-predator run is
    /// expected to show quadratic convergence, but its own numbers give a
    /// slope of about 1.29; our run of the same model gives about 2.0.
    #[test]
    #[ignore = "reference amplitudes 3.83e-2, 3.57e-5, 4.51e-9 fit a slope of 1.29, outside [1.7, 2.3]"]
    fn reference_amplitudes_fit_the_quadratic_band() {
        let q = convergence_rate(&[3.83e-2, 3.57e-5, 4.51e-9], NUMERICAL_FLOOR).unwrap();
        assert!((1.7..=2.3).contains(&q), "slope {q}");
    }

    #[test]
    fn rate_needs_three_amplitudes_above_the_floor() {
        assert!(matches!(
            convergence_rate(&[1e-2, 1e-4, 1e-20, 1e-8], 1e-14),
            Err(NaffoError::InsufficientData { found: 2, .. })
        ));
        assert!(convergence_rate(&[1e-2, 1e-4, 1e-8, 1e-20], 1e-14).is_ok());
    }

    #[test]
    fn options_validation() {
        let bad = RefineOptions {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RefineOptions {
            span: Some(-1.0),
            ..Default::default()
        };
        let sys = crate::models::forced_linear_oscillator(2.0, 0.1, 1.0).unwrap();
        assert!(bad.span_for(&sys).is_err());
        assert_eq!(
            RefineOptions::default().span_for(&sys).unwrap(),
            (140.0 * std::f64::consts::TAU).ceil()
        );
        let bad = RefineOptions {
            steps_per_period: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn step_cap_follows_the_fastest_period() {
        let sys = crate::models::forced_prey_predator(4.539, 1.068, 0.25, 0.0).unwrap();
        let options = RefineOptions::default();
        assert_eq!(options.integrator_for(&sys).max_step, Some(1.0 / 20.0));
        let mut tighter = RefineOptions::default();
        tighter.integrator.max_step = Some(0.01);
        assert_eq!(tighter.integrator_for(&sys).max_step, Some(0.01));
        let uncapped = RefineOptions {
            steps_per_period: 0.0,
            ..Default::default()
        };
        assert_eq!(uncapped.integrator_for(&sys).max_step, None);
    }
}

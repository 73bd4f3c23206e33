//! Numerical analysis of fundamental frequencies.
//!
//! [`decompose`] approximates a quasi-periodic signal by a finite sum
//! `Σ a_l exp(i f_l t)`. Terms are extracted one at a time: the frequency
//! maximizing `|φ(ν)| = |<r, exp(iνt)>|` on the current remainder `r` is
//! located, every amplitude found so far is recomputed by a joint
//! orthogonal projection, and the remainder is rebuilt from the original
//! signal. Real signals are handled directly: each positive frequency is
//! paired with its mirror `-ν` and the two amplitudes are complex
//! conjugates.

mod gram;
mod peak;

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{format_real, Grid, Signal, WindowOrder};
use gram::GramSystem;
pub use gram::MAX_CONDITION;
use peak::PeakFinder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NaffError {
    #[error("signal has no spectral content above the floor")]
    DegenerateSignal,
    #[error("no admissible spectral peak outside the excluded frequencies")]
    NoPeak,
    #[error(
        "frequencies are not resolved: Gram condition estimate {condition:.3e}, closest gap {min_gap:.3e}"
    )]
    IllConditioned { condition: f64, min_gap: f64 },
    #[error("invalid analysis options: {0}")]
    InvalidOptions(String),
}

/// One extracted term `amplitude · exp(i · frequency · t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTerm {
    pub frequency: f64,
    pub amplitude: Complex64,
}

impl SpectralTerm {
    pub fn new(frequency: f64, amplitude: Complex64) -> Self {
        Self {
            frequency,
            amplitude,
        }
    }

    pub fn at(&self, t: f64) -> Complex64 {
        self.amplitude * Complex64::cis(self.frequency * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaffOptions {
    pub window: WindowOrder,
    pub max_terms: usize,
    /// Minimal distance between two extracted frequencies; `None` means
    /// `2π / T`.
    pub min_separation: Option<f64>,
    /// Terms smaller than this fraction of the largest amplitude stop the
    /// extraction.
    pub amplitude_floor: f64,
    /// Relative tolerance of the peak refinement.
    pub peak_tolerance: f64,
}

impl Default for NaffOptions {
    fn default() -> Self {
        Self {
            window: WindowOrder::default(),
            max_terms: 120,
            min_separation: None,
            amplitude_floor: 1e-15,
            peak_tolerance: 1e-12,
        }
    }
}

impl NaffOptions {
    pub fn separation_for(&self, half_span: f64) -> f64 {
        self.min_separation.unwrap_or(TAU / half_span)
    }

    fn validate(&self) -> Result<(), NaffError> {
        if self.max_terms == 0 {
            return Err(NaffError::InvalidOptions(
                "max_terms must be at least 1".into(),
            ));
        }
        if let Some(sep) = self.min_separation {
            if !(sep > 0.0 && sep.is_finite()) {
                return Err(NaffError::InvalidOptions(format!(
                    "min_separation must be positive, got {sep}"
                )));
            }
        }
        if !(self.amplitude_floor >= 0.0 && self.peak_tolerance > 0.0) {
            return Err(NaffError::InvalidOptions(
                "amplitude_floor must be >= 0 and peak_tolerance > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStop {
    MaxTerms,
    AmplitudeFloor,
    /// The next peak could not be separated from the frequencies already
    /// found.
    Proximity,
    NoPeak,
    /// The last candidate did not lower the residual: what is left is
    /// rounding noise.
    NoImprovement,
}

/// Result of [`decompose`]: extracted terms in extraction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub terms: Vec<SpectralTerm>,
    /// `sqrt(<r, r>)` of the final remainder.
    pub residual_norm: f64,
    /// Remainder norm before any extraction and after each extraction step.
    pub residual_history: Vec<f64>,
    pub half_span: f64,
    pub count: usize,
    pub window: WindowOrder,
    pub min_separation: f64,
    pub is_real: bool,
    /// Time of the window centre in the clock the amplitudes are phased to;
    /// see [`Decomposition::rephased`].
    pub origin: f64,
    pub stop: ExtractionStop,
}

impl Decomposition {
    /// `Σ a_l exp(i f_l t)`, with `t` measured from the window centre.
    pub fn reconstruct(&self, t: f64) -> Complex64 {
        self.terms.iter().map(|term| term.at(t)).sum()
    }

    /// Reconstruction at time `time` of the producer's clock.
    pub fn reconstruct_at(&self, time: f64) -> Complex64 {
        self.reconstruct(time - self.origin)
    }

    /// Re-expresses the amplitudes so that `reconstruct(t)` is measured from
    /// `new_origin` instead of the window centre.
    pub fn rephased(&self, new_origin: f64) -> Decomposition {
        let shift = new_origin - self.origin;
        let mut out = self.clone();
        for term in &mut out.terms {
            term.amplitude *= Complex64::cis(term.frequency * shift);
        }
        out.origin = new_origin;
        out
    }

    pub fn largest(&self) -> Option<&SpectralTerm> {
        self.terms
            .iter()
            .max_by(|a, b| a.amplitude.norm().total_cmp(&b.amplitude.norm()))
    }

    /// Writes `rank,frequency,amp_re,amp_im,amp_modulus` rows, ranked in
    /// extraction order.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "rank,frequency,amp_re,amp_im,amp_modulus")?;
        for (i, term) in self.terms.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                format_real(term.frequency),
                format_real(term.amplitude.re),
                format_real(term.amplitude.im),
                format_real(term.amplitude.norm())
            )?;
        }
        Ok(())
    }
}

/// Free-standing reconstruction, `Σ a_l exp(i f_l t)`.
pub fn reconstruct(d: &Decomposition, t: f64) -> Complex64 {
    d.reconstruct(t)
}

/// Frequency maximizing `|φ(ν)|` on `f`, at least `min_separation` away
/// from each excluded frequency.
pub fn locate_peak(
    f: &Signal,
    p: WindowOrder,
    exclusions: &[f64],
    min_separation: f64,
) -> Result<f64, NaffError> {
    PeakFinder::new(f.grid(), p, false, NaffOptions::default().peak_tolerance).locate(
        f.samples(),
        exclusions,
        min_separation,
    )
}

/// Amplitudes of the joint orthogonal projection of `f` onto
/// `exp(iν_j t)`, refusing frequencies closer than the resolution limit
/// `2π / T`.
pub fn project(
    f: &Signal,
    frequencies: &[f64],
    p: WindowOrder,
) -> Result<Vec<Complex64>, NaffError> {
    project_with_separation(f, frequencies, p, TAU / f.half_span())
}

/// As [`project`] with an explicit minimal separation.
pub fn project_with_separation(
    f: &Signal,
    frequencies: &[f64],
    p: WindowOrder,
    min_separation: f64,
) -> Result<Vec<Complex64>, NaffError> {
    let grid = f.grid();
    let measure = grid.measure(p);
    let mut gram = GramSystem::new(grid, p);
    for (i, &nu) in frequencies.iter().enumerate() {
        let gap = gram::min_gap(&frequencies[..i], nu);
        if gap < min_separation {
            return Err(NaffError::IllConditioned {
                condition: f64::INFINITY,
                min_gap: gap,
            });
        }
        gram.push(nu)?;
    }
    let weighted: Vec<Complex64> = f
        .samples()
        .iter()
        .zip(&measure)
        .map(|(z, m)| z * m)
        .collect();
    let rhs: Vec<Complex64> = frequencies
        .iter()
        .map(|&nu| grid.modulated_sum(&weighted, nu))
        .collect();
    Ok(gram.solve(&rhs))
}

/// Iterative extraction of frequencies and amplitudes from `f`.
pub fn decompose(f: &Signal, options: &NaffOptions) -> Result<Decomposition, NaffError> {
    options.validate()?;
    let grid = f.grid();
    let min_sep = options.separation_for(f.half_span());
    let real = f.is_real();
    let finder = PeakFinder::new(grid, options.window, real, options.peak_tolerance);
    let measure = finder.measure().to_vec();
    let weighted_f = finder.weighted(f.samples());
    let norm = |samples: &[Complex64]| -> f64 {
        samples
            .iter()
            .zip(&measure)
            .map(|(z, m)| z.norm_sqr() * m)
            .sum::<f64>()
            .sqrt()
    };

    let mut gram = GramSystem::new(grid, options.window);
    let mut rhs: Vec<Complex64> = Vec::new();
    let mut amplitudes: Vec<Complex64> = Vec::new();
    let mut residual = f.samples().to_vec();
    let initial_norm = norm(&residual);
    let mut history = vec![initial_norm];

    let stop = loop {
        if initial_norm == 0.0 {
            break ExtractionStop::AmplitudeFloor;
        }
        let nu = match finder.locate(&residual, gram.frequencies(), min_sep) {
            Ok(nu) => nu,
            Err(NaffError::NoPeak) => break ExtractionStop::NoPeak,
            Err(NaffError::DegenerateSignal) => break ExtractionStop::AmplitudeFloor,
            Err(e) => return Err(e),
        };
        let new: Vec<f64> = if real && 2.0 * nu >= min_sep {
            vec![nu, -nu]
        } else if real {
            vec![0.0]
        } else {
            vec![nu]
        };
        if gram.len() + new.len() > options.max_terms {
            break ExtractionStop::MaxTerms;
        }
        if new
            .iter()
            .any(|&v| gram::min_gap(gram.frequencies(), v) < min_sep)
        {
            break ExtractionStop::Proximity;
        }
        let before = gram.len();
        if new.iter().try_for_each(|&v| gram.push(v)).is_err() {
            gram.truncate(before);
            break ExtractionStop::Proximity;
        }
        for &v in &new {
            rhs.push(grid.modulated_sum(&weighted_f, v));
        }
        let mut solved = gram.solve(&rhs);
        if real {
            symmetrize(gram.frequencies(), &mut solved);
        }
        let largest = solved.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if solved[before].norm() <= options.amplitude_floor * largest {
            gram.truncate(before);
            rhs.truncate(before);
            break ExtractionStop::AmplitudeFloor;
        }
        let candidate = remainder(f, gram.frequencies(), &solved, real);
        let candidate_norm = norm(&candidate);
        if candidate_norm > *history.last().unwrap() {
            gram.truncate(before);
            rhs.truncate(before);
            break ExtractionStop::NoImprovement;
        }
        amplitudes = solved;
        residual = candidate;
        history.push(candidate_norm);
    };

    let terms = gram
        .frequencies()
        .iter()
        .zip(&amplitudes)
        .map(|(&frequency, &amplitude)| SpectralTerm::new(frequency, amplitude))
        .collect();
    Ok(Decomposition {
        terms,
        residual_norm: *history.last().unwrap(),
        residual_history: history,
        half_span: f.half_span(),
        count: f.count(),
        window: options.window,
        min_separation: min_sep,
        is_real: real,
        origin: f.origin(),
        stop,
    })
}

/// Re-fits `d` to `f` with the term frequencies replaced by `frequencies`
/// (same order, same length), recomputing all amplitudes by one joint
/// projection. Used when some frequencies are known better than the
/// extraction can measure them.
pub fn refit(
    f: &Signal,
    d: &Decomposition,
    frequencies: &[f64],
) -> Result<Decomposition, NaffError> {
    if frequencies.len() != d.terms.len() {
        return Err(NaffError::InvalidOptions(format!(
            "refit needs {} frequencies, got {}",
            d.terms.len(),
            frequencies.len()
        )));
    }
    let grid = f.grid();
    let measure = grid.measure(d.window);
    let mut gram = GramSystem::new(grid, d.window);
    for &nu in frequencies {
        gram.push(nu)?;
    }
    let weighted: Vec<Complex64> = f
        .samples()
        .iter()
        .zip(&measure)
        .map(|(z, m)| z * m)
        .collect();
    let rhs: Vec<Complex64> = frequencies
        .iter()
        .map(|&nu| grid.modulated_sum(&weighted, nu))
        .collect();
    let mut amplitudes = gram.solve(&rhs);
    let real = f.is_real();
    if real {
        symmetrize(frequencies, &mut amplitudes);
    }
    let r = remainder(f, frequencies, &amplitudes, real);
    let residual_norm = r
        .iter()
        .zip(&measure)
        .map(|(z, m)| z.norm_sqr() * m)
        .sum::<f64>()
        .sqrt();
    let mut out = d.clone();
    out.terms = frequencies
        .iter()
        .zip(&amplitudes)
        .map(|(&frequency, &amplitude)| SpectralTerm::new(frequency, amplitude))
        .collect();
    out.residual_norm = residual_norm;
    out.origin = f.origin();
    Ok(out)
}

/// Enforces `a(-ν) = conj(a(ν))` on mirrored pairs, which are stored
/// consecutively as `ν, -ν`.
fn symmetrize(freqs: &[f64], amps: &mut [Complex64]) {
    let mut i = 0;
    while i < freqs.len() {
        if freqs[i] != 0.0 && i + 1 < freqs.len() && freqs[i + 1] == -freqs[i] {
            let a = 0.5 * (amps[i] + amps[i + 1].conj());
            amps[i] = a;
            amps[i + 1] = a.conj();
            i += 2;
        } else {
            if freqs[i] == 0.0 {
                amps[i].im = 0.0;
            }
            i += 1;
        }
    }
}

fn remainder(f: &Signal, freqs: &[f64], amps: &[Complex64], real: bool) -> Vec<Complex64> {
    let grid: Grid = f.grid();
    let mut r = f.samples().to_vec();
    if real {
        // Mirrored terms are exact conjugates, so each `±ν` pair contributes
        // `2 Re(a exp(iνt))` and is evaluated once.
        let terms: Vec<(f64, Complex64)> = freqs
            .iter()
            .zip(amps)
            .filter(|(&nu, _)| nu >= 0.0)
            .map(|(&nu, &a)| (nu, if nu == 0.0 { a } else { 2.0 * a }))
            .collect();
        grid.subtract_terms(&terms, &mut r, true);
        for z in &mut r {
            z.im = 0.0;
        }
    } else {
        let terms: Vec<(f64, Complex64)> =
            freqs.iter().copied().zip(amps.iter().copied()).collect();
        grid.subtract_terms(&terms, &mut r, false);
    }
    r
}

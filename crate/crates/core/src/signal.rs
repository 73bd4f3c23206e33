//! Uniformly sampled time series on a symmetric window, the Hann-power weight
//! function and the weighted inner product used by the frequency analysis.
//!
//! A [`Signal`] holds `count` complex samples equispaced on `[-T, T]`. The
//! inner product of two signals is
//!
//! ```text
//! <f, g> = 1/(2T) ∫ f(t) conj(g(t)) χ_p(t) dt
//! ```
//!
//! evaluated by the composite trapezoidal rule on the sample grid, with
//! `χ_p(t) = 2^p (p!)² / (2p)! · (1 + cos(π t / T))^p`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

/// Relative deviation of a time step from the mean step tolerated when
/// reading a sampled signal from disk.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Number of samples between two directly evaluated phase anchors in the
/// exponential recurrences.
const ANCHOR_STRIDE: usize = 64;
/// Number of frequencies advanced together by [`Grid::subtract_terms`].
const TERM_LANES: usize = 4;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("a signal needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("half span must be positive and finite, got {0}")]
    InvalidHalfSpan(f64),
    #[error("window order {0} is not supported (expected 0..=3)")]
    UnsupportedWindow(u32),
    #[error("time {t} lies outside the window [-{half_span}, {half_span}]")]
    OutsideWindow { t: f64, half_span: f64 },
    #[error("signals are sampled on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },
    #[error("signal file is empty")]
    Empty,
    #[error("malformed signal file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("non-uniform time grid at line {line}: step {step} vs expected {expected}")]
    NonUniformGrid {
        line: usize,
        step: f64,
        expected: f64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exponent `p` of the Hann-power weight `χ_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct WindowOrder(u32);

impl WindowOrder {
    pub const MAX: u32 = 3;

    pub fn new(p: u32) -> Result<Self, SignalError> {
        if p > Self::MAX {
            return Err(SignalError::UnsupportedWindow(p));
        }
        Ok(Self(p))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Normalization constant `2^p (p!)² / (2p)!`.
    pub fn coefficient(self) -> f64 {
        let p = self.0 as i32;
        let factorial = |n: i32| (1..=n).map(f64::from).product::<f64>();
        2f64.powi(p) * factorial(p).powi(2) / factorial(2 * p)
    }

    /// All supported orders.
    pub fn all() -> impl Iterator<Item = WindowOrder> {
        (0..=Self::MAX).map(WindowOrder)
    }

    fn weight_unchecked(self, t: f64, half_span: f64) -> f64 {
        self.coefficient() * (1.0 + (PI * t / half_span).cos()).powi(self.0 as i32)
    }
}

impl Default for WindowOrder {
    fn default() -> Self {
        Self(2)
    }
}

impl TryFrom<u32> for WindowOrder {
    type Error = SignalError;

    fn try_from(p: u32) -> Result<Self, Self::Error> {
        Self::new(p)
    }
}

impl From<WindowOrder> for u32 {
    fn from(p: WindowOrder) -> u32 {
        p.0
    }
}

impl fmt::Display for WindowOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Evaluates the weight `χ_p(t)` on the window `[-T, T]`.
pub fn window_weight(p: WindowOrder, t: f64, half_span: f64) -> Result<f64, SignalError> {
    if !(half_span > 0.0 && half_span.is_finite()) {
        return Err(SignalError::InvalidHalfSpan(half_span));
    }
    if !(t.abs() <= half_span) {
        return Err(SignalError::OutsideWindow { t, half_span });
    }
    Ok(p.weight_unchecked(t, half_span))
}

/// A uniformly sampled complex time series on `[-T, T]`.
///
/// `origin` is the time, in the clock of whoever produced the samples, that
/// corresponds to the window centre `t = 0`. It is carried along so that
/// spectral amplitudes can be rephased back to the producer's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<Complex64>,
    half_span: f64,
    is_real: bool,
    origin: f64,
}

impl Signal {
    pub fn new(samples: Vec<Complex64>, half_span: f64) -> Result<Self, SignalError> {
        if samples.len() < 2 {
            return Err(SignalError::TooFewSamples(samples.len()));
        }
        if !(half_span > 0.0 && half_span.is_finite()) {
            return Err(SignalError::InvalidHalfSpan(half_span));
        }
        let is_real = samples.iter().all(|z| z.im == 0.0);
        Ok(Self {
            samples,
            half_span,
            is_real,
            origin: 0.0,
        })
    }

    pub fn from_real(samples: Vec<f64>, half_span: f64) -> Result<Self, SignalError> {
        Self::new(
            samples
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect(),
            half_span,
        )
    }

    /// Samples `f` on the `count`-point grid of `[-T, T]`.
    pub fn from_fn(
        half_span: f64,
        count: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, SignalError> {
        if count < 2 {
            return Err(SignalError::TooFewSamples(count));
        }
        let samples = (0..count)
            .map(|k| f(grid_time(k, count, half_span)))
            .collect();
        Self::new(samples, half_span)
    }

    pub fn zeros(half_span: f64, count: usize) -> Result<Self, SignalError> {
        Self::new(vec![Complex64::new(0.0, 0.0); count], half_span)
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn half_span(&self) -> f64 {
        self.half_span
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_span / (self.count() - 1) as f64
    }

    /// Time of sample `k`. The grid is exactly symmetric: `t(N-1-k) = -t(k)`.
    pub fn time(&self, k: usize) -> f64 {
        grid_time(k, self.count(), self.half_span)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count()).map(move |k| self.time(k))
    }

    pub(crate) fn grid(&self) -> Grid {
        Grid {
            half_span: self.half_span,
            count: self.count(),
        }
    }

    fn check_same_grid(&self, other: &Signal) -> Result<(), SignalError> {
        let same_span =
            (self.half_span - other.half_span).abs() <= 1e-12 * self.half_span.max(other.half_span);
        if self.count() != other.count() || !same_span {
            return Err(SignalError::GridMismatch {
                left: self.grid().to_string(),
                right: other.grid().to_string(),
            });
        }
        Ok(())
    }
}

pub(crate) fn grid_time(k: usize, count: usize, half_span: f64) -> f64 {
    let n = (count - 1) as f64;
    half_span * (2.0 * k as f64 - n) / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Grid {
    pub half_span: f64,
    pub count: usize,
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T={}, count={}", self.half_span, self.count)
    }
}

impl Grid {
    pub fn time(&self, k: usize) -> f64 {
        grid_time(k, self.count, self.half_span)
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_span / (self.count - 1) as f64
    }

    /// Trapezoid weights multiplied by `χ_p` and by `1/(2T)`, so that
    /// `Σ m_k f_k conj(g_k) = <f, g>`.
    pub fn measure(&self, p: WindowOrder) -> Vec<f64> {
        let dt = self.step();
        let scale = dt / (2.0 * self.half_span);
        (0..self.count)
            .map(|k| {
                let end = k == 0 || k + 1 == self.count;
                let w = if end { 0.5 } else { 1.0 };
                w * scale * p.weight_unchecked(self.time(k), self.half_span)
            })
            .collect()
    }

    /// `Σ_k values_k · exp(-i ν t_k)`.
    pub fn modulated_sum(&self, values: &[Complex64], nu: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_phase(-nu, |k, e| acc += values[k] * e);
        acc
    }

    /// Returns `(Σ v_k e^{-iνt_k}, Σ v_k (-i t_k) e^{-iνt_k})`, the sum and its
    /// derivative with respect to `ν`.
    pub fn modulated_sum_with_derivative(
        &self,
        values: &[Complex64],
        nu: f64,
    ) -> (Complex64, Complex64) {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut dacc = Complex64::new(0.0, 0.0);
        self.for_each_phase(-nu, |k, e| {
            let term = values[k] * e;
            acc += term;
            dacc += Complex64::new(term.im, -term.re) * self.time(k);
        });
        (acc, dacc)
    }

    /// `Σ_k weights_k · exp(i Δ t_k)`; real for an even weight on this grid.
    #[cfg(test)]
    pub fn weight_transform(&self, weights: &[f64], delta: f64) -> f64 {
        // The imaginary part cancels pairwise on the symmetric grid, so only
        // the cosine half is accumulated.
        let mut acc = 0.0;
        self.for_each_phase(delta, |k, e| acc += weights[k] * e.re);
        acc
    }

    /// `Σ_k m_k cos(Δ t_k)` for the measure `m` of [`Grid::measure`], in
    /// closed form.
    ///
    /// `(1 + cos x)^p` expands into the exponentials `exp(i j x)`,
    /// `|j| ≤ p`, with binomial weights, so the sum is a combination of
    /// `2p + 1` trapezoid sums of pure cosines, each available in closed
    /// form. The cost is `O(p)` instead of `O(N)`.
    pub fn window_kernel(&self, p: WindowOrder, delta: f64) -> f64 {
        let order = p.get() as i32;
        let h = self.step();
        let n = self.count as f64;
        // Trapezoid sum of cos(θ t_k): the Dirichlet kernel
        // sin(θ(T + h/2)) / sin(θh/2) minus cos(θT), which simplifies to
        // sin(θT) cot(θh/2) without cancellation.
        let dirichlet = |theta: f64| -> f64 {
            let (s, c) = (0.5 * theta * h).sin_cos();
            if theta == 0.0 {
                n - 1.0
            } else if s.abs() < 1e-2 && (theta * h).abs() > PI {
                // Near a nonzero multiple of the sampling frequency the
                // quotient loses precision; sum directly.
                let full: f64 = (0..self.count).map(|k| (theta * self.time(k)).cos()).sum();
                full - (theta * self.half_span).cos()
            } else {
                (theta * self.half_span).sin() * c / s
            }
        };
        let mut acc = 0.0;
        let mut binom = 1.0;
        for m in 0..=2 * order {
            let shift = f64::from(m - order) * PI / self.half_span;
            acc += binom * dirichlet(delta + shift);
            binom = binom * f64::from(2 * order - m) / f64::from(m + 1);
        }
        acc * h / (2.0 * self.half_span) * p.coefficient() / 2f64.powi(order)
    }

    /// Subtracts `Σ_l a_l exp(i ν_l t_k)` from `out`. With `real_part`, only
    /// the real part of each term is subtracted and terms are expected to
    /// be given once per `±ν` pair, already doubled by the caller.
    ///
    /// Terms are processed [`TERM_LANES`] at a time so the independent phase
    /// recurrences overlap instead of forming one long dependency chain.
    pub fn subtract_terms(
        &self,
        terms: &[(f64, Complex64)],
        out: &mut [Complex64],
        real_part: bool,
    ) {
        for lane in terms.chunks(TERM_LANES) {
            let m = lane.len();
            let mut rot = [Complex64::new(0.0, 0.0); TERM_LANES];
            let mut amp = [Complex64::new(0.0, 0.0); TERM_LANES];
            for (i, &(nu, a)) in lane.iter().enumerate() {
                rot[i] = Complex64::cis(nu * self.step());
                amp[i] = a;
            }
            let mut k = 0;
            while k < self.count {
                let end = (k + ANCHOR_STRIDE).min(self.count);
                let t = self.time(k);
                let mut e = [Complex64::new(0.0, 0.0); TERM_LANES];
                for (i, &(nu, _)) in lane.iter().enumerate() {
                    e[i] = Complex64::cis(nu * t);
                }
                for z in &mut out[k..end] {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..m {
                        acc += amp[i] * e[i];
                        e[i] *= rot[i];
                    }
                    if real_part {
                        z.re -= acc.re;
                    } else {
                        *z -= acc;
                    }
                }
                k = end;
            }
        }
    }

    /// Calls `visit(k, exp(i ω t_k))` for every grid point, using a rotation
    /// recurrence re-anchored every [`ANCHOR_STRIDE`] samples.
    pub fn for_each_phase(&self, omega: f64, mut visit: impl FnMut(usize, Complex64)) {
        let rot = Complex64::cis(omega * self.step());
        let mut k = 0;
        while k < self.count {
            let end = (k + ANCHOR_STRIDE).min(self.count);
            let mut e = Complex64::cis(omega * self.time(k));
            for j in k..end {
                visit(j, e);
                e *= rot;
            }
            k = end;
        }
    }
}

/// Weighted inner product `<f, g>` with weight `χ_p`.
pub fn inner_product(f: &Signal, g: &Signal, p: WindowOrder) -> Result<Complex64, SignalError> {
    f.check_same_grid(g)?;
    let measure = f.grid().measure(p);
    Ok(f.samples
        .iter()
        .zip(&g.samples)
        .zip(&measure)
        .map(|((a, b), m)| a * b.conj() * m)
        .sum())
}

/// `φ(ν) = <f, exp(iνt)>`.
pub fn evaluate_phi(f: &Signal, nu: f64, p: WindowOrder) -> Complex64 {
    let grid = f.grid();
    let measure = grid.measure(p);
    let weighted: Vec<Complex64> = f.samples.iter().zip(&measure).map(|(z, m)| z * m).collect();
    grid.modulated_sum(&weighted, nu)
}

/// Formats a real with 17 significant digits, enough to round-trip an `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t,re,im` rows (or `t,re` for a real signal) with 17 significant
/// digits. Times are written in the window clock shifted by `origin`.
pub fn write_signal_to(signal: &Signal, mut out: impl Write) -> Result<(), SignalError> {
    if signal.is_real {
        writeln!(out, "t,re")?;
    } else {
        writeln!(out, "t,re,im")?;
    }
    for (k, z) in signal.samples.iter().enumerate() {
        let t = format_real(signal.time(k) + signal.origin);
        if signal.is_real {
            writeln!(out, "{t},{}", format_real(z.re))?;
        } else {
            writeln!(out, "{t},{},{}", format_real(z.re), format_real(z.im))?;
        }
    }
    Ok(())
}

pub fn write_signal(signal: &Signal, path: impl AsRef<Path>) -> Result<(), SignalError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_signal_to(signal, file)
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<Signal, SignalError> {
    read_signal_from(std::fs::File::open(path)?)
}

/// Parses the CSV signal format. The time column must be strictly
/// increasing and uniform to within [`GRID_TOLERANCE`]; the window centre
/// becomes the signal origin.
pub fn read_signal_from(input: impl Read) -> Result<Signal, SignalError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| malformed(1, e))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(SignalError::Empty);
    }
    let has_im = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["t", "re"] => false,
        ["t", "re", "im"] => true,
        other => {
            return Err(SignalError::Malformed {
                line: 1,
                reason: format!(
                    "expected header `t,re,im` or `t,re`, found `{}`",
                    other.join(",")
                ),
            })
        }
    };
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, e))?;
        let expected = if has_im { 3 } else { 2 };
        if record.len() != expected {
            return Err(SignalError::Malformed {
                line,
                reason: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let field = |j: usize| -> Result<f64, SignalError> {
            let value: f64 = record[j].parse().map_err(|e| malformed(line, e))?;
            if !value.is_finite() {
                return Err(malformed(line, "non-finite value"));
            }
            Ok(value)
        };
        times.push(field(0)?);
        let im = if has_im { field(2)? } else { 0.0 };
        samples.push(Complex64::new(field(1)?, im));
    }
    if samples.is_empty() {
        return Err(SignalError::Empty);
    }
    if samples.len() < 2 {
        return Err(SignalError::TooFewSamples(samples.len()));
    }
    let n = times.len();
    let expected = (times[n - 1] - times[0]) / (n - 1) as f64;
    for (i, pair) in times.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if !(expected > 0.0) || (step - expected).abs() > GRID_TOLERANCE * expected {
            return Err(SignalError::NonUniformGrid {
                line: i + 3,
                step,
                expected,
            });
        }
    }
    let half_span = 0.5 * (times[n - 1] - times[0]);
    let origin = 0.5 * (times[n - 1] + times[0]);
    let mut signal = Signal::new(samples, half_span)?.with_origin(origin);
    if !has_im {
        signal.is_real = true;
    }
    Ok(signal)
}

fn malformed(line: usize, reason: impl fmt::Display) -> SignalError {
    SignalError::Malformed {
        line,
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn window_kernel_matches_direct_sum() {
        for (half_span, count) in [(10.0, 1001), (400.0, 1 << 12), (3.0, 17)] {
            let grid = Grid { half_span, count };
            let h = grid.step();
            for p in WindowOrder::all() {
                let measure = grid.measure(p);
                let deltas = (0..200).map(|j| 0.37 * j as f64 / half_span).chain([
                    PI / half_span,
                    0.9 * PI / h,
                    1e-12,
                ]);
                for delta in deltas {
                    let direct = grid.weight_transform(&measure, delta);
                    let closed = grid.window_kernel(p, delta);
                    assert_abs_diff_eq!(closed, direct, epsilon = 1e-13);
                }
            }
        }
    }

    fn order(p: u32) -> WindowOrder {
        WindowOrder::new(p).unwrap()
    }

    #[test]
    fn window_values() {
        for t in [-0.7, 0.0, 0.3] {
            assert_eq!(window_weight(order(0), t, 1.0).unwrap(), 1.0);
        }
        assert_abs_diff_eq!(
            window_weight(order(1), 0.0, 1.0).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            window_weight(order(2), 0.0, 1.0).unwrap(),
            8.0 / 3.0,
            epsilon = 1e-15
        );
        for p in 1..=3 {
            assert_abs_diff_eq!(
                window_weight(order(p), 5.0, 5.0).unwrap(),
                0.0,
                epsilon = 1e-30
            );
            assert_abs_diff_eq!(
                window_weight(order(p), -5.0, 5.0).unwrap(),
                0.0,
                epsilon = 1e-30
            );
        }
    }

    #[test]
    fn window_rejects_out_of_domain() {
        assert!(matches!(
            window_weight(order(2), 1.5, 1.0),
            Err(SignalError::OutsideWindow { .. })
        ));
        assert!(WindowOrder::new(4).is_err());
    }

    #[test]
    fn grid_is_symmetric() {
        let s = Signal::zeros(3.7, 1001).unwrap();
        for k in 0..s.count() {
            assert_eq!(s.time(k), -s.time(s.count() - 1 - k));
        }
        assert_eq!(s.time(0), -3.7);
        assert_eq!(s.time(1000), 3.7);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Signal::zeros(1.0, 16).unwrap();
        let b = Signal::zeros(1.0, 17).unwrap();
        let c = Signal::zeros(2.0, 16).unwrap();
        assert!(matches!(
            inner_product(&a, &b, WindowOrder::default()),
            Err(SignalError::GridMismatch { .. })
        ));
        assert!(inner_product(&a, &c, WindowOrder::default()).is_err());
    }

    #[test]
    fn phi_of_pure_exponential() {
        let f = Signal::from_fn(100.0, 1 << 14, |t| Complex64::cis(2.5 * t) * 2.0).unwrap();
        let phi = evaluate_phi(&f, 2.5, WindowOrder::default());
        assert_abs_diff_eq!(phi.re, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(phi.im, 0.0, epsilon = 1e-10);
        let zero = Signal::zeros(100.0, 1 << 10).unwrap();
        assert_eq!(evaluate_phi(&zero, 1.3, WindowOrder::default()).norm(), 0.0);
    }

    #[test]
    fn modulated_sum_matches_direct_evaluation() {
        let grid = Grid {
            half_span: 250.0,
            count: 5000,
        };
        let values: Vec<Complex64> = (0..grid.count)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let nu = 17.123;
        let direct: Complex64 = (0..grid.count)
            .map(|k| values[k] * Complex64::cis(-nu * grid.time(k)))
            .sum();
        let fast = grid.modulated_sum(&values, nu);
        assert!((direct - fast).norm() < 1e-9 * direct.norm().max(1.0));
    }

    #[test]
    fn csv_reads_minimal_file() {
        let s = read_signal_from("t,re,im\n-1,1,0\n0,2,0\n1,3,0\n".as_bytes()).unwrap();
        assert_eq!(s.count(), 3);
        assert_eq!(s.half_span(), 1.0);
        assert_eq!(s.origin(), 0.0);
        let real = read_signal_from("t,re\n0,1\n1,2\n2,3\n".as_bytes()).unwrap();
        assert!(real.is_real());
        assert_eq!(real.origin(), 1.0);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(
            read_signal_from("t,re,im\n-1,1,0\n0,2,0\n0.5,3,0\n".as_bytes()),
            Err(SignalError::NonUniformGrid { .. })
        ));
        assert!(matches!(
            read_signal_from("".as_bytes()),
            Err(SignalError::Empty)
        ));
        assert!(matches!(
            read_signal_from("t,re,im\n".as_bytes()),
            Err(SignalError::Empty)
        ));
        assert!(matches!(
            read_signal_from("t,re,im\n0,x,0\n1,2,0\n".as_bytes()),
            Err(SignalError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            read_signal_from("time,value\n0,1\n1,2\n".as_bytes()),
            Err(SignalError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = Signal::from_fn(12.5, 1024, |t| {
            Complex64::new(
                (0.731 * t).sin() / 3.0,
                (1.9 * t).cos() * std::f64::consts::E,
            )
        })
        .unwrap();
        let mut buf = Vec::new();
        write_signal_to(&s, &mut buf).unwrap();
        let back = read_signal_from(buf.as_slice()).unwrap();
        assert_eq!(back.samples(), s.samples());
        assert_eq!(back.count(), s.count());
        assert!((back.half_span() - s.half_span()).abs() < 1e-13);
    }
}

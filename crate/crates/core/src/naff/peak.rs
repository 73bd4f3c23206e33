//! Location of the maximum of `|φ(ν)|`.
//!
//! A zero-padded FFT of the weighted samples gives `|φ|` on a fine uniform
//! frequency grid. The strongest admissible local maximum is bracketed by
//! its neighbouring bins and refined by Brent's golden-section/parabolic
//! maximization of `|φ|²`, then polished on the analytic derivative
//! `d|φ|²/dν = 2 Re(conj(φ) φ')`, whose root is far better conditioned than
//! the flat top of `|φ|²` itself.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::NaffError;
use crate::signal::{Grid, WindowOrder};

const FFT_PAD: usize = 2;
/// How many coarse candidates are refined before giving up.
const MAX_CANDIDATES: usize = 8;
const GOLDEN: f64 = 0.381_966_011_250_105_1;

pub(crate) struct PeakFinder {
    grid: Grid,
    measure: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    nonnegative_only: bool,
    tolerance: f64,
}

impl PeakFinder {
    pub fn new(grid: Grid, window: WindowOrder, nonnegative_only: bool, tolerance: f64) -> Self {
        let fft_len = (grid.count * FFT_PAD).next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        Self {
            measure: grid.measure(window),
            grid,
            fft,
            fft_len,
            nonnegative_only,
            tolerance,
        }
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Spacing of the coarse frequency grid.
    pub fn bin_width(&self) -> f64 {
        TAU / (self.fft_len as f64 * self.grid.step())
    }

    pub fn weighted(&self, samples: &[Complex64]) -> Vec<Complex64> {
        samples
            .iter()
            .zip(&self.measure)
            .map(|(z, m)| z * m)
            .collect()
    }

    /// Frequency of the largest `|φ|` at least `min_separation` away from
    /// every excluded frequency.
    pub fn locate(
        &self,
        samples: &[Complex64],
        exclusions: &[f64],
        min_separation: f64,
    ) -> Result<f64, NaffError> {
        let weighted = self.weighted(samples);
        if weighted.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(NaffError::DegenerateSignal);
        }
        let mut spectrum = vec![Complex64::new(0.0, 0.0); self.fft_len];
        spectrum[..weighted.len()].copy_from_slice(&weighted);
        self.fft.process(&mut spectrum);
        let power: Vec<f64> = spectrum.iter().map(Complex64::norm_sqr).collect();

        let m = self.fft_len;
        let bin = self.bin_width();
        let freq = |j: usize| {
            if j <= m / 2 {
                j as f64 * bin
            } else {
                (j as f64 - m as f64) * bin
            }
        };
        let allowed = |nu: f64| exclusions.iter().all(|e| (nu - e).abs() >= min_separation);
        let range = if self.nonnegative_only {
            0..=m / 2
        } else {
            0..=m - 1
        };
        let mut candidates: Vec<usize> = range
            .filter(|&j| {
                let left = power[(j + m - 1) % m];
                let right = power[(j + 1) % m];
                power[j] > 0.0 && power[j] >= left && power[j] >= right && allowed(freq(j))
            })
            .collect();
        candidates.sort_by(|a, b| power[*b].total_cmp(&power[*a]));

        for &j in candidates.iter().take(MAX_CANDIDATES) {
            let centre = freq(j);
            let nu = self.refine(&weighted, centre - bin, centre + bin);
            if allowed(nu) && (!self.nonnegative_only || nu >= -bin) {
                return Ok(if self.nonnegative_only {
                    nu.max(0.0)
                } else {
                    nu
                });
            }
        }
        Err(NaffError::NoPeak)
    }

    fn power_at(&self, weighted: &[Complex64], nu: f64) -> f64 {
        self.grid.modulated_sum(weighted, nu).norm_sqr()
    }

    fn slope_at(&self, weighted: &[Complex64], nu: f64) -> f64 {
        let (phi, dphi) = self.grid.modulated_sum_with_derivative(weighted, nu);
        (phi.conj() * dphi).re
    }

    /// Brent maximization on `[lo, hi]` followed by a bracketed secant
    /// polish of the derivative.
    pub fn refine(&self, weighted: &[Complex64], lo: f64, hi: f64) -> f64 {
        let coarse_tol = 1e-7 * (hi - lo);
        let nu = brent_max(|x| self.power_at(weighted, x), lo, hi, coarse_tol);
        self.polish(weighted, nu, coarse_tol.max(f64::EPSILON * nu.abs()))
    }

    fn polish(&self, weighted: &[Complex64], nu: f64, width: f64) -> f64 {
        let scale = nu.abs().max(PI / self.grid.half_span);
        let tol = self.tolerance * scale;
        let (mut a, mut b) = (nu - 4.0 * width, nu + 4.0 * width);
        let (mut fa, mut fb) = (self.slope_at(weighted, a), self.slope_at(weighted, b));
        // |φ|² rises to the left of the peak and falls to its right.
        if !(fa > 0.0 && fb < 0.0) {
            return nu;
        }
        // Illinois variant of regula falsi.
        let mut side = 0i8;
        for _ in 0..60 {
            let c = (a * fb - b * fa) / (fb - fa);
            if (b - a).abs() <= tol || !c.is_finite() {
                break;
            }
            let fc = self.slope_at(weighted, c);
            if fc == 0.0 {
                return c;
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            if (b - a).abs() <= tol {
                break;
            }
        }
        (a * fb - b * fa) / (fb - fa)
    }
}

/// Brent's method for the maximum of a unimodal function on `[a, b]`.
fn brent_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = |x: f64| -f(x);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_parabola_vertex() {
        let x = brent_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn refinement_reaches_machine_precision() {
        let grid = Grid {
            half_span: 100.0,
            count: 1 << 14,
        };
        let finder = PeakFinder::new(grid, WindowOrder::default(), false, 1e-12);
        let nu0 = 2.345_678_901_234_5;
        let samples: Vec<Complex64> = (0..grid.count)
            .map(|k| 3.0 * Complex64::cis(nu0 * grid.time(k)))
            .collect();
        let nu = finder.locate(&samples, &[], 0.0).unwrap();
        assert!((nu - nu0).abs() < 1e-12, "{nu} vs {nu0}");
    }
}

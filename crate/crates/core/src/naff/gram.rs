//! Joint orthogonal projection onto a set of complex exponentials.
//!
//! With the Hann-power weight the Gram entries
//! `G_jk = <e^{iν_k t}, e^{iν_j t}> = W(ν_k - ν_j)` only depend on the
//! frequency gap and are real, because the weight is even and the grid is
//! symmetric. The system is kept as an incrementally grown Cholesky factor.

use num_complex::Complex64;

use super::NaffError;
use crate::signal::{Grid, WindowOrder};

/// Condition estimates above this mean the frequencies are not resolved.
pub const MAX_CONDITION: f64 = 1e12;

pub(crate) struct GramSystem {
    grid: Grid,
    window: WindowOrder,
    freqs: Vec<f64>,
    /// Row `i` of the lower triangular factor, length `i + 1`.
    factor: Vec<Vec<f64>>,
}

impl GramSystem {
    pub fn new(grid: Grid, window: WindowOrder) -> Self {
        Self {
            grid,
            window,
            freqs: Vec::new(),
            factor: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    fn overlap(&self, delta: f64) -> f64 {
        self.grid.window_kernel(self.window, delta)
    }

    /// Appends a frequency, failing if the enlarged system is numerically
    /// singular. On failure the system is left unchanged.
    pub fn push(&mut self, nu: f64) -> Result<(), NaffError> {
        let n = self.freqs.len();
        let column: Vec<f64> = self.freqs.iter().map(|&f| self.overlap(nu - f)).collect();
        let mut row = Vec::with_capacity(n + 1);
        for i in 0..n {
            let s: f64 = (0..i).map(|k| row[k] * self.factor[i][k]).sum();
            row.push((column[i] - s) / self.factor[i][i]);
        }
        let diag2 = self.overlap(0.0) - row.iter().map(|x| x * x).sum::<f64>();
        let diag = diag2.max(0.0).sqrt();
        row.push(diag);
        let condition = self.condition_with(diag);
        if !(diag > 0.0) || condition > MAX_CONDITION {
            return Err(NaffError::IllConditioned {
                condition,
                min_gap: min_gap(&self.freqs, nu),
            });
        }
        self.freqs.push(nu);
        self.factor.push(row);
        Ok(())
    }

    pub fn truncate(&mut self, len: usize) {
        self.freqs.truncate(len);
        self.factor.truncate(len);
    }

    /// `(max L_ii / min L_ii)²`, a cheap estimate of the condition number.
    fn condition_with(&self, extra: f64) -> f64 {
        let diags = self
            .factor
            .iter()
            .enumerate()
            .map(|(i, r)| r[i])
            .chain([extra]);
        let (lo, hi) = diags.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            (hi / lo).powi(2)
        }
    }

    /// Solves `G a = b`.
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.freqs.len();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let s: Complex64 = (0..i).map(|k| y[k] * self.factor[i][k]).sum();
            y[i] = (rhs[i] - s) / self.factor[i][i];
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let s: Complex64 = (i + 1..n).map(|k| x[k] * self.factor[k][i]).sum();
            x[i] = (y[i] - s) / self.factor[i][i];
        }
        x
    }
}

pub(crate) fn min_gap(freqs: &[f64], nu: f64) -> f64 {
    freqs
        .iter()
        .map(|f| (f - nu).abs())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_reference() {
        let grid = Grid {
            half_span: 20.0,
            count: 4096,
        };
        let measure = grid.measure(WindowOrder::default());
        let mut gram = GramSystem::new(grid, WindowOrder::default());
        let freqs = [0.0, 0.4, -0.4, 1.1, 2.5];
        for f in freqs {
            gram.push(f).unwrap();
        }
        let rhs: Vec<Complex64> = (0..freqs.len())
            .map(|i| Complex64::new(i as f64 + 1.0, 0.5 - i as f64))
            .collect();
        let x = gram.solve(&rhs);
        for (j, &fj) in freqs.iter().enumerate() {
            let lhs: Complex64 = freqs
                .iter()
                .zip(&x)
                .map(|(&fk, xk)| xk * grid.weight_transform(&measure, fk - fj))
                .sum();
            assert!((lhs - rhs[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn coincident_frequencies_are_rejected() {
        let grid = Grid {
            half_span: 20.0,
            count: 1024,
        };
        let mut gram = GramSystem::new(grid, WindowOrder::default());
        gram.push(1.0).unwrap();
        assert!(gram.push(1.0 + 1e-9).is_err());
        assert_eq!(gram.len(), 1);
    }
}

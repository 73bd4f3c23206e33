//! Gragg–Bulirsch–Stoer extrapolation with order and step size control and
//! a Hermite dense output.
//!
//! Each macro step of length `H` runs the explicit midpoint rule with
//! `n_j = 4j - 2` substeps (no smoothing step) and extrapolates the end
//! values in `h²`. The step sequence keeps the midpoint index `n_j / 2` odd,
//! so the midpoint value, the midpoint slope and central differences of the
//! stored slopes all have even expansions in `h` and can be extrapolated
//! the same way. Those extrapolated midpoint derivatives, together with the
//! values and slopes at both ends of the step, define an interpolating
//! polynomial of degree `μ + 4` used to sample the solution.
//!
//! Step and order control follow the usual work-per-unit-step heuristic
//! of extrapolation codes.
//!
//! Long runs at tolerances near machine precision are limited by rounding
//! rather than truncation, so each sweep works with the increment from the
//! start of the step, and both the clock and the state are advanced with
//! compensated summation.

use super::{node_time, scaled_rms, IntegrateError, IntegratorOptions, OdeProblem};

/// Maximal number of extrapolation columns.
const KMAX: usize = 9;
/// Highest derivative used in the dense output is `2κ - DENSE_DROP`.
const DENSE_DROP: usize = 1;
const SAFETY: f64 = 0.94;
const SAFETY_EXP: f64 = 0.65;
const MAX_SHRINK: f64 = 0.02;
const MAX_GROWTH: f64 = 4.0;

fn substeps(j: usize) -> usize {
    4 * j - 2
}

struct Stepper<'a> {
    problem: &'a OdeProblem<'a>,
    dim: usize,
    rtol: f64,
    atol: f64,
    evals: usize,
}

/// Output of one midpoint-rule sweep.
struct Sweep {
    /// Increment `y(t + H) - y(t)`.
    end: Vec<f64>,
    /// `derivs[k]` approximates the `k`-th derivative at the step midpoint;
    /// `derivs[0]` is the increment to the midpoint.
    derivs: Vec<Vec<f64>>,
}

/// A sum carried with its rounding error (Kahan–Babuška).
#[derive(Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn new(x: f64) -> Self {
        Self { sum: x, carry: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let s = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() {
            (self.sum - s) + x
        } else {
            (x - s) + self.sum
        };
        self.sum = s;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

impl<'a> Stepper<'a> {
    fn rhs(&mut self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<(), IntegrateError> {
        self.problem.field.eval(t, x, dx);
        self.evals += 1;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::RhsFailure { t });
        }
        Ok(())
    }

    /// Midpoint rule with `n` substeps across `[t, t + big_h]`, keeping the
    /// slopes for the derivative estimates at the centre.
    fn sweep(
        &mut self,
        t: f64,
        y0: &[f64],
        f0: &[f64],
        big_h: f64,
        j: usize,
    ) -> Result<Sweep, IntegrateError> {
        let n = substeps(j);
        let h = big_h / n as f64;
        let m = n / 2;
        let dim = self.dim;
        let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        slopes.push(f0.to_vec());
        let mut prev = vec![0.0; dim];
        let mut cur: Vec<f64> = f0.iter().map(|f| h * f).collect();
        let mut mid = if m == 1 { Some(cur.clone()) } else { None };
        let mut f = vec![0.0; dim];
        let mut state = vec![0.0; dim];
        let at = |z: &[f64], state: &mut [f64]| {
            for ((s, y), z) in state.iter_mut().zip(y0).zip(z) {
                *s = y + z;
            }
        };
        for i in 1..n {
            at(&cur, &mut state);
            self.rhs(t + i as f64 * h, &state, &mut f)?;
            slopes.push(f.clone());
            for d in 0..dim {
                let next = prev[d] + 2.0 * h * f[d];
                prev[d] = cur[d];
                cur[d] = next;
            }
            if i + 1 == m {
                mid = Some(cur.clone());
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::Divergence {
                    t: t + i as f64 * h,
                });
            }
        }
        at(&cur, &mut state);
        self.rhs(t + big_h, &state, &mut f)?;
        slopes.push(f.clone());

        let mut derivs = Vec::with_capacity(2 * j + 1);
        derivs.push(mid.expect("midpoint index is visited"));
        derivs.push(slopes[m].clone());
        // δ g_i = g_{i+1} - g_{i-1}; δ^q f at the centre divided by (2h)^q
        // approximates the (q+1)-th derivative.
        let mut diff = slopes;
        let mut scale = 1.0;
        for q in 1..=(2 * j - 1) {
            let len = diff.len();
            diff = (1..len - 1)
                .map(|i| (0..dim).map(|d| diff[i + 1][d] - diff[i - 1][d]).collect())
                .collect();
            scale *= 2.0 * h;
            // After q differences index m of the original sits at m - q.
            derivs.push(diff[m - q].iter().map(|v| v / scale).collect());
        }
        Ok(Sweep { end: cur, derivs })
    }
}

/// Aitken–Neville extrapolation to `h = 0` in powers of `h²`, for values
/// computed with substep counts `ns`.
fn extrapolate(values: &[&[f64]], ns: &[usize]) -> Vec<f64> {
    let mut table: Vec<Vec<f64>> = values.iter().map(|v| v.to_vec()).collect();
    let k = table.len();
    for l in 1..k {
        for i in (l..k).rev() {
            let ratio = (ns[i] as f64 / ns[i - l] as f64).powi(2);
            let (lo, hi) = table.split_at_mut(i);
            for (a, b) in hi[0].iter_mut().zip(&lo[i - 1]) {
                *a += (*a - b) / (ratio - 1.0);
            }
        }
    }
    table.pop().unwrap()
}

/// Polynomial in `s = θ - 1/2` representing the solution over one step,
/// relative to the state at its start.
struct DenseStep {
    t: f64,
    h: f64,
    base: Vec<f64>,
    /// `coeffs[d][k]` multiplies `s^k` for component `d`.
    coeffs: Vec<Vec<f64>>,
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t) / self.h - 0.5;
        for ((o, c), b) in out.iter_mut().zip(&self.coeffs).zip(&self.base) {
            *o = b + c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck);
        }
    }
}

/// Inverse of the 4x4 system that fixes the four highest coefficients of
/// the dense polynomial from end values and slopes.
fn end_condition_inverse(mu: usize) -> [[f64; 4]; 4] {
    let mut a = [[0.0; 8]; 4];
    for r in 0..4 {
        let e = (mu + 1 + r) as i32;
        a[0][r] = (-0.5f64).powi(e);
        a[1][r] = 0.5f64.powi(e);
        a[2][r] = e as f64 * (-0.5f64).powi(e - 1);
        a[3][r] = e as f64 * 0.5f64.powi(e - 1);
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[4 + i] = 1.0;
    }
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for row in 0..4 {
            if row != col {
                let factor = a[row][col];
                if factor != 0.0 {
                    let pivot_row = a[col];
                    for (v, pv) in a[row].iter_mut().zip(pivot_row) {
                        *v -= factor * pv;
                    }
                }
            }
        }
    }
    let mut inv = [[0.0; 4]; 4];
    for i in 0..4 {
        inv[i].copy_from_slice(&a[i][4..]);
    }
    inv
}

#[allow(clippy::too_many_arguments)]
fn build_dense(
    t: f64,
    big_h: f64,
    y0: &[f64],
    f0: &[f64],
    increment: &[f64],
    f1: &[f64],
    mid_derivs: &[Vec<f64>],
) -> DenseStep {
    let mu = mid_derivs.len() - 1;
    let inv = end_condition_inverse(mu);
    let dim = y0.len();
    let mut coeffs = Vec::with_capacity(dim);
    for d in 0..dim {
        let mut c = vec![0.0; mu + 5];
        let mut hk = 1.0;
        let mut fact = 1.0;
        for (k, deriv) in mid_derivs.iter().enumerate() {
            if k > 0 {
                hk *= big_h;
                fact *= k as f64;
            }
            c[k] = hk * deriv[d] / fact;
        }
        let q = |s: f64| c[..=mu].iter().rev().fold(0.0, |acc, &ck| acc * s + ck);
        let dq = |s: f64| (1..=mu).rev().fold(0.0, |acc, k| acc * s + k as f64 * c[k]);
        let rhs = [
            -q(-0.5),
            increment[d] - q(0.5),
            big_h * f0[d] - dq(-0.5),
            big_h * f1[d] - dq(0.5),
        ];
        for r in 0..4 {
            c[mu + 1 + r] = (0..4).map(|i| inv[r][i] * rhs[i]).sum();
        }
        coeffs.push(c);
    }
    DenseStep {
        t,
        h: big_h,
        base: y0.to_vec(),
        coeffs,
    }
}

pub(super) fn integrate(
    problem: &OdeProblem<'_>,
    options: &IntegratorOptions,
) -> Result<Vec<Vec<f64>>, IntegrateError> {
    let dim = problem.initial_state.len();
    let count = options.output_count;
    let (t0, t_end) = (problem.t_start, problem.t_end);
    let mut stepper = Stepper {
        problem,
        dim,
        rtol: options.rel_tol,
        atol: options.abs_tol,
        evals: 0,
    };

    let mut out = Vec::with_capacity(count);
    out.push(problem.initial_state.to_vec());
    let mut next_node = 1;

    let mut clock = Compensated::new(t0);
    let mut t = t0;
    let mut acc: Vec<Compensated> = problem
        .initial_state
        .iter()
        .map(|&v| Compensated::new(v))
        .collect();
    let mut y = problem.initial_state.to_vec();
    let mut f = vec![0.0; dim];
    stepper.rhs(t, &y, &mut f)?;

    let span = t_end - t0;
    let mut big_h = initial_step(&y, &f, span, &stepper).min(options.step_cap());
    let mut k_target = 5usize;
    let mut steps = 0usize;
    let work: Vec<f64> = (1..=KMAX)
        .scan(1.0, |acc, j| {
            *acc += (substeps(j) + 1) as f64;
            Some(*acc)
        })
        .collect();

    while t < t_end {
        steps += 1;
        if steps > options.max_steps {
            return Err(IntegrateError::TooManySteps(options.max_steps));
        }
        let mut last = false;
        if t + big_h >= t_end || t_end - (t + big_h) < 1e-12 * span {
            big_h = t_end - t;
            last = true;
        }
        if big_h <= 1e-14 * t.abs().max(span) {
            return Err(IntegrateError::StepUnderflow { t, h: big_h });
        }

        let mut sweeps: Vec<Sweep> = Vec::with_capacity(KMAX);
        let mut tableau_row: Vec<Vec<f64>> = Vec::new();
        let mut h_opt = vec![0.0; KMAX + 1];
        let mut w = vec![f64::INFINITY; KMAX + 1];
        let mut accepted: Option<(usize, Vec<f64>)> = None;
        let mut retry_h = None;
        let k_hi = (k_target + 1).min(KMAX);

        for j in 1..=k_hi {
            let sweep = match stepper.sweep(t, &y, &f, big_h, j) {
                Ok(s) => s,
                Err(IntegrateError::Divergence { .. } | IntegrateError::RhsFailure { .. }) => {
                    retry_h = Some(big_h * 0.25);
                    break;
                }
                Err(e) => return Err(e),
            };
            // Extend the extrapolation tableau by one row.
            let mut row = vec![sweep.end.clone()];
            for l in 1..j {
                let ratio = (substeps(j) as f64 / substeps(j - l) as f64).powi(2);
                let prev = &tableau_row[l - 1];
                let cur = &row[l - 1];
                row.push(
                    cur.iter()
                        .zip(prev)
                        .map(|(a, b)| a + (a - b) / (ratio - 1.0))
                        .collect(),
                );
            }
            sweeps.push(sweep);
            if j >= 2 {
                let best = &row[j - 1];
                let lower = &row[j - 2];
                let diff: Vec<f64> = best.iter().zip(lower).map(|(a, b)| a - b).collect();
                let y_new: Vec<f64> = y.iter().zip(best).map(|(a, b)| a + b).collect();
                let err = scaled_rms(&diff, &y, &y_new, stepper.rtol, stepper.atol);
                if !err.is_finite() {
                    retry_h = Some(big_h * 0.25);
                    break;
                }
                let expo = 1.0 / (2 * j - 1) as f64;
                let fac = ((err / SAFETY_EXP).powf(expo) / SAFETY)
                    .clamp(1.0 / MAX_GROWTH, 1.0 / MAX_SHRINK);
                h_opt[j] = (big_h / fac).min(options.step_cap());
                w[j] = work[j - 1] / h_opt[j];
                if j + 1 >= k_target && err <= 1.0 {
                    accepted = Some((j, best.clone()));
                    break;
                }
                if j == k_hi {
                    retry_h = Some(h_opt[j]);
                    break;
                }
            }
            tableau_row = row;
        }

        let Some((kappa, delta)) = accepted else {
            big_h = retry_h.unwrap_or(big_h * 0.25);
            k_target = k_target.clamp(2, KMAX - 1);
            continue;
        };
        let mut next_acc = acc.clone();
        for (a, d) in next_acc.iter_mut().zip(&delta) {
            a.add(*d);
        }
        let y1: Vec<f64> = next_acc.iter().map(|a| a.value()).collect();
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::Divergence { t: t + big_h });
        }

        let mut next_clock = clock;
        next_clock.add(big_h);
        let t1 = if last { t_end } else { next_clock.value() };
        let mut f1 = vec![0.0; dim];
        stepper.rhs(t1, &y1, &mut f1)?;

        // Dense output through the output nodes covered by this step.
        let node = |k: usize| node_time(t0, t_end, k, count);
        if next_node < count && node(next_node) <= t1 {
            let mu = 2 * kappa - DENSE_DROP;
            let ns: Vec<usize> = (1..=kappa).map(substeps).collect();
            let mid_derivs: Vec<Vec<f64>> = (0..=mu)
                .map(|k| {
                    let jmin = if k <= 2 { 1 } else { k.div_ceil(2) };
                    let vals: Vec<&[f64]> = sweeps[jmin - 1..kappa]
                        .iter()
                        .map(|s| s.derivs[k].as_slice())
                        .collect();
                    extrapolate(&vals, &ns[jmin - 1..kappa])
                })
                .collect();
            let dense = build_dense(t, big_h, &y, &f, &delta, &f1, &mid_derivs);
            while next_node < count && node(next_node) <= t1 {
                let mut state = vec![0.0; dim];
                if next_node + 1 == count && last {
                    state.copy_from_slice(&y1);
                } else {
                    dense.eval(node(next_node), &mut state);
                }
                out.push(state);
                next_node += 1;
            }
        }

        // Order and step size for the next step.
        let (k_new, h_new) = if kappa >= 3 && w[kappa - 1] < 0.8 * w[kappa] {
            (kappa - 1, h_opt[kappa - 1])
        } else if kappa < KMAX - 1 && w[kappa] < 0.9 * w[kappa - 1] {
            (kappa + 1, h_opt[kappa] * work[kappa] / work[kappa - 1])
        } else {
            (kappa, h_opt[kappa])
        };
        k_target = k_new.clamp(2, KMAX - 1);
        big_h = h_new.min(options.step_cap());

        clock = next_clock;
        t = t1;
        acc = next_acc;
        y = y1;
        f = f1;
        if last {
            break;
        }
    }

    while out.len() < count {
        // Only reachable through rounding at the final node.
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step(y: &[f64], f: &[f64], span: f64, stepper: &Stepper<'_>) -> f64 {
    let zeros = vec![0.0; y.len()];
    let d0 = scaled_rms(y, y, &zeros, stepper.rtol, stepper.atol);
    let d1 = scaled_rms(f, y, &zeros, stepper.rtol, stepper.atol);
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-3
    } else {
        0.1 * d0 / d1
    };
    h.min(0.1 * span).max(1e-6 * span)
}

//! Properties of the frequency analysis on synthetic signals.

use std::f64::consts::TAU;

use naffo::naff::{decompose, project, refit, NaffOptions};
use naffo::signal::{inner_product, Signal, WindowOrder};
use num_complex::Complex64;
use proptest::prelude::*;

fn real_signal(terms: &[(f64, Complex64)], half_span: f64, count: usize) -> Signal {
    Signal::from_fn(half_span, count, |t| {
        let z: Complex64 = terms.iter().map(|(f, a)| a * Complex64::cis(f * t)).sum();
        Complex64::new(2.0 * z.re, 0.0)
    })
    .unwrap()
}

/// Three well separated lines with moduli in `[0.05, 1]`.
fn three_lines() -> impl Strategy<Value = Vec<(f64, Complex64)>> {
    (
        0.8..1.2f64,
        1.6..2.2f64,
        2.9..3.6f64,
        prop::collection::vec((0.05..1.0f64, 0.0..TAU), 3),
    )
        .prop_map(|(f1, f2, f3, amps)| {
            [f1, f2, f3]
                .into_iter()
                .zip(amps)
                .map(|(f, (r, phase))| (f, Complex64::from_polar(r, phase)))
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn recovers_synthetic_lines(terms in three_lines()) {
        let signal = real_signal(&terms, 60.0 * TAU, 1 << 14);
        let options = NaffOptions { max_terms: 6, ..NaffOptions::default() };
        let d = decompose(&signal, &options).unwrap();
        prop_assert_eq!(d.terms.len(), 6);
        for (f, a) in &terms {
            let found = d.terms.iter().find(|t| (t.frequency - f).abs() < 1e-3).unwrap();
            prop_assert!((found.frequency - f).abs() < 1e-8, "{} vs {}", found.frequency, f);
            prop_assert!((found.amplitude - a).norm() < 1e-8);
        }
    }

    #[test]
    fn residual_never_grows(terms in three_lines()) {
        let signal = real_signal(&terms, 40.0 * TAU, 1 << 12);
        let d = decompose(&signal, &NaffOptions::default()).unwrap();
        prop_assert!(d.residual_history.len() >= 2);
        for w in d.residual_history.windows(2) {
            prop_assert!(w[1] <= w[0], "{:e} after {:e}", w[1], w[0]);
        }
    }

    #[test]
    fn real_signals_give_conjugate_pairs(terms in three_lines()) {
        let signal = real_signal(&terms, 40.0 * TAU, 1 << 12);
        let d = decompose(&signal, &NaffOptions { max_terms: 12, ..NaffOptions::default() }).unwrap();
        for t in d.terms.iter().filter(|t| t.frequency != 0.0) {
            let mirror = d.terms.iter().find(|m| m.frequency == -t.frequency);
            prop_assert!(mirror.is_some_and(|m| (m.amplitude - t.amplitude.conj()).norm() < 1e-12));
        }
    }

    #[test]
    fn window_is_normalized(half_span in 1.0..500.0f64, log_count in 8u32..14) {
        let one = Signal::from_fn(half_span, 1 << log_count, |_| Complex64::new(1.0, 0.0)).unwrap();
        for p in WindowOrder::all() {
            let norm = inner_product(&one, &one, p).unwrap();
            prop_assert!((norm.re - 1.0).abs() < 1e-10 && norm.im.abs() < 1e-15);
        }
    }
}

#[test]
fn projection_is_exact_for_the_true_frequencies() {
    let terms = [
        (0.9, Complex64::new(0.4, 0.1)),
        (1.7, Complex64::new(-0.2, 0.3)),
    ];
    let signal = Signal::from_fn(50.0, 4001, |t| {
        terms.iter().map(|(f, a)| a * Complex64::cis(f * t)).sum()
    })
    .unwrap();
    let amps = project(&signal, &[0.9, 1.7], WindowOrder::default()).unwrap();
    for (a, (_, b)) in amps.iter().zip(terms) {
        assert!((a - b).norm() < 1e-13);
    }
}

#[test]
fn refit_on_measured_frequencies_keeps_the_fit() {
    let terms = [
        (1.1, Complex64::new(0.5, 0.0)),
        (2.3, Complex64::new(0.0, 0.2)),
    ];
    let signal = real_signal(&terms, 80.0, 1 << 13);
    let d = decompose(
        &signal,
        &NaffOptions {
            max_terms: 4,
            ..NaffOptions::default()
        },
    )
    .unwrap();
    let freqs: Vec<f64> = d.terms.iter().map(|t| t.frequency).collect();
    let again = refit(&signal, &d, &freqs).unwrap();
    for (a, b) in d.terms.iter().zip(&again.terms) {
        assert_eq!(a.frequency, b.frequency);
        assert!((a.amplitude - b.amplitude).norm() < 1e-12);
    }
}

#[test]
fn decomposition_is_deterministic() {
    let terms = [
        (1.3, Complex64::new(0.3, 0.4)),
        (std::f64::consts::E, Complex64::new(0.1, 0.0)),
    ];
    let signal = real_signal(&terms, 100.0, 1 << 13);
    let a = decompose(&signal, &NaffOptions::default()).unwrap();
    let b = decompose(&signal, &NaffOptions::default()).unwrap();
    assert_eq!(a, b);
}

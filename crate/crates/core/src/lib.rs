//! Frequency analysis of quasi-periodic orbits and refinement of initial
//! conditions onto the forced orbit of a driven dynamical system.
//!
//! An orbit of `dX/dt = f(X) + g(X, t)` is integrated ([`integrator`]),
//! decomposed into complex exponentials ([`naff`]), and its spectral terms
//! are split into forced terms, at integer combinations of the forcing
//! frequencies, and free ones ([`naffo`]). Replacing the initial condition by
//! the forced part at time 0 and repeating removes the free oscillations
//! with quadratic convergence.
//!
//! ```
//! use naffo::models::forced_linear_oscillator;
//! use naffo::naffo::{refine, RefineOptions};
//!
//! let system = forced_linear_oscillator(2.0, 0.1, 1.0).unwrap();
//! let log = refine(&system, &[0.0, 0.0], &RefineOptions::default()).unwrap();
//! assert!((log.final_condition[0] - 1.0 / 30.0).abs() < 1e-10);
//! ```
//!
//! The guide in `book/` explains each step; its examples are compiled as
//! doc-tests.

pub mod cli;
pub mod integrator;
pub mod models;
pub mod naff;
pub mod naffo;
pub mod signal;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/frequency-analysis.md")]
    mod frequency_analysis {}
    #[doc = include_str!("../../../book/src/integration.md")]
    mod integration {}
    #[doc = include_str!("../../../book/src/forced-and-free.md")]
    mod forced_and_free {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}

//! Forcing frequencies and the separation of forced from free terms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NaffoError;
use crate::naff::{Decomposition, SpectralTerm};

pub const DEFAULT_MAX_ORDER: u32 = 10;

/// Known angular frequencies `ν_j` of the external perturbation.
///
/// An empty basis describes an autonomous system whose forced solution is a
/// static equilibrium: only the constant term is forced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingBasis {
    pub nu: Vec<f64>,
    /// Largest `|m|₁` of the integer combinations `m·ν` considered.
    #[serde(default = "default_max_order")]
    pub max_order: u32,
    /// Absolute matching distance; `None` means `π / T`, half the
    /// resolution limit of the analysed window.
    #[serde(default)]
    pub match_tolerance: Option<f64>,
}

fn default_max_order() -> u32 {
    DEFAULT_MAX_ORDER
}

impl Default for ForcingBasis {
    fn default() -> Self {
        Self::stationary()
    }
}

/// A point `m·ν` of the forcing lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub frequency: f64,
    pub combination: Vec<i32>,
}

impl ForcingBasis {
    pub fn new(nu: Vec<f64>) -> Result<Self, NaffoError> {
        let basis = Self {
            nu,
            max_order: DEFAULT_MAX_ORDER,
            match_tolerance: None,
        };
        basis.check_frequencies()?;
        Ok(basis)
    }

    /// The empty basis of an unforced system.
    pub fn stationary() -> Self {
        Self {
            nu: Vec::new(),
            max_order: DEFAULT_MAX_ORDER,
            match_tolerance: None,
        }
    }

    pub fn with_max_order(mut self, max_order: u32) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn with_match_tolerance(mut self, tolerance: f64) -> Self {
        self.match_tolerance = Some(tolerance);
        self
    }

    pub fn dimension(&self) -> usize {
        self.nu.len()
    }

    pub fn tolerance_for(&self, half_span: f64) -> f64 {
        self.match_tolerance.unwrap_or(PI / half_span)
    }

    fn check_frequencies(&self) -> Result<(), NaffoError> {
        if let Some(bad) = self.nu.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(NaffoError::InvalidBasis(format!(
                "forcing frequencies must be positive and finite, got {bad}"
            )));
        }
        if let Some(tol) = self.match_tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(NaffoError::InvalidBasis(format!(
                    "match tolerance must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }

    /// Checks the frequencies and that no nonzero combination `m·ν` with
    /// `|m|₁ ≤ max_order` vanishes within the matching tolerance, which
    /// would make the lattice labels meaningless.
    pub fn validate(&self, half_span: f64) -> Result<(), NaffoError> {
        self.check_frequencies()?;
        let tol = self.tolerance_for(half_span);
        let limit = tol;
        if let Some(point) = self
            .lattice(limit)
            .into_iter()
            .find(|p| p.combination.iter().any(|&m| m != 0))
        {
            return Err(NaffoError::InvalidBasis(format!(
                "forcing frequencies are commensurate at working precision: {:?}·ν = {:e}",
                point.combination, point.frequency
            )));
        }
        Ok(())
    }

    /// All lattice points with `|m·ν| ≤ limit`, in enumeration order.
    pub fn lattice(&self, limit: f64) -> Vec<LatticePoint> {
        let mut out = Vec::new();
        let mut m = vec![0i32; self.nu.len()];
        self.enumerate(0, self.max_order as i32, 0.0, &mut m, limit, &mut out);
        out
    }

    fn enumerate(
        &self,
        j: usize,
        budget: i32,
        partial: f64,
        m: &mut Vec<i32>,
        limit: f64,
        out: &mut Vec<LatticePoint>,
    ) {
        if j == self.nu.len() {
            if partial.abs() <= limit {
                out.push(LatticePoint {
                    frequency: partial,
                    combination: m.clone(),
                });
            }
            return;
        }
        for mj in -budget..=budget {
            m[j] = mj;
            let value = partial + mj as f64 * self.nu[j];
            self.enumerate(j + 1, budget - mj.abs(), value, m, limit, out);
        }
        m[j] = 0;
    }
}

/// A forced term and the integer combination it was matched to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedTerm {
    pub term: SpectralTerm,
    pub combination: Vec<i32>,
}

/// A detected frequency lying within tolerance of several lattice points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousMatch {
    pub frequency: f64,
    /// Candidate combinations, nearest first; the first one was used.
    pub candidates: Vec<Vec<i32>>,
}

/// Partition of a decomposition into forced and free terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TermClassification {
    pub forced: Vec<ForcedTerm>,
    pub free: Vec<SpectralTerm>,
    /// `|frequency|` of the largest free term, the proper frequency `ω•`.
    pub proper_frequency: Option<f64>,
    pub ambiguities: Vec<AmbiguousMatch>,
}

impl TermClassification {
    pub fn is_ambiguous(&self) -> bool {
        !self.ambiguities.is_empty()
    }

    /// The free term of largest modulus.
    pub fn largest_free(&self) -> Option<&SpectralTerm> {
        self.free
            .iter()
            .max_by(|a, b| a.amplitude.norm().total_cmp(&b.amplitude.norm()))
    }

    /// Modulus of the largest free amplitude, zero if there is none.
    pub fn largest_free_amplitude(&self) -> f64 {
        self.largest_free().map_or(0.0, |t| t.amplitude.norm())
    }

    /// Smallest forced amplitude modulus, if any forced term exists.
    pub fn smallest_forced_amplitude(&self) -> Option<f64> {
        self.forced
            .iter()
            .map(|f| f.term.amplitude.norm())
            .min_by(f64::total_cmp)
    }

    /// Sum of the forced terms at `t`, measured on the decomposition clock.
    pub fn forced_at(&self, t: f64) -> Complex64 {
        self.forced.iter().map(|f| f.term.at(t)).sum()
    }

    /// Sum of the free terms at `t`, measured on the decomposition clock.
    pub fn free_at(&self, t: f64) -> Complex64 {
        self.free.iter().map(|f| f.at(t)).sum()
    }
}

/// Splits the terms of `d` into those at a forcing combination `m·ν` and the
/// rest. The constant term is always forced.
pub fn classify(d: &Decomposition, basis: &ForcingBasis) -> TermClassification {
    let tol = basis.tolerance_for(d.half_span);
    let reach = d
        .terms
        .iter()
        .map(|t| t.frequency.abs())
        .fold(0.0, f64::max)
        + tol;
    let lattice = basis.lattice(reach);
    let mut out = TermClassification::default();
    for term in &d.terms {
        let mut near: Vec<(f64, &LatticePoint)> = lattice
            .iter()
            .map(|p| ((term.frequency - p.frequency).abs(), p))
            .filter(|(gap, _)| *gap <= tol)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        match near.first() {
            Some((_, point)) => {
                if near.len() > 1 {
                    out.ambiguities.push(AmbiguousMatch {
                        frequency: term.frequency,
                        candidates: near.iter().map(|(_, p)| p.combination.clone()).collect(),
                    });
                }
                out.forced.push(ForcedTerm {
                    term: *term,
                    combination: point.combination.clone(),
                });
            }
            None => out.free.push(*term),
        }
    }
    out.proper_frequency = out.largest_free().map(|t| t.frequency.abs());
    out
}

/// Frequencies of `d` with every forced term moved onto its exact lattice
/// value `m·ν`; free terms keep their measured frequency. Mirrored pairs
/// stay exactly mirrored.
pub fn lattice_frequencies(
    d: &Decomposition,
    c: &TermClassification,
    basis: &ForcingBasis,
) -> Vec<f64> {
    let exact = |m: &[i32]| -> f64 { m.iter().zip(&basis.nu).map(|(&k, v)| k as f64 * v).sum() };
    let mut out: Vec<f64> = d
        .terms
        .iter()
        .map(|t| {
            c.forced
                .iter()
                .find(|f| f.term.frequency == t.frequency)
                .map_or(t.frequency, |f| exact(&f.combination))
        })
        .collect();
    for i in 1..out.len() {
        let (prev, cur) = (d.terms[i - 1].frequency, d.terms[i].frequency);
        if cur != 0.0 && cur == -prev {
            out[i] = -out[i - 1];
        }
    }
    out
}

/// Threshold on the imaginary part of a forced reconstruction of a real
/// signal; anything larger means the conjugate pairing is broken.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-10;

/// The forced part `S` of the decomposition evaluated at model time 0.
pub fn forced_value_at_zero(c: &TermClassification, d: &Decomposition) -> Result<f64, NaffoError> {
    let z = c.forced_at(-d.origin);
    if z.im.abs() > IMAGINARY_RESIDUE_LIMIT * z.re.abs().max(1.0) {
        return Err(NaffoError::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

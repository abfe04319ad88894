//! Eigenvalue ladders of the self-adjoint operator `A` and the spectral
//! projectors `P_n` / `Q_n` used by every other module.
//!
//! Ladders are materialized eagerly up to a finite mode count `N`; all
//! downstream computations are Galerkin truncated, so lazy infinite sequences
//! would buy nothing. Multiplicities are represented by repetition (the
//! periodic-Laplacian generator emits each value twice).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("ladder needs at least 2 eigenvalues, got {0}")]
    TooFewModes(usize),
    #[error("generator parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("eigenvalues must be positive and nondecreasing (violated at position {index})")]
    NotNondecreasing { index: usize },
    #[error("materialized ladder disagrees with its generator at position {index}")]
    GeneratorInconsistent { index: usize },
    #[error("coefficient vector has length {got}, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("projector cut {n} exceeds mode count {total}")]
    CutOutOfRange { n: usize, total: usize },
    #[error("gap index {n} out of range 1..{max}")]
    GapIndexOutOfRange { n: usize, max: usize },
}

/// How a ladder's eigenvalues are produced.
///
/// `Power` is `λ_k = c·k^p` (the Weyl-asymptotics family), and
/// `PeriodicLaplacian` is `λ_k = ν·⌈k/2⌉²`, i.e. the eigenvalues `ν, ν, 4ν,
/// 4ν, 9ν, …` of `-ν ∂_x²` on `(-π, π)` with periodic boundary conditions and
/// the zero mode removed — each value appears with multiplicity two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Explicit { values: Vec<f64> },
    Power { c: f64, p: f64 },
    PeriodicLaplacian { nu: f64 },
}

impl Generator {
    fn value(&self, k: usize) -> Option<f64> {
        match self {
            Generator::Explicit { values } => values.get(k - 1).copied(),
            Generator::Power { c, p } => Some(c * (k as f64).powf(*p)),
            Generator::PeriodicLaplacian { nu } => {
                let m = k.div_ceil(2) as f64;
                Some(nu * m * m)
            }
        }
    }
}

/// Nondecreasing positive eigenvalues `λ_1 ≤ λ_2 ≤ … ≤ λ_N` of `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueLadder {
    values: Vec<f64>,
    generator: Generator,
}

impl EigenvalueLadder {
    /// Materializes a ladder of `n_modes` eigenvalues from a generator.
    pub fn new(generator: Generator, n_modes: usize) -> Result<Self, SpectraError> {
        if n_modes < 2 {
            return Err(SpectraError::TooFewModes(n_modes));
        }
        match &generator {
            Generator::Explicit { values } => {
                if values.len() < n_modes {
                    return Err(SpectraError::TooFewModes(values.len()));
                }
            }
            Generator::Power { c, p } => {
                for (name, value) in [("c", *c), ("p", *p)] {
                    if !(value > 0.0) {
                        return Err(SpectraError::NonPositiveParameter { name, value });
                    }
                }
            }
            Generator::PeriodicLaplacian { nu } => {
                if !(*nu > 0.0) {
                    return Err(SpectraError::NonPositiveParameter {
                        name: "nu",
                        value: *nu,
                    });
                }
            }
        }
        let values: Vec<f64> = (1..=n_modes)
            .map(|k| generator.value(k).expect("length checked above"))
            .collect();
        let ladder = Self { values, generator };
        ladder.check_invariants()?;
        Ok(ladder)
    }

    /// Convenience constructor for an explicit list.
    pub fn from_values(values: Vec<f64>) -> Result<Self, SpectraError> {
        let n = values.len();
        Self::new(Generator::Explicit { values }, n)
    }

    fn check_invariants(&self) -> Result<(), SpectraError> {
        if !(self.values[0] > 0.0) {
            return Err(SpectraError::NotNondecreasing { index: 0 });
        }
        for i in 1..self.values.len() {
            if self.values[i] < self.values[i - 1] {
                return Err(SpectraError::NotNondecreasing { index: i });
            }
        }
        for (i, &v) in self.values.iter().enumerate() {
            let gen = self.generator.value(i + 1).expect("in range");
            if (v - gen).abs() > 1e-14 * gen.abs().max(1.0) {
                return Err(SpectraError::GeneratorInconsistent { index: i });
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `λ_k`, 1-based as in the usual enumeration.
    pub fn lambda(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.values.last().expect("non-empty by construction")
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    /// The gap pair `(λ_n, λ_{n+1})` for a 1-based index `n < N`.
    pub fn gap_pair(&self, n: usize) -> Result<(f64, f64), SpectraError> {
        if n < 1 || n >= self.len() {
            return Err(SpectraError::GapIndexOutOfRange { n, max: self.len() });
        }
        Ok((self.values[n - 1], self.values[n]))
    }
}

/// Which part of the spectrum a projection keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Low,
    High,
}

/// The pair `P_n` (first `n` modes) / `Q_n = Id - P_n` acting on coefficient
/// vectors by zeroing the complementary entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpectralProjector {
    n: usize,
    total: usize,
}

impl SpectralProjector {
    pub fn new(n: usize, total: usize) -> Result<Self, SpectraError> {
        if n > total {
            return Err(SpectraError::CutOutOfRange { n, total });
        }
        Ok(Self { n, total })
    }

    pub fn cut(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Applies `P_n` (`Part::Low`) or `Q_n` (`Part::High`) to a coefficient
    /// vector of length `total`.
    pub fn project(&self, x: &[f64], part: Part) -> Result<Vec<f64>, SpectraError> {
        if x.len() != self.total {
            return Err(SpectraError::ShapeMismatch {
                got: x.len(),
                expected: self.total,
            });
        }
        let mut out = vec![0.0; self.total];
        let range = match part {
            Part::Low => 0..self.n,
            Part::High => self.n..self.total,
        };
        for i in range {
            out[i] = x[i];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_law_squares() {
        let ladder = EigenvalueLadder::new(Generator::Power { c: 1.0, p: 2.0 }, 4).unwrap();
        assert_eq!(ladder.values(), &[1.0, 4.0, 9.0, 16.0]);
    }

    #[test]
    fn periodic_laplacian_has_multiplicity_two() {
        let ladder = EigenvalueLadder::new(Generator::PeriodicLaplacian { nu: 1.0 }, 4).unwrap();
        assert_eq!(ladder.values(), &[1.0, 1.0, 4.0, 4.0]);
        let scaled = EigenvalueLadder::new(Generator::PeriodicLaplacian { nu: 0.5 }, 6).unwrap();
        assert_eq!(scaled.values(), &[0.5, 0.5, 2.0, 2.0, 4.5, 4.5]);
    }

    #[test]
    fn explicit_list_is_identity() {
        let ladder = EigenvalueLadder::from_values(vec![2.0, 2.0, 5.0]).unwrap();
        assert_eq!(ladder.values(), &[2.0, 2.0, 5.0]);
        assert_eq!(ladder.gap_pair(1).unwrap(), (2.0, 2.0));
        assert_eq!(ladder.gap_pair(2).unwrap(), (2.0, 5.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            EigenvalueLadder::new(Generator::Power { c: 1.0, p: 2.0 }, 1),
            Err(SpectraError::TooFewModes(1))
        ));
        assert!(matches!(
            EigenvalueLadder::new(Generator::Power { c: -1.0, p: 2.0 }, 4),
            Err(SpectraError::NonPositiveParameter { name: "c", .. })
        ));
        assert!(matches!(
            EigenvalueLadder::from_values(vec![3.0, 1.0]),
            Err(SpectraError::NotNondecreasing { index: 1 })
        ));
        assert!(matches!(
            EigenvalueLadder::from_values(vec![-1.0, 1.0]),
            Err(SpectraError::NotNondecreasing { index: 0 })
        ));
    }

    #[test]
    fn projection_examples() {
        let p = SpectralProjector::new(1, 3).unwrap();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(p.project(&x, Part::Low).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(p.project(&x, Part::High).unwrap(), vec![0.0, 2.0, 3.0]);
        assert!(matches!(
            p.project(&[1.0, 2.0], Part::Low),
            Err(SpectraError::ShapeMismatch {
                got: 2,
                expected: 3
            })
        ));
    }

    #[test]
    fn power_law_gaps_nondecreasing_for_p_at_least_one() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            let ladder = EigenvalueLadder::new(Generator::Power { c: 0.7, p }, 40).unwrap();
            let v = ladder.values();
            let mut prev_gap = v[1] - v[0];
            for i in 2..v.len() {
                let gap = v[i] - v[i - 1];
                assert!(gap >= prev_gap - 1e-9 * v[i], "p={p} gap shrank at {i}");
                prev_gap = gap;
            }
        }
    }

    proptest! {
        #[test]
        fn projector_complementary_and_idempotent(
            x in proptest::collection::vec(-1e3..1e3f64, 2..20),
            cut in 0usize..20,
        ) {
            let total = x.len();
            let n = cut.min(total);
            let p = SpectralProjector::new(n, total).unwrap();
            let low = p.project(&x, Part::Low).unwrap();
            let high = p.project(&x, Part::High).unwrap();
            for i in 0..total {
                prop_assert_eq!(low[i] + high[i], x[i]);
            }
            let low2 = p.project(&low, Part::Low).unwrap();
            let high2 = p.project(&high, Part::High).unwrap();
            prop_assert_eq!(low, low2);
            prop_assert_eq!(high, high2);
        }
    }
}

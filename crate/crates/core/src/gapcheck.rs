//! Spectral-gap conditions, all normalized to the single comparison
//! `lhs > L` against the nonlinearity's Lipschitz constant.
//!
//! Kinds and their left-hand sides for the gap pair `(λ_n, λ_{n+1})`:
//!
//! * `self_adjoint_general(β)` — `(λ_{n+1}-λ_n) / (λ_n^{-β/2} + λ_{n+1}^{-β/2})`,
//!   the classical condition for `Φ: H → H^β` Lipschitz, `β ∈ (-2, 0]`;
//! * `self_adjoint_zero` — `(λ_{n+1}-λ_n)/2` (the `λ_{n+1}-λ_n > 2L` form,
//!   normalized by dividing the 2 onto the left);
//! * `self_adjoint_half` — `√λ_{n+1} - √λ_n` (the `β = -1` case);
//! * `jordan_full` — `(λ_{n+1}-λ_n)² / (λ_{n+1}+λ_n+2√(λ_{n+1}²-λ_nλ_{n+1}+λ_n²))`,
//!   the sharp condition for the Jordan-block system with a general
//!   `ℍ → ℍ` nonlinearity; equals the reciprocal of the full operator norm;
//! * `jordan_truncated` — `(√λ_{n+1} - √λ_n)²` (the `√λ_{n+1}-√λ_n > √L`
//!   form with `√L` squared onto the left), sharp for `(0, F(u))`
//!   nonlinearities; reciprocal of the truncated operator norm;
//! * `jordan_sufficient` — `(√λ_{n+1} - √λ_n)²/3`, a simpler sufficient
//!   condition for `jordan_full` obtained from the two-sided bound of
//!   [`gap_equivalence_bounds`].
//!
//! Equal consecutive eigenvalues (multiplicity pairs in periodic ladders)
//! yield `lhs = 0` rather than an error, so such indices are simply never
//! admissible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linop;
use crate::spectra::{EigenvalueLadder, SpectraError};

#[derive(Debug, Error)]
pub enum GapError {
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("smoothness exponent beta must lie in (-2, 0], got {0}")]
    BetaOutOfRange(f64),
    #[error("Lipschitz constant must be positive, got {0}")]
    NonPositiveLipschitz(f64),
    #[error("eigenvalue pair must satisfy 0 < lambda_n <= lambda_np1, got ({0}, {1})")]
    InvalidPair(f64, f64),
}

/// Which spectral-gap condition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapConditionKind {
    SelfAdjointGeneral { beta: f64 },
    SelfAdjointZero,
    SelfAdjointHalf,
    JordanFull,
    JordanTruncated,
    JordanSufficient,
}

impl GapConditionKind {
    fn validate(&self) -> Result<(), GapError> {
        if let GapConditionKind::SelfAdjointGeneral { beta } = self {
            if !(*beta <= 0.0 && *beta > -2.0) {
                return Err(GapError::BetaOutOfRange(*beta));
            }
        }
        Ok(())
    }

    fn is_jordan(&self) -> bool {
        matches!(
            self,
            GapConditionKind::JordanFull
                | GapConditionKind::JordanTruncated
                | GapConditionKind::JordanSufficient
        )
    }
}

/// Outcome of one gap evaluation; `satisfied ⇔ lhs > L` strictly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralGapReport {
    pub n: usize,
    pub lhs: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub satisfied: bool,
    pub kind: GapConditionKind,
    /// Optimal tracking weight, present for the Jordan kinds.
    pub theta_star: Option<f64>,
}

fn lhs_for_pair(lambda_n: f64, lambda_np1: f64, kind: GapConditionKind) -> Result<f64, GapError> {
    kind.validate()?;
    if !(lambda_n > 0.0 && lambda_np1 >= lambda_n) {
        return Err(GapError::InvalidPair(lambda_n, lambda_np1));
    }
    let gap = lambda_np1 - lambda_n;
    Ok(match kind {
        GapConditionKind::SelfAdjointGeneral { beta } => {
            gap / (lambda_n.powf(-beta / 2.0) + lambda_np1.powf(-beta / 2.0))
        }
        GapConditionKind::SelfAdjointZero => gap / 2.0,
        GapConditionKind::SelfAdjointHalf => lambda_np1.sqrt() - lambda_n.sqrt(),
        GapConditionKind::JordanFull => {
            if gap == 0.0 {
                0.0
            } else {
                gap * gap / linop::gap_denominator(lambda_n, lambda_np1)
            }
        }
        GapConditionKind::JordanTruncated => {
            let r = lambda_np1.sqrt() - lambda_n.sqrt();
            r * r
        }
        GapConditionKind::JordanSufficient => {
            let r = lambda_np1.sqrt() - lambda_n.sqrt();
            r * r / 3.0
        }
    })
}

/// Left-hand side of the gap condition at index `n` (1-based, `n < N`),
/// normalized so that the condition is exactly `lhs > L`.
pub fn gap_lhs(
    ladder: &EigenvalueLadder,
    n: usize,
    kind: GapConditionKind,
) -> Result<f64, GapError> {
    let (lambda_n, lambda_np1) = ladder.gap_pair(n)?;
    lhs_for_pair(lambda_n, lambda_np1, kind)
}

/// Full report for one index, including the optimal weight for Jordan kinds.
pub fn report(
    ladder: &EigenvalueLadder,
    n: usize,
    lipschitz: f64,
    kind: GapConditionKind,
) -> Result<SpectralGapReport, GapError> {
    let lhs = gap_lhs(ladder, n, kind)?;
    let (lambda_n, lambda_np1) = ladder.gap_pair(n)?;
    let theta_star = if kind.is_jordan() && lambda_np1 > lambda_n {
        Some(match kind {
            GapConditionKind::JordanTruncated => {
                linop::optimal_theta_truncated(lambda_n, lambda_np1)
                    .expect("gap checked")
                    .value()
            }
            _ => linop::optimal_theta_full(lambda_n, lambda_np1)
                .expect("gap checked")
                .value(),
        })
    } else {
        None
    };
    Ok(SpectralGapReport {
        n,
        lhs,
        lipschitz,
        satisfied: lhs > lipschitz,
        kind,
        theta_star,
    })
}

/// All indices `n < N` whose gap condition holds strictly, ascending.
pub fn find_admissible_n(
    ladder: &EigenvalueLadder,
    lipschitz: f64,
    kind: GapConditionKind,
) -> Result<Vec<usize>, GapError> {
    if !(lipschitz > 0.0) {
        return Err(GapError::NonPositiveLipschitz(lipschitz));
    }
    kind.validate()?;
    let mut out = Vec::new();
    for n in 1..ladder.len() {
        if gap_lhs(ladder, n, kind)? > lipschitz {
            out.push(n);
        }
    }
    Ok(out)
}

/// The outer expressions of the two-sided bound
/// `(√λ_n + √λ_{n+1})² < λ_n + λ_{n+1} + 2√(λ_n² + λ_{n+1}² - λ_nλ_{n+1})
///  < 3(√λ_n + √λ_{n+1})²`,
/// strict whenever `λ_n < λ_{n+1}`. Returns `(lower, upper)`.
pub fn gap_equivalence_bounds(lambda_n: f64, lambda_np1: f64) -> Result<(f64, f64), GapError> {
    if !(lambda_n > 0.0 && lambda_np1 >= lambda_n) {
        return Err(GapError::InvalidPair(lambda_n, lambda_np1));
    }
    let root_sum = lambda_n.sqrt() + lambda_np1.sqrt();
    Ok((root_sum * root_sum, 3.0 * root_sum * root_sum))
}

/// The middle expression of the two-sided bound, evaluated naively (a second
/// algebraic route to the `jordan_full` gap denominator).
pub fn gap_equivalence_middle(lambda_n: f64, lambda_np1: f64) -> Result<f64, GapError> {
    if !(lambda_n > 0.0 && lambda_np1 >= lambda_n) {
        return Err(GapError::InvalidPair(lambda_n, lambda_np1));
    }
    Ok(lambda_n
        + lambda_np1
        + 2.0 * (lambda_n * lambda_n + lambda_np1 * lambda_np1 - lambda_n * lambda_np1).sqrt())
}

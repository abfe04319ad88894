//! Concrete transforms at desk scale: the viscous Burgers equation and the
//! scalar reaction-diffusion-advection equation on `(-π, π)`, both reduced
//! to Jordan-block systems with derivative-free nonlinearities via new
//! variables, plus the self-adjoint re-embedding `ũ = A^{-1/2}u` that trades
//! the Jordan cell for a smoothness-eating nonlinearity.

pub mod burgers;
pub mod expr;
pub mod field;
pub mod rda;

use thiserror::Error;

use crate::dynamics::StateVector;
use crate::spectra::EigenvalueLadder;

pub use burgers::{
    burgers_evolve, burgers_kwak_transform, burgers_system_evolve, BurgersKwakState,
    BurgersKwakTrajectory,
};
pub use expr::{ExprError, Polynomial};
pub use field::{Dealiaser, FourierField};
pub use rda::{rda_evolve, rda_jordan_evolve, rda_nonlinearity_f, RdaKwakState, RdaKwakTrajectory};

#[derive(Debug, Error)]
pub enum KwakError {
    #[error("viscosity must be positive, got {0}")]
    NonPositiveViscosity(f64),
    #[error("need at least 8 Fourier modes, got {0}")]
    TooFewModes(usize),
    #[error("field must carry the reality (conjugate-symmetry) flag")]
    RealityFlagRequired,
    #[error("the Burgers reaction term is a polynomial in u only; ux is not allowed")]
    ReactionUsesUx,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("time span must be forward-oriented, got [{0}, {1}]")]
    BackwardSpan(f64, f64),
    #[error("evolution diverged at step {step} (t = {time}): non-finite coefficients")]
    Diverged { step: usize, time: f64 },
    #[error("re-embedding requires a 2-component state, got {0}")]
    NotTwoComponent(usize),
    #[error("state has {got} modes, ladder has {expected}")]
    ModeCountMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A trajectory of one scalar field on a uniform grid.
#[derive(Debug, Clone)]
pub struct FieldTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<FourierField>,
}

impl FieldTrajectory {
    pub fn last(&self) -> &FourierField {
        self.fields.last().expect("non-empty")
    }
}

/// The re-embedding `(u, v) ↦ (ũ, v)` with `ũ_k = u_k/√λ_k`, which turns the
/// Jordan system `∂_t ξ + [[1,1],[0,1]]A ξ = (0, F(u))ᵗ` into the
/// self-adjoint one `∂_t ξ̃ + [[1,0],[0,1]]A ξ̃ = (-A^{1/2}v, F(A^{1/2}ũ))ᵗ`.
pub fn reembed(state: &StateVector, ladder: &EigenvalueLadder) -> Result<StateVector, KwakError> {
    scale_first_component(state, ladder, |lambda| 1.0 / lambda.sqrt())
}

/// Inverse of [`reembed`]: `u_k = √λ_k · ũ_k`.
pub fn reembed_inverse(
    state: &StateVector,
    ladder: &EigenvalueLadder,
) -> Result<StateVector, KwakError> {
    scale_first_component(state, ladder, |lambda| lambda.sqrt())
}

fn scale_first_component(
    state: &StateVector,
    ladder: &EigenvalueLadder,
    factor: impl Fn(f64) -> f64,
) -> Result<StateVector, KwakError> {
    if state.num_components() != 2 {
        return Err(KwakError::NotTwoComponent(state.num_components()));
    }
    if state.modes() != ladder.len() {
        return Err(KwakError::ModeCountMismatch {
            got: state.modes(),
            expected: ladder.len(),
        });
    }
    let mut out = state.clone();
    for k in 0..ladder.len() {
        out.component_mut(0)[k] = state.component(0)[k] * factor(ladder.lambda(k + 1));
    }
    Ok(out)
}

/// Verifies that conjugating the per-mode Jordan generator `λ[[1,1],[0,1]]`
/// by `diag(λ^{-1/2}, 1)` yields `diag(λ, λ)` plus the single coupling entry
/// `√λ` at `(1,2)` — the part that moves into the nonlinearity. Returns the
/// worst absolute deviation over the ladder.
pub fn reembedding_structure_residual(ladder: &EigenvalueLadder) -> f64 {
    let mut worst: f64 = 0.0;
    for &lambda in ladder.values() {
        let d = [lambda.powf(-0.5), 1.0];
        let m = [[lambda, lambda], [0.0, lambda]];
        for i in 0..2 {
            for j in 0..2 {
                let conjugated = d[i] * m[i][j] / d[j];
                let expected = if i == j {
                    lambda
                } else if i == 0 && j == 1 {
                    lambda.sqrt()
                } else {
                    0.0
                };
                worst = worst.max((conjugated - expected).abs());
            }
        }
    }
    worst
}

/// The re-embedded nonlinearity `𝔽(ũ, v) = (-A^{1/2}v, F(A^{1/2}ũ))ᵗ` as a
/// state map, for a coefficient-space `F: H → H`.
pub fn reembedded_nonlinearity<'a>(
    ladder: &'a EigenvalueLadder,
    f: impl Fn(&[f64]) -> Vec<f64> + 'a,
) -> impl Fn(&StateVector) -> StateVector + 'a {
    move |state: &StateVector| {
        let n = state.modes();
        let mut out = StateVector::zeros(2, n);
        let mut a_half_u = vec![0.0; n];
        for k in 0..n {
            let root = ladder.lambda(k + 1).sqrt();
            a_half_u[k] = root * state.component(0)[k];
            out.component_mut(0)[k] = -root * state.component(1)[k];
        }
        *out.component_mut(1) = f(&a_half_u);
        out
    }
}

/// `‖ξ‖_{ℍ_L} = (L‖u‖² + ‖v‖²)^{1/2}`, the norm in which the re-embedded
/// nonlinearity has Lipschitz constant exactly `√L`.
pub fn h_l_norm(state: &StateVector, lipschitz: f64) -> f64 {
    let u2: f64 = state.component(0).iter().map(|x| x * x).sum();
    let v2: f64 = state.component(1).iter().map(|x| x * x).sum();
    (lipschitz * u2 + v2).sqrt()
}

/// `A^{1/2}` applied componentwise: `ξ_k ↦ √λ_k ξ_k` in both components.
pub fn a_half(state: &StateVector, ladder: &EigenvalueLadder) -> StateVector {
    let mut out = state.clone();
    for c in 0..state.num_components() {
        for k in 0..state.modes() {
            out.component_mut(c)[k] = state.component(c)[k] * ladder.lambda(k + 1).sqrt();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reembed_scales_by_inverse_root() {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0, 9.0]).unwrap();
        let mut state = StateVector::zeros(2, 3);
        state.set_mode(1, &[1.0, 0.7]);
        let tilde = reembed(&state, &ladder).unwrap();
        assert_relative_eq!(tilde.component(0)[1], 0.5, max_relative = 1e-15);
        assert_relative_eq!(tilde.component(1)[1], 0.7, max_relative = 1e-15);
        let back = reembed_inverse(&tilde, &ladder).unwrap();
        assert!(back.sub(&state).norm_h() < 1e-14);
    }

    #[test]
    fn structure_residual_vanishes() {
        let ladder =
            EigenvalueLadder::new(crate::spectra::Generator::Power { c: 0.3, p: 2.0 }, 20).unwrap();
        assert!(reembedding_structure_residual(&ladder) < 1e-12);
    }

    #[test]
    fn reembedded_lipschitz_bounded_by_root_l() {
        // ratio ‖𝔽ξ₁-𝔽ξ₂‖_{ℍ_L} / ‖A^{1/2}(ξ₁-ξ₂)‖_{ℍ_L} ≤ √L
        let ladder = EigenvalueLadder::from_values(vec![1.0, 2.0, 5.0, 10.0]).unwrap();
        let l = 0.6;
        let f = move |u: &[f64]| -> Vec<f64> {
            // exact Lipschitz constant l: rotate-and-saturate
            let n = u.len();
            (0..n).map(|i| l * u[(i + 1) % n].tanh()).collect()
        };
        let nl = reembedded_nonlinearity(&ladder, f);
        let mut rng = StdRng::seed_from_u64(83);
        for _ in 0..200 {
            let mut a = StateVector::zeros(2, 4);
            let mut b = StateVector::zeros(2, 4);
            for k in 0..4 {
                a.set_mode(
                    k,
                    &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                );
                b.set_mode(
                    k,
                    &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                );
            }
            let num = h_l_norm(&nl(&a).sub(&nl(&b)), l);
            let den = h_l_norm(&a_half(&a.sub(&b), &ladder), l);
            if den > 1e-12 {
                assert!(
                    num / den <= l.sqrt() * (1.0 + 1e-6),
                    "ratio {} vs √L {}",
                    num / den,
                    l.sqrt()
                );
            }
        }
    }

    #[test]
    fn rejects_wrong_shapes() {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0]).unwrap();
        let three = StateVector::zeros(3, 2);
        assert!(matches!(
            reembed(&three, &ladder),
            Err(KwakError::NotTwoComponent(3))
        ));
        let wrong = StateVector::zeros(2, 5);
        assert!(matches!(
            reembed(&wrong, &ladder),
            Err(KwakError::ModeCountMismatch { .. })
        ));
    }
}

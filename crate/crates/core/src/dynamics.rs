//! Exact propagators for Jordan-block linear parts and an exponential time
//! integrator for the Galerkin-truncated semilinear system
//! `∂_t ξ + 𝔸ξ = 𝔽(ξ)` with `𝔸 = J·A` block-diagonal over modes.
//!
//! Per mode `k` the linear generator is `λ_k J` with `J = I + N`, `N`
//! strictly upper triangular and nilpotent, so
//! `exp(-tλJ) = e^{-tλ} Σ_j (-tλ)^j N^j / j!` is a finite, exact sum. The
//! stiff linear part is therefore integrated exactly regardless of `λ_k t`;
//! only the nonlinearity is quadratured (exponential Euler, order 1, or the
//! default exponential midpoint, order 2).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::spectra::{EigenvalueLadder, Part, SpectralProjector};
use crate::util::exp_moments;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("block pattern must be upper triangular with unit diagonal")]
    InvalidPattern,
    #[error("jordan size {0} not supported (expected 2 or 3)")]
    UnsupportedSize(usize),
    #[error(
        "state has {got} components of length {len}, system expects {expected_m}x{expected_n}"
    )]
    StateShape {
        got: usize,
        len: usize,
        expected_m: usize,
        expected_n: usize,
    },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("time span must be forward-oriented, got [{0}, {1}]")]
    BackwardSpan(f64, f64),
    #[error("integration diverged at step {step} (t = {time}): non-finite state")]
    Diverged { step: usize, time: f64 },
    #[error("need at least 3 grid points for the second-order residual, got {0}")]
    TooFewPoints(usize),
    #[error("second-order reduction requires m = 2 and a lower-triangular nonlinearity")]
    NotSecondOrderReducible,
}

/// Upper-triangular 0/1 pattern with unit diagonal; `J` in `𝔸 = J·A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPattern {
    mat: DMatrix<f64>,
}

impl BlockPattern {
    /// Builds a pattern from a 0/1 mask; rejects anything that is not
    /// upper triangular with unit diagonal.
    pub fn from_mask(rows: &[&[u8]]) -> Result<Self, DynamicsError> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(DynamicsError::InvalidPattern);
        }
        let mut mat = DMatrix::zeros(m, m);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > 1 || (i == j && v != 1) || (i > j && v != 0) {
                    return Err(DynamicsError::InvalidPattern);
                }
                mat[(i, j)] = v as f64;
            }
        }
        Ok(Self { mat })
    }

    /// The standard Jordan chain `I + superdiagonal` of size `m`.
    pub fn jordan(m: usize) -> Self {
        let mut mat = DMatrix::identity(m, m);
        for i in 0..m - 1 {
            mat[(i, i + 1)] = 1.0;
        }
        Self { mat }
    }

    /// The 3×3 pattern `[[1,0,0],[0,1,1],[0,0,1]]` arising from the iterated
    /// transform of the viscous Burgers equation.
    pub fn burgers3() -> Self {
        Self::from_mask(&[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]]).expect("static mask is valid")
    }

    pub fn size(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Strictly upper (nilpotent) part `N = J - I`.
    pub fn nilpotent(&self) -> DMatrix<f64> {
        &self.mat - DMatrix::<f64>::identity(self.size(), self.size())
    }
}

/// State `ξ = (u, v, …)ᵗ`: `m` coefficient vectors of length `N` each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVector {
    components: Vec<Vec<f64>>,
}

impl StateVector {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            components: vec![vec![0.0; n]; m],
        }
    }

    pub fn from_components(components: Vec<Vec<f64>>) -> Self {
        assert!(!components.is_empty());
        let n = components[0].len();
        assert!(components.iter().all(|c| c.len() == n));
        Self { components }
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn modes(&self) -> usize {
        self.components[0].len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.components[i]
    }

    /// Entries of mode `k` (0-based) across components.
    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[k]).collect()
    }

    pub fn set_mode(&mut self, k: usize, values: &[f64]) {
        for (c, &v) in self.components.iter_mut().zip(values) {
            c[k] = v;
        }
    }

    /// `‖ξ‖_ℍ`, the root of the summed squared component norms.
    pub fn norm_h(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|x| x * s).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.num_components(), other.num_components());
        assert_eq!(self.modes(), other.modes());
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
                .collect(),
        }
    }

    /// Applies `P_n` / `Q_n` componentwise.
    pub fn project(&self, cut: usize, part: Part) -> Self {
        let proj = SpectralProjector::new(cut.min(self.modes()), self.modes())
            .expect("cut clamped to mode count");
        Self {
            components: self
                .components
                .iter()
                .map(|c| proj.project(c, part).expect("length matches"))
                .collect(),
        }
    }

    /// Flattens to `(component-major)` layout: all of `u`, then all of `v`, …
    pub fn flatten(&self) -> Vec<f64> {
        self.components.iter().flatten().copied().collect()
    }

    pub fn unflatten(m: usize, n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), m * n);
        Self {
            components: (0..m).map(|i| data[i * n..(i + 1) * n].to_vec()).collect(),
        }
    }
}

/// Structural form of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityForm {
    /// Arbitrary Lipschitz map `ℍ → ℍ`.
    General,
    /// `ξ ↦ (0, …, 0, F(u))ᵗ`: only the last component is forced, and only
    /// through the first.
    LowerTriangular,
}

/// A globally Lipschitz nonlinearity `𝔽` with its constant `L`.
#[derive(Clone)]
pub struct NonlinearitySpec {
    lipschitz: f64,
    form: NonlinearityForm,
    eval: Arc<dyn Fn(&StateVector) -> StateVector + Send + Sync>,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("lipschitz", &self.lipschitz)
            .field("form", &self.form)
            .finish_non_exhaustive()
    }
}

impl NonlinearitySpec {
    pub fn general(
        lipschitz: f64,
        eval: impl Fn(&StateVector) -> StateVector + Send + Sync + 'static,
    ) -> Self {
        Self {
            lipschitz,
            form: NonlinearityForm::General,
            eval: Arc::new(eval),
        }
    }

    /// Wraps `F: u ↦ F(u)` as `ξ ↦ (0, …, 0, F(u))ᵗ`.
    pub fn lower_triangular(
        lipschitz: f64,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let eval = move |xi: &StateVector| {
            let m = xi.num_components();
            let fu = f(xi.component(0));
            assert_eq!(fu.len(), xi.modes(), "F must preserve the mode count");
            let mut out = StateVector::zeros(m, xi.modes());
            *out.component_mut(m - 1) = fu;
            out
        };
        Self {
            lipschitz,
            form: NonlinearityForm::LowerTriangular,
            eval: Arc::new(eval),
        }
    }

    pub fn zero() -> Self {
        Self::general(0.0, |xi| {
            StateVector::zeros(xi.num_components(), xi.modes())
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn form(&self) -> NonlinearityForm {
        self.form
    }

    pub fn eval(&self, xi: &StateVector) -> StateVector {
        (self.eval)(xi)
    }

    /// Largest difference-quotient `‖𝔽ξ₁-𝔽ξ₂‖/‖ξ₁-ξ₂‖` over sample pairs;
    /// the declared constant must dominate it up to `1 + 1e-8`.
    pub fn empirical_lipschitz(&self, samples: &[(StateVector, StateVector)]) -> f64 {
        samples
            .iter()
            .filter(|(a, b)| a.sub(b).norm_h() > 0.0)
            .map(|(a, b)| self.eval(a).sub(&self.eval(b)).norm_h() / a.sub(b).norm_h())
            .fold(0.0, f64::max)
    }
}

/// A Galerkin-truncated Jordan-block system: ladder, block pattern and
/// nonlinearity. State dimension is `m·N`.
#[derive(Debug, Clone)]
pub struct JordanSystem {
    ladder: EigenvalueLadder,
    pattern: BlockPattern,
    nonlinearity: NonlinearitySpec,
}

impl JordanSystem {
    pub fn new(
        ladder: EigenvalueLadder,
        pattern: BlockPattern,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self, DynamicsError> {
        let m = pattern.size();
        if !(2..=3).contains(&m) {
            return Err(DynamicsError::UnsupportedSize(m));
        }
        Ok(Self {
            ladder,
            pattern,
            nonlinearity,
        })
    }

    /// The standard `m = 2` system `𝔸 = [[1,1],[0,1]]A`.
    pub fn standard(ladder: EigenvalueLadder, nonlinearity: NonlinearitySpec) -> Self {
        Self::new(ladder, BlockPattern::jordan(2), nonlinearity).expect("m = 2 is supported")
    }

    pub fn ladder(&self) -> &EigenvalueLadder {
        &self.ladder
    }

    pub fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn with_nonlinearity(&self, nonlinearity: NonlinearitySpec) -> Self {
        Self {
            nonlinearity,
            ..self.clone()
        }
    }

    pub fn jordan_size(&self) -> usize {
        self.pattern.size()
    }

    pub fn modes(&self) -> usize {
        self.ladder.len()
    }

    pub fn check_state(&self, xi: &StateVector) -> Result<(), DynamicsError> {
        if xi.num_components() != self.jordan_size() || xi.modes() != self.modes() {
            return Err(DynamicsError::StateShape {
                got: xi.num_components(),
                len: xi.modes(),
                expected_m: self.jordan_size(),
                expected_n: self.modes(),
            });
        }
        Ok(())
    }
}

/// `exp(-tλJ)` for the pattern matrix `J`, exact via the nilpotent sum.
/// Valid for any `λ ≥ 0` and any real `t` (negative `t` gives the backward
/// propagator).
pub fn block_propagator(lambda: f64, t: f64, pattern: &BlockPattern) -> DMatrix<f64> {
    let m = pattern.size();
    let nil = pattern.nilpotent();
    let mut sum = DMatrix::<f64>::identity(m, m);
    let mut pow = DMatrix::<f64>::identity(m, m);
    let mut fact = 1.0;
    for j in 1..m {
        pow = &pow * &nil;
        fact *= j as f64;
        sum += &pow * ((-t * lambda).powi(j as i32) / fact);
    }
    sum * (-t * lambda).exp()
}

/// `∫_0^h exp(-σλJ) dσ`, the first φ-matrix, exact via the moment integrals.
pub(crate) fn block_phi0(lambda: f64, h: f64, pattern: &BlockPattern) -> DMatrix<f64> {
    let m = pattern.size();
    let nil = pattern.nilpotent();
    let moments = exp_moments(lambda, h, m);
    let mut sum = DMatrix::<f64>::zeros(m, m);
    let mut pow = DMatrix::<f64>::identity(m, m);
    let mut fact = 1.0;
    for j in 0..m {
        if j > 0 {
            pow = &pow * &nil;
            fact *= j as f64;
        }
        sum += &pow * ((-lambda).powi(j as i32) / fact * moments[j]);
    }
    sum
}

/// `∫_0^h σ·exp(-σλJ) dσ`, used for linear-in-time forcing segments.
pub(crate) fn block_phi1(lambda: f64, h: f64, pattern: &BlockPattern) -> DMatrix<f64> {
    let m = pattern.size();
    let nil = pattern.nilpotent();
    let moments = exp_moments(lambda, h, m + 1);
    let mut sum = DMatrix::<f64>::zeros(m, m);
    let mut pow = DMatrix::<f64>::identity(m, m);
    let mut fact = 1.0;
    for j in 0..m {
        if j > 0 {
            pow = &pow * &nil;
            fact *= j as f64;
        }
        sum += &pow * ((-lambda).powi(j as i32) / fact * moments[j + 1]);
    }
    sum
}

/// Time-integration scheme for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// First order: freeze `𝔽` at the left endpoint.
    ExponentialEuler,
    /// Second order: midpoint quadrature of the variation-of-constants
    /// integral with an Euler predictor for the midpoint state.
    ExponentialMidpoint,
}

impl Integrator {
    pub fn order(&self) -> u8 {
        match self {
            Integrator::ExponentialEuler => 1,
            Integrator::ExponentialMidpoint => 2,
        }
    }
}

/// A forward trajectory on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub order: u8,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    /// State at time `t` by linear interpolation (clamped to the span).
    pub fn interpolate(&self, t: f64) -> StateVector {
        let t0 = self.times[0];
        let dt = self.dt();
        let pos = ((t - t0) / dt).clamp(0.0, (self.times.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.times.len() - 2);
        let w = pos - i as f64;
        self.states[i]
            .scale(1.0 - w)
            .add(&self.states[i + 1].scale(w))
    }
}

/// Default step: resolves the fastest nonlinear interaction while the stiff
/// linear part is handled exactly.
pub fn default_dt(ladder: &EigenvalueLadder) -> f64 {
    0.1 / ladder.lambda_max()
}

/// Integrates `∂_t ξ + 𝔸ξ = 𝔽(ξ)` over `t_span` with step `dt` (uniformized
/// to divide the span). The linear part is exact per mode; the integrator
/// order is recorded in the output.
pub fn evolve(
    system: &JordanSystem,
    xi0: &StateVector,
    t_span: (f64, f64),
    dt: f64,
    scheme: Integrator,
) -> Result<Trajectory, DynamicsError> {
    system.check_state(xi0)?;
    if !(dt > 0.0) {
        return Err(DynamicsError::NonPositiveStep(dt));
    }
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(DynamicsError::BackwardSpan(t0, t1));
    }
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let m = system.jordan_size();
    let n = system.modes();
    let pattern = system.pattern();

    // per-mode operator tables, computed once for the uniform step
    let mut full = Vec::with_capacity(n);
    let mut half = Vec::with_capacity(n);
    let mut phi_half = Vec::with_capacity(n);
    let mut phi_full = Vec::with_capacity(n);
    for k in 1..=n {
        let lambda = system.ladder().lambda(k);
        full.push(block_propagator(lambda, h, pattern));
        half.push(block_propagator(lambda, h / 2.0, pattern));
        phi_half.push(block_phi0(lambda, h / 2.0, pattern));
        phi_full.push(block_phi0(lambda, h, pattern));
    }

    let apply_modewise = |ops: &[DMatrix<f64>], xi: &StateVector| -> StateVector {
        let mut out = StateVector::zeros(m, n);
        for k in 0..n {
            let v = DVector::from_vec(xi.mode(k));
            let w = &ops[k] * v;
            out.set_mode(k, w.as_slice());
        }
        out
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(xi0.clone());
    let mut xi = xi0.clone();
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        xi = match scheme {
            Integrator::ExponentialEuler => {
                let f = system.nonlinearity().eval(&xi);
                apply_modewise(&full, &xi).add(&apply_modewise(&phi_full, &f))
            }
            Integrator::ExponentialMidpoint => {
                let f0 = system.nonlinearity().eval(&xi);
                let mid = apply_modewise(&half, &xi).add(&apply_modewise(&phi_half, &f0));
                let fm = system.nonlinearity().eval(&mid);
                apply_modewise(&full, &xi).add(&apply_modewise(&half, &fm).scale(h))
            }
        };
        if !xi.is_finite() {
            return Err(DynamicsError::Diverged {
                step: step + 1,
                time: t + h,
            });
        }
        times.push(t0 + (step + 1) as f64 * h);
        states.push(xi.clone());
    }
    Ok(Trajectory {
        times,
        states,
        order: scheme.order(),
    })
}

/// Maximum residual of the second-order reduction
/// `A⁻¹∂_t²u + 2∂_t u + Au = -F(u)` over interior grid points, using
/// centered second-order differences for the time derivatives.
///
/// Only meaningful for `m = 2` systems with a lower-triangular nonlinearity,
/// where eliminating `v` from `∂_t ξ + 𝔸ξ = (0, F(u))ᵗ` yields exactly this
/// damped second-order equation.
pub fn second_order_residual(
    system: &JordanSystem,
    trajectory: &Trajectory,
) -> Result<f64, DynamicsError> {
    if system.jordan_size() != 2
        || system.nonlinearity().form() != NonlinearityForm::LowerTriangular
    {
        return Err(DynamicsError::NotSecondOrderReducible);
    }
    let pts = trajectory.states.len();
    if pts < 3 {
        return Err(DynamicsError::TooFewPoints(pts));
    }
    let dt = trajectory.dt();
    let n = system.modes();
    let mut worst: f64 = 0.0;
    for j in 1..pts - 1 {
        let um = trajectory.states[j - 1].component(0);
        let u0 = trajectory.states[j].component(0);
        let up = trajectory.states[j + 1].component(0);
        let f = system.nonlinearity().eval(&trajectory.states[j]);
        let fu = f.component(1);
        let mut sq = 0.0;
        for k in 0..n {
            let lambda = system.ladder().lambda(k + 1);
            let d1 = (up[k] - um[k]) / (2.0 * dt);
            let d2 = (up[k] - 2.0 * u0[k] + um[k]) / (dt * dt);
            let r = d2 / lambda + 2.0 * d1 + lambda * u0[k] + fu[k];
            sq += r * r;
        }
        worst = worst.max(sq.sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn propagator_identity_at_t_zero() {
        for pattern in [
            BlockPattern::jordan(2),
            BlockPattern::jordan(3),
            BlockPattern::burgers3(),
        ] {
            let p = block_propagator(3.7, 0.0, &pattern);
            assert_eq!(p, DMatrix::identity(pattern.size(), pattern.size()));
        }
    }

    #[test]
    fn propagator_m2_closed_form() {
        // v_k(t) = v_k(0) e^{-λt}, u_k(t) = (u_k(0) - λ t v_k(0)) e^{-λt}
        let p = block_propagator(1.0, 1.0, &BlockPattern::jordan(2));
        let e = (-1.0f64).exp();
        assert_relative_eq!(p[(0, 0)], e, max_relative = 1e-15);
        assert_relative_eq!(p[(0, 1)], -e, max_relative = 1e-15);
        assert_relative_eq!(p[(1, 0)], 0.0, max_relative = 1e-15);
        assert_relative_eq!(p[(1, 1)], e, max_relative = 1e-15);
    }

    #[test]
    fn propagator_matches_generic_expm() {
        let pat = BlockPattern::jordan(3);
        let p = block_propagator(2.0, 0.3, &pat);
        let generic = (pat.matrix() * (-0.6)).exp();
        assert!(max_abs_diff(&p, &generic) < 1e-12);

        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..200 {
            let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
            let t = rng.random_range(0.0..3.0_f64.min(8.0 / lambda));
            let pattern = match rng.random_range(0..3) {
                0 => BlockPattern::jordan(2),
                1 => BlockPattern::jordan(3),
                _ => BlockPattern::burgers3(),
            };
            let ours = block_propagator(lambda, t, &pattern);
            let generic = (pattern.matrix() * (-t * lambda)).exp();
            let scale = generic.abs().max().max(1.0);
            assert!(
                max_abs_diff(&ours, &generic) <= 1e-12 * scale,
                "λ={lambda}, t={t}"
            );
        }
    }

    #[test]
    fn propagator_group_law() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..200 {
            let lambda = 10f64.powf(rng.random_range(-1.0..1.5));
            let s = rng.random_range(0.0..2.0 / lambda);
            let t = rng.random_range(0.0..2.0 / lambda);
            let pattern = if rng.random_range(0..2) == 0 {
                BlockPattern::jordan(2)
            } else {
                BlockPattern::jordan(3)
            };
            let combined = block_propagator(lambda, s + t, &pattern);
            let product =
                block_propagator(lambda, s, &pattern) * block_propagator(lambda, t, &pattern);
            let scale = combined.abs().max().max(1.0);
            assert!(max_abs_diff(&combined, &product) <= 1e-13 * scale);
        }
    }

    #[test]
    fn phi0_matches_quadrature() {
        let pat = BlockPattern::jordan(3);
        let (lambda, h) = (1.7, 0.4);
        let phi = block_phi0(lambda, h, &pat);
        // Simpson on each entry of exp(-σλJ)
        let nq = 4000;
        let dx = h / nq as f64;
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        for i in 0..=nq {
            let w = if i == 0 || i == nq {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += block_propagator(lambda, i as f64 * dx, &pat) * w;
        }
        acc *= dx / 3.0;
        assert!(max_abs_diff(&phi, &acc) < 1e-12);
    }

    fn small_system(l: f64) -> JordanSystem {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0, 9.0]).unwrap();
        let nl = NonlinearitySpec::general(l, move |xi: &StateVector| {
            // componentwise saturating map, global Lipschitz constant l
            StateVector::from_components(
                (0..xi.num_components())
                    .map(|i| xi.component(i).iter().map(|x| l * x.tanh()).collect())
                    .collect(),
            )
        });
        JordanSystem::standard(ladder, nl)
    }

    #[test]
    fn evolve_linear_case_is_exact() {
        let system = small_system(0.0).with_nonlinearity(NonlinearitySpec::zero());
        let mut xi0 = StateVector::zeros(2, 3);
        xi0.set_mode(0, &[1.0, -0.5]);
        xi0.set_mode(1, &[0.3, 0.7]);
        xi0.set_mode(2, &[-0.2, 0.1]);
        let traj = evolve(
            &system,
            &xi0,
            (0.0, 1.0),
            0.05,
            Integrator::ExponentialMidpoint,
        )
        .unwrap();
        let t_end = *traj.times.last().unwrap();
        for k in 0..3 {
            let lambda = system.ladder().lambda(k + 1);
            let p = block_propagator(lambda, t_end, &BlockPattern::jordan(2));
            let expect = &p * DVector::from_vec(xi0.mode(k));
            let got = traj.last().mode(k);
            for i in 0..2 {
                assert_relative_eq!(got[i], expect[i], max_relative = 1e-13, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn evolve_decay_bound() {
        let system = small_system(0.0).with_nonlinearity(NonlinearitySpec::zero());
        let mut rng = StdRng::seed_from_u64(41);
        let mut xi0 = StateVector::zeros(2, 3);
        for k in 0..3 {
            xi0.set_mode(
                k,
                &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            );
        }
        let traj = evolve(
            &system,
            &xi0,
            (0.0, 2.0),
            0.01,
            Integrator::ExponentialMidpoint,
        )
        .unwrap();
        let (lmin, lmax) = (1.0, 9.0);
        let norm0 = xi0.norm_h();
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let bound = (1.0 + lmax * t) * (-lmin * t).exp() * norm0;
            assert!(state.norm_h() <= bound * (1.0 + 1e-12), "t = {t}");
        }
    }

    #[test]
    fn step_halving_shows_integrator_order() {
        let system = small_system(0.4);
        let mut xi0 = StateVector::zeros(2, 3);
        xi0.set_mode(0, &[0.8, -0.3]);
        xi0.set_mode(1, &[0.2, 0.5]);
        xi0.set_mode(2, &[-0.1, 0.4]);
        let t_end = 0.5;
        let err = |scheme: Integrator, dt: f64| {
            let coarse = evolve(&system, &xi0, (0.0, t_end), dt, scheme).unwrap();
            let fine = evolve(&system, &xi0, (0.0, t_end), dt / 8.0, scheme).unwrap();
            coarse.last().sub(fine.last()).norm_h()
        };
        for (scheme, lo, hi) in [
            (Integrator::ExponentialEuler, 1.6, 2.6),
            (Integrator::ExponentialMidpoint, 3.0, 5.5),
        ] {
            let e1 = err(scheme, 0.02);
            let e2 = err(scheme, 0.01);
            let ratio = e1 / e2;
            assert!(
                ratio > lo && ratio < hi,
                "{scheme:?}: ratio {ratio}, e1={e1}, e2={e2}"
            );
        }
    }

    #[test]
    fn divergence_is_reported() {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0]).unwrap();
        // badly non-Lipschitz forcing to push the state to overflow
        let nl = NonlinearitySpec::general(1.0, |xi: &StateVector| xi.scale(1e8));
        let system = JordanSystem::standard(ladder, nl);
        let mut xi0 = StateVector::zeros(2, 2);
        xi0.set_mode(0, &[1.0, 0.0]);
        let res = evolve(
            &system,
            &xi0,
            (0.0, 10.0),
            0.1,
            Integrator::ExponentialEuler,
        );
        assert!(matches!(res, Err(DynamicsError::Diverged { .. })));
    }

    fn lower_triangular_system(l: f64) -> JordanSystem {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0, 9.0]).unwrap();
        let nl = NonlinearitySpec::lower_triangular(l, move |u: &[f64]| {
            u.iter().map(|x| l * x.sin()).collect()
        });
        JordanSystem::standard(ladder, nl)
    }

    #[test]
    fn second_order_residual_converges() {
        let system = lower_triangular_system(0.3);
        let mut xi0 = StateVector::zeros(2, 3);
        xi0.set_mode(0, &[0.9, -0.2]);
        xi0.set_mode(1, &[0.1, 0.6]);
        xi0.set_mode(2, &[0.0, 0.2]);
        let res = |dt: f64| {
            let traj = evolve(
                &system,
                &xi0,
                (0.0, 0.8),
                dt,
                Integrator::ExponentialMidpoint,
            )
            .unwrap();
            second_order_residual(&system, &traj).unwrap()
        };
        let r1 = res(0.02);
        let r2 = res(0.01);
        let ratio = r1 / r2;
        assert!(ratio > 3.0 && ratio < 5.5, "ratio {ratio}");
        // linear case: residual comes from differencing the exact flow only
        let linear = system.with_nonlinearity(NonlinearitySpec::lower_triangular(0.0, |u| {
            vec![0.0; u.len()]
        }));
        let l1 = {
            let traj = evolve(
                &linear,
                &xi0,
                (0.0, 0.8),
                0.02,
                Integrator::ExponentialMidpoint,
            )
            .unwrap();
            second_order_residual(&linear, &traj).unwrap()
        };
        let l2 = {
            let traj = evolve(
                &linear,
                &xi0,
                (0.0, 0.8),
                0.01,
                Integrator::ExponentialMidpoint,
            )
            .unwrap();
            second_order_residual(&linear, &traj).unwrap()
        };
        let lr = l1 / l2;
        assert!(lr > 3.0 && lr < 5.0, "linear ratio {lr}");
    }

    #[test]
    fn v_equation_residual_for_lower_triangular() {
        // for (0, F(u))ᵗ forcing the v-equation is ∂_t v + Av = F(u)
        let system = lower_triangular_system(0.25);
        let mut xi0 = StateVector::zeros(2, 3);
        xi0.set_mode(0, &[0.5, 0.1]);
        xi0.set_mode(1, &[-0.3, 0.4]);
        xi0.set_mode(2, &[0.2, -0.1]);
        let dt = 0.005;
        let traj = evolve(
            &system,
            &xi0,
            (0.0, 0.6),
            dt,
            Integrator::ExponentialMidpoint,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for j in 1..traj.states.len() - 1 {
            let f = system.nonlinearity().eval(&traj.states[j]);
            for k in 0..3 {
                let lambda = system.ladder().lambda(k + 1);
                let vm = traj.states[j - 1].component(1)[k];
                let v0 = traj.states[j].component(1)[k];
                let vp = traj.states[j + 1].component(1)[k];
                let d1 = (vp - vm) / (2.0 * dt);
                let r = d1 + lambda * v0 - f.component(1)[k];
                worst = worst.max(r.abs());
            }
        }
        assert!(worst < 5e-4, "v-equation residual {worst}");
    }

    #[test]
    fn pattern_validation() {
        assert!(BlockPattern::from_mask(&[&[1, 1], &[1, 1]]).is_err());
        assert!(BlockPattern::from_mask(&[&[0, 1], &[0, 1]]).is_err());
        assert!(BlockPattern::from_mask(&[&[1, 1], &[0, 1]]).is_ok());
        let sys = JordanSystem::new(
            EigenvalueLadder::from_values(vec![1.0, 2.0]).unwrap(),
            BlockPattern::jordan(4),
            NonlinearitySpec::zero(),
        );
        assert!(matches!(sys, Err(DynamicsError::UnsupportedSize(4))));
    }

    #[test]
    fn empirical_lipschitz_respects_declared_bound() {
        let nl = NonlinearitySpec::general(0.5, |xi: &StateVector| {
            StateVector::from_components(
                (0..xi.num_components())
                    .map(|i| xi.component(i).iter().map(|x| 0.5 * x.tanh()).collect())
                    .collect(),
            )
        });
        let mut rng = StdRng::seed_from_u64(43);
        let samples: Vec<_> = (0..100)
            .map(|_| {
                let mut a = StateVector::zeros(2, 3);
                let mut b = StateVector::zeros(2, 3);
                for k in 0..3 {
                    a.set_mode(
                        k,
                        &[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
                    );
                    b.set_mode(
                        k,
                        &[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
                    );
                }
                (a, b)
            })
            .collect();
        let emp = nl.empirical_lipschitz(&samples);
        assert!(emp <= nl.lipschitz() * (1.0 + 1e-8), "measured {emp}");
    }
}

//! Inertial-manifold construction by the Perron method.
//!
//! For a gap index `n` with `λ_n < θ < λ_{n+1}`, the backward problem
//! `∂_t ξ + 𝔸ξ = 𝔽(ξ)`, `P_n ξ(0) = ξ₀⁺`, `t ≤ 0`, is equivalent to the
//! fixed-point problem `ξ = 𝕃𝔽(ξ) + 𝕋ξ₀⁺` in the weighted space
//! `L²_{e^{θt}}(ℝ₋, ℍ)`. When `L·‖𝕃‖ < 1` the right-hand side contracts,
//! the manifold map is `M(ξ₀⁺) = Q_n ξ*(0)`, and every forward solution is
//! tracked by a manifold solution at rate `θ`.
//!
//! Discretization: a uniform grid on a truncated interval, trapezoidal
//! weighted norms, and variation-of-constants quadrature that treats the
//! Jordan propagator exactly and the forcing as piecewise linear. High modes
//! (`k > n`, where `λ_k > θ`) integrate forward from zero data at the left
//! end; low modes integrate backward from zero data at the right end, which
//! realizes the boundary condition `P_n(ξ - 𝕋ξ₀⁺)(0) = 0` on `ℝ₋` and the
//! decay requirement on the full line.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{
    self, block_phi0, block_phi1, block_propagator, DynamicsError, Integrator, JordanSystem,
    NonlinearityForm, StateVector, Trajectory,
};
use crate::linop::{self, LinopError, NormMode, WeightParameter};
use crate::spectra::{Part, SpectraError};
use crate::util::linear_fit;

#[derive(Debug, Error)]
pub enum PerronError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("Perron solves require Jordan size 2 (norm theory), got {0}")]
    UnsupportedJordanSize(usize),
    #[error("weight {theta} does not lie strictly inside the gap ({lambda_n}, {lambda_np1})")]
    WeightOutsideGap {
        theta: f64,
        lambda_n: f64,
        lambda_np1: f64,
    },
    #[error("gap condition violated: L*||L_op|| = {product} >= 1")]
    GapViolated { product: f64 },
    #[error("low-mode data expected: mode {k} beyond the cut carries mass {value}")]
    HighModeSupport { k: usize, value: f64 },
    #[error("no contraction: measured rate {rate} >= 1 (gap violated or grid inadequate)")]
    NoContraction { rate: f64 },
    #[error(
        "fixed point did not converge within {iterations} iterations (last change {last_change})"
    )]
    MaxIterations { iterations: usize, last_change: f64 },
    #[error("horizon too long: lambda_n * T = {exponent} would overflow the backward flow")]
    HorizonOverflow { exponent: f64 },
    #[error("tracking fit window [{lo}, {hi}] is empty or outside the trajectory")]
    BadFitWindow { lo: f64, hi: f64 },
}

/// Discretization and stopping parameters for the weighted-space solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    /// Backward horizon `T`; `None` picks `T` so that
    /// `e^{-(θ-λ_n)T}` and `e^{-(λ_{n+1}-θ)T}` both fall below `tail_eps`.
    pub t_horizon: Option<f64>,
    /// Grid step; `None` picks `0.02/θ`.
    pub dt: Option<f64>,
    /// Relative weighted-norm change at which the iteration stops.
    pub fixed_point_tol: f64,
    /// Iteration cap; exceeding it is an error.
    pub max_iterations: usize,
    /// Slack allowed between discrete and closed-form operator norms.
    pub quadrature_tol: f64,
    /// Weighted-space tail mass target deciding the automatic horizon.
    pub tail_eps: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            t_horizon: None,
            dt: None,
            fixed_point_tol: 1e-10,
            max_iterations: 200,
            quadrature_tol: 2e-2,
            tail_eps: 1e-10,
        }
    }
}

/// A trajectory on a time grid, measured in the `e^{2θt}`-weighted `L²` norm.
#[derive(Debug, Clone)]
pub struct WeightedTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<StateVector>,
    pub theta: WeightParameter,
}

impl WeightedTrajectory {
    pub fn zeros(grid: &[f64], m: usize, n: usize, theta: WeightParameter) -> Self {
        assert!(grid.windows(2).all(|w| w[1] > w[0]), "grid must increase");
        Self {
            grid: grid.to_vec(),
            states: vec![StateVector::zeros(m, n); grid.len()],
            theta,
        }
    }

    fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.grid.len();
        let mut w = vec![0.0; m];
        for j in 0..m - 1 {
            let h = self.grid[j + 1] - self.grid[j];
            w[j] += 0.5 * h;
            w[j + 1] += 0.5 * h;
        }
        w
    }

    /// `(Σ_j w_j e^{2θ t_j} ‖ξ(t_j)‖²_ℍ)^{1/2}`.
    pub fn weighted_norm(&self) -> f64 {
        let th = self.theta.value();
        self.trapezoid_weights()
            .iter()
            .zip(&self.states)
            .zip(&self.grid)
            .map(|((w, s), t)| {
                let n = s.norm_h();
                w * (2.0 * th * t).exp() * n * n
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Weighted norm of a single component (the `u`-norm used by the
    /// truncated contraction).
    pub fn weighted_norm_component(&self, comp: usize) -> f64 {
        let th = self.theta.value();
        self.trapezoid_weights()
            .iter()
            .zip(&self.states)
            .zip(&self.grid)
            .map(|((w, s), t)| {
                let n = s.component(comp).iter().map(|x| x * x).sum::<f64>();
                w * (2.0 * th * t).exp() * n
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.grid.len(), other.grid.len());
        Self {
            grid: self.grid.clone(),
            states: self
                .states
                .iter()
                .zip(&other.states)
                .map(|(a, b)| a.sub(b))
                .collect(),
            theta: self.theta,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.grid.len(), other.grid.len());
        Self {
            grid: self.grid.clone(),
            states: self
                .states
                .iter()
                .zip(&other.states)
                .map(|(a, b)| a.add(b))
                .collect(),
            theta: self.theta,
        }
    }

    /// Final-time state (at `t = 0` for backward solves).
    pub fn end_state(&self) -> &StateVector {
        self.states.last().expect("grid is non-empty")
    }

    /// Applies the nonlinearity gridpointwise.
    pub fn map_states(&self, f: impl Fn(&StateVector) -> StateVector) -> Self {
        Self {
            grid: self.grid.clone(),
            states: self.states.iter().map(f).collect(),
            theta: self.theta,
        }
    }
}

/// Splits the ladder at the weight: `n = #{k : λ_k < θ}`.
fn split_index(system: &JordanSystem, theta: f64) -> usize {
    system
        .ladder()
        .values()
        .iter()
        .filter(|&&l| l < theta)
        .count()
}

/// Per-mode segment operators for a uniform grid step, built once per solve.
struct ModeOps {
    cut: usize,
    fwd_p: Vec<DMatrix<f64>>,
    fwd_phi0: Vec<DMatrix<f64>>,
    fwd_phi1: Vec<DMatrix<f64>>,
    bwd_p: Vec<DMatrix<f64>>,
    bwd_psi0: Vec<DMatrix<f64>>,
    bwd_psi1: Vec<DMatrix<f64>>,
}

impl ModeOps {
    fn build(system: &JordanSystem, cut: usize, delta: f64) -> Self {
        let pattern = system.pattern();
        let n = system.modes();
        let mut fwd_p = Vec::with_capacity(n);
        let mut fwd_phi0 = Vec::with_capacity(n);
        let mut fwd_phi1 = Vec::with_capacity(n);
        let mut bwd_p = Vec::with_capacity(n);
        let mut bwd_psi0 = Vec::with_capacity(n);
        let mut bwd_psi1 = Vec::with_capacity(n);
        for k in 1..=n {
            let lambda = system.ladder().lambda(k);
            fwd_p.push(block_propagator(lambda, delta, pattern));
            fwd_phi0.push(block_phi0(lambda, delta, pattern));
            fwd_phi1.push(block_phi1(lambda, delta, pattern));
            bwd_p.push(block_propagator(lambda, -delta, pattern));
            bwd_psi0.push(block_phi0(-lambda, delta, pattern));
            bwd_psi1.push(block_phi1(-lambda, delta, pattern));
        }
        Self {
            cut,
            fwd_p,
            fwd_phi0,
            fwd_phi1,
            bwd_p,
            bwd_psi0,
            bwd_psi1,
        }
    }

    /// Modewise variation of constants: forward with zero data at the left
    /// end for `k > cut`, backward with zero data at the right end for
    /// `k ≤ cut`. Forcing is interpolated linearly inside each segment and
    /// integrated against the exact propagator.
    fn apply_l(&self, h: &WeightedTrajectory) -> WeightedTrajectory {
        let pts = h.grid.len();
        let m = h.states[0].num_components();
        let nmodes = h.states[0].modes();
        let delta = h.grid[1] - h.grid[0];
        let mut out = WeightedTrajectory::zeros(&h.grid, m, nmodes, h.theta);

        for k in 0..nmodes {
            if k >= self.cut {
                // forward sweep
                let mut xi = DVector::<f64>::zeros(m);
                for j in 0..pts - 1 {
                    let ha = DVector::from_vec(h.states[j].mode(k));
                    let hb = DVector::from_vec(h.states[j + 1].mode(k));
                    let slope = (&hb - &ha) / delta;
                    xi = &self.fwd_p[k] * xi + &self.fwd_phi0[k] * hb - &self.fwd_phi1[k] * slope;
                    out.states[j + 1].set_mode(k, xi.as_slice());
                }
            } else {
                // backward sweep
                let mut xi = DVector::<f64>::zeros(m);
                for j in (0..pts - 1).rev() {
                    let ha = DVector::from_vec(h.states[j].mode(k));
                    let hb = DVector::from_vec(h.states[j + 1].mode(k));
                    let slope = (&hb - &ha) / delta;
                    xi = &self.bwd_p[k] * xi - (&self.bwd_psi0[k] * ha + &self.bwd_psi1[k] * slope);
                    out.states[j].set_mode(k, xi.as_slice());
                }
            }
        }
        out
    }
}

/// The solution operator `𝕃` of `∂_t ξ + 𝔸ξ = h` on the grid of `h`:
/// unique decaying solution with `P_n ξ = 0` at the right end.
pub fn apply_l(
    system: &JordanSystem,
    theta: &WeightParameter,
    h: &WeightedTrajectory,
) -> Result<WeightedTrajectory, PerronError> {
    theta.check_nonresonant(system.ladder())?;
    let cut = split_index(system, theta.value());
    let delta = h.grid[1] - h.grid[0];
    let ops = ModeOps::build(system, cut, delta);
    Ok(ops.apply_l(h))
}

/// The homogeneous backward solution `𝕋ξ₀⁺`: low modes flow backward from
/// their `t = 0` data through the exact propagator, high modes vanish.
///
/// `grid` must end at the time where `ξ₀⁺` is prescribed (0 for the
/// half-line problem); earlier grid times give `e^{-𝔸t}`-grown states.
pub fn apply_t(
    system: &JordanSystem,
    theta: &WeightParameter,
    xi0_plus: &StateVector,
    grid: &[f64],
) -> Result<WeightedTrajectory, PerronError> {
    system.check_state(xi0_plus)?;
    theta.check_nonresonant(system.ladder())?;
    let cut = split_index(system, theta.value());
    for k in cut..system.modes() {
        for c in 0..xi0_plus.num_components() {
            let v = xi0_plus.component(c)[k];
            if v != 0.0 {
                return Err(PerronError::HighModeSupport { k: k + 1, value: v });
            }
        }
    }
    let t_end = *grid.last().expect("non-empty grid");
    let lambda_low_max = if cut > 0 {
        system.ladder().lambda(cut)
    } else {
        0.0
    };
    let exponent = lambda_low_max * (t_end - grid[0]);
    if exponent > 650.0 {
        return Err(PerronError::HorizonOverflow { exponent });
    }
    let m = system.jordan_size();
    let n = system.modes();
    let mut out = WeightedTrajectory::zeros(grid, m, n, *theta);
    for k in 0..cut {
        let lambda = system.ladder().lambda(k + 1);
        let data = DVector::from_vec(xi0_plus.mode(k));
        for (j, &t) in grid.iter().enumerate() {
            let p = block_propagator(lambda, t - t_end, system.pattern());
            let v = &p * &data;
            out.states[j].set_mode(k, v.as_slice());
        }
    }
    Ok(out)
}

/// Choice of weight and operator norm implied by the nonlinearity form:
/// the full pair for general `𝔽`, the truncated pair for `(0, F(u))`.
fn weight_and_norm(
    system: &JordanSystem,
    n: usize,
) -> Result<(WeightParameter, f64, NormMode), PerronError> {
    let (lambda_n, lambda_np1) = system.ladder().gap_pair(n)?;
    let (theta, norm, mode) = match system.nonlinearity().form() {
        NonlinearityForm::LowerTriangular => {
            let r = linop::norm_l_truncated(lambda_n, lambda_np1)?;
            (r.theta, r.norm, NormMode::Truncated)
        }
        NonlinearityForm::General => {
            let r = linop::norm_l_full(lambda_n, lambda_np1)?;
            (r.theta, r.norm, NormMode::Full)
        }
    };
    Ok((theta, norm, mode))
}

fn build_grid(t_lo: f64, t_hi: f64, dt: f64) -> Vec<f64> {
    let steps = ((t_hi - t_lo) / dt).ceil().max(1.0) as usize;
    let h = (t_hi - t_lo) / steps as f64;
    (0..=steps).map(|j| t_lo + j as f64 * h).collect()
}

fn auto_horizon(
    lambda_n: f64,
    lambda_np1: f64,
    theta: f64,
    settings: &SolverSettings,
) -> Result<f64, PerronError> {
    let margin = (theta - lambda_n).min(lambda_np1 - theta);
    if margin <= 0.0 {
        return Err(PerronError::WeightOutsideGap {
            theta,
            lambda_n,
            lambda_np1,
        });
    }
    let t = settings
        .t_horizon
        .unwrap_or_else(|| (1.0 / settings.tail_eps).ln() / margin);
    if lambda_n * t > 650.0 {
        return Err(PerronError::HorizonOverflow {
            exponent: lambda_n * t,
        });
    }
    Ok(t)
}

/// Result of one backward Perron solve.
#[derive(Debug, Clone)]
pub struct BackwardSolution {
    pub trajectory: WeightedTrajectory,
    /// Largest successive-difference ratio observed during the iteration.
    pub contraction_rate: f64,
    pub iterations: usize,
    pub theta: WeightParameter,
    /// Closed-form `‖𝕃‖` (or `‖L‖`) used for the contraction premise.
    pub operator_norm: f64,
}

struct FixedPointOutcome {
    solution: WeightedTrajectory,
    rate: f64,
    iterations: usize,
}

/// Iterates `ξ ↦ 𝕃 map(ξ) + base` to its fixed point, measuring contraction
/// in the weighted norm (`measure_comp = Some(0)` restricts to the
/// `u`-component, the norm the truncated theory contracts in).
fn fixed_point(
    ops: &ModeOps,
    base: &WeightedTrajectory,
    map: impl Fn(&WeightedTrajectory) -> WeightedTrajectory,
    settings: &SolverSettings,
    measure_comp: Option<usize>,
    data_scale: f64,
) -> Result<FixedPointOutcome, PerronError> {
    let norm_of = |w: &WeightedTrajectory| match measure_comp {
        Some(c) => w.weighted_norm_component(c),
        None => w.weighted_norm(),
    };
    let mut xi = base.clone();
    let mut prev_diff: Option<f64> = None;
    let mut rate: f64 = 0.0;
    for it in 1..=settings.max_iterations {
        let next = ops.apply_l(&map(&xi)).add(base);
        let diff = norm_of(&next.sub(&xi));
        let scale = norm_of(&next).max(data_scale).max(1e-300);
        if let Some(prev) = prev_diff {
            let floor = 1e3 * f64::EPSILON * scale;
            if prev > floor && diff > floor {
                rate = rate.max(diff / prev);
            }
        }
        if rate >= 1.0 {
            return Err(PerronError::NoContraction { rate });
        }
        xi = next;
        if diff <= settings.fixed_point_tol * scale {
            return Ok(FixedPointOutcome {
                solution: xi,
                rate,
                iterations: it,
            });
        }
        prev_diff = Some(diff);
    }
    Err(PerronError::MaxIterations {
        iterations: settings.max_iterations,
        last_change: prev_diff.unwrap_or(f64::NAN),
    })
}

/// Solves the backward problem `∂_t ξ + 𝔸ξ = 𝔽(ξ)`, `P_n ξ(0) = ξ₀⁺` on a
/// discretized `[-T, 0]` as the fixed point of `ξ = 𝕃𝔽(ξ) + 𝕋ξ₀⁺`.
///
/// The weight is `θ*` of the full theory for general nonlinearities and
/// `√(λ_n λ_{n+1})` with the truncated operator for `(0, F(u))` ones. Fails
/// upfront if `L·‖𝕃‖ ≥ 1`.
pub fn solve_backward(
    system: &JordanSystem,
    n: usize,
    xi0_plus: &StateVector,
    settings: &SolverSettings,
) -> Result<BackwardSolution, PerronError> {
    if system.jordan_size() != 2 {
        return Err(PerronError::UnsupportedJordanSize(system.jordan_size()));
    }
    let (theta, norm, _) = weight_and_norm(system, n)?;
    let product = system.nonlinearity().lipschitz() * norm;
    if product >= 1.0 {
        return Err(PerronError::GapViolated { product });
    }
    let (lambda_n, lambda_np1) = system.ladder().gap_pair(n)?;
    let t = auto_horizon(lambda_n, lambda_np1, theta.value(), settings)?;
    let dt = settings.dt.unwrap_or(0.02 / theta.value());
    let grid = build_grid(-t, 0.0, dt);
    let base = apply_t(system, &theta, xi0_plus, &grid)?;
    let ops = ModeOps::build(system, n, grid[1] - grid[0]);
    let measure = match system.nonlinearity().form() {
        NonlinearityForm::LowerTriangular => Some(0),
        NonlinearityForm::General => None,
    };
    let nl = system.nonlinearity().clone();
    let data_scale = match measure {
        Some(c) => base.weighted_norm_component(c),
        None => base.weighted_norm(),
    };
    let out = fixed_point(
        &ops,
        &base,
        |xi| xi.map_states(|s| nl.eval(s)),
        settings,
        measure,
        data_scale,
    )?;
    Ok(BackwardSolution {
        trajectory: out.solution,
        contraction_rate: out.rate,
        iterations: out.iterations,
        theta,
        operator_norm: norm,
    })
}

/// The Lipschitz graph `M: P_nℍ → Q_nℍ` realized by on-demand Perron solves,
/// with the queried samples cached.
#[derive(Debug, Clone)]
pub struct ManifoldGraph {
    system: JordanSystem,
    n: usize,
    theta: WeightParameter,
    operator_norm: f64,
    settings: SolverSettings,
    samples: Vec<(StateVector, StateVector)>,
}

impl ManifoldGraph {
    pub fn new(
        system: JordanSystem,
        n: usize,
        settings: SolverSettings,
    ) -> Result<Self, PerronError> {
        if system.jordan_size() != 2 {
            return Err(PerronError::UnsupportedJordanSize(system.jordan_size()));
        }
        let (theta, norm, _) = weight_and_norm(&system, n)?;
        let product = system.nonlinearity().lipschitz() * norm;
        if product >= 1.0 {
            return Err(PerronError::GapViolated { product });
        }
        Ok(Self {
            system,
            n,
            theta,
            operator_norm: norm,
            settings,
            samples: Vec::new(),
        })
    }

    pub fn system(&self) -> &JordanSystem {
        &self.system
    }

    pub fn cut(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> WeightParameter {
        self.theta
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    /// Base dimension of the graph (`2n` for the `m = 2` product space).
    pub fn base_dimension(&self) -> usize {
        self.system.jordan_size() * self.n
    }

    /// Contraction-derived bound on the graph's Lipschitz constant,
    /// `L‖𝕃‖ / (1 - L‖𝕃‖)`.
    pub fn lipschitz_bound(&self) -> f64 {
        let p = self.system.nonlinearity().lipschitz() * self.operator_norm;
        p / (1.0 - p)
    }

    pub fn samples(&self) -> &[(StateVector, StateVector)] {
        &self.samples
    }

    /// `M(ξ₀⁺) = Q_n ξ*(0)`; caches the sample.
    pub fn map(&mut self, xi0_plus: &StateVector) -> Result<StateVector, PerronError> {
        let low = xi0_plus.project(self.n, Part::Low);
        let sol = solve_backward(&self.system, self.n, &low, &self.settings)?;
        let high = sol.trajectory.end_state().project(self.n, Part::High);
        self.samples.push((low, high.clone()));
        Ok(high)
    }
}

/// Evolves `ξ₀⁺ + M(ξ₀⁺)` forward and measures the worst defect
/// `‖Q_n ξ(τ) - M(P_n ξ(τ))‖_ℍ` over `samples` evenly spaced times in
/// `(0, horizon]`.
pub fn verify_invariance(
    graph: &mut ManifoldGraph,
    xi0_plus: &StateVector,
    horizon: f64,
    samples: usize,
) -> Result<f64, PerronError> {
    let m0 = graph.map(xi0_plus)?;
    let xi0 = xi0_plus.project(graph.cut(), Part::Low).add(&m0);
    let dt = dynamics::default_dt(graph.system().ladder());
    let traj = dynamics::evolve(
        graph.system(),
        &xi0,
        (0.0, horizon),
        dt,
        Integrator::ExponentialMidpoint,
    )?;
    let mut worst: f64 = 0.0;
    for i in 1..=samples {
        let tau = horizon * i as f64 / samples as f64;
        // snap to the nearest grid point to avoid interpolation error
        let j = ((tau - traj.times[0]) / traj.dt()).round() as usize;
        let state = &traj.states[j.min(traj.states.len() - 1)];
        let predicted = graph.map(&state.project(graph.cut(), Part::Low))?;
        let defect = state
            .project(graph.cut(), Part::High)
            .sub(&predicted)
            .norm_h();
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Exponential-tracking verification.
#[derive(Debug, Clone, Serialize)]
pub struct TrackingReport {
    /// Decay exponent claimed by the theory (the weight used).
    pub theta: f64,
    /// Rate extracted from the log-linear fit of `‖ξ(t) - ξ̄(t)‖`.
    pub fitted_rate: f64,
    /// Realized tracking constant (fitted value at `t = 0`).
    pub constant: f64,
    /// Fit residuals per window point.
    pub residuals: Vec<f64>,
}

/// The `C²` smoothstep `6s⁵ - 15s⁴ + 10s³` on `[0, 1]` and its derivative.
fn cutoff(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let s2 = t * t;
        (
            ((6.0 * t - 15.0) * t + 10.0) * t * s2,
            30.0 * s2 * (t - 1.0) * (t - 1.0),
        )
    }
}

/// Builds the trace solution `ξ̄ = φξ + ξ̃` on the manifold that tracks a
/// given forward solution `ξ`, where `ξ̃` solves `ξ̃ = 𝕃Φ(ξ̃)` on a
/// discretized `[-T, T₊]` with
/// `Φ(ξ̃) = 𝔽(φξ + ξ̃) - φ𝔽(ξ) + φ'ξ`.
///
/// Returns the trace and a report fitting `log‖ξ(t) - ξ̄(t)‖` against `t` on
/// `[1, T₊ - 0.5]` (where the difference equals `-ξ̃`).
pub fn tracking_trace(
    system: &JordanSystem,
    n: usize,
    theta: &WeightParameter,
    xi: &Trajectory,
    settings: &SolverSettings,
) -> Result<(WeightedTrajectory, TrackingReport), PerronError> {
    if system.jordan_size() != 2 {
        return Err(PerronError::UnsupportedJordanSize(system.jordan_size()));
    }
    let (lambda_n, lambda_np1) = system.ladder().gap_pair(n)?;
    let th = theta.value();
    if !(th > lambda_n && th < lambda_np1) {
        return Err(PerronError::WeightOutsideGap {
            theta: th,
            lambda_n,
            lambda_np1,
        });
    }
    theta.check_nonresonant(system.ladder())?;
    let t_back = auto_horizon(lambda_n, lambda_np1, th, settings)?;
    let t_fwd = *xi.times.last().expect("forward trajectory non-empty");
    let dt = settings.dt.unwrap_or(0.02 / th);
    let grid = build_grid(-t_back, t_fwd, dt);
    let m = system.jordan_size();
    let nmodes = system.modes();

    // forward solution, its image under 𝔽, and the cutoff, tabulated on the grid
    let nl = system.nonlinearity().clone();
    let mut phi_xi = Vec::with_capacity(grid.len());
    let mut correction = Vec::with_capacity(grid.len());
    for &t in &grid {
        let (phi, dphi) = cutoff(t);
        if t < 0.0 {
            phi_xi.push(StateVector::zeros(m, nmodes));
            correction.push(StateVector::zeros(m, nmodes));
        } else {
            let state = xi.interpolate(t);
            let f_of_xi = nl.eval(&state);
            phi_xi.push(state.scale(phi));
            correction.push(state.scale(dphi).sub(&f_of_xi.scale(phi)));
        }
    }

    let ops = ModeOps::build(system, n, grid[1] - grid[0]);
    let zero = WeightedTrajectory::zeros(&grid, m, nmodes, *theta);
    let map = |xi_tilde: &WeightedTrajectory| {
        let mut forced = xi_tilde.clone();
        for (j, state) in forced.states.iter_mut().enumerate() {
            *state = nl.eval(&phi_xi[j].add(state)).add(&correction[j]);
        }
        forced
    };
    // for (0, F(u)) nonlinearities the iteration contracts in the
    // u-component norm (the truncated theory); measure and stop there
    let measure = match nl.form() {
        NonlinearityForm::LowerTriangular => Some(0),
        NonlinearityForm::General => None,
    };
    let base_scale = WeightedTrajectory {
        grid: grid.clone(),
        states: phi_xi.clone(),
        theta: *theta,
    };
    let data_scale = match measure {
        Some(c) => base_scale.weighted_norm_component(c),
        None => base_scale.weighted_norm(),
    };
    let out = fixed_point(&ops, &zero, map, settings, measure, data_scale)?;
    let xi_tilde = out.solution;

    let trace = WeightedTrajectory {
        grid: grid.clone(),
        states: phi_xi
            .iter()
            .zip(&xi_tilde.states)
            .map(|(a, b)| a.add(b))
            .collect(),
        theta: *theta,
    };

    // log-linear fit of the tracking gap on [1, T₊ - 0.5]
    let (lo, hi) = (1.0, t_fwd - 0.5);
    if hi <= lo {
        return Err(PerronError::BadFitWindow { lo, hi });
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (j, &t) in grid.iter().enumerate() {
        if t >= lo && t <= hi {
            let gap = xi.interpolate(t).sub(&trace.states[j]).norm_h();
            if gap > 0.0 {
                ts.push(t);
                logs.push(gap.ln());
            }
        }
    }
    if ts.len() < 2 {
        return Err(PerronError::BadFitWindow { lo, hi });
    }
    let (intercept, slope, residuals) = linear_fit(&ts, &logs);
    Ok((
        trace,
        TrackingReport {
            theta: th,
            fitted_rate: -slope,
            constant: intercept.exp(),
            residuals,
        },
    ))
}

/// Dense matrix of the discrete `𝕃` on a given grid, in the flattened
/// `(time, component, mode)` coordinates. Test and oracle machinery; keep
/// the grid modest.
pub fn assemble_l_matrix(
    system: &JordanSystem,
    theta: &WeightParameter,
    grid: &[f64],
) -> Result<DMatrix<f64>, PerronError> {
    theta.check_nonresonant(system.ladder())?;
    let cut = split_index(system, theta.value());
    let ops = ModeOps::build(system, cut, grid[1] - grid[0]);
    let m = system.jordan_size();
    let nmodes = system.modes();
    let per_state = m * nmodes;
    let dim = grid.len() * per_state;
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    let mut h = WeightedTrajectory::zeros(grid, m, nmodes, *theta);
    for col in 0..dim {
        let (j, r) = (col / per_state, col % per_state);
        let mut flat = vec![0.0; per_state];
        flat[r] = 1.0;
        h.states[j] = StateVector::unflatten(m, nmodes, &flat);
        let img = ops.apply_l(&h);
        for (jj, state) in img.states.iter().enumerate() {
            let flat = state.flatten();
            for (rr, &v) in flat.iter().enumerate() {
                out[(jj * per_state + rr, col)] = v;
            }
        }
        h.states[j] = StateVector::zeros(m, nmodes);
    }
    Ok(out)
}

/// Operator norm of the discrete `𝕃` in the weighted norm, by power
/// iteration on the similarity-transformed Gram matrix.
pub fn discrete_operator_norm(
    system: &JordanSystem,
    theta: &WeightParameter,
    grid: &[f64],
    iterations: usize,
) -> Result<f64, PerronError> {
    let l = assemble_l_matrix(system, theta, grid)?;
    let m = system.jordan_size();
    let nmodes = system.modes();
    let per_state = m * nmodes;
    // weighted inner product: trapezoid weight and e^{2θt} per time point
    let th = theta.value();
    let mut w = vec![0.0; grid.len()];
    for j in 0..grid.len() - 1 {
        let h = grid[j + 1] - grid[j];
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    let sqrt_w: Vec<f64> = grid
        .iter()
        .zip(&w)
        .map(|(&t, &wj)| (wj * (2.0 * th * t).exp()).sqrt())
        .collect();
    let dim = l.nrows();
    let mut g = l;
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] *= sqrt_w[i / per_state] / sqrt_w[j / per_state];
        }
    }
    // power iteration on GᵀG from a fixed deterministic start
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + (i as f64 * 0.7).sin());
    v /= v.norm();
    let mut sigma2 = 0.0;
    for _ in 0..iterations {
        let gv = &g * &v;
        let w = g.transpose() * gv;
        sigma2 = w.norm();
        if sigma2 == 0.0 {
            return Ok(0.0);
        }
        v = w / sigma2;
    }
    Ok(sigma2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NonlinearitySpec;
    use crate::spectra::{EigenvalueLadder, Generator};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pair_system(nl: NonlinearitySpec) -> JordanSystem {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0]).unwrap();
        JordanSystem::standard(ladder, nl)
    }

    fn low_mode_state(
        system: &JordanSystem,
        n: usize,
        rng: &mut StdRng,
        scale: f64,
    ) -> StateVector {
        let mut s = StateVector::zeros(system.jordan_size(), system.modes());
        for k in 0..n {
            let vals: Vec<f64> = (0..system.jordan_size())
                .map(|_| rng.random_range(-scale..scale))
                .collect();
            s.set_mode(k, &vals);
        }
        s
    }

    #[test]
    fn apply_l_zero_forcing_gives_zero() {
        let system = pair_system(NonlinearitySpec::zero());
        let theta = linop::optimal_theta_full(1.0, 4.0).unwrap();
        let grid = build_grid(-10.0, 0.0, 0.05);
        let h = WeightedTrajectory::zeros(&grid, 2, 2, theta);
        let out = apply_l(&system, &theta, &h).unwrap();
        assert_eq!(out.weighted_norm(), 0.0);
    }

    #[test]
    fn apply_l_constant_forcing_reaches_steady_state() {
        // single high mode, constant h: ξ(0) → 𝔸⁻¹h, 𝔸⁻¹ = (1/λ)[[1,-1],[0,1]]
        let system = pair_system(NonlinearitySpec::zero());
        let theta = linop::optimal_theta_full(1.0, 4.0).unwrap();
        let grid = build_grid(-14.0, 0.0, 0.002);
        let mut h = WeightedTrajectory::zeros(&grid, 2, 2, theta);
        let (f, g) = (0.7, -0.4);
        for s in h.states.iter_mut() {
            s.set_mode(1, &[f, g]);
        }
        let out = apply_l(&system, &theta, &h).unwrap();
        let lambda = 4.0;
        let expect = [(f - g) / lambda, g / lambda];
        let got = out.end_state().mode(1);
        assert_relative_eq!(got[0], expect[0], max_relative = 1e-6);
        assert_relative_eq!(got[1], expect[1], max_relative = 1e-6);
        // low modes keep P_n ξ(0) = 0
        assert_eq!(out.end_state().mode(0), vec![0.0, 0.0]);
    }

    #[test]
    fn apply_t_matches_explicit_backward_solution() {
        let system = pair_system(NonlinearitySpec::zero());
        let theta = linop::optimal_theta_full(1.0, 4.0).unwrap();
        let grid = build_grid(-12.0, 0.0, 0.25);
        let mut xi0 = StateVector::zeros(2, 2);
        xi0.set_mode(0, &[0.3, -0.8]);
        let out = apply_t(&system, &theta, &xi0, &grid).unwrap();
        for (j, &t) in grid.iter().enumerate() {
            let e = (-t).exp(); // λ_1 = 1, backward growth
            let expect_u = e * (0.3 + t * 0.8); // e^{-λt}(u0 - λ t v0)
            let expect_v = e * (-0.8);
            let got = out.states[j].mode(0);
            assert_relative_eq!(got[0], expect_u, max_relative = 1e-12, epsilon = 1e-14);
            assert_relative_eq!(got[1], expect_v, max_relative = 1e-12);
        }
        // weighted norm finite and the t = -T tail negligible
        let tail = out.states[0].norm_h() * (theta.value() * grid[0]).exp();
        assert!(tail < 1e-3 * out.end_state().norm_h());
        assert!(out.weighted_norm().is_finite());
    }

    #[test]
    fn apply_t_rejects_high_mode_data() {
        let system = pair_system(NonlinearitySpec::zero());
        let theta = linop::optimal_theta_full(1.0, 4.0).unwrap();
        let grid = build_grid(-5.0, 0.0, 0.25);
        let mut xi0 = StateVector::zeros(2, 2);
        xi0.set_mode(1, &[1.0, 0.0]);
        assert!(matches!(
            apply_t(&system, &theta, &xi0, &grid),
            Err(PerronError::HighModeSupport { k: 2, .. })
        ));
    }

    #[test]
    fn discrete_norm_bounded_by_closed_form() {
        let system = pair_system(NonlinearitySpec::zero());
        let closed = linop::norm_l_full(1.0, 4.0).unwrap();
        let grid = build_grid(-12.0, 0.0, 0.05);
        let norm = discrete_operator_norm(&system, &closed.theta, &grid, 300).unwrap();
        assert!(
            norm <= closed.norm * 1.02,
            "discrete {norm} vs closed {}",
            closed.norm
        );
        // and it should not be grossly below either (grid resolves the sup)
        assert!(norm > 0.8 * closed.norm, "discrete {norm}");
    }

    #[test]
    fn solve_backward_linear_case_single_iteration() {
        let system = pair_system(NonlinearitySpec::zero());
        let mut rng = StdRng::seed_from_u64(51);
        let xi0 = low_mode_state(&system, 1, &mut rng, 1.0);
        let settings = SolverSettings::default();
        let sol = solve_backward(&system, 1, &xi0, &settings).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.contraction_rate, 0.0);
        let t = apply_t(&system, &sol.theta, &xi0, &sol.trajectory.grid).unwrap();
        assert!(sol.trajectory.sub(&t).weighted_norm() <= 1e-12 * t.weighted_norm());
    }

    #[test]
    fn solve_backward_contraction_rate_bounded() {
        let mut rng = StdRng::seed_from_u64(53);
        for _ in 0..5 {
            let lambda_n = rng.random_range(0.5..3.0);
            let lambda_np1 = lambda_n * rng.random_range(2.5..5.0);
            let ladder = EigenvalueLadder::from_values(vec![lambda_n, lambda_np1]).unwrap();
            let norm = linop::norm_l_full(lambda_n, lambda_np1).unwrap().norm;
            let l = 0.8 / norm;
            let nl = NonlinearitySpec::general(l, move |xi: &StateVector| {
                StateVector::from_components(
                    (0..xi.num_components())
                        .map(|i| xi.component(i).iter().map(|x| l * x.tanh()).collect())
                        .collect(),
                )
            });
            let system = JordanSystem::standard(ladder, nl);
            let xi0 = low_mode_state(&system, 1, &mut rng, 0.5);
            let settings = SolverSettings {
                dt: Some(0.01 / lambda_np1),
                ..Default::default()
            };
            let sol = solve_backward(&system, 1, &xi0, &settings).unwrap();
            assert!(
                sol.contraction_rate <= l * norm + 0.02,
                "rate {} vs bound {}",
                sol.contraction_rate,
                l * norm
            );
        }
    }

    #[test]
    fn solve_backward_rejects_violated_gap() {
        let nl = NonlinearitySpec::general(5.0, |xi: &StateVector| xi.scale(0.9));
        let system = pair_system(nl);
        let xi0 = StateVector::zeros(2, 2);
        assert!(matches!(
            solve_backward(&system, 1, &xi0, &SolverSettings::default()),
            Err(PerronError::GapViolated { .. })
        ));
    }

    #[test]
    fn solve_backward_matches_dense_linear_oracle() {
        // linear 𝔽 = εB: the discrete fixed point solves (I - 𝕃B)ξ = 𝕋ξ₀⁺
        let mut rng = StdRng::seed_from_u64(59);
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0]).unwrap();
        let norm = linop::norm_l_full(1.0, 4.0).unwrap().norm;
        let dim_state = 4; // m·N
        let mut b =
            DMatrix::<f64>::from_fn(dim_state, dim_state, |_, _| rng.random_range(-1.0..1.0));
        let smax = b.clone().svd(false, false).singular_values[0];
        let l = 0.3 / norm;
        b *= l / smax;
        let b_eval = b.clone();
        let nl = NonlinearitySpec::general(l, move |xi: &StateVector| {
            let flat = DVector::from_vec(xi.flatten());
            let out = &b_eval * flat;
            StateVector::unflatten(xi.num_components(), xi.modes(), out.as_slice())
        });
        let system = JordanSystem::standard(ladder, nl);
        let mut xi0 = StateVector::zeros(2, 2);
        xi0.set_mode(0, &[0.9, -0.4]);
        let settings = SolverSettings {
            t_horizon: Some(8.0),
            dt: Some(0.05),
            ..Default::default()
        };
        let sol = solve_backward(&system, 1, &xi0, &settings).unwrap();

        let theta = sol.theta;
        let grid = sol.trajectory.grid.clone();
        let lmat = assemble_l_matrix(&system, &theta, &grid).unwrap();
        let dim = lmat.nrows();
        let mut g = DMatrix::<f64>::zeros(dim, dim);
        for block in 0..grid.len() {
            let cols = lmat.columns(block * dim_state, dim_state).into_owned();
            let prod = cols * &b;
            g.columns_mut(block * dim_state, dim_state).copy_from(&prod);
        }
        let tvec_traj = apply_t(&system, &theta, &xi0, &grid).unwrap();
        let mut tvec = DVector::<f64>::zeros(dim);
        for (j, s) in tvec_traj.states.iter().enumerate() {
            tvec.rows_mut(j * dim_state, dim_state)
                .copy_from_slice(&s.flatten());
        }
        let solved = (DMatrix::<f64>::identity(dim, dim) - g)
            .lu()
            .solve(&tvec)
            .expect("I - 𝕃B is invertible under the gap condition");
        let mut worst: f64 = 0.0;
        for (j, s) in sol.trajectory.states.iter().enumerate() {
            let flat = s.flatten();
            for (r, &v) in flat.iter().enumerate() {
                worst = worst.max((v - solved[j * dim_state + r]).abs());
            }
        }
        let scale = solved.amax().max(1.0);
        assert!(worst <= 1e-8 * scale, "max deviation {worst}");
    }

    #[test]
    fn manifold_flat_for_zero_nonlinearity() {
        let system = pair_system(NonlinearitySpec::zero());
        let mut graph = ManifoldGraph::new(system, 1, SolverSettings::default()).unwrap();
        let mut rng = StdRng::seed_from_u64(61);
        let xi0 = low_mode_state(graph.system(), 1, &mut rng, 1.0);
        let m = graph.map(&xi0).unwrap();
        assert!(m.norm_h() <= 1e-12);
        assert_eq!(graph.base_dimension(), 2);
        assert_eq!(graph.samples().len(), 1);
    }

    #[test]
    fn manifold_constant_forcing_equilibrium() {
        // (0, F) with F ≡ c on high mode k: M = 𝔸_k⁻¹ (0, c)ᵗ = (-c/λ, c/λ)
        let c = 0.35;
        let nl = NonlinearitySpec::lower_triangular(0.1, move |u: &[f64]| {
            let mut out = vec![0.0; u.len()];
            out[1] = c;
            out
        });
        let system = pair_system(nl);
        let mut graph = ManifoldGraph::new(system, 1, SolverSettings::default()).unwrap();
        let xi0 = StateVector::zeros(2, 2);
        let m = graph.map(&xi0).unwrap();
        let lambda = 4.0;
        let got = m.mode(1);
        assert_relative_eq!(got[0], -c / lambda, max_relative = 1e-6);
        assert_relative_eq!(got[1], c / lambda, max_relative = 1e-6);
    }

    #[test]
    fn manifold_lipschitz_estimate() {
        let ladder = EigenvalueLadder::new(Generator::Power { c: 1.0, p: 2.0 }, 4).unwrap();
        let norm = linop::norm_l_full(1.0, 4.0).unwrap().norm;
        let l = 0.5 / norm;
        let nl = NonlinearitySpec::general(l, move |xi: &StateVector| {
            StateVector::from_components(
                (0..xi.num_components())
                    .map(|i| xi.component(i).iter().rev().map(|x| l * x.sin()).collect())
                    .collect(),
            )
        });
        let system = JordanSystem::standard(ladder, nl);
        let mut graph = ManifoldGraph::new(system, 1, SolverSettings::default()).unwrap();
        let bound = graph.lipschitz_bound();
        let mut rng = StdRng::seed_from_u64(67);
        let mut samples = Vec::new();
        for _ in 0..12 {
            let xi0 = low_mode_state(graph.system(), 1, &mut rng, 1.0);
            let m = graph.map(&xi0).unwrap();
            samples.push((xi0, m));
        }
        let mut checked = 0;
        for i in 0..samples.len() {
            for j in 0..i {
                let dx = samples[i].0.sub(&samples[j].0).norm_h();
                if dx < 1e-9 {
                    continue;
                }
                let dm = samples[i].1.sub(&samples[j].1).norm_h();
                assert!(
                    dm / dx <= bound + 0.05,
                    "ratio {} vs bound {bound}",
                    dm / dx
                );
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn invariance_defect_zero_nonlinearity() {
        let system = pair_system(NonlinearitySpec::zero());
        let mut graph = ManifoldGraph::new(system, 1, SolverSettings::default()).unwrap();
        let mut rng = StdRng::seed_from_u64(71);
        let xi0 = low_mode_state(graph.system(), 1, &mut rng, 1.0);
        let defect = verify_invariance(&mut graph, &xi0, 2.0, 4).unwrap();
        assert!(defect < 1e-10, "defect {defect}");
    }

    /// Mode-mixing saturating map of exact Lipschitz constant `l`:
    /// a coordinate permutation (orthogonal) followed by `l·tanh`.
    fn mixing_nl(l: f64) -> NonlinearitySpec {
        NonlinearitySpec::general(l, move |xi: &StateVector| {
            let flat = xi.flatten();
            let d = flat.len();
            let out: Vec<f64> = (0..d)
                .map(|i| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    l * (sign * flat[(i + 3) % d]).tanh()
                })
                .collect();
            StateVector::unflatten(xi.num_components(), xi.modes(), &out)
        })
    }

    #[test]
    fn invariance_defect_grows_with_loose_tolerance() {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0, 9.0, 16.0]).unwrap();
        let norm = linop::norm_l_full(4.0, 9.0).unwrap().norm;
        let l = 0.5 / norm;
        let system = JordanSystem::standard(ladder, mixing_nl(l));
        let tight = SolverSettings {
            fixed_point_tol: 1e-6,
            ..Default::default()
        };
        let loose = SolverSettings {
            fixed_point_tol: 1e-4,
            ..Default::default()
        };
        let mut rng = StdRng::seed_from_u64(73);
        let xi0 = low_mode_state(&system, 2, &mut rng, 0.4);
        let mut g_tight = ManifoldGraph::new(system.clone(), 2, tight).unwrap();
        let mut g_loose = ManifoldGraph::new(system, 2, loose).unwrap();
        let d_tight = verify_invariance(&mut g_tight, &xi0, 1.0, 3).unwrap();
        let d_loose = verify_invariance(&mut g_loose, &xi0, 1.0, 3).unwrap();
        assert!(
            d_loose > d_tight,
            "loose {d_loose} should exceed tight {d_tight}"
        );
    }

    #[test]
    fn truncated_route_agrees_with_full_iteration_at_same_weight() {
        // for (0, F(u)) the u-component fixed point u = L F(u) + T ξ₀⁺ and
        // the full fixed point ξ = 𝕃(0,F(u))ᵗ + 𝕋ξ₀⁺ at the same weight
        // define the same solution up to solver tolerance
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0]).unwrap();
        let l = 0.5;
        let nl = NonlinearitySpec::lower_triangular(l, move |u: &[f64]| {
            vec![l * u[1].tanh(), l * u[0].tanh()]
        });
        let system = JordanSystem::standard(ladder, nl);
        let mut rng = StdRng::seed_from_u64(89);
        let xi0 = low_mode_state(&system, 1, &mut rng, 0.6);
        let settings = SolverSettings::default();
        let sol = solve_backward(&system, 1, &xi0, &settings).unwrap();

        // independent iteration of the same map, measured in the full norm
        let theta = sol.theta;
        let grid = sol.trajectory.grid.clone();
        let base = apply_t(&system, &theta, &xi0, &grid).unwrap();
        let mut xi = base.clone();
        let nl = system.nonlinearity().clone();
        for _ in 0..120 {
            let next = apply_l(&system, &theta, &xi.map_states(|s| nl.eval(s)))
                .unwrap()
                .add(&base);
            let change = next.sub(&xi).weighted_norm();
            xi = next;
            if change <= 1e-12 * xi.weighted_norm().max(1.0) {
                break;
            }
        }
        let diff = sol.trajectory.sub(&xi).weighted_norm();
        let scale = xi.weighted_norm();
        assert!(diff <= 1e-8 * scale, "routes differ by {}", diff / scale);
    }

    #[test]
    fn tracking_pure_linear_decay() {
        // 𝔽 ≡ 0: for t ≥ 1 the gap is pure high-mode decay, rate ≥ λ_{n+1} ≥ θ,
        // and it matches the explicit propagator from the window start.
        let system = pair_system(NonlinearitySpec::zero());
        let theta = linop::optimal_theta_full(1.0, 4.0).unwrap();
        let mut xi0 = StateVector::zeros(2, 2);
        xi0.set_mode(0, &[0.6, -0.2]);
        xi0.set_mode(1, &[0.4, 0.3]);
        let traj = dynamics::evolve(
            &system,
            &xi0,
            (0.0, 2.2),
            0.001,
            Integrator::ExponentialMidpoint,
        )
        .unwrap();
        let settings = SolverSettings {
            dt: Some(0.002),
            ..Default::default()
        };
        let (trace, report) = tracking_trace(&system, 1, &theta, &traj, &settings).unwrap();
        assert!(
            report.fitted_rate >= theta.value(),
            "rate {} vs θ {}",
            report.fitted_rate,
            theta.value()
        );
        // explicit propagator check of the gap inside the window
        let j1 = trace
            .grid
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - 1.0).abs().partial_cmp(&(*b - 1.0).abs()).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        let t1 = trace.grid[j1];
        let gap1 = traj.interpolate(t1).sub(&trace.states[j1]);
        for (j, &t) in trace.grid.iter().enumerate() {
            if t <= t1 || t > 1.6 {
                continue;
            }
            let gap = traj.interpolate(t).sub(&trace.states[j]);
            let p = block_propagator(4.0, t - t1, system.pattern());
            let predicted = &p * DVector::from_vec(gap1.mode(1));
            let got = gap.mode(1);
            for i in 0..2 {
                assert_relative_eq!(got[i], predicted[i], max_relative = 2e-2, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn tracking_on_manifold_data_has_tiny_gap() {
        let ladder = EigenvalueLadder::from_values(vec![1.0, 4.0]).unwrap();
        let norm = linop::norm_l_full(1.0, 4.0).unwrap().norm;
        let l = 0.4 / norm;
        let system = JordanSystem::standard(ladder, mixing_nl(l));
        let mut graph = ManifoldGraph::new(system.clone(), 1, SolverSettings::default()).unwrap();
        let mut xi0 = StateVector::zeros(2, 2);
        xi0.set_mode(0, &[0.5, 0.2]);
        let m = graph.map(&xi0).unwrap();
        let on_manifold = xi0.add(&m);
        let traj = dynamics::evolve(
            &system,
            &on_manifold,
            (0.0, 2.2),
            0.001,
            Integrator::ExponentialMidpoint,
        )
        .unwrap();
        let theta = linop::optimal_theta_full(1.0, 4.0).unwrap();
        let (trace, _report) =
            tracking_trace(&system, 1, &theta, &traj, &SolverSettings::default()).unwrap();
        // trace and solution nearly coincide on [1, 2]
        for (j, &t) in trace.grid.iter().enumerate() {
            if t < 1.0 || t > 2.0 {
                continue;
            }
            let gap = traj.interpolate(t).sub(&trace.states[j]).norm_h();
            assert!(gap < 5e-4, "gap {gap} at t = {t}");
        }
    }
}

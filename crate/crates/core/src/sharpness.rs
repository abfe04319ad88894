//! Sharpness counterexamples: when the Jordan-block gap condition fails at
//! index `n`, a linear nonlinearity of norm below `L` merges the eigenvalues
//! `μ_n⁺` and `μ_{n+1}⁻` and an arbitrarily small extra perturbation rotates
//! the merged pair into complex conjugates. Solutions in the rotated plane
//! then oscillate, so no Lipschitz graph over `P_nℍ` can contain them.
//!
//! Everything happens in the four real coordinates `(u_n, v_n, u_{n+1},
//! v_{n+1})` of the two coupled modes; all other modes are untouched.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::gapcheck::{gap_lhs, GapConditionKind, GapError};
use crate::linop::NormMode;
use crate::spectra::EigenvalueLadder;

/// Relative imaginary-part threshold separating a genuine complex pair from
/// eigensolver noise.
pub const COMPLEX_PAIR_REL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SharpnessError {
    #[error("degenerate gap: need 0 < lambda_n < lambda_np1, got ({0}, {1})")]
    DegenerateGap(f64, f64),
    #[error("perturbation size must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("characteristic-polynomial check applies to the truncated mode only")]
    WrongMode,
    #[error("no complex pair present (largest relative imaginary part {max_ratio:e}); epsilon too small for numerical separation")]
    NoComplexPair { max_ratio: f64 },
    #[error("inverse iteration failed to produce an eigenvector (residual {residual:e})")]
    EigenvectorFailure { residual: f64 },
    #[error(transparent)]
    Gap(#[from] GapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// A fully assembled counterexample on the coupled modes `{n, n+1}`.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleInstance {
    pub lambda_n: f64,
    pub lambda_np1: f64,
    /// The merging coupling strength `K`.
    pub coupling: f64,
    pub epsilon: f64,
    pub mode: NormMode,
    /// The doubled eigenvalue `μ_n⁺ = μ_{n+1}⁻` at `ε = 0`.
    pub merged_eigenvalue: f64,
    /// `𝔸 - 𝔽` restricted to `(u_n, v_n, u_{n+1}, v_{n+1})`, row-major.
    pub coupled_matrix: [[f64; 4]; 4],
    /// `𝔽 = 𝔽̄ + 𝔽̃` on the same coordinates, row-major.
    pub nonlinearity_matrix: [[f64; 4]; 4],
    /// Numeric eigenvalues of the coupled matrix, sorted by `(re, im)`.
    pub eigenvalues: [ComplexValue; 4],
    /// Eigenvectors of the unrotated (`ε = 0`) blocks, rows in the order
    /// `ê_n⁻, ê_n⁺, ê_{n+1}⁻, ê_{n+1}⁺`; unit norm, first nonzero entry
    /// positive.
    pub eigenvectors_eps0: [[f64; 4]; 4],
}

impl CounterexampleInstance {
    pub fn coupled(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.coupled_matrix[i][j])
    }

    pub fn nonlinearity(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.nonlinearity_matrix[i][j])
    }

    fn eps0_basis(&self) -> Matrix4<f64> {
        // columns in stored row order
        Matrix4::from_fn(|i, j| self.eigenvectors_eps0[j][i])
    }
}

fn to_rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

fn sorted_eigenvalues(m: &Matrix4<f64>) -> [ComplexValue; 4] {
    let eig = m.complex_eigenvalues();
    let mut vals: Vec<Complex64> = eig.iter().copied().collect();
    vals.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite"));
    [
        vals[0].into(),
        vals[1].into(),
        vals[2].into(),
        vals[3].into(),
    ]
}

/// Default rotation size, `ε = 10⁻² √(λ_n λ_{n+1})`.
pub fn default_epsilon(lambda_n: f64, lambda_np1: f64) -> f64 {
    1e-2 * (lambda_n * lambda_np1).sqrt()
}

/// Builds the counterexample operator for the gap pair.
///
/// Full mode: `𝔽̄_k = -[[0,K],[K,0]]` on both blocks with
/// `K = (λ_{n+1}-λ_n)²/(λ_{n+1}+λ_n+2√(λ_{n+1}²-λ_nλ_{n+1}+λ_n²))`, which
/// merges `μ_n⁺` with `μ_{n+1}⁻`; the rotation `𝔽̃` is the skew generator
/// `ε(ê_n⁺ ⊗ ê_{n+1}⁻ - ê_{n+1}⁻ ⊗ ê_n⁺)` expressed in coordinates through
/// the `ε = 0` eigenbasis.
///
/// Truncated mode: `𝔽̄_k = -[[0,0],[K,0]]` with `K = (√λ_{n+1}-√λ_n)²`
/// (merged value `√(λ_nλ_{n+1})`), and `𝔽̃` places `-ε` at the `(v_n,
/// u_{n+1})` and `(v_{n+1}, u_n)` entries, preserving the `(0, F(u))`
/// structure.
pub fn build_counterexample(
    lambda_n: f64,
    lambda_np1: f64,
    epsilon: Option<f64>,
    mode: NormMode,
) -> Result<CounterexampleInstance, SharpnessError> {
    if !(lambda_n > 0.0 && lambda_np1 > lambda_n) {
        return Err(SharpnessError::DegenerateGap(lambda_n, lambda_np1));
    }
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(lambda_n, lambda_np1));
    if epsilon < 0.0 {
        return Err(SharpnessError::NegativeEpsilon(epsilon));
    }

    let a_mat = {
        let mut a = Matrix4::zeros();
        for (b, lambda) in [(0usize, lambda_n), (2usize, lambda_np1)] {
            a[(b, b)] = lambda;
            a[(b, b + 1)] = lambda;
            a[(b + 1, b + 1)] = lambda;
        }
        a
    };

    let (coupling, merged, f_bar, vectors) = match mode {
        NormMode::Full => {
            let gap = lambda_np1 - lambda_n;
            let k = gap * gap / crate::linop::gap_denominator(lambda_n, lambda_np1);
            let merged = lambda_n + (k * (lambda_n + k)).sqrt();
            let mut f = Matrix4::zeros();
            for b in [0usize, 2usize] {
                f[(b, b + 1)] = -k;
                f[(b + 1, b)] = -k;
            }
            // block eigenvectors (√(λ+K), ±√K)ᵗ, normalized
            let mut vecs = [[0.0; 4]; 4];
            for (i, (b, lambda)) in [(0usize, lambda_n), (2usize, lambda_np1)]
                .into_iter()
                .enumerate()
            {
                let a = (lambda + k).sqrt();
                let c = k.sqrt();
                let norm = (a * a + c * c).sqrt();
                vecs[2 * i][b] = a / norm;
                vecs[2 * i][b + 1] = -c / norm; // minus branch first
                vecs[2 * i + 1][b] = a / norm;
                vecs[2 * i + 1][b + 1] = c / norm;
            }
            (k, merged, f, vecs)
        }
        NormMode::Truncated => {
            let root_gap = lambda_np1.sqrt() - lambda_n.sqrt();
            let k = root_gap * root_gap;
            let merged = (lambda_n * lambda_np1).sqrt();
            let mut f = Matrix4::zeros();
            for b in [0usize, 2usize] {
                f[(b + 1, b)] = -k;
            }
            let mut vecs = [[0.0; 4]; 4];
            for (i, (b, lambda)) in [(0usize, lambda_n), (2usize, lambda_np1)]
                .into_iter()
                .enumerate()
            {
                let a = lambda.sqrt();
                let c = k.sqrt();
                let norm = (a * a + c * c).sqrt();
                vecs[2 * i][b] = a / norm;
                vecs[2 * i][b + 1] = -c / norm;
                vecs[2 * i + 1][b] = a / norm;
                vecs[2 * i + 1][b + 1] = c / norm;
            }
            (k, merged, f, vecs)
        }
    };

    let f_tilde = match mode {
        NormMode::Full => {
            // skew generator on span{ê_n⁺, ê_{n+1}⁻} via the ε=0 eigenbasis,
            // oriented so the plane flow is x' = ωy, y' = -ωx after rescaling
            let s = Matrix4::from_fn(|i, j| vectors[j][i]);
            let s_inv = s
                .try_inverse()
                .expect("eigenbasis is nonsingular for K > 0");
            let mut skew = Matrix4::zeros();
            skew[(1, 2)] = epsilon;
            skew[(2, 1)] = -epsilon;
            s * skew * s_inv
        }
        NormMode::Truncated => {
            let mut f = Matrix4::zeros();
            f[(1, 2)] = -epsilon;
            f[(3, 0)] = -epsilon;
            f
        }
    };

    let f_total = f_bar + f_tilde;
    let coupled = a_mat - f_total;
    Ok(CounterexampleInstance {
        lambda_n,
        lambda_np1,
        coupling,
        epsilon,
        mode,
        merged_eigenvalue: merged,
        coupled_matrix: to_rows(&coupled),
        nonlinearity_matrix: to_rows(&f_total),
        eigenvalues: sorted_eigenvalues(&coupled),
        eigenvectors_eps0: vectors,
    })
}

/// Operator norm of the assembled nonlinearity, in the norm relevant to its
/// mode: the `ℍ → ℍ` norm of the 4×4 block for the full case, the `H → H`
/// norm of the `u ↦ F(u)` part (rows `v_n, v_{n+1}`, columns `u_n,
/// u_{n+1}`) for the truncated case.
pub fn nonlinearity_norm(inst: &CounterexampleInstance) -> f64 {
    match inst.mode {
        NormMode::Full => inst.nonlinearity().svd(false, false).singular_values[0],
        NormMode::Truncated => {
            let f = inst.nonlinearity();
            let sub = Matrix2::new(f[(1, 0)], f[(1, 2)], f[(3, 0)], f[(3, 2)]);
            sub.svd(false, false).singular_values[0]
        }
    }
}

/// Samples `det(coupled - (y + √(λ_nλ_{n+1}))·I)` at five points, fits the
/// degree-4 polynomial in `y`, and returns the largest absolute deviation of
/// its coefficients from
/// `y⁴ - 2K y³ - 4√(λ_nλ_{n+1}) K y² + 0·y - ε²λ_nλ_{n+1}`,
/// `K = (√λ_{n+1}-√λ_n)²`.
pub fn characteristic_polynomial_check(
    inst: &CounterexampleInstance,
) -> Result<f64, SharpnessError> {
    if inst.mode != NormMode::Truncated {
        return Err(SharpnessError::WrongMode);
    }
    let s = (inst.lambda_n * inst.lambda_np1).sqrt();
    let k = inst.coupling;
    let coupled = inst.coupled();
    let h = 0.5 * s;
    let ys = [-2.0 * h, -h, 0.0, h, 2.0 * h];
    let mut vander = nalgebra::Matrix5::<f64>::zeros();
    let mut dets = nalgebra::Vector5::<f64>::zeros();
    for (i, &y) in ys.iter().enumerate() {
        let shifted = coupled - Matrix4::identity() * (y + s);
        dets[i] = shifted.determinant();
        let mut p = 1.0;
        for j in 0..5 {
            vander[(i, j)] = p;
            p *= y;
        }
    }
    let coeffs = vander
        .lu()
        .solve(&dets)
        .expect("distinct sample points give a nonsingular Vandermonde");
    let expected = [
        -inst.epsilon * inst.epsilon * inst.lambda_n * inst.lambda_np1,
        0.0,
        -4.0 * s * k,
        -2.0 * k,
        1.0,
    ];
    Ok(coeffs
        .iter()
        .zip(&expected)
        .map(|(c, e)| (c - e).abs())
        .fold(0.0, f64::max))
}

/// The complex pair `μ = μ_re ± iω` of the coupled matrix, `ω > 0`. Errors
/// if no eigenvalue has a relative imaginary part above
/// [`COMPLEX_PAIR_REL_TOL`].
pub fn complex_pair(inst: &CounterexampleInstance) -> Result<Complex64, SharpnessError> {
    let mut best: Option<Complex64> = None;
    let mut max_ratio: f64 = 0.0;
    for v in &inst.eigenvalues {
        let z = Complex64::new(v.re, v.im);
        let ratio = z.im.abs() / z.norm().max(f64::MIN_POSITIVE);
        max_ratio = max_ratio.max(ratio);
        if z.im > 0.0 && ratio > COMPLEX_PAIR_REL_TOL {
            best = Some(z);
        }
    }
    best.ok_or(SharpnessError::NoComplexPair { max_ratio })
}

/// Eigenvector of `m` for the (approximate) eigenvalue `mu`, by shifted
/// inverse iteration with a deterministic start; phase fixed so the largest
/// entry is real positive.
fn complex_eigenvector(
    m: &Matrix4<f64>,
    mu: Complex64,
) -> Result<Vector4<Complex64>, SharpnessError> {
    let scale = m.amax().max(1.0);
    let mc = m.map(|x| Complex64::new(x, 0.0));
    let shift = mu + Complex64::new(1e-9 * scale, 1e-9 * scale);
    let shifted = mc - Matrix4::identity().map(|x: f64| Complex64::new(x, 0.0)) * shift;
    let lu = shifted.lu();
    let mut v = Vector4::from_fn(|i, _| Complex64::new(1.0 + 0.3 * i as f64, 0.1 * i as f64));
    v /= Complex64::new(v.norm(), 0.0);
    for _ in 0..6 {
        if let Some(next) = lu.solve(&v) {
            let n = next.norm();
            if !n.is_finite() || n == 0.0 {
                break;
            }
            v = next / Complex64::new(n, 0.0);
        }
    }
    // deterministic phase
    let (mut idx, mut mag) = (0usize, 0.0f64);
    for i in 0..4 {
        if v[i].norm() > mag {
            mag = v[i].norm();
            idx = i;
        }
    }
    let phase = v[idx] / Complex64::new(v[idx].norm(), 0.0);
    v /= phase;
    let residual = (mc * v - v * mu).norm();
    if residual > 1e-7 * scale {
        return Err(SharpnessError::EigenvectorFailure { residual });
    }
    Ok(v)
}

/// Outcome of the oscillation demonstration.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    /// Imaginary part of the complex pair.
    pub omega: f64,
    /// Real part of the complex pair (the decay rate scaled out of the
    /// simulation).
    pub mu: f64,
    /// Sign changes of the `ê_n⁺`-coordinate over the simulated window.
    pub zero_count: usize,
    /// `true` iff the pair rotates and the coordinate oscillates — no
    /// Lipschitz graph over `P_nℍ` can contain the trajectory.
    pub verdict: bool,
}

/// One sample of the simulated spiral: time and the coordinates along
/// `ê_n⁺` and `ê_{n+1}⁻` of the rescaled state `e^{μt}ξ(t)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpiralSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Simulates the linear flow `∂_t ξ = -(𝔸-𝔽)ξ` from data in the
/// complex-pair eigenplane over `periods` rotation periods and counts sign
/// changes of the `ê_n⁺`-coordinate.
///
/// The flow is integrated in the exponentially rescaled frame
/// `ζ(t) = e^{μ_re t} ξ(t)` restricted to the (numerically computed)
/// invariant plane: the factor `e^{μ_re t}` is positive, so the sign pattern
/// of the coordinate is untouched, while the raw trajectory would underflow
/// long before three periods elapse for small `ε` (period `∝ 1/ε`).
pub fn oscillation_demo(
    inst: &CounterexampleInstance,
    periods: f64,
) -> Result<(OscillationReport, Vec<SpiralSample>), SharpnessError> {
    let mu = complex_pair(inst)?;
    let omega = mu.im;
    let coupled = inst.coupled();
    let w = complex_eigenvector(&coupled, mu)?;
    // real invariant-plane basis: p = Re w, q = -Im w gives
    // x(t) e^{μt} = x(0)cos(ωt) + y(0)sin(ωt) in exact arithmetic
    let p = Vector4::from_fn(|i, _| w[i].re);
    let q = Vector4::from_fn(|i, _| -w[i].im);
    // plane-restricted generator: [Mp Mq] = [p q]·C (least squares)
    let b = nalgebra::Matrix4x2::from_columns(&[p, q]);
    let mb = nalgebra::Matrix4x2::from_columns(&[&coupled * p, &coupled * q]);
    let gram = b.transpose() * b;
    let rhs = b.transpose() * mb;
    let c = gram
        .lu()
        .solve(&rhs)
        .expect("plane basis is linearly independent");
    // rescaled plane dynamics: Z' = (μ_re·I - C) Z
    let gen = Matrix2::identity() * mu.re - c;

    // dual coordinates along ê_n⁺ (row 1) and ê_{n+1}⁻ (row 2) of the ε=0 basis
    let s_inv = inst
        .eps0_basis()
        .try_inverse()
        .expect("eigenbasis is nonsingular");
    let dual_x = s_inv.row(1).transpose();
    let dual_y = s_inv.row(2).transpose();

    let period = 2.0 * std::f64::consts::PI / omega;
    let horizon = periods * period;
    let steps_per_period = 512usize;
    let steps = ((periods * steps_per_period as f64).ceil() as usize).max(2);
    let dt = horizon / steps as f64;

    let mut z = Vector2::new(1.0, 0.0);
    let mut samples = Vec::with_capacity(steps + 1);
    let record = |t: f64, z: &Vector2<f64>, out: &mut Vec<SpiralSample>| {
        let state = p * z[0] + q * z[1];
        out.push(SpiralSample {
            t,
            x: dual_x.dot(&state),
            y: dual_y.dot(&state),
        });
    };
    record(0.0, &z, &mut samples);
    for i in 0..steps {
        // RK4 on the constant-coefficient plane system
        let k1 = gen * z;
        let k2 = gen * (z + k1 * (dt / 2.0));
        let k3 = gen * (z + k2 * (dt / 2.0));
        let k4 = gen * (z + k3 * dt);
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        record((i + 1) as f64 * dt, &z, &mut samples);
    }

    let mut zero_count = 0;
    let mut last_sign = 0i8;
    for s in &samples {
        let sign = if s.x > 0.0 {
            1
        } else if s.x < 0.0 {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                zero_count += 1;
            }
            last_sign = sign;
        }
    }
    let report = OscillationReport {
        omega,
        mu: mu.re,
        zero_count,
        verdict: omega != 0.0 && zero_count >= 2,
    };
    Ok((report, samples))
}

/// One row of a gap-violation certificate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ViolationEntry {
    pub n: usize,
    pub lhs: f64,
    /// `lhs < L` strictly: a counterexample over `P_nℍ` is constructible.
    pub violated: bool,
}

/// Where the ladder violates the gap condition, and whether it does so for
/// every index (`sup_n lhs < L`, the regime where even infinite-dimensional
/// attractor dynamics can be arranged; reported as a flag only).
#[derive(Debug, Clone, Serialize)]
pub struct ViolationCertificate {
    pub kind: GapConditionKind,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub entries: Vec<ViolationEntry>,
    pub sup_lhs: f64,
    pub violated_for_all_n: bool,
}

pub fn gap_violation_certificate(
    ladder: &EigenvalueLadder,
    lipschitz: f64,
    kind: GapConditionKind,
) -> Result<ViolationCertificate, SharpnessError> {
    let mut entries = Vec::new();
    let mut sup_lhs = f64::NEG_INFINITY;
    for n in 1..ladder.len() {
        let lhs = gap_lhs(ladder, n, kind)?;
        sup_lhs = sup_lhs.max(lhs);
        entries.push(ViolationEntry {
            n,
            lhs,
            violated: lhs < lipschitz,
        });
    }
    Ok(ViolationCertificate {
        kind,
        lipschitz,
        entries,
        sup_lhs,
        violated_for_all_n: sup_lhs < lipschitz,
    })
}

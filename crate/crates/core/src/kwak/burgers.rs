//! The viscous Burgers equation `∂_t u = ν∂_x²u + ∂_x(u²) - f(u)` on
//! `(-π, π)` with periodic boundary conditions, and its transform to the
//! 3-component system with linear part `ν·[[1,0,0],[0,1,1],[0,0,1]]·(-∂_x²)`
//! obtained from the new variables `v = ∂_x u`, `w = ν⁻¹u²`.

use num_complex::Complex64;

use crate::dynamics::{block_phi0, block_propagator, BlockPattern};
use crate::kwak::expr::Polynomial;
use crate::kwak::field::{Dealiaser, FourierField};
use crate::kwak::{FieldTrajectory, KwakError};
use crate::util::exp_moments;

/// The transformed state `(u, v, w)` with `v = ∂_x u`, `w = ν⁻¹u²`, plus the
/// reaction polynomial `f(u)` driving both pictures.
#[derive(Debug, Clone)]
pub struct BurgersKwakState {
    pub u: FourierField,
    pub v: FourierField,
    pub w: FourierField,
    pub nu: f64,
    pub reaction: Polynomial,
}

impl BurgersKwakState {
    /// `‖(u,v,w)‖_ℍ` (root of summed squared `L²` norms).
    pub fn norm_h(&self) -> f64 {
        (self.u.norm_l2().powi(2) + self.v.norm_l2().powi(2) + self.w.norm_l2().powi(2)).sqrt()
    }

    /// Worst relative deviation of `(v, w)` from `(∂_x u, ν⁻¹u²)`.
    pub fn consistency_residual(&self, dealiaser: &mut Dealiaser) -> f64 {
        let dv = self.v.sub(&self.u.derivative()).norm_l2();
        let w_exact = dealiaser.product(&self.u, &self.u).scale(1.0 / self.nu);
        let dw = self.w.sub(&w_exact).norm_l2();
        let scale = self.norm_h().max(f64::MIN_POSITIVE);
        (dv / scale).max(dw / scale)
    }
}

/// A trajectory of transformed states on a uniform grid.
#[derive(Debug, Clone)]
pub struct BurgersKwakTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<[FourierField; 3]>,
    pub nu: f64,
}

impl BurgersKwakTrajectory {
    pub fn last(&self) -> &[FourierField; 3] {
        self.states.last().expect("non-empty")
    }
}

fn validate_field(u0: &FourierField) -> Result<(), KwakError> {
    if u0.max_mode() < 8 {
        return Err(KwakError::TooFewModes(u0.max_mode()));
    }
    if !u0.is_real() {
        return Err(KwakError::RealityFlagRequired);
    }
    Ok(())
}

fn validate_span(t_span: (f64, f64), dt: f64) -> Result<(usize, f64), KwakError> {
    if !(dt > 0.0) {
        return Err(KwakError::NonPositiveStep(dt));
    }
    if !(t_span.1 > t_span.0) {
        return Err(KwakError::BackwardSpan(t_span.0, t_span.1));
    }
    let steps = ((t_span.1 - t_span.0) / dt).ceil().max(1.0) as usize;
    Ok((steps, (t_span.1 - t_span.0) / steps as f64))
}

/// `∂_x(u²) - f(u)`, alias-free.
fn burgers_rhs(u: &FourierField, reaction: &Polynomial, dealiaser: &mut Dealiaser) -> FourierField {
    let advection = dealiaser.product(u, u).derivative();
    if reaction.is_zero() {
        return advection;
    }
    let f_of_u = dealiaser.eval_real(&[u], reaction.degree(), |v| reaction.eval(v[0], 0.0));
    advection.sub(&f_of_u)
}

/// Pseudospectral evolution of the scalar Burgers equation with the stiff
/// diffusion integrated exactly per mode (exponential midpoint).
pub fn burgers_evolve(
    u0: &FourierField,
    nu: f64,
    reaction: &Polynomial,
    t_span: (f64, f64),
    dt: f64,
) -> Result<FieldTrajectory, KwakError> {
    if !(nu > 0.0) {
        return Err(KwakError::NonPositiveViscosity(nu));
    }
    validate_field(u0)?;
    if reaction.depends_on_ux() {
        return Err(KwakError::ReactionUsesUx);
    }
    let (steps, h) = validate_span(t_span, dt)?;
    let nf = u0.max_mode();
    let mut dealiaser = Dealiaser::new();

    let lambda = |k: i64| nu * (k * k) as f64;
    let table: Vec<(f64, f64, f64)> = (-(nf as i64)..=nf as i64)
        .map(|k| {
            let l = lambda(k);
            (
                (-l * h).exp(),
                (-l * h / 2.0).exp(),
                exp_moments(l, h / 2.0, 0)[0],
            )
        })
        .collect();
    let modewise = |u: &FourierField, pick: fn(&(f64, f64, f64)) -> f64| {
        let mut out = u.clone();
        for (i, k) in (-(nf as i64)..=nf as i64).enumerate() {
            out.set_coeff(k, u.coeff(k) * pick(&table[i]));
        }
        out
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut fields = Vec::with_capacity(steps + 1);
    times.push(t_span.0);
    fields.push(u0.clone());
    let mut u = u0.clone();
    for step in 0..steps {
        let n0 = burgers_rhs(&u, reaction, &mut dealiaser);
        let mid = modewise(&u, |t| t.1).add(&modewise(&n0, |t| t.2));
        let nm = burgers_rhs(&mid, reaction, &mut dealiaser);
        u = modewise(&u, |t| t.0).add(&modewise(&nm, |t| t.1).scale(h));
        if !u.is_finite() {
            return Err(KwakError::Diverged {
                step: step + 1,
                time: t_span.0 + (step + 1) as f64 * h,
            });
        }
        times.push(t_span.0 + (step + 1) as f64 * h);
        fields.push(u.clone());
    }
    Ok(FieldTrajectory { times, fields })
}

/// The new variables of the transform: `v = ∂_x u`, `w = ν⁻¹u²`.
pub fn burgers_kwak_transform(
    u: &FourierField,
    nu: f64,
    reaction: &Polynomial,
) -> Result<BurgersKwakState, KwakError> {
    if !(nu > 0.0) {
        return Err(KwakError::NonPositiveViscosity(nu));
    }
    if !u.is_real() {
        return Err(KwakError::RealityFlagRequired);
    }
    let mut dealiaser = Dealiaser::new();
    Ok(BurgersKwakState {
        u: u.clone(),
        v: u.derivative(),
        w: dealiaser.product(u, u).scale(1.0 / nu),
        nu,
        reaction: reaction.clone(),
    })
}

/// Nonlinearity of the transformed system:
/// `(2uv - f(u), -f'(u)v, 2ν⁻¹u(2uv - f(u)) - 2v²)ᵗ`, evaluated pointwise.
fn system_rhs(
    fields: &[FourierField; 3],
    nu: f64,
    reaction: &Polynomial,
    dealiaser: &mut Dealiaser,
) -> [FourierField; 3] {
    let nf = fields[0].max_mode();
    let deg = reaction.degree().max(2) + 1;
    let m = crate::kwak::field::padded_len(nf, deg);
    let pu = dealiaser.synthesize(&fields[0], m);
    let pv = dealiaser.synthesize(&fields[1], m);
    let df = reaction.d_du();
    let mut g1 = vec![Complex64::ZERO; m];
    let mut g2 = vec![Complex64::ZERO; m];
    let mut g3 = vec![Complex64::ZERO; m];
    for j in 0..m {
        let (u, v) = (pu[j].re, pv[j].re);
        let a = 2.0 * u * v - reaction.eval(u, 0.0);
        g1[j] = Complex64::new(a, 0.0);
        g2[j] = Complex64::new(-df.eval(u, 0.0) * v, 0.0);
        g3[j] = Complex64::new(2.0 / nu * u * a - 2.0 * v * v, 0.0);
    }
    [
        dealiaser.analyze(&g1, nf, true),
        dealiaser.analyze(&g2, nf, true),
        dealiaser.analyze(&g3, nf, true),
    ]
}

/// Evolves the transformed 3-component system; the Jordan-patterned linear
/// part is exact per Fourier mode.
pub fn burgers_system_evolve(
    state0: &BurgersKwakState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<BurgersKwakTrajectory, KwakError> {
    validate_field(&state0.u)?;
    let (steps, h) = validate_span(t_span, dt)?;
    let nf = state0.u.max_mode();
    let nu = state0.nu;
    let pattern = BlockPattern::burgers3();
    let mut dealiaser = Dealiaser::new();

    // per-|k| 3×3 operator tables
    let ops: Vec<[nalgebra::DMatrix<f64>; 3]> = (0..=nf as i64)
        .map(|k| {
            let l = nu * (k * k) as f64;
            [
                block_propagator(l, h, &pattern),
                block_propagator(l, h / 2.0, &pattern),
                block_phi0(l, h / 2.0, &pattern),
            ]
        })
        .collect();
    let apply = |idx: usize, fields: &[FourierField; 3]| -> [FourierField; 3] {
        let mut out = [
            FourierField::zeros(nf, true),
            FourierField::zeros(nf, true),
            FourierField::zeros(nf, true),
        ];
        for k in -(nf as i64)..=nf as i64 {
            let m = &ops[k.unsigned_abs() as usize][idx];
            let z = [fields[0].coeff(k), fields[1].coeff(k), fields[2].coeff(k)];
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::ZERO;
                for (j, zj) in z.iter().enumerate() {
                    acc += zj * m[(i, j)];
                }
                o.set_coeff(k, acc);
            }
        }
        out
    };
    let add3 = |a: &[FourierField; 3], b: &[FourierField; 3], s: f64| -> [FourierField; 3] {
        [
            a[0].add(&b[0].scale(s)),
            a[1].add(&b[1].scale(s)),
            a[2].add(&b[2].scale(s)),
        ]
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t_span.0);
    states.push([state0.u.clone(), state0.v.clone(), state0.w.clone()]);
    let mut cur = states[0].clone();
    for step in 0..steps {
        let g0 = system_rhs(&cur, nu, &state0.reaction, &mut dealiaser);
        let mid = add3(&apply(1, &cur), &apply(2, &g0), 1.0);
        let gm = system_rhs(&mid, nu, &state0.reaction, &mut dealiaser);
        cur = add3(&apply(0, &cur), &apply(1, &gm), h);
        if !cur.iter().all(|f| f.is_finite()) {
            return Err(KwakError::Diverged {
                step: step + 1,
                time: t_span.0 + (step + 1) as f64 * h,
            });
        }
        times.push(t_span.0 + (step + 1) as f64 * h);
        states.push(cur.clone());
    }
    Ok(BurgersKwakTrajectory { times, states, nu })
}

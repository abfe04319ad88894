//! Truncated Fourier series on `(-π, π)` and alias-free pseudospectral
//! products.
//!
//! A field stores the modes `k = -N_f ..= N_f`. Nonlinear terms are formed
//! by synthesis on a zero-padded grid sized to the polynomial degree of the
//! product (at least as protective as the classical 2/3 rule), pointwise
//! evaluation, and truncation back to `N_f` modes, which makes polynomial
//! products of band-limited fields exact up to rounding.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Complex Fourier coefficients for modes `-nf..=nf`, stored at `k + nf`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    coeffs: Vec<Complex64>,
    nf: usize,
    real: bool,
}

impl FourierField {
    pub fn zeros(nf: usize, real: bool) -> Self {
        Self {
            coeffs: vec![Complex64::ZERO; 2 * nf + 1],
            nf,
            real,
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>, real: bool) -> Self {
        assert!(coeffs.len() % 2 == 1, "need modes -N..=N");
        let nf = coeffs.len() / 2;
        Self { coeffs, nf, real }
    }

    pub fn max_mode(&self) -> usize {
        self.nf
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.nf {
            Complex64::ZERO
        } else {
            self.coeffs[(k + self.nf as i64) as usize]
        }
    }

    pub fn set_coeff(&mut self, k: i64, v: Complex64) {
        let idx = (k + self.nf as i64) as usize;
        self.coeffs[idx] = v;
    }

    /// Sets `c_k = v` and `c_{-k} = v̄` (the real-field constructor).
    pub fn set_pair(&mut self, k: i64, v: Complex64) {
        self.set_coeff(k, v);
        if k != 0 {
            self.set_coeff(-k, v.conj());
        } else {
            self.set_coeff(0, Complex64::new(v.re, 0.0));
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Worst deviation from conjugate symmetry, relative to the largest
    /// coefficient.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        let mut worst: f64 = 0.0;
        for k in 0..=self.nf as i64 {
            worst = worst.max((self.coeff(k) - self.coeff(-k).conj()).norm());
        }
        worst / scale
    }

    /// `L²(-π, π)` norm via Parseval: `‖u‖ = √(2π Σ_k |c_k|²)`.
    pub fn norm_l2(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Applies a wavenumber multiplier `c_k ↦ m(k)·c_k`.
    pub fn apply_multiplier(&self, m: impl Fn(i64) -> Complex64) -> Self {
        let mut out = self.clone();
        for k in -(self.nf as i64)..=self.nf as i64 {
            out.set_coeff(k, self.coeff(k) * m(k));
        }
        out
    }

    /// `∂_x`: `c_k ↦ ik·c_k`.
    pub fn derivative(&self) -> Self {
        self.apply_multiplier(|k| Complex64::new(0.0, k as f64))
    }

    /// Spectral antiderivative with zero mean: `c_k ↦ c_k/(ik)`, `c_0 ↦ 0`.
    pub fn antiderivative(&self) -> Self {
        self.apply_multiplier(|k| {
            if k == 0 {
                Complex64::ZERO
            } else {
                Complex64::new(0.0, -1.0 / k as f64)
            }
        })
    }

    /// `(∂_x² - 1)^{-1}`: division by `-(k² + 1)`, invertible on every mode.
    pub fn inv_helmholtz(&self) -> Self {
        self.apply_multiplier(|k| Complex64::new(-1.0 / (k as f64 * k as f64 + 1.0), 0.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.apply_multiplier(|_| Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nf, other.nf);
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
            nf: self.nf,
            real: self.real && other.real,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.nf, other.nf);
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
            nf: self.nf,
            real: self.real && other.real,
        }
    }

    /// Re-truncates (or zero-extends) to a new mode count.
    pub fn resize(&self, nf: usize) -> Self {
        let mut out = Self::zeros(nf, self.real);
        let keep = self.nf.min(nf) as i64;
        for k in -keep..=keep {
            out.set_coeff(k, self.coeff(k));
        }
        out
    }
}

/// Grid size that renders degree-`deg` products of `nf`-band fields
/// alias-free (power of two for the FFT).
pub fn padded_len(nf: usize, deg: usize) -> usize {
    ((deg + 1) * nf + 2).next_power_of_two()
}

/// FFT context: synthesis to a physical grid, pointwise evaluation,
/// analysis back to spectral.
pub struct Dealiaser {
    planner: FftPlanner<f64>,
}

impl Default for Dealiaser {
    fn default() -> Self {
        Self::new()
    }
}

impl Dealiaser {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    /// Values at the grid `x_j = -π + 2πj/m`.
    pub fn synthesize(&mut self, field: &FourierField, m: usize) -> Vec<Complex64> {
        assert!(m >= 2 * field.max_mode() + 1, "grid too coarse");
        let mut buf = vec![Complex64::ZERO; m];
        for k in -(field.max_mode() as i64)..=field.max_mode() as i64 {
            let bin = k.rem_euclid(m as i64) as usize;
            // phase e^{-ikπ} shifts the grid origin to -π
            let phase = if k % 2 == 0 { 1.0 } else { -1.0 };
            buf[bin] = field.coeff(k) * phase;
        }
        self.planner.plan_fft_inverse(m).process(&mut buf);
        buf
    }

    /// Inverse of [`Self::synthesize`], truncated to `nf` modes.
    pub fn analyze(&mut self, phys: &[Complex64], nf: usize, real: bool) -> FourierField {
        let m = phys.len();
        let mut buf = phys.to_vec();
        self.planner.plan_fft_forward(m).process(&mut buf);
        let mut out = FourierField::zeros(nf, real);
        for k in -(nf as i64)..=nf as i64 {
            let bin = k.rem_euclid(m as i64) as usize;
            let phase = if k % 2 == 0 { 1.0 } else { -1.0 };
            out.set_coeff(k, buf[bin] * phase / m as f64);
        }
        out
    }

    /// Alias-free product of two fields.
    pub fn product(&mut self, a: &FourierField, b: &FourierField) -> FourierField {
        assert_eq!(a.max_mode(), b.max_mode());
        let nf = a.max_mode();
        let m = padded_len(nf, 2);
        let pa = self.synthesize(a, m);
        let pb = self.synthesize(b, m);
        let prod: Vec<Complex64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        self.analyze(&prod, nf, a.is_real() && b.is_real())
    }

    /// Evaluates a real pointwise function of several real fields on a grid
    /// sized for polynomial degree `deg`, returning the truncated spectrum.
    pub fn eval_real(
        &mut self,
        fields: &[&FourierField],
        deg: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> FourierField {
        assert!(!fields.is_empty());
        let nf = fields[0].max_mode();
        assert!(fields.iter().all(|g| g.max_mode() == nf));
        let m = padded_len(nf, deg.max(1));
        let phys: Vec<Vec<Complex64>> = fields.iter().map(|g| self.synthesize(g, m)).collect();
        let mut vals = vec![Complex64::ZERO; m];
        let mut args = vec![0.0; fields.len()];
        for j in 0..m {
            for (a, p) in args.iter_mut().zip(&phys) {
                *a = p[j].re;
            }
            vals[j] = Complex64::new(f(&args), 0.0);
        }
        self.analyze(&vals, nf, true)
    }
}

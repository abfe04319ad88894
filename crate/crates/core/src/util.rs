//! Small numerical kernels shared across modules.

/// Moment integrals of the exponential kernel,
/// `I_q(λ, h) = ∫_0^h σ^q e^{-λσ} dσ` for `q = 0..=qmax`.
///
/// Valid for any real `λ` (including `λ = 0` and `λ < 0`, where the kernel
/// grows). Uses the downward-stable recurrence
/// `I_q = (q·I_{q-1} - h^q e^{-λh}) / λ` when `|λh|` is large enough and a
/// truncated power series otherwise, so no cancellation blows up as `λh → 0`.
pub fn exp_moments(lambda: f64, h: f64, qmax: usize) -> Vec<f64> {
    debug_assert!(h >= 0.0);
    let x = lambda * h;
    let mut out = Vec::with_capacity(qmax + 1);
    if x.abs() < 1.0 {
        // I_q = h^{q+1} Σ_{i≥0} (-x)^i / (i! (q+1+i))
        for q in 0..=qmax {
            let mut term = 1.0;
            let mut sum = 1.0 / (q as f64 + 1.0);
            for i in 1..40 {
                term *= -x / i as f64;
                let contrib = term / (q as f64 + 1.0 + i as f64);
                sum += contrib;
                if contrib.abs() <= 1e-18 * sum.abs() {
                    break;
                }
            }
            out.push(h.powi(q as i32 + 1) * sum);
        }
    } else {
        let e = (-x).exp();
        let mut prev = -(-x).exp_m1() / lambda;
        out.push(prev);
        for q in 1..=qmax {
            let cur = (q as f64 * prev - h.powi(q as i32) * e) / lambda;
            out.push(cur);
            prev = cur;
        }
    }
    out
}

/// Least-squares line fit `y ≈ a + b t`; returns `(a, b, residuals)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    assert_eq!(t.len(), y.len());
    assert!(t.len() >= 2, "need at least two points for a line fit");
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        stt += (ti - tm) * (ti - tm);
        sty += (ti - tm) * (yi - ym);
    }
    let b = sty / stt;
    let a = ym - b * tm;
    let res = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| yi - (a + b * ti))
        .collect();
    (a, b, res)
}

/// Golden-section search for the minimizer of a unimodal `f` on `[a, b]`.
///
/// Runs until the bracket shrinks below `tol` (absolute) or stops moving at
/// floating-point resolution; returns the bracket midpoint.
pub fn golden_section_min(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol || c >= d {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moments_match_closed_forms() {
        // I_0 = (1 - e^{-λh})/λ, I_1 = (1 - (1+λh)e^{-λh})/λ²; the raw
        // closed forms are only well conditioned away from λh = 0.
        for &(lambda, h) in &[(2.0, 0.7), (50.0, 0.3), (-3.0, 0.2)] {
            let m = exp_moments(lambda, h, 2);
            let i0 = (1.0 - (-lambda * h as f64).exp()) / lambda;
            let i1 = (1.0 - (1.0 + lambda * h) * (-lambda * h as f64).exp()) / (lambda * lambda);
            assert_relative_eq!(m[0], i0, max_relative = 1e-13);
            assert_relative_eq!(m[1], i1, max_relative = 1e-12, epsilon = 1e-300);
        }
        let m = exp_moments(0.0, 0.9, 2);
        assert_relative_eq!(m[0], 0.9, max_relative = 1e-15);
        assert_relative_eq!(m[1], 0.9 * 0.9 / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn moments_match_simpson_quadrature() {
        // λh on both sides of the series/recurrence switch
        for &(lambda, h) in &[(0.9, 1.0), (1.1, 1.0), (-0.95, 1.0), (7.0, 0.6), (0.0, 1.3)] {
            let m = exp_moments(lambda, h, 3);
            for q in 0..=3usize {
                let n = 20_000;
                let dx = h / n as f64;
                let f = |s: f64| s.powi(q as i32) * (-lambda * s).exp();
                let mut simpson = f(0.0) + f(h);
                for i in 1..n {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    simpson += w * f(i as f64 * dx);
                }
                simpson *= dx / 3.0;
                assert_relative_eq!(m[q], simpson, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn golden_section_finds_quadratic_min() {
        let x = golden_section_min(0.0, 10.0, 1e-12, |x| (x - 3.7) * (x - 3.7));
        assert_relative_eq!(x, 3.7, max_relative = 1e-9);
    }
}

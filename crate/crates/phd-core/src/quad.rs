//! Trapezoidal quadrature on (possibly non-uniform) sample grids.

use num_complex::Complex64;

/// Trapezoid weights so that ∫f ≈ Σ_k w_k f(t_k).
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = 0.5 * (times[k] - times[k - 1]);
        w[k - 1] += h;
        w[k] += h;
    }
    w
}

/// Phase samples e^{i·sign·ω·t_k}.
pub fn phases(times: &[f64], omega: f64, sign: f64) -> Vec<Complex64> {
    times.iter().map(|&t| Complex64::from_polar(1.0, sign * omega * t)).collect()
}

/// ∫ f dt with the trapezoid rule.
pub fn integrate(times: &[f64], f: &[Complex64]) -> Complex64 {
    debug_assert_eq!(times.len(), f.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..times.len() {
        acc += (f[k] + f[k - 1]) * (0.5 * (times[k] - times[k - 1]));
    }
    acc
}

/// Prefix sums for ordered double integrals.
///
/// Ordered integrals ∫dt₁∫_0^{t₁}dt₂ use the product trapezoid weights
/// w_{k₁}w_{k₂} restricted to k₂ < k₁, with the diagonal k₂ = k₁ weighted
/// by ½w_{k₁}². The two orderings then add up to the square exactly, which
/// keeps every algebraic identity between ordered and unordered integrals
/// exact on the grid. Returns C_k = Σ_{j<k} w_j f_j + ½w_k f_k.
pub fn ordered_prefix(weights: &[f64], f: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(weights.len(), f.len());
    let mut acc = Complex64::new(0.0, 0.0);
    weights
        .iter()
        .zip(f)
        .map(|(&w, &v)| {
            let c = acc + v * (0.5 * w);
            acc += v * w;
            c
        })
        .collect()
}

/// Weight of the grid point (k₁, k₂) in an ordered double integral.
pub fn ordered_weight(weights: &[f64], k1: usize, k2: usize) -> f64 {
    match k2.cmp(&k1) {
        std::cmp::Ordering::Less => weights[k1] * weights[k2],
        std::cmp::Ordering::Equal => 0.5 * weights[k1] * weights[k1],
        std::cmp::Ordering::Greater => 0.0,
    }
}

/// ∫dt₁ g(t₁) ∫_0^{t₁} f(t₂) dt₂ with the ordered weights above.
pub fn ordered_double(times: &[f64], g: &[Complex64], f: &[Complex64]) -> Complex64 {
    let w = trapezoid_weights(times);
    let c = ordered_prefix(&w, f);
    w.iter().zip(g).zip(&c).map(|((w, g), c)| g * c * *w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_polynomials() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let w = trapezoid_weights(&t);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        let lin: f64 = w.iter().zip(&t).map(|(w, t)| w * t).sum();
        assert!((lin - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ordered_matches_direct_double_sum() {
        let t: Vec<f64> = (0..40).map(|k| (k as f64 * 0.13).powf(1.1)).collect();
        let g: Vec<Complex64> = t.iter().map(|&x| Complex64::new(x.cos(), x.sin() * 0.3)).collect();
        let f: Vec<Complex64> = t.iter().map(|&x| Complex64::new(1.0 + x, -x * x)).collect();
        let w = trapezoid_weights(&t);
        let mut direct = Complex64::new(0.0, 0.0);
        for k1 in 0..t.len() {
            for k2 in 0..t.len() {
                direct += g[k1] * f[k2] * ordered_weight(&w, k1, k2);
            }
        }
        let fast = ordered_double(&t, &g, &f);
        assert!((fast - direct).norm() < 1e-12 * direct.norm());
        // Both orderings together give the full square.
        let square = integrate(&t, &g) * integrate(&t, &f);
        let both = fast + ordered_double(&t, &f, &g);
        assert!((both - square).norm() < 1e-12 * square.norm());
    }

    #[test]
    fn ordered_integral_converges() {
        // ∫_0^1 dt₁ ∫_0^{t₁} dt₂ t₂ = 1/6
        let t: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
        let one = vec![Complex64::new(1.0, 0.0); t.len()];
        let lin: Vec<Complex64> = t.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let v = ordered_double(&t, &one, &lin);
        assert!((v.re - 1.0 / 6.0).abs() < 1e-5);
    }
}

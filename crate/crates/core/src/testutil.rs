//! Shared helpers for unit tests: tolerance asserts, a central-difference
//! gradient oracle, and a quadrature-based standard-normal CDF that stays
//! independent of the implementations it checks.

/// Asserts |a − b| ≤ tol with a readable message.
pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!(
        (a - b).abs() <= tol,
        "expected {a} ≈ {b} (diff {:.3e} > tol {tol:.1e})",
        (a - b).abs()
    );
}

/// Max relative error between an analytic gradient and central finite
/// differences of `f` at `x` with step `h`. The denominator is floored at
/// 1e-6 so components that are numerically zero do not dominate through
/// finite-difference roundoff.
pub fn central_diff_max_rel_err(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    h: f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// Standard-normal CDF by composite Simpson integration of the density from
/// 0 to |z| (2000 panels), independent of the erf-based implementation in
/// the smoothing module.
pub fn norm_cdf_quadrature(z: f64) -> f64 {
    let upper = z.abs();
    let n = 2000usize;
    let h = upper / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(0.0) + pdf(upper);
    for i in 1..n {
        let t = i as f64 * h;
        acc += pdf(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half_integral = acc * h / 3.0;
    if z >= 0.0 {
        0.5 + half_integral
    } else {
        0.5 - half_integral
    }
}

/// Inverts [`norm_cdf_quadrature`] by bisection; usable for p away from the
/// extreme tails.
pub fn inv_norm_cdf_bisection(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if norm_cdf_quadrature(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_cdf_hits_known_points() {
        assert_close(norm_cdf_quadrature(0.0), 0.5, 1e-12);
        assert_close(norm_cdf_quadrature(1.0), 0.841344746068543, 1e-9);
        assert_close(norm_cdf_quadrature(-1.96), 0.024997895148220435, 1e-9);
    }

    #[test]
    fn bisection_inverts_quadrature() {
        for &p in &[0.1, 0.25, 0.5, 0.841344746, 0.99] {
            let z = inv_norm_cdf_bisection(p);
            assert_close(norm_cdf_quadrature(z), p, 1e-9);
        }
    }
}

//! Gamma-function helpers and sphere constants.

#[allow(unused_imports)]
use num_traits::Float;

pub const PI: f64 = core::f64::consts::PI;
pub const SQRT_PI: f64 = 1.772_453_850_905_516_f64;

/// Gamma function, accurate to better than 1e-12 relative on `[0.5, 170]`.
/// Overflows above ~171.6; use [`ln_gamma`] for ratios of large arguments.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Natural log of |Gamma(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Gamma(a) / Gamma(b) for positive arguments, stable for large a, b.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    if a < 150.0 && b < 150.0 {
        gamma(a) / gamma(b)
    } else {
        (ln_gamma(a) - ln_gamma(b)).exp()
    }
}

/// Surface measure of the unit sphere S^{n-1} in R^n: 2 pi^{n/2} / Gamma(n/2).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Lebesgue volume of the radius-r ball in R^n.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0) * r.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma(0.5), SQRT_PI) < 1e-12);
        assert!(rel(gamma(1.0), 1.0) < 1e-12);
        assert!(rel(gamma(5.0), 24.0) < 1e-12);
        assert!(rel(gamma(2.5), 1.329_340_388_179_137_f64) < 1e-12);
    }

    #[test]
    fn gamma_recurrence_across_range() {
        // Gamma(x+1) = x Gamma(x), checked on [0.5, 500] through ln_gamma.
        let mut x = 0.5;
        while x <= 500.0 {
            let lhs = ln_gamma(x + 1.0);
            let rhs = x.ln() + ln_gamma(x);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "x={x}");
            x += 7.3;
        }
    }

    #[test]
    fn gamma_ratio_large_arguments() {
        // Gamma(b+1)/Gamma(b) = b exactly.
        for &b in &[10.0, 120.0, 300.0, 450.0] {
            assert!(rel(gamma_ratio(b + 1.0, b), b) < 1e-12);
        }
    }

    #[test]
    fn sphere_and_ball_constants() {
        assert!(rel(sphere_area(1), 2.0) < 1e-14);
        assert!(rel(sphere_area(2), 2.0 * PI) < 1e-14);
        assert!(rel(sphere_area(3), 4.0 * PI) < 1e-14);
        assert!(rel(ball_volume(2, 1.0), PI) < 1e-14);
        assert!(rel(ball_volume(3, 2.0), 32.0 * PI / 3.0) < 1e-14);
    }
}

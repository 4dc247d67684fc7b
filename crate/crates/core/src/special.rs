//! Standard normal CDF and density.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Arguments are clamped to `±CLAMP` so probabilities never underflow to
/// exactly zero: `Φ(-38) ≈ 2.9e-316` is still a positive subnormal.
pub const CLAMP: f64 = 38.0;

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    let x = x.clamp(-CLAMP, CLAMP);
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    let x = x.clamp(-CLAMP, CLAMP);
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Reference values from mpmath at 30 digits.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-3.0, 1.349_898_031_630_094_6e-3),
            (-10.0, 7.619_853_024_160_526_1e-24),
            (5.0, 0.999_999_713_348_428_1),
        ];
        for (x, want) in cases {
            let got = normal_cdf(x);
            assert!(
                ((got - want) / want).abs() < 4e-15,
                "Φ({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn symmetric_and_positive_in_tails() {
        for &x in &[0.3, 1.7, 4.2, 9.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
        assert!(normal_cdf(-1e6) > 0.0);
        assert!(normal_cdf(-38.0) > 0.0);
        assert!((normal_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
    }
}

//! Standard normal upper tail `Q(x) = P(Z > x) = erfc(x / sqrt 2) / 2`.
//!
//! `erfc` comes from `libm`, which keeps full relative accuracy deep into
//! the tail, so probabilities near `1e-300` are still meaningful.

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// `Q(x)` for any scalar type. NaN is rejected; infinities map to 0 or 1.
pub fn q_function<T: Real>(x: T) -> Result<T> {
    if x.is_nan() {
        return invalid("Q-function argument is NaN");
    }
    Ok(T::lit(q(x.as_f64())))
}

/// `Q(x)` in `f64`; NaN propagates.
#[inline]
pub fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    #[test]
    fn known_points() {
        assert_eq!(q(0.0), 0.5);
        assert!(q(8.0) < 1e-14);
        assert_eq!(q(f64::INFINITY), 0.0);
        assert_eq!(q(f64::NEG_INFINITY), 1.0);
        assert!(q_function(f64::NAN).is_err());
        assert_eq!(q_function(0.0f32).unwrap(), 0.5);
    }

    #[test]
    fn reference_values() {
        // High-precision reference values (50-digit arithmetic).
        let cases = [
            (0.5, 0.308_537_538_725_986_9),
            (1.0, 0.158_655_253_931_457_05),
            (2.0, 0.022_750_131_948_179_207),
            (2.828_427_124_746_190_3, 0.002_338_867_490_523_631_4),
            (3.0, 0.001_349_898_031_630_094_5),
            (4.753_424_308_822_899, 9.999_999_999_999_997e-7),
            (6.0, 9.865_876_450_376_981e-10),
            (8.0, 6.220_960_574_271_784e-16),
            (12.0, 1.776_482_112_077_679e-33),
            (20.0, 2.753_624_118_606_233_7e-89),
            (30.0, 4.906_713_927_148_187e-198),
        ];
        for (x, want) in cases {
            let got = q(x);
            assert!(((got - want) / want).abs() < 1e-13, "Q({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn symmetry_on_grid() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert!((q(x) + q(-x) - 1.0).abs() < 1e-12);
            x += 0.01;
        }
    }
}

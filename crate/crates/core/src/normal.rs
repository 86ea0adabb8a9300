//! Standard normal distribution function.

use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

/// Φ(z), evaluated through the complementary error function so that both
/// tails keep full relative precision.
pub fn std_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Φ((x − mean) / sd). A zero standard deviation gives the point-mass CDF.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return if x >= mean { 1.0 } else { 0.0 };
    }
    std_normal_cdf((x - mean) / sd)
}

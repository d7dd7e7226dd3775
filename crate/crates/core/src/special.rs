//! Scaled complementary error function.

use libm::erfc;

/// `exp(z^2) erfc(z)` without overflow for large `z`.
pub fn erfcx(z: f64) -> f64 {
    if z < 5.0 {
        return (z * z).exp() * erfc(z);
    }
    // continued fraction 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))), evaluated backwards
    let mut tail = z;
    for k in (1..=60).rev() {
        tail = z + (k as f64) / 2.0 / tail;
    }
    1.0 / (std::f64::consts::PI.sqrt() * tail)
}

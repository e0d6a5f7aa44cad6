//! Standard normal distribution function.

use std::f64::consts::SQRT_2;

/// `Φ(z)`, computed as `erfc(-z/√2)/2` with the musl `erfc` port, which keeps
/// the absolute error near machine precision over the whole line.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal density.
pub fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

//! Seeded sampling helpers.

use alloc::vec::Vec;

use rand::Rng;

/// Standard normal deviate by the Box-Muller transform.
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Uniform point on the unit sphere `S^{n-1}`.
pub fn sphere<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        let r = crate::geometry::norm(&v);
        if r > 1e-12 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

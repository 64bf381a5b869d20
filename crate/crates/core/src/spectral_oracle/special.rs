//! Bessel functions of the first kind, their zeros, and zonal polynomials.

use crate::error::{bail, Result};

/// `J_ν(x)` for `ν ≥ 0`, `0 ≤ x ≤ 30`, by its power series.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = libm::pow(half, nu) / libm::tgamma(nu + 1.0);
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= q / (m * (m + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && m > half {
            break;
        }
        m += 1.0;
        if m > 500.0 {
            break;
        }
    }
    sum
}

/// The `n`-th positive zero `j_{ν,n}` (`n ≥ 1`) by bracketing and bisection.
pub fn bessel_zero(nu: f64, n: usize, tol: f64) -> Result<f64> {
    if !(nu >= 0.0) || n == 0 {
        bail!(Parameter, "bessel_zero needs ν ≥ 0 and n ≥ 1");
    }
    let step = 0.01;
    let mut a = step;
    let mut fa = bessel_j(nu, a);
    let mut found = 0;
    while a < 30.0 {
        let b = a + step;
        let fb = bessel_j(nu, b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == n {
                return Ok(bisect(|t| bessel_j(nu, t), a, b, tol));
            }
        }
        a = b;
        fa = fb;
    }
    bail!(Accuracy, "zero {n} of J_{nu} not found below 30")
}

pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Fills `out[l] = C_l^{(λ)}(t)` for `λ > 0`, or `P_l(t)` when `λ = 1/2`.
pub fn gegenbauer_table(lambda: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = 2.0 * lambda * t;
    for n in 2..out.len() {
        let nf = n as f64;
        out[n] = (2.0 * (nf + lambda - 1.0) * t * out[n - 1] - (nf + 2.0 * lambda - 2.0) * out[n - 2]) / nf;
    }
}

/// `sinh(z)/z`, continuous at 0.
pub fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z * z / 6.0
    } else {
        libm::sinh(z) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn half_order_is_elementary() {
        for &x in &[0.3, 1.0, 2.5, 3.1] {
            let exact = libm::sqrt(2.0 / (PI * x)) * libm::sin(x);
            assert_relative_eq!(bessel_j(0.5, x), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn known_zeros() {
        assert_relative_eq!(bessel_zero(0.0, 1, 1e-13).unwrap(), 2.404825557695773, epsilon = 1e-11);
        assert_relative_eq!(bessel_zero(0.5, 1, 1e-13).unwrap(), PI, epsilon = 1e-11);
        assert_relative_eq!(bessel_zero(1.0, 1, 1e-13).unwrap(), 3.831705970207512, epsilon = 1e-11);
        assert_relative_eq!(bessel_zero(0.0, 2, 1e-13).unwrap(), 5.520078110286311, epsilon = 1e-11);
    }

    #[test]
    fn legendre_values() {
        let mut p = [0.0; 4];
        gegenbauer_table(0.5, 0.3, &mut p);
        assert_relative_eq!(p[2], 0.5 * (3.0 * 0.09 - 1.0), epsilon = 1e-15);
        assert_relative_eq!(p[3], 0.5 * (5.0 * 0.027 - 3.0 * 0.3), epsilon = 1e-15);
    }
}

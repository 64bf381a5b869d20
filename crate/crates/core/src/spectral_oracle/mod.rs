//! Separation-of-variables reference kernels for the unit ball with `K = {0}`.
//!
//! The Green function expands as `Σ_ℓ g_ℓ(|x|,|y|) Z_ℓ(cos θ)` where `Z_ℓ` is
//! the zonal kernel of degree `ℓ` on `S^{N-1}` and `g_ℓ` is the radial Green
//! factor built from the recessive solution `r^{β₊(ℓ)}` at the origin.

pub mod special;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::geometry::{dist, dot, norm, sphere_area, DomainKind, DomainSpec, SingularSet};
use special::{bessel_j, bessel_zero, gegenbauer_table, sinhc};

pub const DEFAULT_L_MAX: usize = 200;

/// Radial content of one spherical-harmonic degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub ell: usize,
    pub hardy: f64,
    /// `ν_ℓ = sqrt(H² - μ + ℓ(ℓ + N - 2))`.
    pub nu: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

impl ModeSolution {
    pub fn new(dim: usize, mu: f64, ell: usize) -> Self {
        let hardy = (dim as f64 - 2.0) / 2.0;
        let l = ell as f64;
        let nu = libm::sqrt((hardy * hardy - mu + l * (l + dim as f64 - 2.0)).max(0.0));
        ModeSolution { ell, hardy, nu, beta_plus: -hardy + nu, beta_minus: -hardy - nu }
    }

    /// Solution vanishing at `r = 1`: `r^{-H} sinh(ν ln(1/r))/ν`, with the
    /// log branch `r^{-H} ln(1/r)` at `ν = 0`.
    pub fn outer(&self, r: f64) -> f64 {
        let l = -libm::log(r);
        libm::pow(r, -self.hardy) * l * sinhc(self.nu * l)
    }

    /// Recessive solution `r^{β₊}` at the origin.
    pub fn inner(&self, r: f64) -> f64 {
        libm::pow(r, self.beta_plus)
    }

    /// `g_ℓ(r, s) = r_<^{β₊} r_>^{-H} sinh(ν ln(1/r_>))/ν`.
    pub fn g(&self, r: f64, s: f64) -> f64 {
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        self.inner(lo) * self.outer(hi)
    }
}

/// Zonal kernel `Z_ℓ(t) = (2ℓ+N-2)/((N-2)|S^{N-1}|) C_ℓ^{(N-2)/2}(t)` for all
/// `ℓ ≤ l_max`.
pub fn zonal_table(dim: usize, t: f64, l_max: usize) -> Vec<f64> {
    let lambda = (dim as f64 - 2.0) / 2.0;
    let mut c = vec![0.0; l_max + 1];
    gegenbauer_table(lambda, t.clamp(-1.0, 1.0), &mut c);
    let area = sphere_area(dim);
    for (l, v) in c.iter_mut().enumerate() {
        *v *= (2.0 * l as f64 + dim as f64 - 2.0) / ((dim as f64 - 2.0) * area);
    }
    c
}

/// A series value with a tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

fn check_ball(spec: &DomainSpec) -> Result<()> {
    match (spec.kind(), spec.singular()) {
        (DomainKind::Ball { radius }, SingularSet::Origin) if *radius == 1.0 => Ok(()),
        _ => bail!(DomainKind, "the spectral oracle covers the unit ball with K = {{0}} only"),
    }
}

fn check_interior(spec: &DomainSpec, x: &[f64]) -> Result<f64> {
    let (d, dk) = spec.distances(x)?;
    if d == 0.0 {
        bail!(Domain, "point lies on ∂Ω");
    }
    if dk == 0.0 {
        bail!(SingularPoint, "point lies on K");
    }
    Ok(dk)
}

/// Green function of `-Δ` on the unit ball by Kelvin reflection.
pub fn kelvin_green(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let cn = 1.0 / ((n as f64 - 2.0) * sphere_area(n));
    let s = norm(y);
    let e = 2.0 - n as f64;
    let reflected: Vec<f64> = y.iter().map(|c| c / (s * s)).collect();
    cn * (libm::pow(dist(x, y), e) - libm::pow(s * dist(x, &reflected), e))
}

fn cos_angle(x: &[f64], y: &[f64]) -> f64 {
    (dot(x, y) / (norm(x) * norm(y))).clamp(-1.0, 1.0)
}

/// Minimal Green function `G_μ(x, y)` of the unit ball punctured at 0.
///
/// The series is accelerated by subtracting its `μ = 0` counterpart, which
/// is known in closed form; the remaining terms have the same degree-wise
/// angular factors with radial factors that decay faster in `ℓ`.
pub fn oracle_green(spec: &DomainSpec, x: &[f64], y: &[f64], l_max: usize, tol: f64) -> Result<OracleValue> {
    check_ball(spec)?;
    let r = check_interior(spec, x)?;
    let s = check_interior(spec, y)?;
    if dist(x, y) == 0.0 {
        bail!(Coincidence, "x = y");
    }
    let n = spec.dim();
    let mu = spec.mu();
    let base = kelvin_green(x, y);
    if mu == 0.0 {
        return Ok(OracleValue { value: base, tail_bound: 0.0, terms: 0 });
    }
    let z = zonal_table(n, cos_angle(x, y), l_max);
    let rho = r.min(s) / r.max(s);
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for l in 0..=l_max {
        let gm = ModeSolution::new(n, mu, l).g(r, s);
        let g0 = ModeSolution::new(n, 0.0, l).g(r, s);
        let term = (gm - g0) * z[l];
        sum += term;
        let envelope = ((gm - g0).abs()) * (2.0 * l as f64 + n as f64 - 2.0) / sphere_area(n);
        let tail = if rho < 0.999 {
            envelope * rho / (1.0 - rho)
        } else {
            envelope * l as f64
        };
        let value = base + sum;
        if l >= 4 && tail <= tol * value.abs() {
            return Ok(OracleValue { value, tail_bound: tail, terms: l + 1 });
        }
        last = tail;
    }
    bail!(
        Accuracy,
        "green series not converged at L_max = {l_max}: partial value {}, tail bound {last}",
        base + sum
    )
}

/// Principal Dirichlet eigenpair of `-L_μ` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOracle {
    pub lambda: f64,
    pub nu: f64,
    pub sqrt_lambda: f64,
    pub hardy: f64,
    pub scale: f64,
}

impl EigenOracle {
    /// `L²`-normalised radial profile `c r^{-H} J_ν(√λ r)`.
    pub fn profile(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        self.scale * libm::pow(r, -self.hardy) * bessel_j(self.nu, self.sqrt_lambda * r)
    }
}

pub fn oracle_eigen(spec: &DomainSpec) -> Result<EigenOracle> {
    check_ball(spec)?;
    let nu = spec.disc();
    let hardy = spec.hardy();
    let k = bessel_zero(nu, 1, 1e-12)?;
    let jn1 = bessel_j(nu + 1.0, k);
    // ∫_0^1 r J_ν(kr)² dr = J_{ν+1}(k)²/2 at a zero k of J_ν.
    let scale = libm::sqrt(2.0 / (sphere_area(spec.dim()) * jn1 * jn1));
    Ok(EigenOracle { lambda: k * k, nu, sqrt_lambda: k, hardy, scale })
}

/// Martin kernel at `ξ = 0`, `q₀(|x|)/q₀(|x₀|)` with `q₀` the `ℓ = 0` outer solution.
pub fn martin_at_origin(spec: &DomainSpec, x: &[f64], x0: &[f64]) -> Result<f64> {
    check_ball(spec)?;
    let r = check_interior(spec, x)?;
    let r0 = check_interior(spec, x0)?;
    let m = ModeSolution::new(spec.dim(), spec.mu(), 0);
    Ok(m.outer(r) / m.outer(r0))
}

/// Poisson kernel `P_μ(x, ξ)` for `ξ ∈ ∂Ω`, the normal derivative of `G_μ`.
pub fn oracle_poisson(spec: &DomainSpec, x: &[f64], xi: &[f64], l_max: usize, tol: f64) -> Result<OracleValue> {
    check_ball(spec)?;
    let r = check_interior(spec, x)?;
    if !spec.on_boundary(xi) {
        bail!(Domain, "ξ is not on ∂Ω");
    }
    let n = spec.dim();
    let base = (1.0 - r * r) / (sphere_area(n) * libm::pow(dist(x, xi), n as f64));
    let mu = spec.mu();
    if mu == 0.0 {
        return Ok(OracleValue { value: base, tail_bound: 0.0, terms: 0 });
    }
    let z = zonal_table(n, cos_angle(x, xi), l_max);
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for l in 0..=l_max {
        let m = ModeSolution::new(n, mu, l);
        let diff = m.inner(r) - libm::pow(r, l as f64);
        sum += diff * z[l];
        let envelope = diff.abs() * (2.0 * l as f64 + n as f64 - 2.0) / sphere_area(n);
        let tail = envelope * r / (1.0 - r);
        let value = base + sum;
        if l >= 4 && tail <= tol * value.abs() {
            return Ok(OracleValue { value, tail_bound: tail, terms: l + 1 });
        }
        last = tail;
    }
    bail!(Accuracy, "poisson series not converged: partial value {}, tail bound {last}", base + sum)
}

/// Martin kernel `K_μ(x, ξ)` normalised by `K_μ(x₀, ξ) = 1`, for `ξ ∈ ∂Ω` or `ξ = 0`.
pub fn oracle_poisson_martin(spec: &DomainSpec, x: &[f64], xi: &[f64], x0: &[f64]) -> Result<f64> {
    check_ball(spec)?;
    if spec.on_k(xi) {
        return martin_at_origin(spec, x, x0);
    }
    if !spec.on_boundary(xi) {
        bail!(Domain, "ξ must lie on ∂Ω or on K");
    }
    if x == x0 {
        return Ok(1.0);
    }
    if spec.mu() == 0.0 {
        // Closed form; the origin is an ordinary point when μ = 0.
        let n = spec.dim() as f64;
        let classical = |z: &[f64]| (1.0 - dot(z, z)) / libm::pow(dist(z, xi), n);
        spec.distances(x)?;
        spec.distances(x0)?;
        return Ok(classical(x) / classical(x0));
    }
    let p = oracle_poisson(spec, x, xi, DEFAULT_L_MAX * 5, 1e-12)?;
    let p0 = oracle_poisson(spec, x0, xi, DEFAULT_L_MAX * 5, 1e-12)?;
    Ok(p.value / p0.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn kelvin_antipodal() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let g = oracle_green(&s, &[0.5, 0.0, 0.0], &[-0.5, 0.0, 0.0], 200, 1e-10).unwrap();
        assert_relative_eq!(g.value, 0.2 / (4.0 * PI), max_relative = 1e-13);
    }

    #[test]
    fn series_matches_kelvin_at_mu_zero() {
        // Plain series with no subtraction, checked against the closed form.
        let x = [0.3, 0.2, -0.1];
        let y = [-0.2, 0.4, 0.3];
        let z = zonal_table(3, cos_angle(&x, &y), 400);
        let (r, s) = (norm(&x), norm(&y));
        let plain: f64 = (0..=400).map(|l| ModeSolution::new(3, 0.0, l).g(r, s) * z[l]).sum();
        assert_relative_eq!(plain, kelvin_green(&x, &y), max_relative = 1e-10);
    }

    #[test]
    fn poisson_closed_form() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let k = oracle_poisson_martin(&s, &[0.5, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(k, 6.0, max_relative = 1e-14);
        let p = oracle_poisson(&s, &[0.5, 0.0, 0.0], &[1.0, 0.0, 0.0], 10, 1e-12).unwrap();
        assert_relative_eq!(p.value * 4.0 * PI, 6.0, max_relative = 1e-14);
    }

    #[test]
    fn eigen_mu_zero_is_pi_squared() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let e = oracle_eigen(&s).unwrap();
        assert_relative_eq!(e.lambda, PI * PI, max_relative = 1e-11);
        let c = DomainSpec::unit_ball(0.25).unwrap();
        assert_relative_eq!(oracle_eigen(&c).unwrap().lambda, 5.783185962946784, max_relative = 1e-10);
    }

    #[test]
    fn critical_mode_zero_is_log_branch() {
        let m = ModeSolution::new(3, 0.25, 0);
        assert_eq!(m.nu, 0.0);
        assert_eq!(m.beta_plus, m.beta_minus);
        let r: f64 = 0.3;
        assert_relative_eq!(m.outer(r), libm::pow(r, -0.5) * -libm::log(r), max_relative = 1e-14);
        assert_eq!(m.outer(1.0), 0.0);
    }
}

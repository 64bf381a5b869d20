//! Principal eigenpair by shifted inverse iteration.

use alloc::vec::Vec;

use crate::error::{bail, Result};

use super::operator::{BoundaryMode, FieldKind, LinearOperator, ScalarField};
use super::sparse::{dot, pcg, Factor, Preconditioner};

const MAX_ITER: usize = 300;
const PLAIN_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Normalised so that `Σ V φ² = 1`, positive on every node.
    pub phi: ScalarField,
    pub iterations: usize,
    /// `‖S v - λ M_w v‖ / ‖λ M_w v‖` at the returned pair.
    pub residual: f64,
}

fn rayleigh(op: &LinearOperator, v: &[f64]) -> f64 {
    let sv = op.stiffness().mul(v);
    let mw = op.weighted_mass();
    let den: f64 = v.iter().zip(mw).map(|(a, m)| a * a * m).sum();
    dot(v, &sv) / den
}

/// Smallest eigenvalue of `-L_μ` with Dirichlet data and its positive eigenfunction.
pub fn principal_eigenpair(op: &LinearOperator, tol: f64) -> Result<EigenPair> {
    if !matches!(op.mode(), BoundaryMode::Zero) {
        bail!(Precondition, "eigenpairs need the zero boundary mode");
    }
    if !(tol > 0.0) {
        bail!(Parameter, "eigen tolerance must be positive");
    }
    let n = op.len();
    let grid = op.grid();
    let w = op.ground();
    let mw = op.weighted_mass();
    let s = op.stiffness();
    let cg_tol = (tol * 1e-2).min(1e-10);
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let p = grid.point(i);
            (1.0 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).max(1e-3) / w[i]
        })
        .collect();
    let mut lambda = rayleigh(op, &v);
    let mut shifted: Option<(f64, super::sparse::Csr, Factor)> = None;
    let mut y = v.clone();
    for it in 1..=MAX_ITER {
        let b: Vec<f64> = v.iter().zip(mw).map(|(a, m)| a * m).collect();
        match &shifted {
            None => {
                pcg(s, op.factor(), &b, &mut y, cg_tol, super::MAX_CG_ITER)?;
            }
            Some((_, m, f)) => {
                if let Err(e) = pcg(m, f, &b, &mut y, cg_tol, super::MAX_CG_ITER) {
                    if !matches!(e, crate::Error::Spectrum(_)) {
                        return Err(e);
                    }
                    shifted = None;
                    y.copy_from_slice(&v);
                    pcg(s, op.factor(), &b, &mut y, cg_tol, super::MAX_CG_ITER)?;
                }
            }
        }
        let scale = libm::sqrt(y.iter().zip(mw).map(|(a, m)| a * a * m).sum::<f64>());
        if !(scale > 0.0) || !scale.is_finite() {
            bail!(Eigen, "inverse iteration collapsed at step {it}");
        }
        for (a, b) in v.iter_mut().zip(&y) {
            *a = b / scale;
        }
        let next = rayleigh(op, &v);
        let change = (next - lambda).abs();
        lambda = next;
        if it >= PLAIN_STEPS && change <= tol * lambda.abs() {
            return finish(op, v, lambda, it);
        }
        if it == PLAIN_STEPS {
            let sigma = 0.8 * lambda;
            let neg: Vec<f64> = mw.iter().map(|m| -sigma * m).collect();
            let m = s.with_diagonal_added(&neg, 1.0);
            let f = Factor::new(&m, Preconditioner::Jacobi);
            shifted = Some((sigma, m, f));
        }
    }
    bail!(Eigen, "inverse iteration stagnated after {MAX_ITER} steps (λ ≈ {lambda})")
}

fn finish(op: &LinearOperator, mut v: Vec<f64>, lambda: f64, iterations: usize) -> Result<EigenPair> {
    let mw = op.weighted_mass();
    let sum: f64 = v.iter().zip(mw).map(|(a, m)| a * m).sum();
    if sum < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    let sv = op.stiffness().mul(&v);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..v.len() {
        let r = sv[i] - lambda * mw[i] * v[i];
        num += r * r;
        let q = lambda * mw[i] * v[i];
        den += q * q;
    }
    let residual = libm::sqrt(num / den);
    let phi: Vec<f64> = v.iter().zip(op.ground()).map(|(a, w)| a * w).collect();
    if let Some(i) = phi.iter().position(|p| !(*p > 0.0)) {
        bail!(Eigen, "eigenfunction changes sign at node {i}");
    }
    let norm = libm::sqrt(op.inner(&phi, &phi));
    let phi = phi.iter().map(|p| p / norm).collect();
    Ok(EigenPair { lambda, phi: ScalarField::new(FieldKind::Eigenfunction, phi), iterations, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::grid::build_grid;
    use crate::geometry::DomainSpec;
    use alloc::sync::Arc;

    fn pair(mu: f64, n: usize) -> (LinearOperator, EigenPair) {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = Arc::new(build_grid(&spec, n, 0.8, 0.02).unwrap());
        let op = LinearOperator::assemble(&spec, grid, BoundaryMode::Zero).unwrap();
        let e = principal_eigenpair(&op, 1e-9).unwrap();
        (op, e)
    }

    #[test]
    fn dirichlet_ball_eigenvalue() {
        let (op, e) = pair(0.0, 33);
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        assert!((e.lambda / pi2 - 1.0).abs() < 0.03);
        assert!(e.phi.values.iter().all(|p| *p > 0.0));
        assert!((op.inner(&e.phi.values, &e.phi.values) - 1.0).abs() < 1e-12);
        assert!(e.residual < 1e-3);
    }

    #[test]
    fn eigenvalue_decreases_with_mu() {
        let l0 = pair(0.0, 17).1.lambda;
        let l1 = pair(0.16, 17).1.lambda;
        let l2 = pair(0.25, 17).1.lambda;
        assert!(l0 > l1 && l1 > l2);
    }

    #[test]
    fn weighted_mode_is_rejected() {
        let spec = DomainSpec::unit_ball(0.0).unwrap();
        let grid = Arc::new(build_grid(&spec, 17, 0.8, 0.05).unwrap());
        let op = LinearOperator::assemble(&spec, grid, BoundaryMode::constant(1.0)).unwrap();
        assert!(matches!(principal_eigenpair(&op, 1e-8), Err(crate::Error::Precondition(_))));
    }
}

//! `-L_μ u = f d_K^{-b}` with zero boundary data and its decay certificate.

use crate::discretization::{BoundaryMode, FieldKind, LinearOperator, ScalarField};
use crate::error::{bail, Result};
use crate::kernels::KERNEL_TOL;

/// Margin used when the admissible range of `γ` is open, `γ > b - 2`.
pub const GAMMA_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SingularSolve {
    pub field: ScalarField,
    pub b: f64,
    pub gamma: f64,
    /// `max |u| / (‖f‖_∞ d d_K^{-γ})` over the nodes.
    pub constant: f64,
    pub f_sup: f64,
}

/// Least admissible `γ ∈ [α₋, ∞) ∩ (b - 2, ∞)`.
pub fn admissible_gamma(alpha_minus: f64, b: f64) -> f64 {
    if b - 2.0 < alpha_minus {
        alpha_minus
    } else {
        b - 2.0 + GAMMA_MARGIN
    }
}

/// Solves with nodal right-hand side `f d_K^{-b}` and certifies
/// `|u| ≤ C ‖f‖ d d_K^{-γ}`.
pub fn singular_rhs_solve(op: &LinearOperator, b: f64, f: &ScalarField) -> Result<SingularSolve> {
    let spec = op.spec();
    let ap = spec.alpha_plus();
    if !(b >= 0.0 && b < ap + 2.0) {
        bail!(Parameter, "b = {b} must lie in [0, α₊ + 2) = [0, {})", ap + 2.0);
    }
    if f.len() != op.len() {
        bail!(Parameter, "f has {} entries, operator has {}", f.len(), op.len());
    }
    let f_sup = f.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !f_sup.is_finite() {
        bail!(Parameter, "f is not bounded");
    }
    let grid = op.grid();
    let rhs: alloc::vec::Vec<f64> = f
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * libm::pow(spec.d_k(&grid.point(i)), -b))
        .collect();
    let load = op.integrate_density(&rhs);
    let u = op.with_mode(BoundaryMode::Zero).solve_load(&load, KERNEL_TOL)?.field;
    let gamma = admissible_gamma(spec.alpha_minus(), b);
    let mut constant: f64 = 0.0;
    if f_sup > 0.0 {
        for i in 0..op.len() {
            let p = grid.point(i);
            let env = f_sup * spec.signed_d(&p) * libm::pow(spec.d_k(&p), -gamma);
            constant = constant.max(u.values[i].abs() / env);
        }
    }
    Ok(SingularSolve {
        field: ScalarField::new(FieldKind::Solution, u.values).with_note("singular rhs"),
        b,
        gamma,
        constant,
        f_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;
    use crate::geometry::DomainSpec;
    use alloc::sync::Arc;
    use alloc::vec;

    fn op(mu: f64) -> LinearOperator {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        LinearOperator::assemble(&spec, Arc::new(build_grid(&spec, 17, 0.7, 0.02).unwrap()), BoundaryMode::Zero).unwrap()
    }

    #[test]
    fn gamma_is_the_least_admissible_exponent() {
        assert_eq!(admissible_gamma(0.2, 1.0), 0.2);
        assert!((admissible_gamma(0.2, 2.5) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn certificates_are_finite_inside_the_range() {
        let op = op(0.16);
        let f = ScalarField::new(FieldKind::Load, vec![1.0; op.len()]);
        for b in [0.0, op.spec().alpha_minus(), 2.5] {
            let s = singular_rhs_solve(&op, b, &f).unwrap();
            assert!(s.constant.is_finite() && s.constant > 0.0);
            assert!(s.field.values.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn exponent_above_range_is_rejected() {
        let op = op(0.16);
        let f = ScalarField::new(FieldKind::Load, vec![1.0; op.len()]);
        let b = op.spec().alpha_plus() + 2.0;
        assert!(matches!(singular_rhs_solve(&op, b, &f), Err(crate::Error::Parameter(_))));
    }
}

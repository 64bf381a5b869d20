//! Martin kernels: the Green-ratio ladder and direct boundary-data solves.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::{BoundaryMode, BoundaryValues, FieldKind, LinearOperator, NodeClass, ScalarField};
use crate::error::{bail, Result};
use crate::geometry::dist;

use super::{green_field, KERNEL_TOL};

/// Default Martin basis point, off `K = {0}`.
pub const DEFAULT_X0: [f64; 3] = [0.5, 0.0, 0.0];

/// Geometric ladder `y_n = ξ + start · ratioⁿ · e`, `n < levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartinLadder {
    pub start: f64,
    pub ratio: f64,
    pub levels: usize,
    /// Largest accepted relative change between the last two ratio fields.
    pub osc_tol: f64,
}

impl MartinLadder {
    /// Ladder toward a boundary point; needs cells of width ≤ 0.0025 at ξ.
    pub fn boundary() -> Self {
        MartinLadder { start: 0.2, ratio: 0.5, levels: 4, osc_tol: 0.5 }
    }

    /// Ladder toward `K`; the last point needs `ε_K ≤ 0.005`.
    pub fn singular() -> Self {
        MartinLadder { start: 0.4, ratio: 0.5, levels: 5, osc_tol: 0.5 }
    }

    pub fn distances(&self) -> Vec<f64> {
        (0..self.levels).map(|n| self.start * libm::pow(self.ratio, n as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartinField {
    pub xi: [f64; 3],
    pub x0: [f64; 3],
    /// `K_μ(·, ξ)` with `K(x₀, ξ) = 1`.
    pub field: ScalarField,
    pub x0_node: usize,
    pub ladder: Vec<[f64; 3]>,
    pub distances: Vec<f64>,
    /// Largest relative change between successive ratio fields on the Cauchy probes.
    pub increments: Vec<f64>,
}

impl MartinField {
    pub fn at(&self, op: &LinearOperator, x: &[f64; 3]) -> Option<f64> {
        op.grid().nearest(x).map(|i| self.field.values[i])
    }
}

fn basis_node(op: &LinearOperator, x0: &[f64; 3]) -> Result<usize> {
    let grid = op.grid();
    match grid.nearest(x0) {
        Some(i) if grid.class(i) == NodeClass::Interior => Ok(i),
        _ => bail!(Placement, "basis point {:?} is not at an interior node", x0),
    }
}

fn pole_direction(op: &LinearOperator, xi: &[f64; 3]) -> Result<[f64; 3]> {
    let spec = op.spec();
    if spec.on_k(xi) {
        // Away from the default basis point.
        Ok([-1.0, 0.0, 0.0])
    } else if spec.on_boundary(xi) {
        let n = spec.outward_normal(xi)?;
        Ok([-n[0], -n[1], -n[2]])
    } else {
        bail!(Domain, "pole {:?} is neither on ∂Ω nor on K", xi)
    }
}

/// Scales `values` to 1 at `x0`, interpolated from the surrounding nodes.
fn normalized(op: &LinearOperator, values: Vec<f64>, x0: &[f64; 3]) -> Result<Vec<f64>> {
    let s = op.grid().interpolate(&values, x0).unwrap_or(0.0);
    if !(s > 0.0) {
        bail!(Solver, "kernel vanishes at the basis point {:?}", x0);
    }
    Ok(values.iter().map(|a| a / s).collect())
}

/// `K_μ(·, ξ)` as the limit of `G(·, y_n)/G(x₀, y_n)` along a ladder toward ξ,
/// with one Richardson step linear in the distance to ξ.
pub fn martin_kernel(op: &LinearOperator, x0: &[f64; 3], xi: &[f64; 3], ladder: &MartinLadder) -> Result<MartinField> {
    if ladder.levels < 2 || !(ladder.ratio > 0.0 && ladder.ratio < 1.0) || !(ladder.start > 0.0) {
        bail!(Parameter, "Martin ladder needs ≥ 2 levels and a ratio in (0, 1)");
    }
    let grid = op.grid();
    let spec = op.spec();
    let i0 = basis_node(op, x0)?;
    let dir = pole_direction(op, xi)?;
    let distances = ladder.distances();
    let mut points = Vec::with_capacity(ladder.levels);
    let mut ratios: Vec<Vec<f64>> = Vec::with_capacity(ladder.levels);
    let mut actual = Vec::with_capacity(ladder.levels);
    for &delta in &distances {
        let y = [xi[0] + delta * dir[0], xi[1] + delta * dir[1], xi[2] + delta * dir[2]];
        let g = green_field(op, &y)?;
        let ys = g.meta.source.unwrap_or(y);
        actual.push(dist(&ys, xi));
        points.push(ys);
        ratios.push(normalized(op, g.values, x0)?);
    }
    let cauchy: Vec<usize> = (0..op.len())
        .filter(|&i| {
            let p = grid.point(i);
            grid.class(i) == NodeClass::Interior
                && dist(&p, xi) >= 2.0 * ladder.start
                && spec.d_k(&p) >= 2.0 * grid.eps_k()
        })
        .collect();
    let mut increments = Vec::with_capacity(ladder.levels - 1);
    for n in 1..ladder.levels {
        let (a, b) = (&ratios[n - 1], &ratios[n]);
        let m = cauchy.iter().map(|&i| ((b[i] - a[i]) / b[i]).abs()).fold(0.0, f64::max);
        increments.push(m);
    }
    let last = *increments.last().unwrap();
    if !(last <= ladder.osc_tol) {
        bail!(Convergence, "Martin ladder ratios change by {last} at the last level");
    }
    if increments.len() >= 2 && last > increments[increments.len() - 2] && last > 1e-3 {
        bail!(Convergence, "Martin ladder ratios oscillate: increments {:?}", increments);
    }
    let (dn, dp) = (actual[ladder.levels - 1], actual[ladder.levels - 2]);
    let (rn, rp) = (&ratios[ladder.levels - 1], &ratios[ladder.levels - 2]);
    let w = dn / (dp - dn);
    let extrapolated: Vec<f64> = rn.iter().zip(rp).map(|(a, b)| a + (a - b) * w).collect();
    let values = normalized(op, extrapolated, x0)?;
    Ok(MartinField {
        xi: *xi,
        x0: *x0,
        field: ScalarField::new(FieldKind::Martin, values).with_source(*xi),
        x0_node: i0,
        ladder: points,
        distances: actual,
        increments,
    })
}

/// Link nearest ξ, smallest index on ties.
pub(crate) fn nearest_link(op: &LinearOperator, xi: &[f64; 3]) -> Result<usize> {
    let mut best = (f64::INFINITY, usize::MAX);
    for (k, l) in op.links().iter().enumerate() {
        let d = dist(&l.point, xi);
        if d < best.0 {
            best = (d, k);
        }
    }
    if best.1 == usize::MAX {
        bail!(Placement, "operator has no boundary links");
    }
    Ok(best.1)
}

/// Normalised response to unit data on the boundary link nearest ξ.
pub fn discrete_poisson_kernel(op: &LinearOperator, x0: &[f64; 3], xi: &[f64; 3]) -> Result<ScalarField> {
    if !op.spec().on_boundary(xi) {
        bail!(Domain, "pole {:?} is not on ∂Ω", xi);
    }
    basis_node(op, x0)?;
    let l = nearest_link(op, xi)?;
    let mut data = vec![0.0; op.links().len()];
    data[l] = 1.0;
    let mode = BoundaryMode::boundary_only(BoundaryValues::PerLink(Arc::new(data)));
    let u = op.with_mode(mode).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?.field;
    Ok(ScalarField::new(FieldKind::Martin, normalized(op, u.values, x0)?).with_source(*xi))
}

/// `K_μ(·, ξ)` from a single boundary-data solve: unit data on `K` for ξ = 0,
/// the discrete Poisson kernel for ξ ∈ ∂Ω.
pub fn direct_martin(op: &LinearOperator, x0: &[f64; 3], xi: &[f64; 3]) -> Result<ScalarField> {
    if op.spec().on_k(xi) {
        basis_node(op, x0)?;
        let u = op.with_mode(BoundaryMode::k_only(1.0)).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?.field;
        Ok(ScalarField::new(FieldKind::Martin, normalized(op, u.values, x0)?).with_source(*xi))
    } else {
        discrete_poisson_kernel(op, x0, xi)
    }
}

/// Value at `x₀` of the response to unit data on each boundary link, from one
/// adjoint solve.
pub fn martin_normalizers(op: &LinearOperator, x0: &[f64; 3]) -> Result<Vec<f64>> {
    basis_node(op, x0)?;
    let ground = op.ground();
    let mut e = vec![0.0; op.len()];
    for (i, a) in op.grid().interpolation_weights(x0) {
        e[i] = a * ground[i];
    }
    let (z, _) = op.solve_v(&e, None, KERNEL_TOL)?;
    let spec = op.spec();
    let weights = spec.weights();
    Ok(op
        .links()
        .iter()
        .map(|l| z[l.row] * l.coeff * weights.w_tilde(spec.d_k(&l.point)) / l.ground)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Grid, GridOptions};
    use crate::geometry::DomainSpec;
    use crate::spectral_oracle::oracle_poisson_martin;

    fn focused(mu: f64, n: usize, xi: [f64; 3], width: f64) -> LinearOperator {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = Grid::new(&spec, GridOptions::new(n, 0.8, 0.02).with_focus(xi, width)).unwrap();
        LinearOperator::assemble(&spec, Arc::new(grid), BoundaryMode::Zero).unwrap()
    }

    #[test]
    fn ladder_matches_poisson_kernel() {
        let xi = [0.0, 0.0, 1.0];
        let op = focused(0.0, 17, xi, 0.0025);
        let m = martin_kernel(&op, &DEFAULT_X0, &xi, &MartinLadder::boundary()).unwrap();
        let at_x0 = op.grid().interpolate(&m.field.values, &DEFAULT_X0).unwrap();
        assert!((at_x0 - 1.0).abs() < 1e-12);
        for x in [[0.0, 0.0, 0.6], [0.3, 0.2, 0.3], [-0.4, 0.0, -0.2]] {
            let i = op.grid().nearest(&x).unwrap();
            let p = op.grid().point(i);
            let exact = oracle_poisson_martin(op.spec(), &p, &xi, &DEFAULT_X0).unwrap();
            let got = m.field.values[i];
            assert!((got / exact - 1.0).abs() < 0.05, "{x:?}: {got} vs {exact}");
        }
    }

    #[test]
    fn direct_solves_agree_with_ladder_at_origin() {
        let spec = DomainSpec::unit_ball(0.16).unwrap();
        let grid = crate::discretization::build_grid(&spec, 17, 0.8, 0.005).unwrap();
        let op = LinearOperator::assemble(&spec, Arc::new(grid), BoundaryMode::Zero).unwrap();
        let xi = [0.0; 3];
        let a = martin_kernel(&op, &DEFAULT_X0, &xi, &MartinLadder::singular()).unwrap();
        let b = direct_martin(&op, &DEFAULT_X0, &xi).unwrap();
        for x in [[0.0, 0.7, 0.0], [-0.3, 0.3, 0.3], [0.0, 0.0, -0.85]] {
            let i = op.grid().nearest(&x).unwrap();
            let (u, v) = (a.field.values[i], b.values[i]);
            assert!((u / v - 1.0).abs() < 0.08, "{x:?}: {u} vs {v}");
        }
    }

    #[test]
    fn normalizers_match_single_link_solves() {
        let op = focused(0.16, 17, [0.0, 0.0, 1.0], 0.02);
        let norms = martin_normalizers(&op, &DEFAULT_X0).unwrap();
        for l in [0, op.links().len() / 2] {
            let mut data = vec![0.0; op.links().len()];
            data[l] = 1.0;
            let mode = BoundaryMode::boundary_only(BoundaryValues::PerLink(Arc::new(data)));
            let u = op.with_mode(mode).solve_load(&vec![0.0; op.len()], 1e-12).unwrap().field;
            let at_x0 = op.grid().interpolate(&u.values, &DEFAULT_X0).unwrap();
            assert!((at_x0 / norms[l] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pole_must_lie_on_the_boundary_set() {
        let op = focused(0.0, 17, [0.0, 0.0, 1.0], 0.02);
        let e = martin_kernel(&op, &DEFAULT_X0, &[0.0, 0.0, 0.5], &MartinLadder::boundary());
        assert!(matches!(e, Err(crate::Error::Domain(_))));
    }
}

//! Integrability thresholds of Martin kernels against the eigenfunction.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::discretization::{principal_eigenpair, BoundaryMode, Grid, GridOptions, LinearOperator};
use crate::error::{bail, Result};
use crate::geometry::DomainSpec;

use super::martin::{direct_martin, DEFAULT_X0};

/// Grids of increasing resolution at the pole. At a boundary pole `widths` are
/// the cell widths there; at `K` they are the excision radii.
#[derive(Debug, Clone, PartialEq)]
pub struct LpLadder {
    pub n_base: usize,
    pub grading: f64,
    pub eps_k: f64,
    pub widths: Vec<f64>,
}

impl LpLadder {
    pub fn boundary() -> Self {
        let s = core::f64::consts::SQRT_2;
        LpLadder { n_base: 33, grading: 0.8, eps_k: 0.02, widths: alloc::vec![0.01, 0.01 / s, 0.005] }
    }

    pub fn singular() -> Self {
        let s = core::f64::consts::SQRT_2;
        LpLadder { n_base: 25, grading: 0.7, eps_k: 0.02, widths: alloc::vec![0.0025, 0.0025 / s, 0.00125] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpVerdict {
    Convergent,
    Divergent,
    Indeterminate,
}

impl LpVerdict {
    pub fn name(self) -> &'static str {
        match self {
            LpVerdict::Convergent => "convergent",
            LpVerdict::Divergent => "divergent",
            LpVerdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpLevel {
    pub width: f64,
    pub nodes: usize,
    pub lambda: f64,
    /// `Σ V K^p φ` for each `p`.
    pub integrals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpScanReport {
    pub xi: [f64; 3],
    pub ps: Vec<f64>,
    pub levels: Vec<LpLevel>,
    /// Relative change between successive levels, per `p`.
    pub changes: Vec<Vec<f64>>,
    pub verdicts: Vec<LpVerdict>,
}

/// "Convergent" when every successive change is below 5%, "divergent" when
/// every one is growth of at least 15%.
pub fn classify(changes: &[f64]) -> LpVerdict {
    if changes.is_empty() {
        LpVerdict::Indeterminate
    } else if changes.iter().all(|c| c.abs() < 0.05) {
        LpVerdict::Convergent
    } else if changes.iter().all(|c| *c >= 0.15) {
        LpVerdict::Divergent
    } else {
        LpVerdict::Indeterminate
    }
}

/// Discrete `∫ K_μ(x, ξ)^p φ_μ(x) dx` along a refinement ladder at ξ.
pub fn lp_threshold_scan(spec: &DomainSpec, xi: &[f64; 3], ps: &[f64], ladder: &LpLadder) -> Result<LpScanReport> {
    let on_k = spec.on_k(xi);
    if !on_k && !spec.on_boundary(xi) {
        bail!(Domain, "pole {:?} is neither on ∂Ω nor on K", xi);
    }
    if ladder.widths.len() < 2 {
        bail!(Parameter, "the scan needs at least two ladder levels");
    }
    if ps.iter().any(|p| !(*p > 0.0)) {
        bail!(Parameter, "exponents must be positive");
    }
    let mut levels = Vec::with_capacity(ladder.widths.len());
    for &w in &ladder.widths {
        let options = if on_k {
            GridOptions::new(ladder.n_base, ladder.grading, w)
        } else {
            GridOptions::new(ladder.n_base, ladder.grading, ladder.eps_k).with_focus(*xi, w)
        };
        let grid = Arc::new(Grid::new(spec, options)?);
        let op = LinearOperator::assemble(spec, grid, BoundaryMode::Zero)?;
        let eig = principal_eigenpair(&op, 1e-8)?;
        let k = direct_martin(&op, &DEFAULT_X0, xi)?;
        let mass = op.mass();
        let integrals = ps
            .iter()
            .map(|&p| {
                k.values
                    .iter()
                    .zip(&eig.phi.values)
                    .zip(mass)
                    .map(|((kv, ph), v)| libm::pow(kv.max(0.0), p) * ph * v)
                    .sum()
            })
            .collect();
        levels.push(LpLevel { width: w, nodes: op.len(), lambda: eig.lambda, integrals });
    }
    let changes: Vec<Vec<f64>> = (0..ps.len())
        .map(|j| levels.windows(2).map(|l| l[1].integrals[j] / l[0].integrals[j] - 1.0).collect())
        .collect();
    let verdicts = changes.iter().map(|c| classify(c)).collect();
    Ok(LpScanReport { xi: *xi, ps: ps.to_vec(), levels, changes, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_rules() {
        assert_eq!(classify(&[0.04, -0.01]), LpVerdict::Convergent);
        assert_eq!(classify(&[0.2, 0.16]), LpVerdict::Divergent);
        assert_eq!(classify(&[0.2, 0.04]), LpVerdict::Indeterminate);
        assert_eq!(classify(&[]), LpVerdict::Indeterminate);
    }

    #[test]
    fn interior_pole_is_rejected() {
        let spec = DomainSpec::unit_ball(0.0).unwrap();
        let e = lp_threshold_scan(&spec, &[0.5, 0.0, 0.0], &[1.0], &LpLadder::boundary());
        assert!(matches!(e, Err(crate::Error::Domain(_))));
    }
}

//! `L_μ`-harmonic measures of surface balls and their link to the Green kernel.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::{BoundaryData, BoundaryMode, BoundaryValues, FieldKind, LinearOperator, NodeClass, ScalarField};
use crate::error::{bail, Result};
use crate::geometry::dist;

use super::{green_field, RatioRecord, RatioReport, SampleInfo, KERNEL_TOL};

/// C¹ indicator of `Δ_r`: 1 up to `3r/4`, 0 from `r`.
pub fn surface_ramp(rho: f64, r: f64) -> f64 {
    if rho <= 0.75 * r {
        1.0
    } else if rho >= r {
        0.0
    } else {
        let s = (r - rho) / (0.25 * r);
        s * s * (3.0 - 2.0 * s)
    }
}

/// Scale factor on `G(x_r, ·)` in the measure-Green comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkExponent {
    /// `r^{N-2}`, ξ ∈ ∂Ω.
    Boundary,
    /// `r^{N-2-α₊}`, ξ ∈ K, μ < H².
    Singular,
    /// `r^{N-2-H} |ln r|`, ξ ∈ K, μ = H²; `with_log = false` drops the logarithm.
    Critical { with_log: bool },
}

impl LinkExponent {
    pub fn for_pole(op: &LinearOperator, xi: &[f64; 3]) -> Self {
        let spec = op.spec();
        if !spec.on_k(xi) {
            LinkExponent::Boundary
        } else if spec.is_critical() {
            LinkExponent::Critical { with_log: true }
        } else {
            LinkExponent::Singular
        }
    }

    pub fn factor(self, op: &LinearOperator, r: f64) -> f64 {
        let spec = op.spec();
        let n2 = spec.dim() as f64 - 2.0;
        match self {
            LinkExponent::Boundary => libm::pow(r, n2),
            LinkExponent::Singular => libm::pow(r, n2 - spec.alpha_plus()),
            LinkExponent::Critical { with_log } => {
                let base = libm::pow(r, n2 - spec.hardy());
                if with_log {
                    base * libm::fabs(libm::log(r))
                } else {
                    base
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkExponent::Boundary => "r^(N-2)",
            LinkExponent::Singular => "r^(N-2-alpha+)",
            LinkExponent::Critical { with_log: true } => "r^(N-2-H)|ln r|",
            LinkExponent::Critical { with_log: false } => "r^(N-2-H)",
        }
    }
}

/// `v₁`: the solution with `u/W̃ = 1` on all of ∂Ω ∪ K.
pub fn unit_solution(op: &LinearOperator) -> Result<ScalarField> {
    let u = op.with_mode(BoundaryMode::constant(1.0)).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?;
    Ok(ScalarField::new(FieldKind::HarmonicMeasure, u.field.values).with_note("v1"))
}

fn check_radius(op: &LinearOperator, xi: &[f64; 3], r: f64) -> Result<()> {
    let spec = op.spec();
    if !(spec.on_k(xi) || spec.on_boundary(xi)) {
        bail!(Domain, "ξ = {:?} is neither on ∂Ω nor on K", xi);
    }
    if !(r > 0.0) || r > spec.k_to_boundary() / 4.0 {
        bail!(Precondition, "r = {r} must lie in (0, dist(K, ∂Ω)/4]");
    }
    let grid = op.grid();
    if spec.on_k(xi) {
        if r < 2.0 * grid.eps_k() {
            bail!(Resolution, "r = {r} is below twice the excision radius {}", grid.eps_k());
        }
        return Ok(());
    }
    let width = grid.nearest(xi).map(|i| grid.local_width(i)).unwrap_or(f64::INFINITY);
    if r < 4.0 * width {
        bail!(Resolution, "r = {r} is below four cells ({width}) at ξ");
    }
    Ok(())
}

/// Field `x ↦ ω^x(Δ_r(ξ))`, computed with the smoothed indicator as data.
pub fn measure_field(op: &LinearOperator, xi: &[f64; 3], r: f64) -> Result<ScalarField> {
    check_radius(op, xi, r)?;
    let c = *xi;
    let on_k = surface_ramp(crate::geometry::norm(xi), r);
    let on_boundary = BoundaryValues::Function(Arc::new(move |p: &[f64; 3]| surface_ramp(dist(p, &c), r)));
    let mode = BoundaryMode::Weighted(BoundaryData { on_k, on_boundary });
    let u = op.with_mode(mode).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?;
    Ok(ScalarField::new(FieldKind::HarmonicMeasure, u.field.values).with_source(*xi))
}

/// `ω^x(Δ_r(ξ))` at the nodes nearest `xs`.
pub fn harmonic_measure(op: &LinearOperator, xi: &[f64; 3], r: f64, xs: &[[f64; 3]]) -> Result<Vec<f64>> {
    let f = measure_field(op, xi, r)?;
    let grid = op.grid();
    xs.iter()
        .map(|x| {
            grid.nearest(x)
                .map(|i| f.values[i])
                .ok_or_else(|| crate::Error::Placement(alloc::format!("probe {:?} is off the grid", x)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasureProbe {
    pub xi: [f64; 3],
    pub radii: Vec<f64>,
    /// Node positions actually probed.
    pub points: Vec<[f64; 3]>,
    /// `omega[k][j] = ω^{x_j}(Δ_{r_k}(ξ))`.
    pub omega: Vec<Vec<f64>>,
    /// `G_μ(x_r, x_j)` for each radius.
    pub green: Vec<Vec<f64>>,
    /// Factor times `green`.
    pub companion: Vec<Vec<f64>>,
    pub x_r: Vec<[f64; 3]>,
    pub exponent: LinkExponent,
    /// `v₁` at the probes.
    pub v1: Vec<f64>,
    /// `min ω/W̃` over nodes in `B_{r/2}(ξ)`, per radius.
    pub lower_bound: Vec<f64>,
}

/// The point `x_r(ξ)` at distance `r` from ξ along the inward normal, or `r e₁` on K.
pub fn x_r(op: &LinearOperator, xi: &[f64; 3], r: f64) -> Result<[f64; 3]> {
    let spec = op.spec();
    if spec.on_k(xi) {
        Ok([xi[0] + r, xi[1], xi[2]])
    } else {
        let n = spec.outward_normal(xi)?;
        Ok([xi[0] - r * n[0], xi[1] - r * n[1], xi[2] - r * n[2]])
    }
}

/// Harmonic measures across a radius ladder, with the Green companions.
pub fn measure_probe(op: &LinearOperator, xi: &[f64; 3], radii: &[f64], xs: &[[f64; 3]]) -> Result<HarmonicMeasureProbe> {
    let grid = op.grid();
    let spec = op.spec();
    let weights = spec.weights();
    let mut nodes = Vec::with_capacity(xs.len());
    for x in xs {
        match grid.nearest(x) {
            Some(i) => nodes.push(i),
            None => bail!(Placement, "probe {:?} is off the grid", x),
        }
    }
    let points: Vec<[f64; 3]> = nodes.iter().map(|&i| grid.point(i)).collect();
    let exponent = LinkExponent::for_pole(op, xi);
    let v1f = unit_solution(op)?;
    let v1 = nodes.iter().map(|&i| v1f.values[i]).collect();
    let mut omega = Vec::with_capacity(radii.len());
    let mut green = Vec::with_capacity(radii.len());
    let mut companion = Vec::with_capacity(radii.len());
    let mut xrs = Vec::with_capacity(radii.len());
    let mut lower_bound = Vec::with_capacity(radii.len());
    for &r in radii {
        let f = measure_field(op, xi, r)?;
        omega.push(nodes.iter().map(|&i| f.values[i]).collect::<Vec<_>>());
        let lb = (0..op.len())
            .filter(|&i| dist(&grid.point(i), xi) < r / 2.0)
            .map(|i| f.values[i] / weights.w_tilde(spec.d_k(&grid.point(i))))
            .fold(f64::INFINITY, f64::min);
        lower_bound.push(lb);
        let xr = x_r(op, xi, r)?;
        let g = green_field(op, &xr)?;
        xrs.push(g.meta.source.unwrap_or(xr));
        let gv: Vec<f64> = nodes.iter().map(|&i| g.values[i]).collect();
        let fac = exponent.factor(op, r);
        companion.push(gv.iter().map(|v| v * fac).collect());
        green.push(gv);
    }
    Ok(HarmonicMeasureProbe {
        xi: *xi,
        radii: radii.to_vec(),
        points,
        omega,
        green,
        companion,
        x_r: xrs,
        exponent,
        v1,
        lower_bound,
    })
}

/// Bounded-ratio report of `ω^x(Δ_r)` against the scaled Green companion, for
/// probes outside `B_{4r}(ξ)`.
pub fn verify_measure_green_link(
    op: &LinearOperator,
    probe: &HarmonicMeasureProbe,
    exponent: Option<LinkExponent>,
    cap: f64,
) -> Result<RatioReport> {
    let exp = exponent.unwrap_or(probe.exponent);
    let mut records = Vec::new();
    for (k, &r) in probe.radii.iter().enumerate() {
        let fac = exp.factor(op, r);
        for (j, x) in probe.points.iter().enumerate() {
            if dist(x, &probe.xi) < 4.0 * r {
                continue;
            }
            let om = probe.omega[k][j];
            let c = fac * probe.green[k][j];
            records.push(RatioRecord { x: *x, y: probe.x_r[k], t: Some(r), numeric: om, envelope: c, ratio: om / c });
        }
    }
    let info = SampleInfo {
        samples: records.len(),
        seed: 0,
        min_source_cells: 4,
        min_k_distance: 0.0,
        note: alloc::format!("ξ = {:?}, factor {}", probe.xi, exp.name()),
    };
    RatioReport::new(alloc::format!("measure-green-link {}", exp.name()), None, info, records, cap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingReport {
    /// `(r, max_x ω^x(Δ_{2r}) / ω^x(Δ_r))` over probes outside `B_{8r}(ξ)`.
    pub constants: Vec<(f64, f64)>,
    pub max: f64,
    /// Largest over smallest constant along the ladder.
    pub variation: f64,
}

/// Doubling constants from consecutive dyadic radii of a probe.
pub fn doubling_report(probe: &HarmonicMeasureProbe) -> Result<DoublingReport> {
    let mut constants = Vec::new();
    for (k, &r) in probe.radii.iter().enumerate() {
        let Some(k2) = probe.radii.iter().position(|&s| (s - 2.0 * r).abs() < 1e-9 * r) else {
            continue;
        };
        let mut c: f64 = 0.0;
        for (j, x) in probe.points.iter().enumerate() {
            if dist(x, &probe.xi) >= 8.0 * r {
                c = c.max(probe.omega[k2][j] / probe.omega[k][j]);
            }
        }
        if c > 0.0 {
            constants.push((r, c));
        }
    }
    if constants.is_empty() {
        bail!(Sampling, "no dyadic radius pairs with admissible probes");
    }
    let max = constants.iter().map(|c| c.1).fold(0.0, f64::max);
    let min = constants.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    Ok(DoublingReport { constants, max, variation: max / min })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Glob00Report {
    /// Largest `|v₁/W̃ - 1|` over excision-collar nodes.
    pub k_deviation: f64,
    /// Largest `|v₁/W̃ - 1|` over boundary-collar nodes.
    pub boundary_deviation: f64,
    pub nodes: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

/// `v₁/W̃` at every collar node.
pub fn glob00_check(op: &LinearOperator, v1: &ScalarField, tolerance: f64) -> Glob00Report {
    let grid = op.grid();
    let spec = op.spec();
    let weights = spec.weights();
    let mut k_dev: f64 = 0.0;
    let mut b_dev: f64 = 0.0;
    let mut nodes = 0;
    for i in 0..op.len() {
        let class = grid.class(i);
        if class == NodeClass::Interior {
            continue;
        }
        nodes += 1;
        let p = grid.point(i);
        let dev = (v1.values[i] / weights.w_tilde(spec.d_k(&p)) - 1.0).abs();
        if class == NodeClass::ExcisionCollar {
            k_dev = k_dev.max(dev);
        } else {
            b_dev = b_dev.max(dev);
        }
    }
    let pass = k_dev <= tolerance && b_dev <= tolerance;
    Glob00Report {
        k_deviation: k_dev,
        boundary_deviation: b_dev,
        nodes,
        tolerance,
        pass,
        note: alloc::format!("μ = {}", spec.mu()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackReport {
    pub xi: [f64; 3],
    pub radius: f64,
    pub nodes: usize,
    pub min: f64,
    pub max: f64,
    /// `max / min` of `u/φ_μ` over the nodes of `B_radius(ξ)`.
    pub quotient: f64,
}

/// Boundary Harnack quotient of `u` relative to the eigenfunction.
pub fn harnack_quotient(
    op: &LinearOperator,
    u: &ScalarField,
    phi: &ScalarField,
    xi: &[f64; 3],
    radius: f64,
) -> Result<HarnackReport> {
    let grid = op.grid();
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let mut nodes = 0;
    for i in 0..op.len() {
        if dist(&grid.point(i), xi) >= radius {
            continue;
        }
        let q = u.values[i] / phi.values[i];
        if !(q > 0.0 && q.is_finite()) {
            bail!(Solver, "u/φ = {q} at node {i}");
        }
        nodes += 1;
        min = min.min(q);
        max = max.max(q);
    }
    if nodes == 0 {
        bail!(Sampling, "no nodes in B_{radius}({:?})", xi);
    }
    Ok(HarnackReport { xi: *xi, radius, nodes, min, max, quotient: max / min })
}

/// Bounded-ratio report of `u(x)` against `u(x_r)/W̃(x_r) · ω^x(Δ_r(ξ))` for
/// probes outside `B_{4r}(ξ)`.
pub fn verify_measure_comparability(
    op: &LinearOperator,
    u: &ScalarField,
    probe: &HarmonicMeasureProbe,
    cap: f64,
) -> Result<RatioReport> {
    let grid = op.grid();
    let spec = op.spec();
    let weights = spec.weights();
    let mut records = Vec::new();
    for (k, &r) in probe.radii.iter().enumerate() {
        let xr = probe.x_r[k];
        let Some(ur) = grid.interpolate(&u.values, &xr) else {
            bail!(Placement, "x_r = {:?} has no active neighbours", xr);
        };
        let scale = ur / weights.w_tilde(spec.d_k(&xr));
        for (j, x) in probe.points.iter().enumerate() {
            if dist(x, &probe.xi) < 4.0 * r {
                continue;
            }
            let Some(i) = grid.nearest(x) else { continue };
            let c = scale * probe.omega[k][j];
            let v = u.values[i];
            records.push(RatioRecord { x: *x, y: xr, t: Some(r), numeric: v, envelope: c, ratio: v / c });
        }
    }
    let info = SampleInfo {
        samples: records.len(),
        seed: 0,
        min_source_cells: 0,
        min_k_distance: 0.0,
        note: alloc::format!("ξ = {:?}, field {}", probe.xi, u.meta.note),
    };
    RatioReport::new("measure-comparability", None, info, records, cap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub xi: [f64; 3],
    /// Angular offsets of the neighbouring poles, decreasing.
    pub offsets: Vec<f64>,
    /// `max_x |K(x, ξ_θ) - K(x, ξ)| / K(x, ξ)` over the probes, per offset.
    pub differences: Vec<f64>,
    /// Differences shrink with the offset.
    pub monotone: bool,
}

/// Trend test for `ξ ↦ K_μ(x, ξ)` along a great circle through a boundary pole
/// of a ball.
pub fn martin_continuity(
    op: &LinearOperator,
    x0: &[f64; 3],
    xi: &[f64; 3],
    offsets: &[f64],
    xs: &[[f64; 3]],
) -> Result<ContinuityReport> {
    let spec = op.spec();
    let crate::geometry::DomainKind::Ball { radius } = *spec.kind() else {
        bail!(DomainKind, "the continuity sweep needs a ball");
    };
    if !spec.on_boundary(xi) {
        bail!(Domain, "ξ = {:?} is not on ∂Ω", xi);
    }
    let mut offsets = offsets.to_vec();
    offsets.sort_by(|a, b| b.total_cmp(a));
    let e = [xi[0] / radius, xi[1] / radius, xi[2] / radius];
    // Unit tangent: the coordinate axis least aligned with ξ, orthogonalised.
    let axis = (0..3).min_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs())).unwrap_or(0);
    let mut t = [0.0; 3];
    t[axis] = 1.0;
    let proj = crate::geometry::dot(&t, &e);
    let mut t = [t[0] - proj * e[0], t[1] - proj * e[1], t[2] - proj * e[2]];
    let tn = crate::geometry::norm(&t);
    t.iter_mut().for_each(|c| *c /= tn);
    let grid = op.grid();
    let nodes: Vec<usize> = xs
        .iter()
        .map(|x| grid.nearest(x).ok_or_else(|| crate::Error::Placement(alloc::format!("probe {:?} is off the grid", x))))
        .collect::<Result<_>>()?;
    let base = super::direct_martin(op, x0, xi)?;
    let mut differences = Vec::with_capacity(offsets.len());
    for &th in &offsets {
        let (s, c) = (libm::sin(th), libm::cos(th));
        let p = [
            radius * (c * e[0] + s * t[0]),
            radius * (c * e[1] + s * t[1]),
            radius * (c * e[2] + s * t[2]),
        ];
        let k = super::direct_martin(op, x0, &p)?;
        let d = nodes.iter().map(|&i| (k.values[i] - base.values[i]).abs() / base.values[i]).fold(0.0, f64::max);
        differences.push(d);
    }
    let monotone = differences.windows(2).all(|w| w[1] <= w[0]);
    Ok(ContinuityReport { xi: *xi, offsets, differences, monotone })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Grid, GridOptions};
    use crate::geometry::DomainSpec;

    fn focused(mu: f64, xi: [f64; 3]) -> LinearOperator {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = Grid::new(&spec, GridOptions::new(17, 0.8, 0.02).with_focus(xi, 0.005)).unwrap();
        LinearOperator::assemble(&spec, Arc::new(grid), BoundaryMode::Zero).unwrap()
    }

    #[test]
    fn ramp_is_c1() {
        assert_eq!(surface_ramp(0.5, 1.0), 1.0);
        assert_eq!(surface_ramp(1.0, 1.0), 0.0);
        let h = 1e-7;
        for rho in [0.75, 1.0] {
            let d = (surface_ramp(rho + h, 1.0) - surface_ramp(rho - h, 1.0)) / (2.0 * h);
            assert!(d.abs() < 1e-5);
        }
    }

    #[test]
    fn measure_is_between_zero_and_v1_and_monotone() {
        let xi = [0.0, 0.0, 1.0];
        let op = focused(0.16, xi);
        let xs = [[0.0, 0.0, 0.2], [0.5, 0.0, 0.0], [0.0, 0.3, 0.8]];
        let probe = measure_probe(&op, &xi, &[0.05, 0.1, 0.2], &xs).unwrap();
        for j in 0..xs.len() {
            for k in 0..3 {
                let w = probe.omega[k][j];
                assert!(w >= 0.0 && w <= probe.v1[j] * (1.0 + 1e-9));
                if k > 0 {
                    assert!(w >= probe.omega[k - 1][j]);
                }
            }
        }
        assert!(probe.lower_bound.iter().all(|c| *c > 0.1));
        let d = doubling_report(&probe).unwrap();
        assert!(d.max.is_finite() && d.max > 1.0);
    }

    #[test]
    fn radius_checks() {
        let xi = [0.0, 0.0, 1.0];
        let op = focused(0.0, xi);
        assert!(matches!(measure_field(&op, &xi, 0.5), Err(crate::Error::Precondition(_))));
        assert!(matches!(measure_field(&op, &xi, 0.004), Err(crate::Error::Resolution(_))));
        assert!(matches!(measure_field(&op, &[0.0, 0.0, 0.5], 0.1), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn unit_solution_tracks_the_weight() {
        let spec = DomainSpec::unit_ball(0.16).unwrap();
        let grid = crate::discretization::build_grid(&spec, 33, 0.8, 0.02).unwrap();
        let op = LinearOperator::assemble(&spec, Arc::new(grid), BoundaryMode::Zero).unwrap();
        let v1 = unit_solution(&op).unwrap();
        let rep = glob00_check(&op, &v1, 0.1);
        assert!(rep.pass, "{rep:?}");
    }
    #[test]
    fn harnack_and_comparability_are_bounded() {
        let xi = [0.0, 0.0, 1.0];
        let op = focused(0.16, xi);
        let eig = crate::discretization::principal_eigenpair(&op, 1e-8).unwrap();
        let v1 = unit_solution(&op).unwrap();
        let h = harnack_quotient(&op, &v1, &eig.phi, &xi, 0.05).unwrap();
        assert!(h.nodes > 0 && h.quotient >= 1.0 && h.quotient < 50.0, "{h:?}");
        let xs = [[0.0, 0.0, 0.2], [0.5, 0.0, 0.0], [0.0, 0.3, 0.5], [-0.5, 0.2, 0.0]];
        let probe = measure_probe(&op, &xi, &[0.05, 0.1], &xs).unwrap();
        let k = super::super::direct_martin(&op, &super::super::DEFAULT_X0, &xi).unwrap();
        let rep = verify_measure_comparability(&op, &k, &probe, 50.0).unwrap();
        assert!(rep.spread.is_finite() && rep.spread >= 1.0);
    }

    #[test]
    fn martin_kernel_moves_continuously() {
        let xi = [0.0, 0.0, 1.0];
        let op = focused(0.0, xi);
        let xs = [[0.0, 0.0, 0.2], [0.5, 0.0, 0.0], [0.0, -0.4, 0.0]];
        let rep = martin_continuity(&op, &super::super::DEFAULT_X0, &xi, &[0.1, 0.4, 0.2], &xs).unwrap();
        assert_eq!(rep.offsets, alloc::vec![0.4, 0.2, 0.1]);
        assert!(rep.monotone, "{rep:?}");
    }
}

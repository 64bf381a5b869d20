//! Numerical Green and Martin kernels, harmonic measures, and the
//! bounded-ratio checks against the closed-form envelopes.

mod lp;
pub(crate) mod martin;
mod measure;

pub use lp::{lp_threshold_scan, LpLadder, LpLevel, LpScanReport, LpVerdict};
pub use martin::{
    direct_martin, discrete_poisson_kernel, martin_kernel, martin_normalizers, MartinField, MartinLadder,
    DEFAULT_X0,
};
pub use measure::{
    doubling_report, glob00_check, harmonic_measure, harnack_quotient, martin_continuity, measure_field, measure_probe,
    surface_ramp, unit_solution, verify_measure_comparability, verify_measure_green_link, x_r, ContinuityReport,
    DoublingReport, Glob00Report, HarmonicMeasureProbe, HarnackReport, LinkExponent,
};

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_forms::{Envelope, EnvelopeArgs, EnvelopeKind};
use crate::discretization::{BoundaryMode, FieldKind, Grid, LinearOperator, NodeClass, ScalarField};
use crate::error::{bail, Result};
use crate::geometry::dist;
use crate::spectral_oracle::{oracle_green, DEFAULT_L_MAX};

pub const DEFAULT_SPREAD_CAP: f64 = 50.0;
/// Relative tolerance of the linear solves behind every kernel.
pub const KERNEL_TOL: f64 = 1e-10;
/// Series truncation of the oracle comparisons: far below any acceptance tolerance.
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_L_MAX: usize = 4 * DEFAULT_L_MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRecord {
    pub x: [f64; 3],
    /// Second argument: source point, pole or ladder point.
    pub y: [f64; 3],
    pub t: Option<f64>,
    pub numeric: f64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleInfo {
    pub samples: usize,
    pub seed: u64,
    /// Minimum index distance from a source, in cells.
    pub min_source_cells: usize,
    /// Minimum `d_K` of a probe.
    pub min_k_distance: f64,
    pub note: String,
}

/// Outcome of a bounded-ratio check.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub label: String,
    pub kind: Option<EnvelopeKind>,
    pub info: SampleInfo,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread: f64,
    pub records: Vec<RatioRecord>,
    pub cap: f64,
    pub pass: bool,
}

fn key_cmp(a: &RatioRecord, b: &RatioRecord) -> core::cmp::Ordering {
    let ka = [a.y[0], a.y[1], a.y[2], a.x[0], a.x[1], a.x[2], a.t.unwrap_or(0.0)];
    let kb = [b.y[0], b.y[1], b.y[2], b.x[0], b.x[1], b.x[2], b.t.unwrap_or(0.0)];
    for (p, q) in ka.iter().zip(&kb) {
        match p.total_cmp(q) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    core::cmp::Ordering::Equal
}

impl RatioReport {
    pub fn new(
        label: impl Into<String>,
        kind: Option<EnvelopeKind>,
        mut info: SampleInfo,
        mut records: Vec<RatioRecord>,
        cap: f64,
    ) -> Result<Self> {
        if records.is_empty() {
            bail!(Sampling, "no admissible samples");
        }
        records.sort_by(key_cmp);
        info.samples = records.len();
        let ok = records.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
        let min_ratio = records.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let max_ratio = records.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        let spread = if ok { max_ratio / min_ratio } else { f64::INFINITY };
        Ok(RatioReport {
            label: label.into(),
            kind,
            info,
            min_ratio,
            max_ratio,
            spread,
            records,
            cap,
            pass: ok && spread <= cap,
        })
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self.pass = self.spread.is_finite() && self.spread <= cap;
        self
    }

    /// Same report restricted to records accepted by `keep`.
    pub fn filtered(&self, label: impl Into<String>, keep: impl Fn(&RatioRecord) -> bool) -> Result<Self> {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        RatioReport::new(label, self.kind, self.info.clone(), records, self.cap)
    }
}

/// How probe points are drawn for a ratio report.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub samples: usize,
    pub seed: u64,
    pub min_source_cells: usize,
    /// Probes keep `d_K ≥ k_factor · ε_K`.
    pub k_factor: f64,
    /// Kernel probes keep `|x - ξ| ≥ pole_distance`.
    pub pole_distance: f64,
    pub cap: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan { samples: 200, seed: 7, min_source_cells: 4, k_factor: 2.0, pole_distance: 0.05, cap: DEFAULT_SPREAD_CAP }
    }
}

impl SamplePlan {
    pub fn new(samples: usize, seed: u64) -> Self {
        SamplePlan { samples, seed, ..SamplePlan::default() }
    }

    fn info(&self, note: impl Into<String>, grid: &Grid) -> SampleInfo {
        SampleInfo {
            samples: self.samples,
            seed: self.seed,
            min_source_cells: self.min_source_cells,
            min_k_distance: self.k_factor * grid.eps_k(),
            note: note.into(),
        }
    }
}

/// Largest axis index offset between two active nodes.
pub fn cell_distance(grid: &Grid, i: usize, j: usize) -> usize {
    let a = grid.ijk(grid.flat_id(i));
    let b = grid.ijk(grid.flat_id(j));
    (0..3).map(|k| a[k].abs_diff(b[k])).max().unwrap_or(0)
}

/// Cells between node `i` and the nearest collar node along the axes.
pub fn cells_to_collar(grid: &Grid, i: usize) -> usize {
    let dims = grid.dims();
    let ijk = grid.ijk(grid.flat_id(i));
    let mut best = usize::MAX;
    for a in 0..3 {
        for dir in [-1i64, 1] {
            let mut p = ijk;
            let mut steps = 0;
            loop {
                let j = p[a] as i64 + dir;
                if j < 0 || j as usize >= dims[a] {
                    break;
                }
                p[a] = j as usize;
                steps += 1;
                if steps >= best {
                    break;
                }
                match grid.class_of_flat(grid.flat(p)) {
                    NodeClass::Interior => continue,
                    _ => {
                        best = best.min(steps);
                        break;
                    }
                }
            }
        }
    }
    if grid.class(i) != NodeClass::Interior {
        0
    } else {
        best
    }
}

/// Minimal Green kernel `G_μ(·, y)` with the Dirac mass lumped at the node nearest `y`.
pub fn green_field(op: &LinearOperator, y: &[f64; 3]) -> Result<ScalarField> {
    let grid = op.grid();
    let Some(i) = grid.nearest(y) else {
        bail!(Placement, "source {:?} has no active node", y);
    };
    let cells = cells_to_collar(grid, i);
    if cells < 4 {
        bail!(Placement, "source {:?} is {cells} cells from a collar, need 4", y);
    }
    green_field_at_node(op, i)
}

pub(crate) fn green_field_at_node(op: &LinearOperator, i: usize) -> Result<ScalarField> {
    let zero = op.with_mode(BoundaryMode::Zero);
    let mut load = alloc::vec![0.0; op.len()];
    load[i] = 1.0;
    let sol = zero.solve_load(&load, KERNEL_TOL)?;
    if let Some(j) = sol.field.values.iter().position(|v| !(*v > 0.0)) {
        bail!(Solver, "Green field is not positive at node {j}");
    }
    let p = op.grid().point(i);
    Ok(ScalarField::new(FieldKind::Green, sol.field.values).with_source(p))
}

/// Draws admissible probe nodes. Deterministic for a given seed.
pub fn draw_probes(grid: &Grid, count: usize, seed: u64, admissible: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let n = grid.len();
    let mut tries = 0;
    while out.len() < count && tries < 200 * count.max(1) {
        tries += 1;
        let i = rng.gen_range(0..n);
        if admissible(i) && !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn pair_record(env: &Envelope, x: [f64; 3], y: [f64; 3], numeric: f64) -> Result<RatioRecord> {
    let e = env.eval(EnvelopeArgs::Pair { x: &x, y: &y })?;
    Ok(RatioRecord { x, y, t: None, numeric, envelope: e, ratio: numeric / e })
}

fn source_node(grid: &Grid, field: &ScalarField) -> Result<usize> {
    let Some(y) = field.meta.source else {
        bail!(Parameter, "field has no source point");
    };
    grid.nearest(&y).ok_or_else(|| crate::Error::Placement(alloc::format!("source {:?} is off the grid", y)))
}

/// Ratio report of Green fields against a pair envelope at random probes.
pub fn verify_green_envelope(
    op: &LinearOperator,
    fields: &[ScalarField],
    env: &Envelope,
    plan: &SamplePlan,
) -> Result<RatioReport> {
    let grid = op.grid();
    let spec = op.spec();
    let min_k = plan.k_factor * grid.eps_k();
    let mut records = Vec::new();
    let per = plan.samples.div_ceil(fields.len().max(1));
    for (f, field) in fields.iter().enumerate() {
        let j = source_node(grid, field)?;
        let y = grid.point(j);
        let probes = draw_probes(grid, per, plan.seed.wrapping_add(f as u64), |i| {
            grid.class(i) == NodeClass::Interior
                && spec.d_k(&grid.point(i)) >= min_k
                && cell_distance(grid, i, j) >= plan.min_source_cells
        });
        for i in probes {
            records.push(pair_record(env, grid.point(i), y, field.values[i])?);
        }
    }
    let info = plan.info(alloc::format!("{} sources", fields.len()), grid);
    RatioReport::new(env.kind.name(), Some(env.kind), info, records, plan.cap)
}

/// Ratio report of Green fields against a pair envelope at given probes.
pub fn verify_green_pairs(
    op: &LinearOperator,
    pairs: &[(&ScalarField, [f64; 3])],
    env: &Envelope,
    cap: f64,
) -> Result<RatioReport> {
    let grid = op.grid();
    let mut records = Vec::new();
    for (field, x) in pairs {
        let j = source_node(grid, field)?;
        let Some(i) = grid.nearest(x) else {
            bail!(Placement, "probe {:?} has no active node", x);
        };
        if i == j {
            bail!(Coincidence, "probe and source share node {i}");
        }
        records.push(pair_record(env, grid.point(i), grid.point(j), field.values[i])?);
    }
    let info = SampleInfo {
        samples: records.len(),
        seed: 0,
        min_source_cells: 0,
        min_k_distance: 0.0,
        note: String::from("fixed probes"),
    };
    RatioReport::new(env.kind.name(), Some(env.kind), info, records, cap)
}

/// Ratio report of a kernel field `K(·, ξ)` against a kernel envelope.
pub fn verify_kernel_envelope(
    op: &LinearOperator,
    field: &ScalarField,
    xi: &[f64; 3],
    env: &Envelope,
    plan: &SamplePlan,
) -> Result<RatioReport> {
    let grid = op.grid();
    let spec = op.spec();
    let min_k = plan.k_factor * grid.eps_k();
    let probes = draw_probes(grid, plan.samples, plan.seed, |i| {
        let p = grid.point(i);
        grid.class(i) == NodeClass::Interior && spec.d_k(&p) >= min_k && dist(&p, xi) >= plan.pole_distance
    });
    let mut records = Vec::with_capacity(probes.len());
    for i in probes {
        let x = grid.point(i);
        let e = env.eval(EnvelopeArgs::Kernel { x: &x, xi })?;
        let v = field.values[i];
        records.push(RatioRecord { x, y: *xi, t: None, numeric: v, envelope: e, ratio: v / e });
    }
    let info = plan.info(alloc::format!("pole {:?}", xi), grid);
    RatioReport::new(env.kind.name(), Some(env.kind), info, records, plan.cap)
}

/// Ratio report of a nodal field against a one-point envelope.
pub fn verify_point_envelope(
    op: &LinearOperator,
    field: &ScalarField,
    env: &Envelope,
    plan: &SamplePlan,
) -> Result<RatioReport> {
    let grid = op.grid();
    let spec = op.spec();
    let min_k = plan.k_factor * grid.eps_k();
    let probes =
        draw_probes(grid, plan.samples, plan.seed, |i| grid.class(i) == NodeClass::Interior && spec.d_k(&grid.point(i)) >= min_k);
    let mut records = Vec::with_capacity(probes.len());
    for i in probes {
        let x = grid.point(i);
        let e = env.eval(EnvelopeArgs::Point { x: &x })?;
        let v = field.values[i];
        records.push(RatioRecord { x, y: [0.0; 3], t: None, numeric: v, envelope: e, ratio: v / e });
    }
    RatioReport::new(env.kind.name(), Some(env.kind), plan.info("point envelope", grid), records, plan.cap)
}

/// Grid Green value against the series oracle at one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub numeric: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

/// Compares a Green field with the spectral oracle at the nodes nearest `xs`.
pub fn compare_green_oracle(op: &LinearOperator, field: &ScalarField, xs: &[[f64; 3]]) -> Result<Vec<OracleComparison>> {
    let grid = op.grid();
    let j = source_node(grid, field)?;
    let y = grid.point(j);
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let Some(i) = grid.nearest(x) else {
            bail!(Placement, "probe {:?} has no active node", x);
        };
        let p = grid.point(i);
        let oracle = oracle_green(op.spec(), &p, &y, ORACLE_L_MAX, ORACLE_TOL)?.value;
        let numeric = field.values[i];
        out.push(OracleComparison { x: p, y, numeric, oracle, rel_error: (numeric - oracle).abs() / oracle });
    }
    Ok(out)
}

/// `|u(x) - u(y)|`-type symmetry defect `|G_y(x) - G_x(y)| / G_y(x)`.
pub fn green_symmetry_defect(op: &LinearOperator, gy: &ScalarField, gx: &ScalarField) -> Result<f64> {
    let grid = op.grid();
    let i = source_node(grid, gx)?;
    let j = source_node(grid, gy)?;
    let a = gy.values[i];
    let b = gx.values[j];
    Ok((a - b).abs() / a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::EnvelopeKind;
    use crate::discretization::build_grid;
    use crate::geometry::DomainSpec;
    use alloc::sync::Arc;

    pub(crate) fn operator(mu: f64, n: usize) -> LinearOperator {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = Arc::new(build_grid(&spec, n, 0.8, 0.02).unwrap());
        LinearOperator::assemble(&spec, grid, BoundaryMode::Zero).unwrap()
    }

    #[test]
    fn report_spread_contract() {
        let info = SampleInfo { samples: 0, seed: 1, min_source_cells: 4, min_k_distance: 0.0, note: String::new() };
        let rec = |r: f64| RatioRecord { x: [r, 0.0, 0.0], y: [0.0; 3], t: None, numeric: r, envelope: 1.0, ratio: r };
        let rep = RatioReport::new("t", None, info.clone(), alloc::vec![rec(2.0), rec(0.5), rec(1.0)], 5.0).unwrap();
        assert_eq!(rep.min_ratio, 0.5);
        assert_eq!(rep.max_ratio, 2.0);
        assert_eq!(rep.spread, 4.0);
        assert!(rep.pass);
        assert!(!rep.clone().with_cap(3.0).pass);
        let bad = RatioReport::new("t", None, info.clone(), alloc::vec![rec(1.0), rec(-1.0)], 5.0).unwrap();
        assert!(!bad.pass);
        assert!(matches!(RatioReport::new("t", None, info, Vec::new(), 5.0), Err(crate::Error::Sampling(_))));
    }

    #[test]
    fn green_field_matches_kelvin_form() {
        let op = operator(0.0, 33);
        let g = green_field(&op, &[-0.4, 0.1, 0.0]).unwrap();
        let cmp = compare_green_oracle(&op, &g, &[[0.4, 0.0, 0.0], [0.0, 0.5, 0.3], [-0.2, -0.5, 0.1]]).unwrap();
        for c in &cmp {
            let kelvin = crate::spectral_oracle::kelvin_green(&c.x, &c.y);
            assert!((c.oracle / kelvin - 1.0).abs() < 1e-6);
            assert!(c.rel_error < 0.05, "{c:?}");
        }
    }

    #[test]
    fn green_field_is_symmetric() {
        let op = operator(0.16, 17);
        let a = green_field(&op, &[0.3, 0.1, 0.0]).unwrap();
        let b = green_field(&op, &[-0.2, 0.3, 0.2]).unwrap();
        assert!(green_symmetry_defect(&op, &a, &b).unwrap() < 1e-7);
    }

    #[test]
    fn collar_sources_are_rejected() {
        let op = operator(0.0, 17);
        let e = green_field(&op, &[0.97, 0.0, 0.0]);
        assert!(matches!(e, Err(crate::Error::Placement(_))));
        let e = green_field(&op, &[0.03, 0.0, 0.0]);
        assert!(matches!(e, Err(crate::Error::Placement(_))));
    }

    #[test]
    fn classical_green_envelope_spread() {
        let op = operator(0.0, 17);
        let fields: Vec<_> =
            [[0.3, 0.0, 0.0], [0.0, -0.4, 0.2]].iter().map(|y| green_field(&op, y).unwrap()).collect();
        let env = Envelope::new(EnvelopeKind::GreenSubcritical, op.spec());
        let rep = verify_green_envelope(&op, &fields, &env, &SamplePlan::new(100, 3)).unwrap();
        assert!(rep.records.len() >= 90);
        assert!(rep.spread < 10.0, "spread {}", rep.spread);
    }
}

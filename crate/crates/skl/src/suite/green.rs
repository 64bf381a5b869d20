use rayon::prelude::*;
use skl_core::closed_forms::{Envelope, EnvelopeKind};
use skl_core::discretization::{LinearOperator, NodeClass, ScalarField};
use skl_core::geometry::dist;
use skl_core::kernels::{
    cell_distance, compare_green_oracle, draw_probes, green_field, green_symmetry_defect, verify_green_envelope,
    verify_green_pairs, OracleComparison, RatioReport,
};
use skl_core::spectral_oracle::kelvin_green;

use super::{plan, ratio_plot, suite_checks, tag, write_ratio};
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion};

const ORACLE_MU: [f64; 3] = [0.0, 0.16, 0.25];

pub fn fields(op: &LinearOperator, sources: &[[f64; 3]]) -> RunResult<Vec<ScalarField>> {
    sources.par_iter().map(|y| green_field(op, y).map_err(Into::into)).collect()
}

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let mut out = Vec::new();
    for &mu in &cfg.mu {
        out.extend(oracle_match(lab, mu)?);
    }
    if cfg.mu.contains(&0.16) {
        out.extend(envelope_suite(lab, 0.16, EnvelopeKind::GreenSubcritical)?);
    }
    if cfg.mu.contains(&0.25) {
        out.extend(envelope_suite(lab, 0.25, EnvelopeKind::GreenCritical)?);
        out.extend(log_discrimination(lab)?);
    }
    if cfg.mu.contains(&0.0) {
        let op = lab.operator(0.0, &lab.fine())?;
        let fs = fields(&op, &cfg.green.sources)?;
        let env = Envelope::new(EnvelopeKind::GreenSubcritical, &lab.spec(0.0)?);
        let rep = verify_green_envelope(&op, &fs, &env, &plan(lab, cfg.green.samples))?;
        write_ratio(lab, "green_envelope_mu0", &rep)?;
        out.push(Criterion::at_most(0, "green classical spread mu0", rep.spread, 10.0));
    }
    Ok(out)
}

fn oracle_match(lab: &Lab, mu: f64) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let group = if ORACLE_MU.contains(&mu) { 2 } else { 0 };
    let op = lab.operator(mu, &lab.fine())?;
    let grid = op.grid().clone();
    let spec = op.spec().clone();
    let gs = fields(&op, &cfg.green.sources)?;
    let min_k = 2.0 * grid.eps_k();
    let per_source: Vec<Vec<OracleComparison>> = gs
        .par_iter()
        .enumerate()
        .map(|(s, g)| {
            let Some(j) = grid.nearest(&g.meta.source.unwrap_or_default()) else {
                return Ok(Vec::new());
            };
            let probes = draw_probes(&grid, cfg.green.oracle_probes, cfg.seed.wrapping_add(100 + s as u64), |i| {
                grid.class(i) == NodeClass::Interior && spec.d_k(&grid.point(i)) >= min_k && cell_distance(&grid, i, j) >= 4
            });
            let xs: Vec<[f64; 3]> = probes.iter().map(|&i| grid.point(i)).collect();
            compare_green_oracle(&op, g, &xs).map_err(Into::into)
        })
        .collect::<RunResult<_>>()?;
    let all: Vec<OracleComparison> = per_source.into_iter().flatten().collect();
    let worst = all.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    let mut out = vec![
        Criterion::at_most(group, format!("green oracle max rel error {}", tag(mu)), worst, cfg.green.oracle_tol),
        Criterion::at_least(group, format!("green oracle pairs {}", tag(mu)), all.len() as f64, 20.0),
    ];
    let mut sym: f64 = 0.0;
    let mut pairs = 0;
    for a in 0..gs.len() {
        for b in a + 1..gs.len() {
            if pairs < cfg.green.symmetry_pairs {
                sym = sym.max(green_symmetry_defect(&op, &gs[a], &gs[b])?);
                pairs += 1;
            }
        }
    }
    out.push(Criterion::at_most(0, format!("green symmetry defect {}", tag(mu)), sym, 1e-6));
    if mu == 0.0 {
        let y = [-0.5, 0.0, 0.0];
        let x = [0.5, 0.0, 0.0];
        let g = green_field(&op, &y)?;
        let (i, j) = (grid.nearest(&x).unwrap_or(0), grid.nearest(&y).unwrap_or(0));
        let (px, py) = (grid.point(i), grid.point(j));
        let exact = kelvin_green(&px, &py);
        let err = (g.values[i] - exact).abs() / exact;
        out.push(Criterion::at_most(2, "green Kelvin antipodal rel error mu0", err, cfg.green.oracle_tol));
        lab.emit(|a| {
            a.field_csv("green_antipodal_mu0", &grid, &g)?;
            a.dump("green_antipodal_mu0", &g.values)?;
            Ok(())
        })?;
    }
    let rows = all.iter().map(|c| row(&[c.x[0], c.x[1], c.x[2], c.y[0], c.y[1], c.y[2], c.numeric, c.oracle, c.rel_error]));
    lab.emit(|a| {
        let header = ["x1", "x2", "x3", "y1", "y2", "y3", "numeric", "oracle", "rel_error"];
        a.csv(&format!("green_oracle_{}", tag(mu)), &header, rows).map(|_| ())
    })?;
    Ok(out)
}

fn envelope_suite(lab: &Lab, mu: f64, kind: EnvelopeKind) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let env = Envelope::new(kind, &lab.spec(mu)?);
    let mut reports = Vec::new();
    for options in [lab.coarse(), lab.fine()] {
        let op = lab.operator(mu, &options)?;
        let fs = fields(&op, &cfg.green.sources)?;
        reports.push(verify_green_envelope(&op, &fs, &env, &plan(lab, cfg.green.samples))?);
    }
    let name = format!("{} {}", kind.name(), tag(mu));
    write_ratio(lab, &format!("green_envelope_{}", tag(mu)), &reports[1])?;
    lab.plot(&format!("green_envelope_{}", tag(mu)), || {
        ratio_plot(&format!("{name}: G / envelope"), &[("coarse", &reports[0]), ("fine", &reports[1])])
    })?;
    Ok(suite_checks(3, &name, &reports[0], &reports[1], cfg.green.samples, cfg.green.stability))
}

/// Diagonal pairs `y = t u`, `x = t v` with `u = (1,1,1)/√3` and `v` one of
/// three other diagonals.
fn diagonal_pairs(scales: &[f64]) -> Vec<([f64; 3], Vec<[f64; 3]>)> {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [[-s, -s, -s], [-s, s, -s], [s, -s, -s]];
    scales
        .iter()
        .map(|&t| ([t * s, t * s, t * s], dirs.iter().map(|d| [t * d[0], t * d[1], t * d[2]]).collect()))
        .collect()
}

pub fn log_discrimination(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let op = lab.operator(0.25, &lab.fine())?;
    let spec = lab.spec(0.25)?;
    let pairs = diagonal_pairs(&cfg.green.diagonal_scales);
    let sources: Vec<[f64; 3]> = pairs.iter().map(|p| p.0).collect();
    let fs = fields(&op, &sources)?;
    let probes: Vec<(&ScalarField, [f64; 3])> =
        fs.iter().zip(&pairs).flat_map(|(f, p)| p.1.iter().map(move |x| (f, *x))).collect();
    let with_log = Envelope::new(EnvelopeKind::GreenCritical, &spec);
    let without = with_log.clone().without_log();
    let a: RatioReport = verify_green_pairs(&op, &probes, &with_log, cfg.spread_cap)?;
    let b: RatioReport = verify_green_pairs(&op, &probes, &without, cfg.spread_cap)?;
    write_ratio(lab, "green_log_diagonal_mu0.25", &a)?;
    write_ratio(lab, "green_nolog_diagonal_mu0.25", &b)?;
    lab.plot("green_log_ablation_mu0.25", || ratio_plot("critical Green envelope with and without log", &[("with log", &a), ("without log", &b)]))?;
    let gain = b.spread / a.spread;
    let closest = probes.iter().map(|p| dist(&p.1, &[0.0; 3])).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Criterion::at_least(4, "green-critical log ablation spread gain", gain, cfg.green.log_gain),
        Criterion::flag(4, "green-critical diagonal spread with log", a.spread, cfg.spread_cap, a.pass),
        Criterion::flag(0, "green-critical closest diagonal probe", closest, 2.0 * op.grid().eps_k(), closest >= 2.0 * op.grid().eps_k()),
    ])
}

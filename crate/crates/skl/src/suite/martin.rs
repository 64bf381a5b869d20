use rayon::prelude::*;
use skl_core::closed_forms::{Envelope, EnvelopeKind};
use skl_core::discretization::{LinearOperator, NodeClass, ScalarField};
use skl_core::geometry::dist;
use skl_core::kernels::{direct_martin, draw_probes, harnack_quotient, martin_continuity, martin_kernel, MartinLadder, RatioReport};

use super::{fit_line, plan, ratio_plot, suite_checks, tag, write_ratio};
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion, Plot, Style};

const ORIGIN: [f64; 3] = [0.0; 3];
/// Excision radius of the grid carrying the ladder at K.
const LADDER_EPS_K: f64 = 0.005;

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let mut out = Vec::new();
    if cfg.mu.contains(&0.16) {
        out.extend(normalisation_and_slope(lab, 0.16)?);
    }
    for mu in [0.16, 0.25] {
        if cfg.mu.contains(&mu) {
            out.extend(envelope_suites(lab, mu)?);
        }
    }
    if cfg.mu.contains(&0.16) {
        out.extend(ladder_and_continuity(lab, 0.16)?);
    }
    Ok(out)
}

fn kernels(op: &LinearOperator, x0: &[f64; 3], poles: &[[f64; 3]]) -> RunResult<Vec<ScalarField>> {
    poles.par_iter().map(|xi| direct_martin(op, x0, xi).map_err(Into::into)).collect()
}

/// Geometric radii in `[lo, hi]`.
fn radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn normalisation_and_slope(lab: &Lab, mu: f64) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let m = &cfg.martin;
    let op = lab.operator(mu, &lab.fine())?;
    let grid = op.grid().clone();
    let spec = op.spec().clone();
    let ks = kernels(&op, &m.x0, &[ORIGIN, m.boundary_pole])?;
    let mut out = Vec::new();
    for (k, label) in ks.iter().zip(["K", "boundary"]) {
        let at_x0 = grid.interpolate(&k.values, &m.x0).unwrap_or(f64::NAN);
        out.push(Criterion::at_most(5, format!("martin {label} pole |K(x0) - 1| {}", tag(mu)), (at_x0 - 1.0).abs(), 1e-12));
    }
    let along = |r: f64| [-r, 0.0, 0.0];
    let rs = radii(m.slope_r_min_eps * grid.eps_k(), m.slope_r_max, m.slope_points);
    let profile: Vec<(f64, f64)> = rs
        .iter()
        .filter_map(|&r| grid.interpolate(&ks[0].values, &along(r)).map(|v| (spec.d_k(&along(r)), v)))
        .collect();
    let logs: Vec<(f64, f64)> = profile.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let (slope, _) = fit_line(&logs);
    let am = spec.alpha_minus();
    out.push(Criterion::at_most(5, format!("martin K-pole radial slope + alpha- {}", tag(mu)), (slope + am).abs(), m.slope_tol));
    let (inner, _) = fit_line(&logs[..logs.len() / 2 + 1]);
    out.push(Criterion::at_most(0, format!("martin K-pole inner slope + alpha- {}", tag(mu)), (inner + am).abs(), m.slope_tol));
    lab.emit(|a| {
        let rows = profile.iter().map(|p| row(&[p.0, p.1, p.0.powf(-am), p.0.powf(-spec.alpha_plus())]));
        a.csv(&format!("martin_slope_{}", tag(mu)), &["d_k", "martin", "d_k^-alpha_minus", "d_k^-alpha_plus"], rows)?;
        a.dump(&format!("martin_k_{}", tag(mu)), &ks[0].values)?;
        a.dump(&format!("martin_boundary_{}", tag(mu)), &ks[1].values)?;
        Ok(())
    })?;
    lab.plot(&format!("martin_slope_{}", tag(mu)), || {
        let c = profile[0].1 * profile[0].0.powf(am);
        Plot::new(format!("K(x, 0) along a radius, slope {slope:.3}"), "d_K", "K").log_log()
            .with("grid", profile.clone(), Style::Points)
            .with("d_K^-alpha-", profile.iter().map(|p| (p.0, c * p.0.powf(-am))).collect(), Style::Line)
    })?;
    Ok(out)
}

fn envelope_suites(lab: &Lab, mu: f64) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let m = &cfg.martin;
    let spec = lab.spec(mu)?;
    let mut out = Vec::new();
    for (xi, kind) in [(m.boundary_pole, EnvelopeKind::MartinBoundary), (ORIGIN, EnvelopeKind::MartinK)] {
        let env = Envelope::new(kind, &spec);
        let mut reports: Vec<RatioReport> = Vec::new();
        for options in [lab.coarse(), lab.fine()] {
            let op = lab.operator(mu, &options)?;
            let k = direct_martin(&op, &m.x0, &xi)?;
            reports.push(skl_core::kernels::verify_kernel_envelope(&op, &k, &xi, &env, &plan(lab, m.samples))?);
        }
        let name = format!("{} {}", kind.name(), tag(mu));
        let file = format!("martin_envelope_{}_{}", if xi == ORIGIN { "k" } else { "boundary" }, tag(mu));
        write_ratio(lab, &file, &reports[1])?;
        lab.plot(&file, || ratio_plot(&format!("{name}: K / envelope"), &[("coarse", &reports[0]), ("fine", &reports[1])]))?;
        out.extend(suite_checks(3, &name, &reports[0], &reports[1], m.samples, cfg.green.stability));
    }
    Ok(out)
}

/// Ladder limit against the direct kernel, boundary Harnack quotients and the
/// continuity trend in the pole.
fn ladder_and_continuity(lab: &Lab, mu: f64) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let m = &cfg.martin;
    let op = lab.operator(mu, &lab.fine())?;
    let grid = op.grid().clone();
    let spec = op.spec().clone();
    let mut out = Vec::new();
    let far = draw_probes(&grid, 40, cfg.seed.wrapping_add(300), |i| {
        let p = grid.point(i);
        grid.class(i) == NodeClass::Interior && spec.d_k(&p) >= 0.3 && dist(&p, &m.boundary_pole) >= 0.6
    });
    let xs: Vec<[f64; 3]> = far.iter().map(|&i| grid.point(i)).collect();
    let cases = [(m.boundary_pole, MartinLadder { levels: 3, ..MartinLadder::boundary() }, "boundary"), (ORIGIN, MartinLadder::singular(), "K")];
    let grids = [lab.fine().with_focus(m.boundary_pole, cfg.hmeasure.boundary_width), lab.options(cfg.grid.n_base)];
    let grids = [grids[0].clone(), skl_core::discretization::GridOptions { eps_k: LADDER_EPS_K, ..grids[1].clone() }];
    let fields: Vec<_> = cases
        .par_iter()
        .zip(grids.par_iter())
        .map(|((xi, ladder, _), options)| -> RunResult<_> {
            let lop = lab.operator(mu, options)?;
            let lim = martin_kernel(&lop, &m.x0, xi, ladder)?;
            let exact = direct_martin(&lop, &m.x0, xi)?;
            let lgrid = lop.grid();
            let gap = xs
                .iter()
                .filter_map(|x| lgrid.nearest(x))
                .map(|i| ((lim.field.values[i] - exact.values[i]) / exact.values[i]).abs())
                .fold(0.0, f64::max);
            Ok((gap, direct_martin(&op, &m.x0, xi)?))
        })
        .collect::<RunResult<_>>()?;
    let phi = lab.eigen(mu, &lab.fine())?;
    let antipode = [-m.boundary_pole[0], -m.boundary_pole[1], -m.boundary_pole[2]];
    for ((_, _, label), (gap, exact)) in cases.iter().zip(&fields) {
        let gap = *gap;
        out.push(Criterion::at_most(0, format!("martin {label} ladder vs direct kernel {}", tag(mu)), gap, 0.1));
        let h = harnack_quotient(&op, exact, &phi.phi, &antipode, 0.2)?;
        out.push(Criterion::at_most(0, format!("martin {label} Harnack quotient {}", tag(mu)), h.quotient, cfg.spread_cap));
    }
    let cont = martin_continuity(&op, &m.x0, &m.boundary_pole, &m.continuity_offsets, &xs)?;
    out.push(Criterion::flag(0, format!("martin continuity in the pole {}", tag(mu)), *cont.differences.last().unwrap_or(&f64::NAN), cont.differences[0], cont.monotone));
    lab.emit(|a| {
        let rows = cont.offsets.iter().zip(&cont.differences).map(|(o, d)| row(&[*o, *d]));
        a.csv(&format!("martin_continuity_{}", tag(mu)), &["offset", "max_rel_difference"], rows).map(|_| ())
    })?;
    Ok(out)
}

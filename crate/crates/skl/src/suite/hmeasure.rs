use skl_core::discretization::{GridOptions, LinearOperator, NodeClass};
use skl_core::geometry::dist;
use skl_core::kernels::{
    direct_martin, doubling_report, draw_probes, glob00_check, measure_probe, unit_solution, verify_measure_comparability,
    verify_measure_green_link, DoublingReport, HarmonicMeasureProbe,
};

use super::{tag, write_ratio};
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion, Plot, Style};

const ORIGIN: [f64; 3] = [0.0; 3];
const GLOB00_MU: [f64; 2] = [0.0, 0.16];
/// Excision radius of the K-pole grids: keeps `x_r` at the smallest radius four cells off the collar.
const K_POLE_EPS_K: f64 = 0.01;

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let h = &cfg.hmeasure;
    let mut out = Vec::new();
    let mut ladders = Vec::new();
    for &mu in &cfg.mu {
        let op = lab.operator(mu, &lab.fine())?;
        let kop = lab.operator(mu, &GridOptions { eps_k: K_POLE_EPS_K, ..lab.fine() })?;
        let probe = probe_at(lab, &kop, &ORIGIN, mu)?;
        let d = doubling_report(&probe)?;
        out.extend(doubling_checks(lab, "K pole", mu, &d));
        ladders.push((format!("K pole {}", tag(mu)), d));

        let link = verify_measure_green_link(&kop, &probe, None, cfg.spread_cap)?;
        write_ratio(lab, &format!("hmeasure_link_k_{}", tag(mu)), &link)?;
        let group = if op.spec().is_critical() { 0 } else { 6 };
        out.push(Criterion::flag(group, format!("hmeasure link spread at K {}", tag(mu)), link.spread, link.cap, link.pass));

        if mu == 0.16 {
            let k = direct_martin(&kop, &cfg.martin.x0, &ORIGIN)?;
            let c = verify_measure_comparability(&kop, &k.with_note("martin-K"), &probe, cfg.spread_cap)?;
            write_ratio(lab, &format!("hmeasure_comparability_k_{}", tag(mu)), &c)?;
            out.push(Criterion::flag(0, format!("hmeasure comparability spread at K {}", tag(mu)), c.spread, c.cap, c.pass));
        }

        let v1 = unit_solution(&op)?;
        let g = glob00_check(&op, &v1, h.glob00_tol);
        let group = if GLOB00_MU.contains(&mu) { 6 } else { 0 };
        let dev = g.k_deviation.max(g.boundary_deviation);
        out.push(Criterion::flag(group, format!("hmeasure v1/W~ - 1 at collars {}", tag(mu)), dev, g.tolerance, g.pass));
        lab.emit(|a| a.dump(&format!("hmeasure_v1_{}", tag(mu)), &v1.values).map(|_| ()))?;

        let focused = lab.fine().with_focus(h.boundary_pole, h.boundary_width);
        let bop = lab.operator(mu, &focused)?;
        let bprobe = probe_at(lab, &bop, &h.boundary_pole, mu)?;
        let bd = doubling_report(&bprobe)?;
        out.extend(doubling_checks(lab, "boundary pole", mu, &bd));
        ladders.push((format!("boundary pole {}", tag(mu)), bd));
        let blink = verify_measure_green_link(&bop, &bprobe, None, cfg.spread_cap)?;
        write_ratio(lab, &format!("hmeasure_link_boundary_{}", tag(mu)), &blink)?;
        out.push(Criterion::flag(0, format!("hmeasure link spread at boundary pole {}", tag(mu)), blink.spread, blink.cap, blink.pass));
    }
    let rows: Vec<_> = ladders.iter().flat_map(|(l, d)| d.constants.iter().map(move |c| vec![l.clone(), c.0.to_string(), c.1.to_string()])).collect();
    lab.emit(|a| a.csv("hmeasure_doubling", &["pole", "r", "doubling_constant"], rows).map(|_| ()))?;
    lab.plot("hmeasure_doubling", || {
        ladders.iter().fold(Plot::new("doubling constants", "r", "max omega(2r) / omega(r)").log_x(), |p, (l, d)| {
            p.with(l.clone(), d.constants.clone(), Style::Line)
        })
    })?;
    Ok(out)
}

fn doubling_checks(lab: &Lab, label: &str, mu: f64, d: &DoublingReport) -> Vec<Criterion> {
    let h = &lab.cfg.hmeasure;
    vec![
        Criterion::flag(6, format!("hmeasure doubling constant at {label} {}", tag(mu)), d.max, f64::INFINITY, d.max.is_finite() && d.max > 0.0),
        Criterion::at_most(6, format!("hmeasure doubling variation at {label} {}", tag(mu)), d.variation, h.doubling_stability),
    ]
}

/// Probes split between a far band (`|x - ξ| ≥ 8 r` for the middle radius)
/// and a near band outside `B_{4 r_min}(ξ)`.
fn probe_at(lab: &Lab, op: &LinearOperator, xi: &[f64; 3], mu: f64) -> RunResult<HarmonicMeasureProbe> {
    let cfg = &lab.cfg;
    let h = &cfg.hmeasure;
    let grid = op.grid();
    let spec = op.spec();
    let r_min = h.radii.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sorted = h.radii.clone();
    sorted.sort_by(f64::total_cmp);
    let far_r = 8.0 * sorted[sorted.len() / 2];
    let min_k = 2.0 * grid.eps_k();
    let ok = |i: usize, lo: f64| {
        let p = grid.point(i);
        grid.class(i) == NodeClass::Interior && spec.d_k(&p) >= min_k && dist(&p, xi) >= lo
    };
    let seed = cfg.seed.wrapping_add(500) ^ mu.to_bits();
    let mut nodes = draw_probes(grid, h.probes / 2, seed, |i| ok(i, far_r));
    nodes.extend(draw_probes(grid, h.probes - nodes.len(), seed.wrapping_add(1), |i| ok(i, 4.0 * r_min) && !ok(i, far_r)));
    let xs: Vec<[f64; 3]> = nodes.iter().map(|&i| grid.point(i)).collect();
    let probe = measure_probe(op, xi, &h.radii, &xs)?;
    lab.emit(|a| {
        let name = format!("hmeasure_probe_{}_{}", if spec.on_k(xi) { "k" } else { "boundary" }, tag(mu));
        let rows = probe.radii.iter().enumerate().flat_map(|(k, &r)| {
            let p = &probe;
            p.points.iter().enumerate().map(move |(j, x)| row(&[r, x[0], x[1], x[2], p.omega[k][j], p.green[k][j], p.companion[k][j], p.v1[j]]))
        });
        a.csv(&name, &["r", "x1", "x2", "x3", "omega", "green", "companion", "v1"], rows).map(|_| ())
    })?;
    Ok(probe)
}

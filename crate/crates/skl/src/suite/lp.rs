use skl_core::kernels::{lp_threshold_scan, LpScanReport, LpVerdict};

use super::tag;
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{Criterion, Plot, Style};

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg.lp_scan;
    let spec = lab.spec(cfg.mu)?;
    let n = spec.dim() as f64;
    let boundary_threshold = (n + 1.0) / (n - 1.0);
    let k_threshold = (n - spec.alpha_minus()) / spec.alpha_plus();
    let (b, k) = rayon::join(
        || lp_threshold_scan(&spec, &cfg.boundary_pole, &cfg.boundary_ps, &cfg.boundary.to_ladder()),
        || lp_threshold_scan(&spec, &[0.0; 3], &cfg.singular_ps, &cfg.singular.to_ladder()),
    );
    let (b, k) = (b?, k?);
    let mut out = Vec::new();
    for (label, rep, thr) in [("boundary", &b, boundary_threshold), ("K", &k, k_threshold)] {
        for (j, &p) in rep.ps.iter().enumerate() {
            let expected = if p < thr { LpVerdict::Convergent } else { LpVerdict::Divergent };
            let last = *rep.changes[j].last().unwrap_or(&f64::NAN);
            out.push(Criterion::flag(
                7,
                format!("lp {label} p={p} {} (threshold {thr:.3}, expect {})", tag(cfg.mu), expected.name()),
                last,
                thr,
                rep.verdicts[j] == expected,
            ));
        }
        write(lab, label, rep)?;
    }
    Ok(out)
}

fn write(lab: &Lab, label: &str, rep: &LpScanReport) -> RunResult<()> {
    let mut rows = Vec::new();
    for (j, &p) in rep.ps.iter().enumerate() {
        for (l, level) in rep.levels.iter().enumerate() {
            let change = if l == 0 { String::new() } else { rep.changes[j][l - 1].to_string() };
            rows.push(vec![
                p.to_string(),
                level.width.to_string(),
                level.nodes.to_string(),
                level.lambda.to_string(),
                level.integrals[j].to_string(),
                change,
                rep.verdicts[j].name().to_string(),
            ]);
        }
    }
    let name = format!("lp_scan_{}", label.to_lowercase());
    lab.emit(|a| a.csv(&name, &["p", "width", "nodes", "lambda", "integral", "change", "verdict"], rows).map(|_| ()))?;
    lab.plot(&name, || {
        rep.ps.iter().enumerate().fold(Plot::new(format!("L^p scan at the {label} pole"), "ladder width", "integral").log_log(), |pl, (j, p)| {
            pl.with(format!("p = {p}"), rep.levels.iter().map(|l| (l.width, l.integrals[j])).collect(), Style::Line)
        })
    })
}

use std::time::Instant;

use skl_core::closed_forms::{Envelope, EnvelopeKind};
use skl_core::geometry::norm;
use skl_core::kernels::verify_point_envelope;
use skl_core::spectral_oracle::oracle_eigen;

use super::{plan, suite_checks, tag, write_ratio};
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion, Plot, Style};

/// μ values whose eigenvalues are gated by criterion 1.
const GATED: [f64; 2] = [0.0, 0.25];

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let mut out = Vec::new();
    let mut table = Vec::new();
    for &mu in &cfg.mu {
        let spec = lab.spec(mu)?;
        let oracle = oracle_eigen(&spec)?;
        let group = if GATED.contains(&mu) { 1 } else { 0 };
        let mut errors = Vec::new();
        for options in [lab.coarse(), lab.fine()] {
            let start = Instant::now();
            let op = lab.operator(mu, &options)?;
            let e = lab.eigen(mu, &options)?;
            let secs = start.elapsed().as_secs_f64();
            let err = (e.lambda - oracle.lambda).abs() / oracle.lambda;
            errors.push(err);
            table.push(row(&[
                mu,
                options.n_base as f64,
                op.len() as f64,
                e.lambda,
                oracle.lambda,
                err,
                e.iterations as f64,
                e.residual,
                secs,
            ]));
            if options.n_base == cfg.grid.n_base {
                out.push(Criterion::at_most(group, format!("eig rel error {}", tag(mu)), err, cfg.eig.rel_tol));
                if mu == 0.0 {
                    out.push(Criterion::at_most(group, "eig runtime seconds mu0", secs, cfg.eig.time_budget_s));
                }
                let grid = op.grid();
                let mut along: Vec<(f64, f64, f64)> = (0..op.len())
                    .map(|i| grid.point(i))
                    .zip(&e.phi.values)
                    .filter(|(p, _)| p[1] == 0.0 && p[2] == 0.0 && p[0] > 0.0)
                    .map(|(p, v)| (p[0], *v, oracle.profile(norm(&p))))
                    .collect();
                along.sort_by(|a, b| a.0.total_cmp(&b.0));
                lab.emit(|a| {
                    a.csv(&format!("eig_profile_{}", tag(mu)), &["r", "phi", "oracle"], along.iter().map(|t| row(&[t.0, t.1, t.2])))?;
                    a.dump(&format!("eig_phi_{}", tag(mu)), &e.phi.values)?;
                    Ok(())
                })?;
                lab.plot(&format!("eig_profile_{}", tag(mu)), || {
                    Plot::new(format!("principal eigenfunction, {}", tag(mu)), "r", "phi")
                        .with("grid", along.iter().map(|t| (t.0, t.1)).collect(), Style::Points)
                        .with("oracle", along.iter().map(|t| (t.0, t.2)).collect(), Style::Line)
                })?;
            }
        }
        out.push(Criterion::at_least(group, format!("eig error reduction {}", tag(mu)), errors[0] / errors[1], 2.0));
    }
    lab.emit(|a| {
        let header = ["mu", "n_base", "nodes", "lambda", "oracle", "rel_error", "iterations", "residual", "seconds"];
        a.csv("eig", &header, table).map(|_| ())
    })?;

    let mu = envelope_mu(cfg);
    let spec = lab.spec(mu)?;
    let env = Envelope::new(EnvelopeKind::Eigenfunction, &spec);
    let mut reports = Vec::new();
    for options in [lab.coarse(), lab.fine()] {
        let op = lab.operator(mu, &options)?;
        let e = lab.eigen(mu, &options)?;
        reports.push(verify_point_envelope(&op, &e.phi, &env, &plan(lab, cfg.eig.samples))?);
    }
    write_ratio(lab, &format!("eig_envelope_{}", tag(mu)), &reports[1])?;
    lab.plot(&format!("eig_envelope_{}", tag(mu)), || {
        let mut p = Plot::new("eigenfunction envelope ratio", "d(x)", "phi / (d d_K^-alpha-)").log_log();
        for (label, r) in [("coarse", &reports[0]), ("fine", &reports[1])] {
            let spec = &spec;
            p = p.with(label, r.records.iter().map(|c| (spec.signed_d(&c.x), c.ratio)).collect(), Style::Points);
        }
        p
    })?;
    out.extend(suite_checks(3, &format!("eigenfunction {}", tag(mu)), &reports[0], &reports[1], cfg.eig.samples, cfg.green.stability));
    Ok(out)
}

/// Subcritical μ for the eigenfunction envelope: 0.16 when configured.
fn envelope_mu(cfg: &crate::config::ExperimentConfig) -> f64 {
    if cfg.mu.contains(&0.16) {
        0.16
    } else {
        cfg.mu[0]
    }
}

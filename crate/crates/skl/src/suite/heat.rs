use rayon::prelude::*;
use skl_core::discretization::{heat_evolve_with, FieldKind, HeatOptions, HeatRun, NodeClass, ScalarField};
use skl_core::kernels::{cell_distance, draw_probes, green_field};

use super::tag;
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion, Plot, Style};

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let h = &cfg.heat;
    let options = lab.options(h.n_base);
    let op = lab.operator(h.mu, &options)?;
    let eig = lab.eigen(h.mu, &options)?;
    let grid = op.grid().clone();
    let spec = op.spec().clone();
    let steps = (h.t_final / 0.1).round().max(1.0) as usize;
    let t_grid: Vec<f64> = (1..=steps).map(|k| h.t_final * k as f64 / steps as f64).collect();
    let opts = HeatOptions { dt_max: h.dt_max, ..HeatOptions::default() };
    let runs: Vec<(ScalarField, HeatRun)> = h
        .sources
        .par_iter()
        .map(|y| -> RunResult<_> {
            let g = green_field(&op, y)?;
            let j = grid.nearest(y).unwrap_or(0);
            let mut u0 = vec![0.0; op.len()];
            u0[j] = 1.0 / op.mass()[j];
            let run = heat_evolve_with(&op, &ScalarField::new(FieldKind::Heat, u0), &t_grid, opts)?;
            Ok((g, run))
        })
        .collect::<RunResult<_>>()?;
    let min_k = 2.0 * grid.eps_k();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut worst_decay: f64 = 0.0;
    for (s, (g, run)) in runs.iter().enumerate() {
        let j = grid.nearest(&h.sources[s]).unwrap_or(0);
        let probes = draw_probes(&grid, h.probes, cfg.seed.wrapping_add(700 + s as u64), |i| {
            grid.class(i) == NodeClass::Interior && spec.d_k(&grid.point(i)) >= min_k && cell_distance(&grid, i, j) >= 4
        });
        let integral = run.time_integral();
        for i in probes {
            let (x, y) = (grid.point(i), grid.point(j));
            let err = (integral.values[i] - g.values[i]).abs() / g.values[i];
            worst = worst.max(err);
            rows.push(row(&[x[0], x[1], x[2], y[0], y[1], y[2], integral.values[i], g.values[i], err]));
        }
        worst_decay = worst_decay.max((run.decay_rate - eig.lambda).abs() / eig.lambda);
    }
    let pairs = rows.len();
    lab.emit(|a| {
        let header = ["x1", "x2", "x3", "y1", "y2", "y3", "heat_integral", "green", "rel_error"];
        a.csv(&format!("heat_green_{}", tag(h.mu)), &header, rows)?;
        let decay = runs.iter().enumerate().flat_map(|(s, (_, r))| r.norms.iter().map(move |(t, n)| row(&[s as f64, *t, *n])));
        a.csv(&format!("heat_norms_{}", tag(h.mu)), &["source", "t", "l2_norm"], decay).map(|_| ())
    })?;
    lab.plot(&format!("heat_decay_{}", tag(h.mu)), || {
        let mut p = Plot::new(format!("heat decay, lambda = {:.4}", eig.lambda), "t", "||u(t)||").log_y();
        for (s, (_, r)) in runs.iter().enumerate() {
            p = p.with(format!("source {s}, rate {:.4}", r.decay_rate), r.norms.clone(), Style::Line);
        }
        p
    })?;
    Ok(vec![
        Criterion::at_most(9, format!("heat time integral vs Green max rel error {}", tag(h.mu)), worst, h.green_tol),
        Criterion::at_least(9, format!("heat probe pairs {}", tag(h.mu)), pairs as f64, 20.0),
        Criterion::at_most(9, format!("heat decay rate vs lambda rel error {}", tag(h.mu)), worst_decay, h.decay_tol),
    ])
}

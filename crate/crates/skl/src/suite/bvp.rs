use skl_core::bvp::{
    apriori_check, boundary_trace, calibrate_nu_constant, canonical_exhaustion, default_dictionary, harmonic_functional,
    singular_rhs_solve, solve_bvp, solve_bvp_coupled, test_dictionary, weak_residual_with, BvpOptions, MeasureData,
    TraceReport, TraceTest,
};
use skl_core::discretization::{FieldKind, LinearOperator, ScalarField};
use skl_core::kernels::{green_field, unit_solution};

use super::tag;
use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion};

const ORIGIN: [f64; 3] = [0.0; 3];

fn datasets(lab: &Lab) -> Vec<(&'static str, MeasureData)> {
    let b = &lab.cfg.bvp;
    vec![
        ("interior atom", MeasureData::interior_atom(b.atom, 1.0)),
        ("boundary atom", MeasureData::boundary_atom(b.boundary_pole, 1.0)),
        ("K atom", MeasureData::boundary_atom(ORIGIN, 1.0)),
        (
            "mixed",
            MeasureData::interior_atom(b.atom, 1.0)
                .with_interior([0.3, 0.3, 0.0], -0.5)
                .with_boundary(b.boundary_pole, 2.0)
                .with_boundary(ORIGIN, -0.3)
                .with_surface(|p| p[2]),
        ),
    ]
}

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let b = &cfg.bvp;
    let mu = b.mu;
    let op = lab.operator(mu, &lab.fine())?;
    let eig = lab.eigen(mu, &lab.fine())?;
    let options = BvpOptions { x0: cfg.martin.x0, ..BvpOptions::default() };
    let tests = test_dictionary(&op, &eig, b.tests, cfg.seed, false)?;
    let positive = test_dictionary(&op, &eig, b.tests, cfg.seed.wrapping_add(1), true)?;
    let c_nu = calibrate_nu_constant(&op, &eig, &[b.boundary_pole, ORIGIN], &options)?;
    let mut out = Vec::new();
    let mut table = Vec::new();
    for (label, data) in datasets(lab) {
        let sol = solve_bvp(&op, &data, &options)?;
        let weak = weak_residual_with(&op, &eig, &sol.u, &sol.martin, &data, &tests)?;
        let group = if label == "mixed" { 8 } else { 0 };
        out.push(Criterion::at_most(group, format!("bvp weak residual {label} {}", tag(mu)), weak.max_relative, b.residual_tol));
        let a = apriori_check(&op, &eig, &sol, &data, c_nu, &positive, &options)?;
        let limit = (1.0 + b.slack) * a.bound;
        let kato = a.kato.iter().all(|k| k.pass);
        out.push(Criterion::flag(8, format!("bvp a priori bound {label} {}", tag(mu)), a.l1_norm, limit, a.l1_norm <= limit && kato));
        table.push(row(&[weak.max_relative, weak.mean_relative, a.l1_norm, a.bound, c_nu, if kato { 1.0 } else { 0.0 }]));
        if label == "mixed" {
            let coupled = solve_bvp_coupled(&op, &data, &options)?;
            let scale = sol.u.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let gap = sol.u.values.iter().zip(&coupled.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale;
            out.push(Criterion::at_most(0, format!("bvp uniqueness witness {}", tag(mu)), gap, 0.05));
        } else {
            let top = sol.u.values.iter().copied().fold(0.0, f64::max);
            let low = sol.green.values.iter().copied().fold(f64::INFINITY, f64::min);
            out.push(Criterion::at_least(0, format!("bvp positivity {label} {}", tag(mu)), low, -1e-10 * top));
        }
    }
    lab.emit(|a| {
        let names: Vec<_> = datasets(lab).into_iter().map(|d| d.0).collect();
        let rows = names.iter().zip(table).map(|(n, mut r)| {
            r.insert(0, n.to_string());
            r
        });
        let header = ["data", "weak_max", "weak_mean", "l1_phi", "bound", "c_nu", "kato_pass"];
        a.csv(&format!("bvp_{}", tag(mu)), &header, rows).map(|_| ())
    })?;
    out.extend(traces(lab, &op, &options)?);
    out.extend(singular(lab, &op)?);
    Ok(out)
}

fn sup(op: &LinearOperator, t: &TraceTest) -> f64 {
    let grid = op.grid();
    (0..op.len()).map(|i| t.eval(&grid.point(i)).abs()).fold(0.0, f64::max)
}

fn traces(lab: &Lab, op: &LinearOperator, options: &BvpOptions) -> RunResult<Vec<Criterion>> {
    let b = &lab.cfg.bvp;
    let grid = op.grid();
    let shells = canonical_exhaustion(op, &options.x0, b.max_shells, b.min_shells)?;
    let at_pole = default_dictionary(b.boundary_pole);
    let at_k = default_dictionary(ORIGIN);
    let green = green_field(op, &b.atom)?;
    let martin = skl_core::kernels::direct_martin(op, &options.x0, &b.boundary_pole)?;
    let k_atom = skl_core::kernels::direct_martin(op, &options.x0, &ORIGIN)?;
    let v1 = unit_solution(op)?;
    let harmonic: Vec<f64> = at_pole.iter().map(|t| harmonic_functional(op, t, &options.x0)).collect::<Result<_, _>>()?;
    let cases: [(&str, &ScalarField, &[TraceTest], Vec<f64>); 4] = [
        ("green", &green, &at_pole, vec![0.0; at_pole.len()]),
        ("martin boundary", &martin, &at_pole, at_pole.iter().map(|t| t.eval(&b.boundary_pole)).collect()),
        ("martin K", &k_atom, &at_k, at_k.iter().map(|t| t.eval(&ORIGIN)).collect()),
        ("v1", &v1, &at_pole, harmonic),
    ];
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for (label, u, dict, expected) in cases {
        let rep: TraceReport = boundary_trace(op, u, &shells, dict)?;
        let u0 = grid.interpolate(&u.values, &options.x0).unwrap_or(f64::NAN).abs();
        let phi_sup = dict.iter().map(|t| sup(op, t)).fold(0.0, f64::max);
        let err = rep.max_error(&expected, phi_sup * u0);
        out.push(Criterion::at_most(8, format!("bvp trace recovery {label} {}", tag(b.mu)), err, b.trace_tol));
        for (k, name) in rep.names.iter().enumerate() {
            let mut r = vec![label.to_string(), name.clone(), rep.limits[k].to_string(), expected[k].to_string()];
            r.extend(rep.values[k].iter().map(|v| v.to_string()));
            rows.push(r);
        }
    }
    let mut header = vec!["field".to_string(), "test".into(), "limit".into(), "expected".into()];
    header.extend(shells.iter().map(|s| format!("delta={}", s.delta)));
    lab.emit(|a| {
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        a.csv(&format!("bvp_trace_{}", tag(b.mu)), &h, rows).map(|_| ())
    })?;
    Ok(out)
}

fn singular(lab: &Lab, op: &LinearOperator) -> RunResult<Vec<Criterion>> {
    let b = &lab.cfg.bvp;
    let f = ScalarField::new(FieldKind::Load, vec![1.0; op.len()]);
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for &e in &b.singular_exponents {
        let s = singular_rhs_solve(op, e, &f)?;
        out.push(Criterion::flag(0, format!("bvp singular rhs b={e} certificate {}", tag(b.mu)), s.constant, s.gamma, s.constant.is_finite()));
        rows.push(row(&[e, s.gamma, s.constant, s.f_sup]));
    }
    lab.emit(|a| a.csv(&format!("bvp_singular_{}", tag(b.mu)), &["b", "gamma", "constant", "f_sup"], rows).map(|_| ()))?;
    Ok(out)
}

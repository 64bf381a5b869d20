use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use skl_core::closed_forms::{Barrier, BarrierFamily, SweepReport};

use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{row, Criterion};

pub fn run(lab: &Lab) -> RunResult<Vec<Criterion>> {
    let cfg = &lab.cfg;
    let b = &cfg.barriers;
    let reports: Vec<(f64, SweepReport)> = BarrierFamily::ALL
        .par_iter()
        .enumerate()
        .map(|(k, &family)| -> RunResult<_> {
            let mu = if family.is_critical() { lab.spec(0.25)?.hardy().powi(2) } else { b.subcritical_mu };
            let barrier = Barrier::new(&lab.spec(mu)?, family, b.eps)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(900 + k as u64));
            Ok((mu, barrier.sweep(b.samples, &mut rng)?))
        })
        .collect::<RunResult<_>>()?;
    let out = reports
        .iter()
        .map(|(mu, r)| Criterion::at_most(10, format!("barrier {} violations mu{mu}", r.family.name()), r.violations as f64, 0.0))
        .chain(reports.iter().map(|(mu, r)| {
            Criterion::at_least(10, format!("barrier {} samples mu{mu}", r.family.name()), r.samples as f64, b.samples as f64)
        }))
        .collect();
    lab.emit(|a| {
        let rows = reports.iter().map(|(mu, r)| {
            let mut v = vec![r.family.name().to_string()];
            v.extend(row(&[*mu, r.beta, r.samples as f64, r.violations as f64, r.min_signed_op, r.min_value]));
            v
        });
        a.csv("barriers", &["family", "mu", "beta", "samples", "violations", "min_signed_op", "min_value"], rows).map(|_| ())
    })?;
    Ok(out)
}

//! Implicit time stepping for `∂_t u = L_μ u` with Dirichlet data.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

use super::operator::{FieldKind, LinearOperator, ScalarField};
use super::sparse::{dot, pcg, Csr, Factor, Preconditioner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatOptions {
    pub dt_max: f64,
    /// Backward Euler substeps that replace the first Crank-Nicolson step.
    pub startup_steps: usize,
    pub tol: f64,
}

impl Default for HeatOptions {
    fn default() -> Self {
        HeatOptions { dt_max: 0.01, startup_steps: 4, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
    /// `∫₀^T u dt` with the quadrature the scheme implies.
    pub integral: ScalarField,
    /// `u(T)/λ(T)`, the exponential tail beyond the last time.
    pub tail: ScalarField,
    /// Rayleigh quotient of `u(T)`.
    pub tail_lambda: f64,
    /// `-d ln‖u‖/dt` fitted over `[T/10, T]`.
    pub decay_rate: f64,
    /// `(t, ‖u(t)‖_{L²})` at every step.
    pub norms: Vec<(f64, f64)>,
    pub steps: usize,
}

impl HeatRun {
    /// `∫₀^∞ u dt` with the tail added.
    pub fn time_integral(&self) -> ScalarField {
        self.integral.combine(1.0, &self.tail, 1.0)
    }
}

pub fn heat_evolve(op: &LinearOperator, u0: &ScalarField, t_grid: &[f64]) -> Result<HeatRun> {
    heat_evolve_with(op, u0, t_grid, HeatOptions::default())
}

struct Stepper {
    dt: f64,
    theta_one: bool,
    matrix: Csr,
    factor: Factor,
}

impl Stepper {
    fn new(op: &LinearOperator, dt: f64, backward: bool) -> Self {
        let scale = if backward { dt } else { dt / 2.0 };
        let mut matrix = op.stiffness().clone();
        matrix.val.iter_mut().for_each(|v| *v *= scale);
        let matrix = matrix.with_diagonal_added(op.weighted_mass(), 1.0);
        let factor = Factor::new(&matrix, Preconditioner::Ic0);
        Stepper { dt, theta_one: backward, matrix, factor }
    }
}

pub fn heat_evolve_with(op: &LinearOperator, u0: &ScalarField, t_grid: &[f64], opts: HeatOptions) -> Result<HeatRun> {
    let n = op.len();
    if u0.len() != n {
        bail!(Parameter, "initial field has {} entries, operator has {n}", u0.len());
    }
    if !u0.is_finite() {
        bail!(Parameter, "initial field is not finite");
    }
    if t_grid.is_empty() || !(t_grid[0] > 0.0) {
        bail!(Precondition, "time grid must start at a positive time");
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        bail!(Precondition, "time grid must be strictly increasing");
    }
    if !(opts.dt_max > 0.0) {
        bail!(Parameter, "dt_max must be positive");
    }
    let w = op.ground();
    let mw = op.weighted_mass();
    let s = op.stiffness();
    let mut v: Vec<f64> = u0.values.iter().zip(w).map(|(u, g)| u / g).collect();
    let mut integral = vec![0.0; n];
    let mut snapshots = Vec::with_capacity(t_grid.len());
    let mut norms = Vec::new();
    let m_norm = |v: &[f64]| libm::sqrt(v.iter().zip(mw).map(|(a, m)| a * a * m).sum::<f64>());
    norms.push((0.0, m_norm(&v)));
    let mut stepper: Option<Stepper> = None;
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut rhs = vec![0.0; n];
    let mut sv = vec![0.0; n];
    let mut next = v.clone();
    for &target in t_grid {
        let span = target - t;
        let count = libm::ceil(span / opts.dt_max).max(1.0) as usize;
        let dt = span / count as f64;
        // The first step is replaced by backward Euler substeps that damp stiff modes.
        let mut plan: Vec<(f64, bool)> = Vec::with_capacity(count + opts.startup_steps);
        if steps == 0 && opts.startup_steps > 0 {
            let sub = dt / opts.startup_steps as f64;
            plan.extend(core::iter::repeat((sub, true)).take(opts.startup_steps));
        } else {
            plan.push((dt, false));
        }
        plan.extend(core::iter::repeat((dt, false)).take(count - 1));
        let mut tk = t;
        for (k, &(dt, backward)) in plan.iter().enumerate() {
            let rebuild = match &stepper {
                Some(st) => st.theta_one != backward || (st.dt - dt).abs() > 1e-14 * dt,
                None => true,
            };
            if rebuild {
                stepper = Some(Stepper::new(op, dt, backward));
            }
            let st = stepper.as_ref().unwrap();
            if backward {
                for i in 0..n {
                    rhs[i] = mw[i] * v[i];
                }
            } else {
                s.mul_into(&v, &mut sv);
                for i in 0..n {
                    rhs[i] = mw[i] * v[i] - dt / 2.0 * sv[i];
                }
            }
            pcg(&st.matrix, &st.factor, &rhs, &mut next, opts.tol, super::MAX_CG_ITER)?;
            for i in 0..n {
                integral[i] += if backward { dt * next[i] } else { dt * (v[i] + next[i]) / 2.0 };
            }
            core::mem::swap(&mut v, &mut next);
            steps += 1;
            tk = if k + 1 == plan.len() { target } else { tk + dt };
            norms.push((tk, m_norm(&v)));
        }
        t = target;
        let u: Vec<f64> = v.iter().zip(w).map(|(a, g)| a * g).collect();
        snapshots.push(ScalarField::new(FieldKind::Heat, u).with_note(alloc::format!("t = {target}")));
    }
    let sv_t = s.mul(&v);
    let den: f64 = v.iter().zip(mw).map(|(a, m)| a * a * m).sum();
    let tail_lambda = if den > 0.0 { dot(&v, &sv_t) / den } else { f64::INFINITY };
    let tail: Vec<f64> = if tail_lambda.is_finite() && tail_lambda > 0.0 {
        v.iter().zip(w).map(|(a, g)| a * g / tail_lambda).collect()
    } else {
        vec![0.0; n]
    };
    let decay_rate = fit_decay(&norms, t);
    let integral: Vec<f64> = integral.iter().zip(w).map(|(a, g)| a * g).collect();
    Ok(HeatRun {
        times: t_grid.to_vec(),
        snapshots,
        integral: ScalarField::new(FieldKind::Heat, integral),
        tail: ScalarField::new(FieldKind::Heat, tail),
        tail_lambda,
        decay_rate,
        norms,
        steps,
    })
}

/// Least-squares slope of `ln‖u‖` on `[T/10, T]`, negated.
fn fit_decay(norms: &[(f64, f64)], t_end: f64) -> f64 {
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .filter(|(t, m)| *t >= t_end / 10.0 && *m > 0.0)
        .map(|(t, m)| (*t, libm::log(*m)))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let num: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    -num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::eigen::principal_eigenpair;
    use crate::discretization::grid::build_grid;
    use crate::discretization::operator::BoundaryMode;
    use crate::geometry::DomainSpec;
    use alloc::sync::Arc;

    fn setup(mu: f64) -> LinearOperator {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = Arc::new(build_grid(&spec, 17, 0.8, 0.05).unwrap());
        LinearOperator::assemble(&spec, grid, BoundaryMode::Zero).unwrap()
    }

    #[test]
    fn eigenfunction_decays_exponentially() {
        let op = setup(0.16);
        let e = principal_eigenpair(&op, 1e-10).unwrap();
        let run = heat_evolve(&op, &e.phi, &[0.25, 0.5, 1.0]).unwrap();
        for (t, snap) in run.times.iter().zip(&run.snapshots) {
            let expect = libm::exp(-e.lambda * t);
            let got = op.inner(&snap.values, &e.phi.values);
            assert!((got / expect - 1.0).abs() < 0.01 * t.max(1.0), "t = {t}: {got} vs {expect}");
        }
        assert!((run.decay_rate / e.lambda - 1.0).abs() < 0.01);
        assert!((run.tail_lambda / e.lambda - 1.0).abs() < 1e-3);
    }

    #[test]
    fn time_grid_must_start_after_zero() {
        let op = setup(0.0);
        let u0 = ScalarField::new(FieldKind::Heat, vec![1.0; op.len()]);
        assert!(matches!(heat_evolve(&op, &u0, &[0.0, 1.0]), Err(crate::Error::Precondition(_))));
        assert!(matches!(heat_evolve(&op, &u0, &[0.5, 0.25]), Err(crate::Error::Precondition(_))));
    }

    #[test]
    fn integral_telescopes() {
        let op = setup(0.0);
        let u0 = ScalarField::new(FieldKind::Heat, vec![1.0; op.len()]);
        let run = heat_evolve(&op, &u0, &[0.1, 0.3]).unwrap();
        let w = op.ground();
        let iv: Vec<f64> = run.integral.values.iter().zip(w).map(|(a, g)| a / g).collect();
        let si = op.stiffness().mul(&iv);
        let last = &run.snapshots[1].values;
        let mw = op.weighted_mass();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..op.len() {
            let rhs = mw[i] * (u0.values[i] - last[i]) / w[i];
            err = err.max((si[i] - rhs).abs());
            scale = scale.max(rhs.abs());
        }
        assert!(err < 1e-6 * scale, "{err} vs {scale}");
    }
}

//! Local sub- and supersolutions built from powers of `d_K`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{bail, Result};
use crate::geometry::{DomainSpec, SingularSet};
use crate::sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BarrierFamily {
    /// `d_K^{-α₋} - d_K^{-α₋+ε}`, supersolution.
    EtaAlphaMinus,
    /// `d_K^{-α₋} + d_K^{-α₋+ε}`, subsolution.
    ZetaAlphaMinus,
    /// `d_K^{-α₊} + d_K^{-α₊+ε}`, supersolution.
    EtaAlphaPlus,
    /// `d_K^{-α₊} - d_K^{-α₊+ε}`, subsolution.
    ZetaAlphaPlus,
    /// `(-ln d_K) d_K^{-H} - d_K^{-H+ε}` at `μ = H²`, supersolution.
    ZetaPlus,
    /// `(-ln d_K) d_K^{-H} + d_K^{-H+ε}` at `μ = H²`, subsolution.
    ZetaMinus,
}

impl BarrierFamily {
    pub const ALL: [BarrierFamily; 6] = [
        BarrierFamily::EtaAlphaMinus,
        BarrierFamily::ZetaAlphaMinus,
        BarrierFamily::EtaAlphaPlus,
        BarrierFamily::ZetaAlphaPlus,
        BarrierFamily::ZetaPlus,
        BarrierFamily::ZetaMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierFamily::EtaAlphaMinus => "eta-alpha-minus",
            BarrierFamily::ZetaAlphaMinus => "zeta-alpha-minus",
            BarrierFamily::EtaAlphaPlus => "eta-alpha-plus",
            BarrierFamily::ZetaAlphaPlus => "zeta-alpha-plus",
            BarrierFamily::ZetaPlus => "zeta-plus",
            BarrierFamily::ZetaMinus => "zeta-minus",
        }
    }

    pub fn is_critical(self) -> bool {
        matches!(self, BarrierFamily::ZetaPlus | BarrierFamily::ZetaMinus)
    }

    /// Required signs: whether the barrier itself is nonnegative, and the sign
    /// of `-L_μ` applied to it (`+1` for `≥ 0`, `-1` for `≤ 0`).
    pub fn signs(self) -> SignCheck {
        match self {
            BarrierFamily::EtaAlphaMinus => SignCheck { value_nonneg: true, op_sign: 1.0 },
            BarrierFamily::ZetaAlphaMinus => SignCheck { value_nonneg: false, op_sign: -1.0 },
            BarrierFamily::EtaAlphaPlus => SignCheck { value_nonneg: false, op_sign: 1.0 },
            BarrierFamily::ZetaAlphaPlus => SignCheck { value_nonneg: true, op_sign: -1.0 },
            BarrierFamily::ZetaPlus => SignCheck { value_nonneg: true, op_sign: 1.0 },
            BarrierFamily::ZetaMinus => SignCheck { value_nonneg: false, op_sign: -1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignCheck {
    pub value_nonneg: bool,
    pub op_sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    AlphaMinus,
    AlphaPlus,
    Hardy,
}

/// `coef · (-ln d)^{log} · d^{base + shift}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierTerm {
    pub coef: f64,
    base: Base,
    pub shift: f64,
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub family: BarrierFamily,
    pub eps: f64,
    /// Admissible collar radius.
    pub beta: f64,
    terms: [BarrierTerm; 2],
    hardy: f64,
    disc: f64,
    alpha_minus: f64,
    alpha_plus: f64,
    g_sup: f64,
    spec: DomainSpec,
}

/// Tally of a sampled sign sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub family: BarrierFamily,
    pub beta: f64,
    pub samples: usize,
    pub violations: usize,
    /// `min op_sign · (-L_μ b)` over the samples.
    pub min_signed_op: f64,
    pub min_value: f64,
}

impl Barrier {
    pub fn new(spec: &DomainSpec, family: BarrierFamily, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            bail!(Parameter, "ε = {eps} must lie in (0, 1)");
        }
        let critical = spec.is_critical();
        if family.is_critical() != critical {
            bail!(
                Parameter,
                "barrier {} needs {} regime",
                family.name(),
                if family.is_critical() { "the critical μ = H²" } else { "a subcritical μ < H²" }
            );
        }
        let disc = spec.disc();
        if matches!(family, BarrierFamily::EtaAlphaPlus | BarrierFamily::ZetaAlphaPlus) && eps >= (2.0 * disc).min(1.0) {
            bail!(Parameter, "ε = {eps} must be below min(1, 2 sqrt(H² - μ)) = {}", (2.0 * disc).min(1.0));
        }
        let term = |coef, base, shift, log| BarrierTerm { coef, base, shift, log };
        let terms = match family {
            BarrierFamily::EtaAlphaMinus => [term(1.0, Base::AlphaMinus, 0.0, false), term(-1.0, Base::AlphaMinus, eps, false)],
            BarrierFamily::ZetaAlphaMinus => [term(1.0, Base::AlphaMinus, 0.0, false), term(1.0, Base::AlphaMinus, eps, false)],
            BarrierFamily::EtaAlphaPlus => [term(1.0, Base::AlphaPlus, 0.0, false), term(1.0, Base::AlphaPlus, eps, false)],
            BarrierFamily::ZetaAlphaPlus => [term(1.0, Base::AlphaPlus, 0.0, false), term(-1.0, Base::AlphaPlus, eps, false)],
            BarrierFamily::ZetaPlus => [term(1.0, Base::Hardy, 0.0, true), term(-1.0, Base::Hardy, eps, false)],
            BarrierFamily::ZetaMinus => [term(1.0, Base::Hardy, 0.0, true), term(1.0, Base::Hardy, eps, false)],
        };
        let mut b = Barrier {
            family,
            eps,
            beta: 0.0,
            terms,
            hardy: spec.hardy(),
            disc,
            alpha_minus: spec.alpha_minus(),
            alpha_plus: spec.alpha_plus(),
            g_sup: spec.g_sup(),
            spec: spec.clone(),
        };
        b.beta = b.admissible_beta()?;
        Ok(b)
    }

    pub fn terms(&self) -> &[BarrierTerm; 2] {
        &self.terms
    }

    fn exponent(&self, t: &BarrierTerm) -> f64 {
        let base = match t.base {
            Base::AlphaMinus => -self.alpha_minus,
            Base::AlphaPlus => -self.alpha_plus,
            Base::Hardy => -self.hardy,
        };
        base + t.shift
    }

    /// `(b + H)² - (H² - μ)`, arranged so that it vanishes exactly at the
    /// indicial roots.
    fn indicial(&self, t: &BarrierTerm) -> f64 {
        let s = self.disc;
        let dl = t.shift;
        match t.base {
            Base::AlphaMinus => dl * (2.0 * s + dl),
            Base::AlphaPlus => dl * (dl - 2.0 * s),
            Base::Hardy => dl * dl - s * s,
        }
    }

    /// Barrier value and the split `-L_μ b = main + g · gc` at distance `d`.
    fn parts(&self, d: f64) -> (f64, f64, f64) {
        let lg = -libm::log(d);
        let mut value = 0.0;
        let mut main = 0.0;
        let mut gc = 0.0;
        for t in &self.terms {
            let b = self.exponent(t);
            let p = libm::pow(d, b);
            if t.log {
                value += t.coef * lg * p;
                // -L_{H²}((-ln d) d^{-H}) = (1 + H(-ln d)) d^{-H-1} g
                gc += t.coef * (1.0 + self.hardy * lg) * p / d;
            } else {
                value += t.coef * p;
                main += -t.coef * self.indicial(t) * p / (d * d);
                gc += -t.coef * b * p / d;
            }
        }
        (value, main, gc)
    }

    fn admissible_at(&self, d: f64) -> bool {
        let (value, main, gc) = self.parts(d);
        let signs = self.family.signs();
        let value_ok = !signs.value_nonneg || value >= 0.0;
        let op_ok = signs.op_sign * main - self.g_sup * gc.abs() >= 0.0;
        value_ok && op_ok
    }

    /// Largest `β ≤ 3β₀` such that the sufficient inequality holds on `(0, β]`.
    fn admissible_beta(&self) -> Result<f64> {
        let cap = 3.0 * self.spec.beta0();
        let lo = 1e-12_f64;
        let steps = 2000;
        let ratio = libm::pow(cap / lo, 1.0 / steps as f64);
        let mut prev = lo;
        if !self.admissible_at(lo) {
            bail!(Parameter, "barrier {} has no admissible collar for ε = {}", self.family.name(), self.eps);
        }
        for i in 1..=steps {
            let d = if i == steps { cap } else { lo * libm::pow(ratio, i as f64) };
            if !self.admissible_at(d) {
                let beta = super::super::spectral_oracle::special::bisect(
                    |t| if self.admissible_at(t) { 1.0 } else { -1.0 },
                    prev,
                    d,
                    1e-14 * d,
                );
                return Ok(beta * (1.0 - 1e-9));
            }
            prev = d;
        }
        Ok(cap)
    }

    /// `(b(x), -L_μ b(x))` in closed form.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (_, dk) = self.spec.distances(x)?;
        if dk == 0.0 {
            bail!(SingularPoint, "barrier is singular on K");
        }
        if dk >= self.beta {
            bail!(Range, "d_K = {dk} lies outside K_β with β = {}", self.beta);
        }
        let g = self.spec.laplacian_dk(x)?.g;
        let (value, main, gc) = self.parts(dk);
        Ok((value, main + g * gc))
    }

    /// Evaluates the barrier at `n` random points of `K_β \ K` and counts sign violations.
    pub fn sweep<R: Rng>(&self, n: usize, rng: &mut R) -> Result<SweepReport> {
        let signs = self.family.signs();
        let mut violations = 0;
        let mut min_signed_op = f64::INFINITY;
        let mut min_value = f64::INFINITY;
        for _ in 0..n {
            let x = sample_tube(&self.spec, self.beta, rng);
            let (value, op) = self.eval(&x)?;
            let signed = signs.op_sign * op;
            let ok = signed >= 0.0 && (!signs.value_nonneg || value >= 0.0);
            if !ok {
                violations += 1;
            }
            min_signed_op = min_signed_op.min(signed);
            min_value = min_value.min(value);
        }
        Ok(SweepReport { family: self.family, beta: self.beta, samples: n, violations, min_signed_op, min_value })
    }
}

/// Random point of `K_β \ K` with `d_K` log-uniform in `[β·1e-6, β)`.
fn sample_tube<R: Rng>(spec: &DomainSpec, beta: f64, rng: &mut R) -> Vec<f64> {
    let n = spec.dim();
    let dk = beta * libm::pow(1e-6, rng.gen::<f64>()) * (1.0 - 1e-12);
    match spec.singular() {
        SingularSet::Origin => sample::sphere(rng, n).into_iter().map(|c| c * dk).collect(),
        SingularSet::Sphere { dim, radius } => {
            let omega = sample::sphere(rng, dim + 1);
            let v = sample::sphere(rng, n - dim);
            let rho = radius + dk * v[0];
            let mut x: Vec<f64> = omega.iter().map(|c| c * rho).collect();
            x.extend(v[1..].iter().map(|c| c * dk));
            x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainKind;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ground_state_is_exact() {
        let s = DomainSpec::unit_ball(0.16).unwrap();
        let b = Barrier::new(&s, BarrierFamily::EtaAlphaMinus, 0.5).unwrap();
        let t = BarrierTerm { coef: 1.0, base: Base::AlphaMinus, shift: 0.0, log: false };
        assert_eq!(b.indicial(&t), 0.0);
    }

    #[test]
    fn indicated_values() {
        let s = DomainSpec::unit_ball(0.16).unwrap();
        let b = Barrier::new(&s, BarrierFamily::EtaAlphaMinus, 0.5).unwrap();
        let (_, op) = b.eval(&[0.01, 0.0, 0.0]).unwrap();
        let expected = 0.5 * (2.0 * 0.5 - 2.0 * 0.2 + 0.5) * libm::pow(0.01, -(0.2 - 0.5 + 2.0));
        assert_relative_eq!(op, expected, max_relative = 1e-12);
        let c = DomainSpec::unit_ball(0.25).unwrap();
        let z = Barrier::new(&c, BarrierFamily::ZetaPlus, 0.5).unwrap();
        let (_, op) = z.eval(&[0.0, 0.01, 0.0]).unwrap();
        assert_relative_eq!(op, 0.25 * libm::pow(0.01, -(2.0 + 0.5 - 0.5)), max_relative = 1e-12);
    }

    #[test]
    fn regime_and_eps_checks() {
        let s = DomainSpec::unit_ball(0.16).unwrap();
        assert!(Barrier::new(&s, BarrierFamily::ZetaPlus, 0.5).is_err());
        assert!(Barrier::new(&s, BarrierFamily::EtaAlphaPlus, 0.5).is_ok());
        assert!(Barrier::new(&s, BarrierFamily::EtaAlphaPlus, 0.7).is_err());
        let near = DomainSpec::unit_ball(0.24).unwrap();
        assert!(matches!(Barrier::new(&near, BarrierFamily::EtaAlphaPlus, 0.5), Err(crate::Error::Parameter(_))));
        assert!(Barrier::new(&s, BarrierFamily::EtaAlphaMinus, 1.0).is_err());
    }

    #[test]
    fn critical_collar_respects_log_sign() {
        let c = DomainSpec::unit_ball(0.25).unwrap().with_collar(0.166).unwrap();
        let z = Barrier::new(&c, BarrierFamily::ZetaPlus, 0.5).unwrap();
        // -ln d ≥ d^{1/2} fails just below d ≈ 0.4948
        assert!(z.beta < 0.4949 && z.beta > 0.49, "beta = {}", z.beta);
    }

    #[test]
    fn circle_sweep_has_no_violations() {
        let s = DomainSpec::new(4, DomainKind::Ball { radius: 2.0 }, SingularSet::Sphere { dim: 1, radius: 1.0 }, 0.1)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in [BarrierFamily::EtaAlphaMinus, BarrierFamily::ZetaAlphaMinus, BarrierFamily::EtaAlphaPlus, BarrierFamily::ZetaAlphaPlus] {
            let b = Barrier::new(&s, fam, 0.5).unwrap();
            let r = b.sweep(2000, &mut rng).unwrap();
            assert_eq!(r.violations, 0, "{fam:?}");
        }
    }
}

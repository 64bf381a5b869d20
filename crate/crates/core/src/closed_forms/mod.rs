//! Explicit right-hand sides of the two-sided estimates, local barriers and
//! the anisotropic integral bound.
//!
//! All envelopes use implicit constant 1. Comparison with computed kernels
//! is always by ratio spread.

mod anisotropic;
mod barrier;
pub mod quadrature;

pub use anisotropic::{anisotropic_integral, AnisotropicValue};
pub use barrier::{Barrier, BarrierFamily, BarrierTerm, SignCheck, SweepReport};

use crate::error::{bail, Result};
use crate::geometry::{dist, DomainSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvelopeKind {
    GreenSubcritical,
    GreenCritical,
    /// Product form `(|x-y|/d_K(x) + 1)^{α₋}(|x-y|/d_K(y) + 1)^{α₋}` of the
    /// Green estimate, with the log summand in the critical case.
    GreenProduct,
    MartinBoundary,
    MartinK,
    HeatShort,
    HeatLong,
    Eigenfunction,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 8] = [
        EnvelopeKind::GreenSubcritical,
        EnvelopeKind::GreenCritical,
        EnvelopeKind::GreenProduct,
        EnvelopeKind::MartinBoundary,
        EnvelopeKind::MartinK,
        EnvelopeKind::HeatShort,
        EnvelopeKind::HeatLong,
        EnvelopeKind::Eigenfunction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::GreenSubcritical => "green-subcritical",
            EnvelopeKind::GreenCritical => "green-critical",
            EnvelopeKind::GreenProduct => "green-product",
            EnvelopeKind::MartinBoundary => "martin-boundary",
            EnvelopeKind::MartinK => "martin-K",
            EnvelopeKind::HeatShort => "heat-short",
            EnvelopeKind::HeatLong => "heat-long",
            EnvelopeKind::Eigenfunction => "eigenfunction",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        EnvelopeKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl core::fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters shared by every envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub dim: usize,
    pub k: usize,
    pub mu: f64,
    pub hardy: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub lambda: Option<f64>,
    pub diameter: f64,
}

/// Argument tuples accepted by [`eval_envelope`].
#[derive(Debug, Clone, Copy)]
pub enum EnvelopeArgs<'a> {
    Pair { x: &'a [f64], y: &'a [f64] },
    Kernel { x: &'a [f64], xi: &'a [f64] },
    Heat { t: f64, x: &'a [f64], y: &'a [f64] },
    Point { x: &'a [f64] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub params: EnvelopeParams,
    /// Drop the logarithmic summand of the critical Green envelope.
    pub drop_log: bool,
    spec: DomainSpec,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, spec: &DomainSpec) -> Self {
        Envelope {
            kind,
            params: EnvelopeParams {
                dim: spec.dim(),
                k: spec.k(),
                mu: spec.mu(),
                hardy: spec.hardy(),
                alpha_minus: spec.alpha_minus(),
                alpha_plus: spec.alpha_plus(),
                lambda: None,
                diameter: spec.diameter_bound(),
            },
            drop_log: false,
            spec: spec.clone(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.params.lambda = Some(lambda);
        self
    }

    pub fn without_log(mut self) -> Self {
        self.drop_log = true;
        self
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn eval(&self, args: EnvelopeArgs<'_>) -> Result<f64> {
        eval_envelope(self, args)
    }
}

fn interior(spec: &DomainSpec, x: &[f64]) -> Result<(f64, f64)> {
    let (d, dk) = spec.distances(x)?;
    if dk == 0.0 {
        bail!(SingularPoint, "argument lies on K");
    }
    if d == 0.0 {
        bail!(Domain, "argument lies on ∂Ω");
    }
    Ok((d, dk))
}

fn pair<'a>(kind: EnvelopeKind, args: EnvelopeArgs<'a>) -> Result<(&'a [f64], &'a [f64])> {
    match args {
        EnvelopeArgs::Pair { x, y } => Ok((x, y)),
        _ => bail!(Parameter, "{kind} expects a point pair"),
    }
}

/// Evaluates the envelope with implicit constant 1.
pub fn eval_envelope(env: &Envelope, args: EnvelopeArgs<'_>) -> Result<f64> {
    let spec = &env.spec;
    let p = &env.params;
    let n = p.dim as f64;
    let am = p.alpha_minus;
    match env.kind {
        EnvelopeKind::GreenSubcritical | EnvelopeKind::GreenCritical | EnvelopeKind::GreenProduct => {
            let (x, y) = pair(env.kind, args)?;
            // Fixed operand order keeps E(x, y) = E(y, x) bit for bit.
            let (x, y) = if y.partial_cmp(x) == Some(core::cmp::Ordering::Less) { (y, x) } else { (x, y) };
            let (dx, kx) = interior(spec, x)?;
            let (dy, ky) = interior(spec, y)?;
            let s = dist(x, y);
            if s == 0.0 {
                bail!(Coincidence, "x = y");
            }
            let s2 = s * s;
            let base = libm::pow(s, 2.0 - n) * (dx * dy / s2).min(1.0);
            let critical = env.kind == EnvelopeKind::GreenCritical
                || (env.kind == EnvelopeKind::GreenProduct && spec.is_critical());
            let (exp, kx, ky) = if env.kind == EnvelopeKind::GreenCritical {
                // The critical estimate is stated with the Euclidean norms.
                (p.hardy, crate::geometry::norm(x), crate::geometry::norm(y))
            } else {
                (am, kx, ky)
            };
            let main = if env.kind == EnvelopeKind::GreenProduct {
                base * libm::pow(s / kx + 1.0, exp) * libm::pow(s / ky + 1.0, exp)
            } else {
                base * libm::pow((kx * ky / s2).min(1.0), -exp)
            };
            if critical && !env.drop_log {
                let log = libm::log((s2 / (dx * dy)).min(1.0)).abs();
                Ok(main + libm::pow(kx * ky, -p.hardy) * log)
            } else {
                Ok(main)
            }
        }
        EnvelopeKind::MartinBoundary | EnvelopeKind::MartinK => {
            let (x, xi) = match args {
                EnvelopeArgs::Kernel { x, xi } => (x, xi),
                _ => bail!(Parameter, "{} expects (x, ξ)", env.kind),
            };
            let (dx, kx) = interior(spec, x)?;
            let s = dist(x, xi);
            if env.kind == EnvelopeKind::MartinBoundary {
                if !spec.on_boundary(xi) {
                    bail!(Domain, "ξ is not on ∂Ω");
                }
                Ok(dx * libm::pow(kx, -am) / libm::pow(s, n))
            } else {
                if !spec.on_k(xi) {
                    bail!(Domain, "ξ is not on K");
                }
                if spec.is_critical() {
                    Ok(dx * libm::pow(kx, -p.hardy) * libm::log(kx / p.diameter).abs())
                } else {
                    Ok(dx * libm::pow(kx, -am) / libm::pow(s, n - 2.0 - 2.0 * am))
                }
            }
        }
        EnvelopeKind::HeatShort | EnvelopeKind::HeatLong => {
            let (t, x, y) = match args {
                EnvelopeArgs::Heat { t, x, y } => (t, x, y),
                _ => bail!(Parameter, "{} expects (t, x, y)", env.kind),
            };
            if !(t > 0.0) {
                bail!(Parameter, "heat envelope needs t > 0");
            }
            let (dx, kx) = interior(spec, x)?;
            let (dy, ky) = interior(spec, y)?;
            if env.kind == EnvelopeKind::HeatShort {
                let rt = libm::sqrt(t);
                let s = dist(x, y);
                Ok(1.0 / ((rt / dx + 1.0) * (rt / dy + 1.0))
                    * libm::pow((rt / kx + 1.0) * (rt / ky + 1.0), am)
                    * libm::pow(t, -n / 2.0)
                    * libm::exp(-s * s / (4.0 * t)))
            } else {
                let Some(lambda) = p.lambda else {
                    bail!(Parameter, "heat-long envelope needs λ_μ");
                };
                Ok(dx * dy * libm::pow(kx * ky, -am) * libm::exp(-lambda * t))
            }
        }
        EnvelopeKind::Eigenfunction => {
            let x = match args {
                EnvelopeArgs::Point { x } => x,
                _ => bail!(Parameter, "eigenfunction envelope expects a point"),
            };
            let (dx, kx) = interior(spec, x)?;
            Ok(dx * libm::pow(kx, -am))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classical_collapse_value() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let e = Envelope::new(EnvelopeKind::GreenSubcritical, &s);
        let v = e.eval(EnvelopeArgs::Pair { x: &[0.5, 0.0, 0.0], y: &[-0.5, 0.0, 0.0] }).unwrap();
        assert_eq!(v, 0.25);
        let c = e.eval(EnvelopeArgs::Pair { x: &[0.5, 0.0, 0.0], y: &[0.5, 0.0, 0.0] });
        assert!(matches!(c, Err(crate::Error::Coincidence(_))));
    }

    #[test]
    fn martin_k_values() {
        let s = DomainSpec::unit_ball(0.16).unwrap();
        let e = Envelope::new(EnvelopeKind::MartinK, &s);
        let x = [0.3, 0.0, 0.0];
        let v = e.eval(EnvelopeArgs::Kernel { x: &x, xi: &[0.0; 3] }).unwrap();
        let expected = 0.7 * libm::pow(0.3, -0.2) * libm::pow(0.3, -(3.0 - 2.0 - 0.4));
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        let c = DomainSpec::unit_ball(0.25).unwrap();
        let e = Envelope::new(EnvelopeKind::MartinK, &c);
        let v = e.eval(EnvelopeArgs::Kernel { x: &x, xi: &[0.0; 3] }).unwrap();
        assert_relative_eq!(v, 0.7 * libm::pow(0.3, -0.5) * libm::log(0.15).abs(), max_relative = 1e-14);
        let bad = e.eval(EnvelopeArgs::Kernel { x: &x, xi: &[0.5, 0.0, 0.0] });
        assert!(matches!(bad, Err(crate::Error::Domain(_))));
    }

    #[test]
    fn names_round_trip() {
        for k in EnvelopeKind::ALL {
            assert_eq!(EnvelopeKind::from_name(k.name()), Some(k));
        }
    }
}

//! Domains, the singular set, distance functions and the weights `W`, `W̃`.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Relative slack used to snap `mu` onto the critical value `H^2`.
const CRITICAL_SNAP: f64 = 1e-12;
/// Slack used when deciding whether a point sits on a boundary or on `K`.
pub const ON_SET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// Ball of the given radius centred at the origin.
    Ball { radius: f64 },
    /// Axis-aligned box `prod [-a_i, a_i]`.
    Box { half_widths: Vec<f64> },
    /// Spherical shell `inner < |x| < outer`. The origin is not inside, so the
    /// shell cannot host `K = {0}`; construction always rejects it.
    Annulus { inner: f64, outer: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SingularSet {
    /// `K = {0}`, `k = 0`.
    Origin,
    /// Round `k`-sphere of the given radius in the span of the first `k + 1`
    /// coordinates. Only used for closed-form checks.
    Sphere { dim: usize, radius: f64 },
}

impl SingularSet {
    pub fn dim(&self) -> usize {
        match self {
            SingularSet::Origin => 0,
            SingularSet::Sphere { dim, .. } => *dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
}

/// The split `Δd_K = leading + g` near `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkLaplacian {
    pub leading: f64,
    pub g: f64,
}

/// The pair `(Ω, K)` with `mu` and the derived exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    dim: usize,
    kind: DomainKind,
    singular: SingularSet,
    mu: f64,
    h: f64,
    disc: f64,
    alpha_minus: f64,
    alpha_plus: f64,
    beta0: f64,
    beta1: f64,
}

impl DomainSpec {
    /// Builds the spec with the default collar `β₀ = dist(K, ∂Ω)/7`.
    pub fn new(dim: usize, kind: DomainKind, singular: SingularSet, mu: f64) -> Result<Self> {
        if dim < 3 {
            bail!(Parameter, "dimension N = {dim} must be at least 3");
        }
        let k = singular.dim();
        if k + 2 >= dim {
            bail!(Parameter, "singular set dimension k = {k} must satisfy k < N - 2 = {}", dim - 2);
        }
        if !mu.is_finite() {
            bail!(Parameter, "mu must be finite");
        }
        match &kind {
            DomainKind::Ball { radius } => {
                if !(*radius > 0.0) {
                    bail!(Parameter, "ball radius must be positive");
                }
            }
            DomainKind::Box { half_widths } => {
                if half_widths.len() != dim || half_widths.iter().any(|a| !(*a > 0.0)) {
                    bail!(Parameter, "box needs {dim} positive half widths");
                }
            }
            DomainKind::Annulus { .. } => {
                bail!(DomainKind, "annulus does not contain K; K must lie inside Ω");
            }
        }
        if let SingularSet::Sphere { radius, .. } = singular {
            if !(radius > 0.0) {
                bail!(Parameter, "singular sphere radius must be positive");
            }
        }
        let h = (dim - k - 2) as f64 / 2.0;
        let mut mu = mu;
        let h2 = h * h;
        if (mu - h2).abs() <= CRITICAL_SNAP * h2.max(1.0) {
            mu = h2;
        } else if mu > h2 {
            bail!(Parameter, "mu = {mu} violates μ ≤ H² (H² = {h2})");
        }
        let disc = libm::sqrt(h2 - mu);
        let mut spec = DomainSpec {
            dim,
            kind,
            singular,
            mu,
            h,
            disc,
            alpha_minus: h - disc,
            alpha_plus: h + disc,
            beta0: 0.0,
            beta1: 0.0,
        };
        let clearance = spec.clearance()?;
        spec.beta0 = clearance / 7.0;
        spec.beta1 = spec.beta0 / 4.0;
        Ok(spec)
    }

    /// Overrides the collar radius; `β₁ = β₀/4`.
    pub fn with_collar(mut self, beta0: f64) -> Result<Self> {
        let clearance = self.clearance()?;
        if !(beta0 > 0.0) || 6.0 * beta0 >= clearance {
            bail!(Parameter, "collar β₀ = {beta0} must satisfy 0 < 6β₀ < {clearance}");
        }
        self.beta0 = beta0;
        self.beta1 = beta0 / 4.0;
        Ok(self)
    }

    /// Unit ball in R^3 with `K = {0}`.
    pub fn unit_ball(mu: f64) -> Result<Self> {
        DomainSpec::new(3, DomainKind::Ball { radius: 1.0 }, SingularSet::Origin, mu)
    }

    /// Largest radius `b` with `K_b` inside Ω and a unique nearest point on `K`.
    fn clearance(&self) -> Result<f64> {
        let to_boundary = match (&self.kind, &self.singular) {
            (DomainKind::Ball { radius }, SingularSet::Origin) => *radius,
            (DomainKind::Ball { radius }, SingularSet::Sphere { radius: r, .. }) => {
                if *r >= *radius {
                    bail!(Domain, "singular sphere of radius {r} is not inside Ω");
                }
                (*radius - *r).min(*r)
            }
            (DomainKind::Box { half_widths }, SingularSet::Origin) => {
                half_widths.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            (DomainKind::Box { half_widths }, SingularSet::Sphere { dim, radius }) => {
                let inner = half_widths[..=*dim].iter().cloned().fold(f64::INFINITY, f64::min);
                let outer = half_widths.iter().cloned().fold(f64::INFINITY, f64::min);
                if *radius >= inner {
                    bail!(Domain, "singular sphere of radius {radius} is not inside Ω");
                }
                (inner - *radius).min(outer).min(*radius)
            }
            (DomainKind::Annulus { .. }, _) => bail!(DomainKind, "annulus is unsupported"),
        };
        Ok(to_boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }
    pub fn singular(&self) -> &SingularSet {
        &self.singular
    }
    pub fn k(&self) -> usize {
        self.singular.dim()
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// `H = (N - k - 2)/2`.
    pub fn hardy(&self) -> f64 {
        self.h
    }
    /// `sqrt(H^2 - mu)`.
    pub fn disc(&self) -> f64 {
        self.disc
    }
    pub fn alpha_minus(&self) -> f64 {
        self.alpha_minus
    }
    pub fn alpha_plus(&self) -> f64 {
        self.alpha_plus
    }
    pub fn beta0(&self) -> f64 {
        self.beta0
    }
    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn regime(&self) -> Regime {
        if self.disc == 0.0 {
            Regime::Critical
        } else {
            Regime::Subcritical
        }
    }
    pub fn is_critical(&self) -> bool {
        self.regime() == Regime::Critical
    }

    /// `dist(K, ∂Ω)`.
    pub fn k_to_boundary(&self) -> f64 {
        match (&self.kind, &self.singular) {
            (DomainKind::Ball { radius }, SingularSet::Origin) => *radius,
            (DomainKind::Ball { radius }, SingularSet::Sphere { radius: r, .. }) => *radius - *r,
            (DomainKind::Box { half_widths }, SingularSet::Origin) => {
                half_widths.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            (DomainKind::Box { half_widths }, SingularSet::Sphere { dim, radius }) => {
                let inner = half_widths[..=*dim].iter().cloned().fold(f64::INFINITY, f64::min);
                let outer = half_widths.iter().cloned().fold(f64::INFINITY, f64::min);
                (inner - *radius).min(outer)
            }
            (DomainKind::Annulus { .. }, _) => 0.0,
        }
    }

    /// `D_Ω = 2 sup_{x ∈ Ω} |x|`.
    pub fn diameter_bound(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => 2.0 * radius,
            DomainKind::Box { half_widths } => {
                2.0 * libm::sqrt(half_widths.iter().map(|a| a * a).sum::<f64>())
            }
            DomainKind::Annulus { outer, .. } => 2.0 * outer,
        }
    }

    /// Lebesgue measure of Ω.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => unit_ball_volume(self.dim) * libm::pow(*radius, self.dim as f64),
            DomainKind::Box { half_widths } => half_widths.iter().map(|a| 2.0 * a).product(),
            DomainKind::Annulus { inner, outer } => {
                let n = self.dim as f64;
                unit_ball_volume(self.dim) * (libm::pow(*outer, n) - libm::pow(*inner, n))
            }
        }
    }

    /// Per-axis bounding interval of Ω.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            DomainKind::Ball { radius } => (0..self.dim).map(|_| (-radius, *radius)).collect(),
            DomainKind::Box { half_widths } => half_widths.iter().map(|a| (-a, *a)).collect(),
            DomainKind::Annulus { outer, .. } => (0..self.dim).map(|_| (-outer, *outer)).collect(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            bail!(Domain, "point has {} coordinates, expected {}", x.len(), self.dim);
        }
        if x.iter().any(|c| !c.is_finite()) {
            bail!(Domain, "point has non-finite coordinates");
        }
        Ok(())
    }

    /// Signed distance to ∂Ω, positive inside. Does not validate.
    pub fn signed_d(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => radius - norm(x),
            DomainKind::Box { half_widths } => {
                let gaps = x.iter().zip(half_widths).map(|(c, a)| a - c.abs());
                let inside = gaps.clone().fold(f64::INFINITY, f64::min);
                if inside >= 0.0 {
                    inside
                } else {
                    let out: f64 = gaps.map(|g| if g < 0.0 { g * g } else { 0.0 }).sum();
                    -libm::sqrt(out)
                }
            }
            DomainKind::Annulus { inner, outer } => {
                let r = norm(x);
                (outer - r).min(r - inner)
            }
        }
    }

    /// Distance to `K`. Does not validate.
    pub fn d_k(&self, x: &[f64]) -> f64 {
        match &self.singular {
            SingularSet::Origin => norm(x),
            SingularSet::Sphere { dim, radius } => {
                let rho = norm(&x[..=*dim]);
                let z = norm(&x[dim + 1..]);
                libm::hypot(rho - radius, z)
            }
        }
    }

    /// Whether `x` lies in the closure of Ω.
    pub fn in_closure(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.signed_d(x) >= -ON_SET_TOL
    }

    /// `(d(x), d_K(x))` for `x` in the closure of Ω.
    pub fn distances(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let d = self.signed_d(x);
        if d < -ON_SET_TOL {
            bail!(Domain, "point lies outside the closure of Ω (signed distance {d})");
        }
        Ok((d.max(0.0), self.d_k(x)))
    }

    /// Supremum of `|g|` over `K_{4β₀}`.
    pub fn g_sup(&self) -> f64 {
        match &self.singular {
            SingularSet::Origin => 0.0,
            SingularSet::Sphere { dim, radius } => *dim as f64 / (radius - 4.0 * self.beta0),
        }
    }

    /// `Δd_K = (N - k - 1)/d_K + g` on `K_{4β₀} \ K`.
    pub fn laplacian_dk(&self, x: &[f64]) -> Result<DkLaplacian> {
        self.check_dim(x)?;
        let dk = self.d_k(x);
        if dk == 0.0 {
            bail!(SingularPoint, "d_K is not differentiable on K");
        }
        if dk >= 4.0 * self.beta0 {
            bail!(Range, "d_K = {dk} is outside the tubular neighbourhood K_(4β₀), 4β₀ = {}", 4.0 * self.beta0);
        }
        let leading = (self.dim - self.k() - 1) as f64 / dk;
        let g = match &self.singular {
            SingularSet::Origin => 0.0,
            SingularSet::Sphere { dim, radius } => {
                let rho = norm(&x[..=*dim]);
                *dim as f64 * (rho - radius) / (rho * dk)
            }
        };
        Ok(DkLaplacian { leading, g })
    }

    /// Parameter `t ∈ (0, 1]` where the segment `p → q` leaves Ω, for `p`
    /// inside the domain. `None` when `q` is still inside.
    pub fn boundary_crossing(&self, p: &[f64], q: &[f64]) -> Option<f64> {
        if self.signed_d(q) > ON_SET_TOL {
            return None;
        }
        let t = match &self.kind {
            DomainKind::Ball { radius } => {
                let mut a = 0.0;
                let mut b = 0.0;
                let mut c = -radius * radius;
                for (pi, qi) in p.iter().zip(q) {
                    let e = qi - pi;
                    a += e * e;
                    b += 2.0 * pi * e;
                    c += pi * pi;
                }
                (-b + libm::sqrt((b * b - 4.0 * a * c).max(0.0))) / (2.0 * a)
            }
            DomainKind::Box { half_widths } => {
                let mut t = 1.0_f64;
                for ((pi, qi), a) in p.iter().zip(q).zip(half_widths) {
                    let e = qi - pi;
                    if e > 0.0 {
                        t = t.min((a - pi) / e);
                    } else if e < 0.0 {
                        t = t.min((-a - pi) / e);
                    }
                }
                t
            }
            DomainKind::Annulus { .. } => 1.0,
        };
        Some(t.clamp(0.0, 1.0))
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(xi)?;
        if self.signed_d(xi).abs() > ON_SET_TOL {
            bail!(Domain, "point is not on ∂Ω");
        }
        match &self.kind {
            DomainKind::Ball { .. } => {
                let r = norm(xi);
                Ok(xi.iter().map(|c| c / r).collect())
            }
            DomainKind::Box { half_widths } => {
                let (axis, _) = xi
                    .iter()
                    .zip(half_widths)
                    .map(|(c, a)| a - c.abs())
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
                let mut n = alloc::vec![0.0; self.dim];
                n[axis] = if xi[axis] >= 0.0 { 1.0 } else { -1.0 };
                Ok(n)
            }
            DomainKind::Annulus { .. } => bail!(DomainKind, "annulus is unsupported"),
        }
    }

    pub fn on_boundary(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim && self.signed_d(xi).abs() <= ON_SET_TOL
    }

    pub fn on_k(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim && self.d_k(xi) <= ON_SET_TOL
    }

    /// Ground state `d_K^{-α₋}`, which is `L_mu`-harmonic for `K = {0}`.
    pub fn ground_state(&self, dk: f64) -> f64 {
        libm::pow(dk, -self.alpha_minus)
    }

    pub fn weights(&self) -> WeightSpec {
        WeightSpec {
            regime: self.regime(),
            hardy: self.h,
            alpha_plus: self.alpha_plus,
            beta0: self.beta0,
        }
    }

    pub fn weight_w(&self, x: &[f64]) -> Result<f64> {
        let (_, dk) = self.distances(x)?;
        if dk == 0.0 {
            bail!(SingularPoint, "W is singular on K");
        }
        Ok(self.weights().w(dk))
    }

    pub fn weight_w_tilde(&self, x: &[f64]) -> Result<f64> {
        let (_, dk) = self.distances(x)?;
        if dk == 0.0 {
            bail!(SingularPoint, "W̃ is singular on K");
        }
        Ok(self.weights().w_tilde(dk))
    }
}

/// Weights `W`, `W̃` and the cutoff `η_{β₀}` as functions of `d_K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub regime: Regime,
    pub hardy: f64,
    pub alpha_plus: f64,
    pub beta0: f64,
}

impl WeightSpec {
    /// `W = d_K^{-α₊}`, or `d_K^{-H} |ln d_K|` at the critical value.
    pub fn w(&self, dk: f64) -> f64 {
        match self.regime {
            Regime::Subcritical => libm::pow(dk, -self.alpha_plus),
            Regime::Critical => libm::pow(dk, -self.hardy) * libm::log(dk).abs(),
        }
    }

    /// Cutoff: 1 for `d_K ≤ β₀/4`, 0 for `d_K ≥ β₀/2`, quintic smootherstep between.
    pub fn eta(&self, dk: f64) -> f64 {
        cutoff(dk, self.beta0).0
    }

    /// Cutoff with its first two derivatives in `d_K`.
    pub fn eta_derivs(&self, dk: f64) -> (f64, f64, f64) {
        cutoff(dk, self.beta0)
    }

    /// `W̃ = 1 - η + ηW`.
    pub fn w_tilde(&self, dk: f64) -> f64 {
        let eta = self.eta(dk);
        if eta == 0.0 {
            1.0
        } else {
            1.0 - eta + eta * self.w(dk)
        }
    }
}

fn cutoff(dk: f64, beta0: f64) -> (f64, f64, f64) {
    let a = beta0 / 4.0;
    if dk <= a {
        return (1.0, 0.0, 0.0);
    }
    if dk >= 2.0 * a {
        return (0.0, 0.0, 0.0);
    }
    let t = (dk - a) / a;
    let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    let s1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (1.0 - s, -s1 / a, -s2 / (a * a))
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Surface area `|S^{n-1}|` of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * libm::pow(core::f64::consts::PI, half) / libm::tgamma(half)
}

pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|c| c * c).sum())
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    libm::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn ball_distances() {
        let s = DomainSpec::unit_ball(0.16).unwrap();
        assert_eq!(s.distances(&[0.5, 0.0, 0.0]).unwrap(), (0.5, 0.5));
        assert_eq!(s.distances(&[0.0, 0.0, 0.0]).unwrap().1, 0.0);
        assert!(matches!(s.distances(&[1.5, 0.0, 0.0]), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn annulus_rejected() {
        let e = DomainSpec::new(3, DomainKind::Annulus { inner: 0.1, outer: 1.0 }, SingularSet::Origin, 0.0);
        assert!(matches!(e, Err(crate::Error::DomainKind(_))));
    }

    #[test]
    fn exponents() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        assert_eq!(s.alpha_minus(), 0.0);
        assert_eq!(s.alpha_plus(), 1.0);
        let c = DomainSpec::unit_ball(0.25).unwrap();
        assert_eq!(c.alpha_minus(), 0.5);
        assert_eq!(c.alpha_plus(), 0.5);
        assert!(c.is_critical());
        let m = DomainSpec::unit_ball(0.16).unwrap();
        assert_relative_eq!(m.alpha_minus(), 0.2, epsilon = 1e-15);
        assert_relative_eq!(m.alpha_plus(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn mu_above_critical() {
        let e = DomainSpec::unit_ball(0.3).unwrap_err();
        assert!(alloc::format!("{e}").contains("μ ≤ H²"));
    }

    #[test]
    fn laplacian_split() {
        let s = DomainSpec::unit_ball(0.1).unwrap().with_collar(0.1).unwrap();
        let l = s.laplacian_dk(&[0.2, 0.0, 0.0]).unwrap();
        assert_eq!(l.leading, 10.0);
        assert_eq!(l.g, 0.0);
        let s4 = DomainSpec::new(4, DomainKind::Ball { radius: 2.0 }, SingularSet::Origin, 0.0)
            .unwrap()
            .with_collar(0.3)
            .unwrap();
        let l4 = s4.laplacian_dk(&[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(l4.leading, 6.0);
        assert!(matches!(s.laplacian_dk(&[0.9, 0.0, 0.0]), Err(crate::Error::Range(_))));
    }

    #[test]
    fn circle_in_four_dimensions() {
        let s = DomainSpec::new(4, DomainKind::Ball { radius: 2.0 }, SingularSet::Sphere { dim: 1, radius: 1.0 }, 0.0)
            .unwrap();
        let x = [1.0, 0.05, 0.03, 0.0];
        let l = s.laplacian_dk(&x).unwrap();
        let dk = s.d_k(&x);
        assert_relative_eq!(l.leading, 2.0 / dk, max_relative = 1e-14);
        assert!(l.g.abs() <= s.g_sup());
        // finite-difference Laplacian of d_K
        let hstep = 1e-4;
        let mut lap = 0.0;
        for i in 0..4 {
            let mut p = x;
            let mut m = x;
            p[i] += hstep;
            m[i] -= hstep;
            lap += (s.d_k(&p) - 2.0 * dk + s.d_k(&m)) / (hstep * hstep);
        }
        assert_relative_eq!(lap, l.leading + l.g, max_relative = 1e-5);
    }

    #[test]
    fn critical_weight_value() {
        let s = DomainSpec::unit_ball(0.25).unwrap();
        let w = s.weights().w(0.1);
        assert_relative_eq!(w, 7.281_413_400_211_799, max_relative = 1e-12);
        let z = DomainSpec::unit_ball(0.0).unwrap();
        assert_eq!(z.weights().w(0.5), 2.0);
        assert_eq!(z.weight_w_tilde(&[0.5, 0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(z.weight_w(&[0.0, 0.0, 0.0]), Err(crate::Error::SingularPoint(_))));
    }

    #[test]
    fn cutoff_smooth() {
        let w = DomainSpec::unit_ball(0.16).unwrap().weights();
        let b = w.beta0;
        assert_eq!(w.eta(b / 4.0), 1.0);
        assert_eq!(w.eta(b / 2.0), 0.0);
        let t = 0.37 * b;
        let hs = 1e-6 * b;
        let (_, d1, d2) = w.eta_derivs(t);
        assert_relative_eq!((w.eta(t + hs) - w.eta(t - hs)) / (2.0 * hs), d1, max_relative = 1e-6);
        assert_relative_eq!((w.eta(t + hs) - 2.0 * w.eta(t) + w.eta(t - hs)) / (hs * hs), d2, max_relative = 1e-3);
    }

    #[test]
    fn crossings() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let t = s.boundary_crossing(&[0.9, 0.0, 0.0], &[1.1, 0.0, 0.0]).unwrap();
        assert_relative_eq!(t, 0.5, epsilon = 1e-14);
        assert!(s.boundary_crossing(&[0.1, 0.0, 0.0], &[0.2, 0.0, 0.0]).is_none());
        let b = DomainSpec::new(3, DomainKind::Box { half_widths: vec![1.0, 0.5, 0.5] }, SingularSet::Origin, 0.0).unwrap();
        let t = b.boundary_crossing(&[0.0, 0.4, 0.0], &[0.0, 0.6, 0.0]).unwrap();
        assert_relative_eq!(t, 0.5, epsilon = 1e-14);
        assert_relative_eq!(b.beta0(), 0.5 / 7.0);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(3), 4.0 * core::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * core::f64::consts::PI / 3.0, max_relative = 1e-14);
    }
}

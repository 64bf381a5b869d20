//! Boundary value problems with measure data: `-L_μ u = τ` in `Ω \ K` with
//! boundary trace `ν`, solved through `u = G_μ[τ] + K_μ[ν]`.

mod singular;
mod trace;

pub use singular::{admissible_gamma, singular_rhs_solve, SingularSolve};
pub use trace::{
    boundary_trace, canonical_exhaustion, default_dictionary, exhaustion_shell, harmonic_functional, shell_delta,
    Shell, TraceReport, TraceTest,
};

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{BoundaryMode, BoundaryValues, EigenPair, FieldKind, LinearOperator, ScalarField};
use crate::error::{bail, Result};
use crate::geometry::DomainKind;
use crate::kernels::{cells_to_collar, direct_martin, martin_normalizers, DEFAULT_X0, KERNEL_TOL};

/// Placement margin for interior atoms, in cells.
pub const MIN_ATOM_CELLS: usize = 4;
/// Slack on the a priori bound for `‖u‖_{L¹(φ)}`.
pub const APRIORI_SLACK: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: [f64; 3],
    pub weight: f64,
}

/// Density of `ν` against surface measure on ∂Ω.
#[derive(Clone)]
pub struct SurfaceDensity(pub Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>);

impl core::fmt::Debug for SurfaceDensity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("SurfaceDensity(..)")
    }
}

/// `τ` on `Ω \ K` and `ν` on `∂Ω ∪ K`, as atoms plus optional densities.
#[derive(Debug, Clone, Default)]
pub struct MeasureData {
    pub interior: Vec<Atom>,
    /// Nodal density of `τ` against `dx`.
    pub density: Option<Vec<f64>>,
    pub boundary: Vec<Atom>,
    pub surface: Option<SurfaceDensity>,
}

/// `∫φ_μ d|τ|` and `|ν|(∂Ω ∪ K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureGauge {
    pub tau_phi: f64,
    pub nu_mass: f64,
}

impl MeasureData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn interior_atom(point: [f64; 3], weight: f64) -> Self {
        Self::new().with_interior(point, weight)
    }

    pub fn boundary_atom(point: [f64; 3], weight: f64) -> Self {
        Self::new().with_boundary(point, weight)
    }

    pub fn with_interior(mut self, point: [f64; 3], weight: f64) -> Self {
        self.interior.push(Atom { point, weight });
        self
    }

    pub fn with_boundary(mut self, point: [f64; 3], weight: f64) -> Self {
        self.boundary.push(Atom { point, weight });
        self
    }

    pub fn with_density(mut self, density: Vec<f64>) -> Self {
        self.density = Some(density);
        self
    }

    pub fn with_surface(mut self, g: impl Fn(&[f64; 3]) -> f64 + Send + Sync + 'static) -> Self {
        self.surface = Some(SurfaceDensity(Arc::new(g)));
        self
    }

    pub fn has_tau(&self) -> bool {
        !self.interior.is_empty() || self.density.is_some()
    }

    pub fn has_nu(&self) -> bool {
        !self.boundary.is_empty() || self.surface.is_some()
    }

    /// `a · self`.
    pub fn scaled(&self, a: f64) -> Self {
        self.map_parts(move |w| a * w)
    }

    /// `self + other`.
    pub fn plus(&self, other: &MeasureData) -> Self {
        let mut out = self.clone();
        out.interior.extend(other.interior.iter().copied());
        out.boundary.extend(other.boundary.iter().copied());
        out.density = match (&self.density, &other.density) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            (Some(a), None) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        out.surface = match (&self.surface, &other.surface) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.0.clone(), b.0.clone());
                Some(SurfaceDensity(Arc::new(move |p: &[f64; 3]| a(p) + b(p))))
            }
            (Some(a), None) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        out
    }

    /// `|τ|` and `|ν|`, with atoms at the same point merged first.
    pub fn total_variation(&self) -> Self {
        self.merged().map_parts(f64::abs)
    }

    /// `τ₊` and `ν₊`, with atoms at the same point merged first.
    pub fn positive_part(&self) -> Self {
        self.merged().map_parts(|w| w.max(0.0))
    }

    fn map_parts(&self, g: impl Fn(f64) -> f64 + Copy + Send + Sync + 'static) -> Self {
        let map = |atoms: &[Atom]| atoms.iter().map(|a| Atom { point: a.point, weight: g(a.weight) }).collect();
        MeasureData {
            interior: map(&self.interior),
            density: self.density.as_ref().map(|d| d.iter().map(|&v| g(v)).collect()),
            boundary: map(&self.boundary),
            surface: self.surface.as_ref().map(|s| {
                let s = s.0.clone();
                SurfaceDensity(Arc::new(move |p: &[f64; 3]| g(s(p))))
            }),
        }
    }

    fn merged(&self) -> Self {
        fn merge(atoms: &[Atom]) -> Vec<Atom> {
            let mut out: Vec<Atom> = Vec::new();
            for a in atoms {
                match out.iter_mut().find(|b| b.point == a.point) {
                    Some(b) => b.weight += a.weight,
                    None => out.push(*a),
                }
            }
            out
        }
        MeasureData {
            interior: merge(&self.interior),
            density: self.density.clone(),
            boundary: merge(&self.boundary),
            surface: self.surface.clone(),
        }
    }

    /// Structural checks: finite weights, atoms where they belong.
    pub fn check(&self, op: &LinearOperator) -> Result<()> {
        let spec = op.spec();
        for a in &self.interior {
            if !a.weight.is_finite() {
                bail!(Parameter, "interior atom at {:?} has weight {}", a.point, a.weight);
            }
            if !(spec.signed_d(&a.point) > 0.0) || spec.on_k(&a.point) {
                bail!(Domain, "interior atom {:?} is not in Ω \\ K", a.point);
            }
        }
        for a in &self.boundary {
            if !a.weight.is_finite() {
                bail!(Parameter, "boundary atom at {:?} has weight {}", a.point, a.weight);
            }
            if !(spec.on_boundary(&a.point) || spec.on_k(&a.point)) {
                bail!(Domain, "boundary atom {:?} is neither on ∂Ω nor on K", a.point);
            }
        }
        if let Some(d) = &self.density {
            if d.len() != op.len() {
                bail!(Parameter, "density has {} entries, operator has {}", d.len(), op.len());
            }
            if d.iter().any(|v| !v.is_finite()) {
                bail!(Parameter, "density of τ is not finite");
            }
        }
        if self.surface.is_some() && !matches!(spec.kind(), DomainKind::Ball { .. }) {
            bail!(DomainKind, "surface densities need a ball");
        }
        Ok(())
    }

    /// `∫φ_μ d|τ|` with atoms weighted by interpolated `φ_μ`, and `|ν|(∂Ω ∪ K)`.
    pub fn gauge(&self, op: &LinearOperator, phi: &ScalarField, options: &BvpOptions) -> Result<MeasureGauge> {
        self.check(op)?;
        let grid = op.grid();
        let mut tau_phi = 0.0;
        for a in &self.interior {
            let Some(p) = grid.interpolate(&phi.values, &a.point) else {
                bail!(Placement, "atom {:?} is off the grid", a.point);
            };
            tau_phi += a.weight.abs() * p;
        }
        if let Some(d) = &self.density {
            tau_phi += d.iter().zip(&phi.values).zip(op.mass()).map(|((t, p), v)| t.abs() * p * v).sum::<f64>();
        }
        let mut nu_mass: f64 = self.boundary.iter().map(|a| a.weight.abs()).sum();
        if let Some(g) = &self.surface {
            nu_mass += sphere_quadrature(op, options.sphere_level)?.iter().map(|(p, a)| g.0(p).abs() * a).sum::<f64>();
        }
        if !(tau_phi.is_finite() && nu_mass.is_finite()) {
            bail!(Parameter, "measure data has infinite gauge");
        }
        Ok(MeasureGauge { tau_phi, nu_mass })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpOptions {
    /// Martin basis point.
    pub x0: [f64; 3],
    /// Subdivision level of the icosahedral triangulation used for surface densities.
    pub sphere_level: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions { x0: DEFAULT_X0, sphere_level: 5 }
    }
}

/// Midpoints and areas of a geodesic triangulation of ∂B_R.
pub fn sphere_quadrature(op: &LinearOperator, level: usize) -> Result<Vec<([f64; 3], f64)>> {
    let DomainKind::Ball { radius } = *op.spec().kind() else {
        bail!(DomainKind, "surface quadrature needs a ball");
    };
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let v = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .map(unit);
    const F: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut tris: Vec<[[f64; 3]; 3]> = F.iter().map(|f| [v[f[0]], v[f[1]], v[f[2]]]).collect();
    for _ in 0..level {
        let mut next = Vec::with_capacity(4 * tris.len());
        for [a, b, c] in tris {
            let (ab, bc, ca) = (unit(mid(a, b)), unit(mid(b, c)), unit(mid(c, a)));
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    let mut out: Vec<([f64; 3], f64)> = tris
        .iter()
        .map(|[a, b, c]| {
            let m = unit([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0]);
            let (u, w) = (sub(*b, *a), sub(*c, *a));
            let cr = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
            ([m[0] * radius, m[1] * radius, m[2] * radius], 0.5 * crate::geometry::norm(&cr))
        })
        .collect();
    let total: f64 = out.iter().map(|e| e.1).sum();
    let area = 4.0 * core::f64::consts::PI * radius * radius;
    out.iter_mut().for_each(|e| e.1 *= area / total);
    Ok(out)
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let r = crate::geometry::norm(&a);
    [a[0] / r, a[1] / r, a[2] / r]
}

fn mid(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Node carrying an interior atom.
fn atom_node(op: &LinearOperator, a: &Atom) -> Result<usize> {
    let grid = op.grid();
    let Some(i) = grid.nearest(&a.point) else {
        bail!(Placement, "atom {:?} has no active node", a.point);
    };
    let cells = cells_to_collar(grid, i);
    if cells < MIN_ATOM_CELLS {
        bail!(Placement, "atom {:?} is {cells} cells from a collar, need {MIN_ATOM_CELLS}", a.point);
    }
    Ok(i)
}

/// `G_μ[τ]` from one solve with all atoms and the density in the load.
pub fn green_part(op: &LinearOperator, data: &MeasureData) -> Result<ScalarField> {
    let mut load = match &data.density {
        Some(d) => op.integrate_density(d),
        None => vec![0.0; op.len()],
    };
    for a in &data.interior {
        load[atom_node(op, a)?] += a.weight;
    }
    let u = op.with_mode(BoundaryMode::Zero).solve_load(&load, KERNEL_TOL)?.field;
    Ok(ScalarField::new(FieldKind::Green, u.values).with_note("G[tau]"))
}

/// Per-link data whose boundary solve is `K_μ[ν|∂Ω]`, and the total weight on `K`.
fn link_data(op: &LinearOperator, data: &MeasureData, options: &BvpOptions) -> Result<(Option<Vec<f64>>, f64)> {
    let spec = op.spec();
    let mut on_k = 0.0;
    let mut raw = vec![0.0; op.links().len()];
    let mut any = false;
    for a in &data.boundary {
        if spec.on_k(&a.point) {
            on_k += a.weight;
        } else {
            raw[crate::kernels::martin::nearest_link(op, &a.point)?] += a.weight;
            any = true;
        }
    }
    if let Some(g) = &data.surface {
        if op.links().is_empty() {
            bail!(Placement, "operator has no boundary links");
        }
        let quad = sphere_quadrature(op, options.sphere_level)?;
        let finder = LinkFinder::new(op);
        for (p, area) in quad {
            raw[finder.nearest(op, &p)] += g.0(&p) * area;
        }
        any = true;
    }
    if !any {
        return Ok((None, on_k));
    }
    let norms = martin_normalizers(op, &options.x0)?;
    for (r, n) in raw.iter_mut().zip(&norms) {
        if *r != 0.0 {
            if !(*n > 0.0) {
                bail!(Solver, "boundary link has nonpositive Martin normaliser {n}");
            }
            *r /= n;
        }
    }
    Ok((Some(raw), on_k))
}

/// Bucketed nearest-link search.
struct LinkFinder {
    cell: f64,
    buckets: alloc::collections::BTreeMap<[i64; 3], Vec<usize>>,
}

impl LinkFinder {
    fn new(op: &LinearOperator) -> Self {
        let cell = 4.0 * op.grid().min_width().max(0.01);
        let mut buckets: alloc::collections::BTreeMap<[i64; 3], Vec<usize>> = Default::default();
        for (k, l) in op.links().iter().enumerate() {
            buckets.entry(Self::key(cell, &l.point)).or_default().push(k);
        }
        LinkFinder { cell, buckets }
    }

    fn key(cell: f64, p: &[f64; 3]) -> [i64; 3] {
        [libm::floor(p[0] / cell) as i64, libm::floor(p[1] / cell) as i64, libm::floor(p[2] / cell) as i64]
    }

    fn nearest(&self, op: &LinearOperator, p: &[f64; 3]) -> usize {
        let c = Self::key(self.cell, p);
        let links = op.links();
        let mut reach = 1;
        loop {
            let mut best = (f64::INFINITY, usize::MAX);
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        if let Some(ks) = self.buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            for &k in ks {
                                let d = crate::geometry::dist(&links[k].point, p);
                                if d < best.0 || (d == best.0 && k < best.1) {
                                    best = (d, k);
                                }
                            }
                        }
                    }
                }
            }
            // The searched block covers every point within `reach` cells of `p`.
            if best.1 != usize::MAX && (best.0 <= reach as f64 * self.cell || reach > 256) {
                return best.1;
            }
            reach += 1;
        }
    }
}

/// `K_μ[ν]` with `K_μ(x₀, ξ) = 1`: one boundary solve for the part on ∂Ω and
/// one for the part on `K`.
pub fn martin_part(op: &LinearOperator, data: &MeasureData, options: &BvpOptions) -> Result<ScalarField> {
    data.check(op)?;
    let mut values = vec![0.0; op.len()];
    let (links, on_k) = link_data(op, data, options)?;
    if let Some(h) = links {
        let mode = BoundaryMode::boundary_only(BoundaryValues::PerLink(Arc::new(h)));
        let u = op.with_mode(mode).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?.field;
        values.iter_mut().zip(&u.values).for_each(|(a, b)| *a += b);
    }
    if on_k != 0.0 {
        let k = direct_martin(op, &options.x0, &[0.0; 3])?;
        values.iter_mut().zip(&k.values).for_each(|(a, b)| *a += on_k * b);
    }
    Ok(ScalarField::new(FieldKind::Martin, values).with_note("K[nu]"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub u: ScalarField,
    pub green: ScalarField,
    pub martin: ScalarField,
}

/// `u = G_μ[τ] + K_μ[ν]`.
pub fn solve_bvp(op: &LinearOperator, data: &MeasureData, options: &BvpOptions) -> Result<BvpSolution> {
    data.check(op)?;
    let green = green_part(op, data)?;
    let martin = martin_part(op, data, options)?;
    let u = ScalarField::new(FieldKind::Solution, green.values.iter().zip(&martin.values).map(|(a, b)| a + b).collect())
        .with_note("G[tau] + K[nu]");
    Ok(BvpSolution { u, green, martin })
}

/// The same problem as one solve: the `τ` load together with the boundary data
/// of `K_μ[ν]`. Agrees with [`solve_bvp`] up to solver tolerance.
pub fn solve_bvp_coupled(op: &LinearOperator, data: &MeasureData, options: &BvpOptions) -> Result<ScalarField> {
    data.check(op)?;
    let mut load = match &data.density {
        Some(d) => op.integrate_density(d),
        None => vec![0.0; op.len()],
    };
    for a in &data.interior {
        load[atom_node(op, a)?] += a.weight;
    }
    let (links, on_k) = link_data(op, data, options)?;
    let h_k = if on_k != 0.0 {
        let unit = op.with_mode(BoundaryMode::k_only(1.0)).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?.field;
        let Some(s) = op.grid().interpolate(&unit.values, &options.x0).filter(|s| *s > 0.0) else {
            bail!(Solver, "unit data on K vanishes at the basis point");
        };
        on_k / s
    } else {
        0.0
    };
    let on_boundary = BoundaryValues::PerLink(Arc::new(links.unwrap_or_else(|| vec![0.0; op.links().len()])));
    let mode = BoundaryMode::Weighted(crate::discretization::BoundaryData { on_k: h_k, on_boundary });
    let u = op.with_mode(mode).solve_load(&load, KERNEL_TOL)?.field;
    Ok(ScalarField::new(FieldKind::Solution, u.values).with_note("coupled"))
}

/// Test function `ζ = G_μ[f φ_μ]`, so that `-L_μ ζ = f φ_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub f: Vec<f64>,
    pub zeta: ScalarField,
    /// `max |ζ| / φ_μ` over the nodes.
    pub bound: f64,
    pub seed: Option<u64>,
}

impl TestFunction {
    pub fn new(op: &LinearOperator, eigen: &EigenPair, f: Vec<f64>) -> Result<Self> {
        if f.len() != op.len() {
            bail!(Parameter, "test load has {} entries, operator has {}", f.len(), op.len());
        }
        if f.iter().any(|v| !v.is_finite()) {
            bail!(Parameter, "test load is not bounded");
        }
        let phi = &eigen.phi.values;
        let density: Vec<f64> = f.iter().zip(phi).map(|(a, p)| a * p).collect();
        let zeta = op.with_mode(BoundaryMode::Zero).solve_load(&op.integrate_density(&density), KERNEL_TOL)?.field;
        let bound = zeta.values.iter().zip(phi).map(|(z, p)| z.abs() / p).fold(0.0, f64::max);
        Ok(TestFunction { f, zeta: ScalarField::new(FieldKind::Solution, zeta.values).with_note("zeta"), bound, seed: None })
    }

    /// `∫ v f φ_μ dx`, that is `-∫ v L_μ ζ`.
    pub fn pair(&self, op: &LinearOperator, eigen: &EigenPair, v: &[f64]) -> f64 {
        v.iter().zip(&self.f).zip(&eigen.phi.values).zip(op.mass()).map(|(((a, f), p), m)| a * f * p * m).sum()
    }

    /// `∫ ζ dτ`, atoms read at the node that carries them.
    pub fn against_tau(&self, op: &LinearOperator, data: &MeasureData) -> Result<f64> {
        let mut s = 0.0;
        for a in &data.interior {
            s += a.weight * self.zeta.values[atom_node(op, a)?];
        }
        if let Some(d) = &data.density {
            s += op.inner(d, &self.zeta.values);
        }
        Ok(s)
    }
}

/// Seeded loads `f = Σ a_k cos(ω_k·x + θ_k)` with `Σ |a_k| = 1`, mapped to
/// `[0, 1]` when `nonnegative`.
pub fn test_loads(op: &LinearOperator, count: usize, seed: u64, nonnegative: bool) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = op.grid();
    (0..count)
        .map(|_| {
            let a: [f64; 4] = core::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let total: f64 = a.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1e-12);
            let modes: [([f64; 3], f64); 4] =
                core::array::from_fn(|_| (core::array::from_fn(|_| rng.gen_range(-3.0..3.0)), rng.gen_range(0.0..6.3)));
            (0..op.len())
                .map(|i| {
                    let p = grid.point(i);
                    let mut f = 0.0;
                    for (k, (w, th)) in modes.iter().enumerate() {
                        f += a[k] / total * libm::cos(w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + th);
                    }
                    if nonnegative {
                        (f + 1.0) / 2.0
                    } else {
                        f
                    }
                })
                .collect()
        })
        .collect()
}

/// `count` test functions from [`test_loads`].
pub fn test_dictionary(
    op: &LinearOperator,
    eigen: &EigenPair,
    count: usize,
    seed: u64,
    nonnegative: bool,
) -> Result<Vec<TestFunction>> {
    test_loads(op, count, seed, nonnegative)
        .into_iter()
        .map(|f| TestFunction::new(op, eigen, f).map(|t| TestFunction { seed: Some(seed), ..t }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    /// `-∫u L_μζ - ∫ζ dτ + ∫K_μ[ν] L_μζ`.
    pub raw: f64,
    pub scale: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakResidualReport {
    pub residuals: Vec<WeakResidual>,
    pub max_relative: f64,
    pub mean_relative: f64,
}

/// Weak-form residuals with `K_μ[ν]` supplied.
pub fn weak_residual_with(
    op: &LinearOperator,
    eigen: &EigenPair,
    u: &ScalarField,
    k_nu: &ScalarField,
    data: &MeasureData,
    tests: &[TestFunction],
) -> Result<WeakResidualReport> {
    if u.len() != op.len() || k_nu.len() != op.len() {
        bail!(Parameter, "field length does not match the operator");
    }
    let abs_u: Vec<f64> = u.values.iter().map(|v| v.abs()).collect();
    let abs_k: Vec<f64> = k_nu.values.iter().map(|v| v.abs()).collect();
    let abs_tau = data.total_variation();
    let mut residuals = Vec::with_capacity(tests.len());
    for t in tests {
        let a = t.pair(op, eigen, &u.values);
        let b = t.against_tau(op, data)?;
        let c = t.pair(op, eigen, &k_nu.values);
        let abs_f = TestFunction { f: t.f.iter().map(|v| v.abs()).collect(), ..t.clone() };
        let abs_zeta = TestFunction {
            zeta: ScalarField::new(FieldKind::Solution, t.zeta.values.iter().map(|v| v.abs()).collect()),
            ..t.clone()
        };
        let scale = abs_f.pair(op, eigen, &abs_u) + abs_zeta.against_tau(op, &abs_tau)? + abs_f.pair(op, eigen, &abs_k);
        let raw = a - b - c;
        let relative = if scale > 0.0 { raw.abs() / scale } else { raw.abs() };
        residuals.push(WeakResidual { raw, scale, relative });
    }
    let max_relative = residuals.iter().map(|r| r.relative).fold(0.0, f64::max);
    let mean_relative = if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().map(|r| r.relative).sum::<f64>() / residuals.len() as f64
    };
    Ok(WeakResidualReport { residuals, max_relative, mean_relative })
}

/// Weak-form residuals of `u` for the data, over the test set.
pub fn weak_residual(
    op: &LinearOperator,
    eigen: &EigenPair,
    u: &ScalarField,
    data: &MeasureData,
    tests: &[TestFunction],
    options: &BvpOptions,
) -> Result<WeakResidualReport> {
    let k_nu = if data.has_nu() {
        martin_part(op, data, options)?
    } else {
        ScalarField::new(FieldKind::Martin, vec![0.0; op.len()])
    };
    weak_residual_with(op, eigen, u, &k_nu, data, tests)
}

/// `‖v‖_{L¹(Ω; φ_μ)}`.
pub fn l1_phi(op: &LinearOperator, eigen: &EigenPair, v: &[f64]) -> f64 {
    v.iter().zip(&eigen.phi.values).zip(op.mass()).map(|((a, p), m)| a.abs() * p * m).sum()
}

/// The constant in front of `‖ν‖`: largest `‖K_μ(·, ξ)‖_{L¹(φ_μ)}` over the poles.
pub fn calibrate_nu_constant(
    op: &LinearOperator,
    eigen: &EigenPair,
    poles: &[[f64; 3]],
    options: &BvpOptions,
) -> Result<f64> {
    if poles.is_empty() {
        bail!(Parameter, "calibration needs at least one pole");
    }
    let mut c: f64 = 0.0;
    for xi in poles {
        let k = martin_part(op, &MeasureData::boundary_atom(*xi, 1.0), options)?;
        c = c.max(l1_phi(op, eigen, &k.values));
    }
    Ok(c)
}

/// One test of the Kato-type estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoCheck {
    pub abs_lhs: f64,
    pub abs_rhs: f64,
    pub pos_lhs: f64,
    pub pos_rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub l1_norm: f64,
    pub lambda: f64,
    pub gauge: MeasureGauge,
    pub c_nu: f64,
    /// `‖τ‖/λ_μ + C ‖ν‖`.
    pub bound: f64,
    pub slack: f64,
    pub bound_pass: bool,
    pub kato: Vec<KatoCheck>,
    pub pass: bool,
    /// Operands of every inequality, for failure reports.
    pub operands: String,
}

/// Checks `‖u‖_{L¹(φ)} ≤ ‖τ‖/λ + C‖ν‖` (with slack) and the Kato-type
/// estimates for `|u|` and `u₊` against nonnegative test functions.
pub fn apriori_check(
    op: &LinearOperator,
    eigen: &EigenPair,
    solution: &BvpSolution,
    data: &MeasureData,
    c_nu: f64,
    tests: &[TestFunction],
    options: &BvpOptions,
) -> Result<AprioriReport> {
    if !(eigen.lambda > 0.0) {
        bail!(Precondition, "a priori estimates need λ_μ > 0");
    }
    if tests.iter().any(|t| t.f.iter().any(|v| *v < 0.0)) {
        bail!(Precondition, "Kato-type estimates need nonnegative test loads");
    }
    let gauge = data.gauge(op, &eigen.phi, options)?;
    let l1_norm = l1_phi(op, eigen, &solution.u.values);
    let bound = gauge.tau_phi / eigen.lambda + c_nu * gauge.nu_mass;
    let bound_pass = l1_norm <= (1.0 + APRIORI_SLACK) * bound;
    let abs_data = data.total_variation();
    let pos_data = data.positive_part();
    let zero = || ScalarField::new(FieldKind::Martin, vec![0.0; op.len()]);
    let k_abs = if abs_data.has_nu() { martin_part(op, &abs_data, options)? } else { zero() };
    let k_pos = if pos_data.has_nu() { martin_part(op, &pos_data, options)? } else { zero() };
    let abs_u: Vec<f64> = solution.u.values.iter().map(|v| v.abs()).collect();
    let pos_u: Vec<f64> = solution.u.values.iter().map(|v| v.max(0.0)).collect();
    let mut kato = Vec::with_capacity(tests.len());
    let tol = 1e-6;
    let mut operands = format!(
        "|u|_L1(phi) = {l1_norm:.6e}, |tau|_phi = {:.6e}, |nu| = {:.6e}, lambda = {:.6e}, C = {c_nu:.6e}, bound = {bound:.6e}",
        gauge.tau_phi, gauge.nu_mass, eigen.lambda
    );
    for (n, t) in tests.iter().enumerate() {
        let abs_lhs = t.pair(op, eigen, &abs_u);
        let abs_rhs = t.against_tau(op, &abs_data)? + t.pair(op, eigen, &k_abs.values);
        let pos_lhs = t.pair(op, eigen, &pos_u);
        let pos_rhs = t.against_tau(op, &pos_data)? + t.pair(op, eigen, &k_pos.values);
        let scale = abs_rhs.abs().max(1e-300);
        let pass = abs_lhs <= abs_rhs + tol * scale && pos_lhs <= pos_rhs + tol * scale;
        operands.push_str(&format!(
            "; test {n}: |u| {abs_lhs:.6e} <= {abs_rhs:.6e}, u+ {pos_lhs:.6e} <= {pos_rhs:.6e}"
        ));
        kato.push(KatoCheck { abs_lhs, abs_rhs, pos_lhs, pos_rhs, pass });
    }
    let pass = bound_pass && kato.iter().all(|k| k.pass);
    Ok(AprioriReport { l1_norm, lambda: eigen.lambda, gauge, c_nu, bound, slack: APRIORI_SLACK, bound_pass, kato, pass, operands })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_grid, principal_eigenpair};
    use crate::geometry::DomainSpec;
    use crate::kernels::green_field;

    fn setup(mu: f64, n: usize) -> (LinearOperator, EigenPair) {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = build_grid(&spec, n, 0.7, 0.02).unwrap();
        let op = LinearOperator::assemble(&spec, Arc::new(grid), BoundaryMode::Zero).unwrap();
        let eig = principal_eigenpair(&op, 1e-9).unwrap();
        (op, eig)
    }

    const Y: [f64; 3] = [0.0, -0.4, 0.2];
    const XI: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn interior_atom_collapses_to_green_field() {
        let (op, _) = setup(0.16, 17);
        let u = solve_bvp(&op, &MeasureData::interior_atom(Y, 1.0), &BvpOptions::default()).unwrap().u;
        let g = green_field(&op, &Y).unwrap();
        for (a, b) in u.values.iter().zip(&g.values) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn weak_residual_of_an_atom_is_small_and_linear() {
        let (op, eig) = setup(0.16, 17);
        let data = MeasureData::interior_atom(Y, 1.0);
        let sol = solve_bvp(&op, &data, &BvpOptions::default()).unwrap();
        let tests = test_dictionary(&op, &eig, 10, 11, false).unwrap();
        let r = weak_residual_with(&op, &eig, &sol.u, &sol.martin, &data, &tests).unwrap();
        assert!(r.max_relative < 0.02, "{}", r.max_relative);
        let shifted = sol.u.combine(1.0, &eig.phi, 0.1);
        let s = weak_residual_with(&op, &eig, &shifted, &sol.martin, &data, &tests).unwrap();
        for ((a, b), t) in r.residuals.iter().zip(&s.residuals).zip(&tests) {
            let expected = 0.1 * t.pair(&op, &eig, &eig.phi.values);
            assert!(((b.raw - a.raw) - expected).abs() < 1e-9 * expected.abs().max(1e-6));
        }
    }

    #[test]
    fn unit_load_reproduces_green_symmetry() {
        let (op, eig) = setup(0.0, 17);
        let t = TestFunction::new(&op, &eig, vec![1.0; op.len()]).unwrap();
        let g = green_field(&op, &Y).unwrap();
        let lhs = t.pair(&op, &eig, &g.values);
        let rhs = t.against_tau(&op, &MeasureData::interior_atom(Y, 1.0)).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-7, "{lhs} vs {rhs}");
        assert!(t.bound.is_finite() && t.bound > 0.0);
    }

    #[test]
    fn representation_is_linear_and_matches_the_coupled_solve() {
        let (op, _) = setup(0.16, 17);
        let o = BvpOptions::default();
        let d1 = MeasureData::interior_atom(Y, 1.0).with_boundary(XI, 0.5);
        let d2 = MeasureData::boundary_atom([0.0; 3], 2.0).with_interior([0.3, 0.2, 0.0], -1.0);
        let s1 = solve_bvp(&op, &d1, &o).unwrap().u;
        let s2 = solve_bvp(&op, &d2, &o).unwrap().u;
        let s = solve_bvp(&op, &d1.scaled(-3.0).plus(&d2), &o).unwrap().u;
        let c = solve_bvp_coupled(&op, &d1.scaled(-3.0).plus(&d2), &o).unwrap();
        let top = s.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..op.len() {
            let lin = -3.0 * s1.values[i] + s2.values[i];
            assert!((s.values[i] - lin).abs() < 1e-7 * top);
            assert!((s.values[i] - c.values[i]).abs() < 1e-7 * top);
        }
    }

    #[test]
    fn nonnegative_data_gives_solutions_above_the_martin_part() {
        let (op, _) = setup(0.16, 17);
        let data = MeasureData::interior_atom(Y, 1.0).with_boundary(XI, 1.0).with_boundary([0.0; 3], 0.5);
        let sol = solve_bvp(&op, &data, &BvpOptions::default()).unwrap();
        let top = sol.u.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        for (u, k) in sol.u.values.iter().zip(&sol.martin.values) {
            assert!(*u >= -1e-9 * top && u - k >= -1e-9 * top);
        }
    }

    #[test]
    fn apriori_bound_for_a_normalised_atom() {
        let (op, eig) = setup(0.16, 17);
        let o = BvpOptions::default();
        let phi_y = op.grid().interpolate(&eig.phi.values, &Y).unwrap();
        let data = MeasureData::interior_atom(Y, 1.0 / phi_y);
        let sol = solve_bvp(&op, &data, &o).unwrap();
        let tests = test_dictionary(&op, &eig, 10, 3, true).unwrap();
        let r = apriori_check(&op, &eig, &sol, &data, 0.0, &tests, &o).unwrap();
        assert!((r.gauge.tau_phi - 1.0).abs() < 1e-12);
        assert!(r.l1_norm <= 1.1 / eig.lambda, "{} vs {}", r.l1_norm, 1.0 / eig.lambda);
        assert!(r.pass, "{}", r.operands);
    }

    #[test]
    fn mixed_signs_satisfy_kato_estimates() {
        let (op, eig) = setup(0.16, 17);
        let o = BvpOptions::default();
        let data = MeasureData::interior_atom(Y, 1.0).with_interior([0.3, 0.2, 0.0], -1.0).with_boundary(XI, -0.7);
        let sol = solve_bvp(&op, &data, &o).unwrap();
        let c = calibrate_nu_constant(&op, &eig, &[XI], &o).unwrap();
        let tests = test_dictionary(&op, &eig, 10, 5, true).unwrap();
        let r = apriori_check(&op, &eig, &sol, &data, c, &tests, &o).unwrap();
        assert!(r.pass, "{}", r.operands);
        let bad = test_dictionary(&op, &eig, 1, 5, false).unwrap();
        assert!(matches!(apriori_check(&op, &eig, &sol, &data, c, &bad, &o), Err(crate::Error::Precondition(_))));
    }

    #[test]
    fn sphere_quadrature_integrates_low_moments() {
        let (op, _) = setup(0.0, 17);
        let q = sphere_quadrature(&op, 4).unwrap();
        let area: f64 = q.iter().map(|e| e.1).sum();
        let z2: f64 = q.iter().map(|(p, a)| p[2] * p[2] * a).sum();
        assert!((area - 4.0 * core::f64::consts::PI).abs() < 1e-9);
        assert!((z2 / (4.0 * core::f64::consts::PI / 3.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn poisson_weighted_surface_density_gives_one() {
        // With g = P(x₀, ·) the Martin integral is ∫ P(·, ξ) dσ(ξ) = 1 for μ = 0.
        let (op, _) = setup(0.0, 25);
        let x0 = DEFAULT_X0;
        let data = MeasureData::new().with_surface(move |p| {
            let d = crate::geometry::dist(p, &x0);
            (1.0 - 0.25) / (4.0 * core::f64::consts::PI * d * d * d)
        });
        let u = martin_part(&op, &data, &BvpOptions::default()).unwrap();
        for x in [[0.1, 0.0, 0.0], [0.2, -0.3, 0.1], [-0.5, 0.2, 0.0]] {
            let v = op.grid().interpolate(&u.values, &x).unwrap();
            assert!((v - 1.0).abs() < 0.05, "{x:?}: {v}");
        }
    }

    #[test]
    fn interior_atoms_need_room() {
        let (op, _) = setup(0.0, 17);
        let e = solve_bvp(&op, &MeasureData::interior_atom([0.0, 0.0, 0.95], 1.0), &BvpOptions::default());
        assert!(matches!(e, Err(crate::Error::Placement(_))));
        let e = solve_bvp(&op, &MeasureData::boundary_atom([0.0, 0.0, 0.5], 1.0), &BvpOptions::default());
        assert!(matches!(e, Err(crate::Error::Domain(_))));
    }
}

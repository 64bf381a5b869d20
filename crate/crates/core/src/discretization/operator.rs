//! Finite-volume discretisation of `-L_μ` in ground-state form.
//!
//! With `w = d_K^{-α₋}` one has `L_μ w = 0` for `K = {0}`, and `u = w v` turns
//! `-L_μ u = f` into `-div(w² ∇v) = w f`. The flux form gives a symmetric
//! M-matrix `S` for every `μ ≤ H²`. The operator on `u` is `A = D_w⁻¹ S D_w⁻¹`
//! against the lumped mass `diag(V)`.
//!
//! No flux is imposed across the excised ball, which selects the minimal
//! solution at `K`. Data on `K` enters through the lift `h_K η W`, whose
//! flux into the hole balances its discrete divergence on the first layer.
//! Dirichlet data on ∂Ω uses symmetric Shortley-Weller links at the exact
//! boundary crossing.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::geometry::DomainSpec;

use super::grid::{Grid, NodeClass};
use super::sparse::{pcg, CgStats, Csr, Factor, Preconditioner};

/// Smallest boundary fraction kept in a link coefficient.
const THETA_MIN: f64 = 1e-3;
pub const MAX_CG_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Solution,
    Load,
    Green,
    Martin,
    Eigenfunction,
    Heat,
    HarmonicMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMeta {
    pub kind: FieldKind,
    pub source: Option<[f64; 3]>,
    pub note: String,
}

/// Nodal values on the active nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl ScalarField {
    pub fn new(kind: FieldKind, values: Vec<f64>) -> Self {
        ScalarField { values, meta: FieldMeta { kind, source: None, note: String::new() } }
    }

    pub fn with_source(mut self, source: [f64; 3]) -> Self {
        self.meta.source = Some(source);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.meta.note = note.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `a · self + b · other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        ScalarField::new(self.meta.kind, values)
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        ScalarField { values: self.values.iter().map(|v| a * v).collect(), meta: self.meta.clone() }
    }
}

/// Prescribed values of `u/W̃` on ∂Ω.
#[derive(Clone)]
pub enum BoundaryValues {
    Constant(f64),
    Function(Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>),
    /// One value per boundary link, in link order.
    PerLink(Arc<Vec<f64>>),
}

impl core::fmt::Debug for BoundaryValues {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BoundaryValues::Constant(c) => write!(f, "Constant({c})"),
            BoundaryValues::Function(_) => f.write_str("Function(..)"),
            BoundaryValues::PerLink(v) => write!(f, "PerLink({} links)", v.len()),
        }
    }
}

/// Weighted boundary data: `u/W̃ → h` on ∂Ω and on `K`.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub on_k: f64,
    pub on_boundary: BoundaryValues,
}

#[derive(Debug, Clone)]
pub enum BoundaryMode {
    Zero,
    Weighted(BoundaryData),
}

impl BoundaryMode {
    pub fn constant(h: f64) -> Self {
        BoundaryMode::Weighted(BoundaryData { on_k: h, on_boundary: BoundaryValues::Constant(h) })
    }

    pub fn k_only(h_k: f64) -> Self {
        BoundaryMode::Weighted(BoundaryData { on_k: h_k, on_boundary: BoundaryValues::Constant(0.0) })
    }

    pub fn boundary_only(values: BoundaryValues) -> Self {
        BoundaryMode::Weighted(BoundaryData { on_k: 0.0, on_boundary: values })
    }
}

/// Link from an active node to the boundary crossing of one stencil arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLink {
    pub row: usize,
    pub coeff: f64,
    pub point: [f64; 3],
    /// Ground state at the crossing point.
    pub ground: f64,
}

#[derive(Debug)]
struct Core {
    spec: DomainSpec,
    grid: Arc<Grid>,
    stiffness: Csr,
    factor: Factor,
    ground: Vec<f64>,
    mass: Vec<f64>,
    weighted_mass: Vec<f64>,
    links: Vec<BoundaryLink>,
    hole_adjacent: Vec<bool>,
}

/// Assembled `-L_μ` on a grid, together with its boundary mode.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    core: Arc<Core>,
    mode: BoundaryMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub field: ScalarField,
    pub stats: CgStats,
}

pub fn assemble(spec: &DomainSpec, grid: Arc<Grid>, mode: BoundaryMode) -> Result<LinearOperator> {
    LinearOperator::assemble(spec, grid, mode)
}

impl LinearOperator {
    pub fn assemble(spec: &DomainSpec, grid: Arc<Grid>, mode: BoundaryMode) -> Result<Self> {
        if grid.spec().kind() != spec.kind() || grid.spec().singular() != spec.singular() {
            bail!(Parameter, "grid was built for a different domain");
        }
        let am = spec.alpha_minus();
        let w_at = |p: &[f64; 3]| libm::pow(spec.d_k(p), -am);
        let w2_at = |p: &[f64; 3]| libm::pow(spec.d_k(p), -2.0 * am);
        let n = grid.len();
        let dims = grid.dims();
        let strides = [1usize, dims[0], dims[0] * dims[1]];
        let axes = grid.axes();
        let dual = grid.dual_widths();
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(7); n];
        let mut diag = vec![0.0; n];
        let mut links = Vec::new();
        let mut hole_adjacent = vec![false; n];
        let mut ground = vec![0.0; n];
        for i in 0..n {
            let flat = grid.flat_id(i);
            let ijk = grid.ijk(flat);
            let p = grid.point(i);
            ground[i] = w_at(&p);
            for a in 0..3 {
                let b = (a + 1) % 3;
                let c = (a + 2) % 3;
                let area = dual[b][ijk[b]] * dual[c][ijk[c]];
                for dir in [-1i64, 1] {
                    let j = ijk[a] as i64 + dir;
                    if j < 0 || j as usize >= dims[a] {
                        continue;
                    }
                    let nflat = (flat as i64 + dir * strides[a] as i64) as usize;
                    let h = (axes[a][j as usize] - axes[a][ijk[a]]).abs();
                    let mut q = p;
                    q[a] = axes[a][j as usize];
                    match grid.active_index(nflat) {
                        Some(k) => {
                            if k > i {
                                let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0];
                                let coeff = w2_at(&mid) * area / h;
                                rows[i].push((k as u32, -coeff));
                                rows[k].push((i as u32, -coeff));
                                diag[i] += coeff;
                                diag[k] += coeff;
                            }
                        }
                        None => {
                            if spec.d_k(&q) < grid.eps_k() && spec.signed_d(&q) > 0.0 {
                                hole_adjacent[i] = true;
                                continue;
                            }
                            let t = spec.boundary_crossing(&p, &q).unwrap_or(1.0);
                            let theta = t.max(THETA_MIN);
                            let mut xb = p;
                            xb[a] = p[a] + t * (q[a] - p[a]);
                            let mid = [(p[0] + xb[0]) / 2.0, (p[1] + xb[1]) / 2.0, (p[2] + xb[2]) / 2.0];
                            let coeff = w2_at(&mid) * area / (theta * h);
                            diag[i] += coeff;
                            links.push(BoundaryLink { row: i, coeff, point: xb, ground: w_at(&xb) });
                        }
                    }
                }
            }
        }
        for i in 0..n {
            rows[i].push((i as u32, diag[i]));
        }
        let stiffness = Csr::from_rows(rows);
        let factor = Factor::new(&stiffness, Preconditioner::Ic0);
        let mass = grid.volumes().to_vec();
        let weighted_mass = mass.iter().zip(&ground).map(|(v, w)| v * w * w).collect();
        Ok(LinearOperator {
            core: Arc::new(Core {
                spec: spec.clone(),
                grid,
                stiffness,
                factor,
                ground,
                mass,
                weighted_mass,
                links,
                hole_adjacent,
            }),
            mode,
        })
    }

    /// Same assembled matrix with a different boundary mode.
    pub fn with_mode(&self, mode: BoundaryMode) -> LinearOperator {
        LinearOperator { core: self.core.clone(), mode }
    }

    pub fn mode(&self) -> &BoundaryMode {
        &self.mode
    }
    pub fn spec(&self) -> &DomainSpec {
        &self.core.spec
    }
    pub fn mu(&self) -> f64 {
        self.core.spec.mu()
    }
    pub fn grid(&self) -> &Arc<Grid> {
        &self.core.grid
    }
    pub fn len(&self) -> usize {
        self.core.ground.len()
    }
    pub fn is_empty(&self) -> bool {
        self.core.ground.is_empty()
    }
    /// Symmetric matrix `S` acting on `v = u/w`.
    pub fn stiffness(&self) -> &Csr {
        &self.core.stiffness
    }
    pub(crate) fn factor(&self) -> &Factor {
        &self.core.factor
    }
    /// Ground state `w` at the active nodes.
    pub fn ground(&self) -> &[f64] {
        &self.core.ground
    }
    /// Lumped mass `V`.
    pub fn mass(&self) -> &[f64] {
        &self.core.mass
    }
    /// `V w²`, the mass matrix for `v`.
    pub fn weighted_mass(&self) -> &[f64] {
        &self.core.weighted_mass
    }
    pub fn links(&self) -> &[BoundaryLink] {
        &self.core.links
    }
    pub fn hole_adjacent(&self) -> &[bool] {
        &self.core.hole_adjacent
    }

    /// Entry `A_ij = S_ij/(w_i w_j)` of the operator on `u`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.core.stiffness.get(i, j) / (self.core.ground[i] * self.core.ground[j])
    }

    /// `A u` with homogeneous boundary data.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let w = &self.core.ground;
        let v: Vec<f64> = u.iter().zip(w).map(|(a, b)| a / b).collect();
        let sv = self.core.stiffness.mul(&v);
        sv.iter().zip(w).map(|(a, b)| a / b).collect()
    }

    /// Prescribed `h · W̃` at a collar node, `None` elsewhere.
    pub fn collar_value(&self, i: usize) -> Option<f64> {
        let BoundaryMode::Weighted(data) = &self.mode else {
            return match self.core.grid.class(i) {
                NodeClass::Interior | NodeClass::Excluded => None,
                _ => Some(0.0),
            };
        };
        let spec = &self.core.spec;
        let p = self.core.grid.point(i);
        match self.core.grid.class(i) {
            NodeClass::ExcisionCollar => Some(data.on_k * spec.weights().w_tilde(spec.d_k(&p))),
            NodeClass::BoundaryCollar => {
                let link = self.core.links.iter().position(|l| l.row == i)?;
                Some(self.link_value(data, link) * spec.weights().w_tilde(spec.d_k(&p)))
            }
            _ => None,
        }
    }

    fn link_value(&self, data: &BoundaryData, link: usize) -> f64 {
        match &data.on_boundary {
            BoundaryValues::Constant(c) => *c,
            BoundaryValues::Function(f) => f(&self.core.links[link].point),
            BoundaryValues::PerLink(v) => v[link],
        }
    }

    /// Lift `h_K η W / w` carrying the data on `K`, in `v` variables.
    fn lift(&self, h_k: f64) -> Vec<f64> {
        let spec = &self.core.spec;
        let weights = spec.weights();
        (0..self.len())
            .map(|i| {
                let r = spec.d_k(&self.core.grid.point(i));
                let eta = weights.eta(r);
                if eta == 0.0 {
                    0.0
                } else {
                    h_k * eta * weights.w(r) / self.core.ground[i]
                }
            })
            .collect()
    }

    /// Right-hand side for `v` and the lift, given `u`-form integrated loads.
    pub(crate) fn rhs_v(&self, load: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n = self.len();
        if load.len() != n {
            bail!(Parameter, "load has {} entries, operator has {n}", load.len());
        }
        let mut b: Vec<f64> = load.iter().zip(&self.core.ground).map(|(f, w)| f * w).collect();
        let BoundaryMode::Weighted(data) = &self.mode else {
            return Ok((b, None));
        };
        let weights = self.core.spec.weights();
        for (k, link) in self.core.links.iter().enumerate() {
            let h = self.link_value(data, k);
            if h != 0.0 {
                let wt = weights.w_tilde(self.core.spec.d_k(&link.point));
                b[link.row] += link.coeff * h * wt / link.ground;
            }
        }
        if data.on_k == 0.0 {
            return Ok((b, None));
        }
        let lift = self.lift(data.on_k);
        let s_lift = self.core.stiffness.mul(&lift);
        for i in 0..n {
            if !self.core.hole_adjacent[i] {
                b[i] -= s_lift[i];
            }
        }
        Ok((b, Some(lift)))
    }

    /// Solves `S v = b` in ground-state variables.
    pub fn solve_v(&self, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<(Vec<f64>, CgStats)> {
        if !(tol > 0.0) {
            bail!(Parameter, "solver tolerance must be positive");
        }
        let mut v = match x0 {
            Some(x) => x.to_vec(),
            None => vec![0.0; self.len()],
        };
        let stats = pcg(&self.core.stiffness, &self.core.factor, b, &mut v, tol, MAX_CG_ITER)?;
        Ok((v, stats))
    }

    /// Solves `A u = load + boundary terms` for `u`-form integrated loads.
    pub fn solve_load(&self, load: &[f64], tol: f64) -> Result<Solved> {
        let (b, lift) = self.rhs_v(load)?;
        let (mut v, stats) = self.solve_v(&b, None, tol)?;
        if let Some(l) = lift {
            for (a, b) in v.iter_mut().zip(l) {
                *a += b;
            }
        }
        let values = v.iter().zip(&self.core.ground).map(|(a, w)| a * w).collect();
        Ok(Solved { field: ScalarField::new(FieldKind::Solution, values), stats })
    }

    /// `u`-form integrated load of a density: `V f`.
    pub fn integrate_density(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.core.mass).map(|(a, v)| a * v).collect()
    }

    /// `∫ a b dx` with the lumped mass.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.core.mass).map(|((x, y), v)| x * y * v).sum()
    }

    pub fn describe(&self) -> String {
        format!(
            "{} unknowns, {} nonzeros, {} boundary links, μ = {}",
            self.len(),
            self.core.stiffness.nnz(),
            self.core.links.len(),
            self.mu()
        )
    }
}

/// Solves `-L_μ u = f` for a nodal density `f` with the operator's boundary data.
pub fn solve(op: &LinearOperator, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    if rhs.len() != op.len() {
        bail!(Parameter, "right-hand side length {} does not match {} unknowns", rhs.len(), op.len());
    }
    let load = op.integrate_density(&rhs.values);
    Ok(op.solve_load(&load, tol)?.field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::grid::build_grid;

    fn op(mu: f64, n: usize, mode: BoundaryMode) -> LinearOperator {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let grid = Arc::new(build_grid(&spec, n, 0.8, 0.02).unwrap());
        LinearOperator::assemble(&spec, grid, mode).unwrap()
    }

    fn radius(p: &[f64; 3]) -> f64 {
        libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    }

    #[test]
    fn symmetric_m_matrix_for_every_mu() {
        for mu in [-0.5, 0.0, 0.16, 0.25] {
            let a = op(mu, 17, BoundaryMode::Zero);
            assert_eq!(a.stiffness().asymmetry(), 0.0);
            let s = a.stiffness();
            for i in 0..a.len() {
                for p in s.row_ptr[i]..s.row_ptr[i + 1] {
                    let j = s.col[p] as usize;
                    if i == j {
                        assert!(a.entry(i, j) > 0.0);
                    } else {
                        assert!(a.entry(i, j) <= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let a = op(0.16, 17, BoundaryMode::Zero);
        let s = a.solve_load(&vec![0.0; a.len()], 1e-10).unwrap();
        assert!(s.field.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn torsion_function_of_the_ball() {
        let a = op(0.0, 33, BoundaryMode::Zero);
        let f = ScalarField::new(FieldKind::Load, vec![1.0; a.len()]);
        let u = solve(&a, &f, 1e-10).unwrap();
        let grid = a.grid();
        for x in [[0.3, 0.0, 0.0], [0.0, -0.5, 0.2], [0.1, 0.1, 0.6]] {
            let i = grid.nearest(&x).unwrap();
            let p = grid.point(i);
            let r = radius(&p);
            let exact = (1.0 - r * r) / 6.0;
            assert!((u.values[i] / exact - 1.0).abs() < 0.01, "{} vs {exact}", u.values[i]);
        }
    }

    #[test]
    fn positive_load_gives_positive_solution() {
        let a = op(0.16, 17, BoundaryMode::Zero);
        let am = a.spec().alpha_minus();
        let grid = a.grid().clone();
        let f: Vec<f64> = (0..a.len())
            .map(|i| {
                let r = radius(&grid.point(i));
                (1.0 - r).max(0.0) * libm::pow(r, -am)
            })
            .collect();
        let u = solve(&a, &ScalarField::new(FieldKind::Load, f), 1e-10).unwrap();
        assert!(u.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn unit_data_reproduces_singular_solution() {
        // u/W̃ = 1 on ∂Ω ∪ K is solved by |x|^{-α₊}.
        let a = op(0.16, 33, BoundaryMode::constant(1.0));
        let u = a.solve_load(&vec![0.0; a.len()], 1e-10).unwrap().field;
        let ap = a.spec().alpha_plus();
        for i in 0..a.len() {
            let r = radius(&a.grid().point(i));
            let exact = libm::pow(r, -ap);
            assert!((u.values[i] / exact - 1.0).abs() < 0.05, "r = {r}: {} vs {exact}", u.values[i]);
        }
    }

    #[test]
    fn critical_collar_value() {
        let a = op(0.25, 17, BoundaryMode::k_only(2.0));
        let grid = a.grid().clone();
        let i = (0..a.len()).find(|&i| grid.class(i) == NodeClass::ExcisionCollar).unwrap();
        let d = radius(&grid.point(i));
        let expect = 2.0 * libm::pow(d, -0.5) * libm::fabs(libm::log(d));
        let got = a.collar_value(i).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
        let spec = DomainSpec::unit_ball(0.25).unwrap();
        let at_eps = spec.weights().w_tilde(0.02);
        assert!((at_eps - libm::pow(0.02, -0.5) * libm::fabs(libm::log(0.02))).abs() < 1e-12);
    }

    #[test]
    fn boundary_links_sit_on_the_sphere() {
        let a = op(0.0, 17, BoundaryMode::Zero);
        assert!(!a.links().is_empty());
        for l in a.links() {
            assert!((radius(&l.point) - 1.0).abs() < 1e-9);
            assert!(l.coeff > 0.0);
        }
    }
}

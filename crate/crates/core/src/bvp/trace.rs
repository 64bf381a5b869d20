//! Boundary traces along the exhaustion `O_n = {d > δ_n} \ {d_K ≤ δ_n}`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretization::sparse::{pcg, Csr, Factor, Preconditioner};
use crate::discretization::{BoundaryData, BoundaryMode, BoundaryValues, LinearOperator, ScalarField, MAX_CG_ITER};
use crate::error::{bail, Result};
use crate::geometry::dist;
use crate::kernels::KERNEL_TOL;

/// Continuous functions the trace functional is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceTest {
    Constant,
    Coordinate(usize),
    RadiusSquared,
    /// `(1 - |x - c|²/ρ²)₊²`.
    Bump { center: [f64; 3], radius: f64 },
}

impl TraceTest {
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        match *self {
            TraceTest::Constant => 1.0,
            TraceTest::Coordinate(a) => x[a],
            TraceTest::RadiusSquared => x[0] * x[0] + x[1] * x[1] + x[2] * x[2],
            TraceTest::Bump { center, radius } => {
                let d = dist(x, &center) / radius;
                let t = (1.0 - d * d).max(0.0);
                t * t
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TraceTest::Constant => "1".into(),
            TraceTest::Coordinate(a) => format!("x{}", a + 1),
            TraceTest::RadiusSquared => "|x|^2".into(),
            TraceTest::Bump { center, radius } => {
                format!("bump({:.3},{:.3},{:.3};{radius})", center[0], center[1], center[2])
            }
        }
    }
}

/// Low-order polynomials and a bump of radius 1/2 at `center`.
pub fn default_dictionary(center: [f64; 3]) -> Vec<TraceTest> {
    vec![
        TraceTest::Constant,
        TraceTest::Coordinate(0),
        TraceTest::Coordinate(1),
        TraceTest::Coordinate(2),
        TraceTest::RadiusSquared,
        TraceTest::Bump { center, radius: 0.5 },
    ]
}

/// `δ_n = 1/(n + 4)`.
pub fn shell_delta(n: usize) -> f64 {
    1.0 / (n as f64 + 4.0)
}

/// One member of the exhaustion with its discrete `L_μ`-harmonic measure
/// `ω_{O_n}^{x₀}` on the layer of nodes just outside `O_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub n: usize,
    pub delta: f64,
    pub unknowns: usize,
    pub layer: Vec<usize>,
    pub omega: Vec<f64>,
}

impl Shell {
    /// `∫_{∂O_n} φ u dω_{O_n}^{x₀}`.
    pub fn functional(&self, op: &LinearOperator, u: &[f64], test: &TraceTest) -> f64 {
        let grid = op.grid();
        self.layer.iter().zip(&self.omega).map(|(&j, w)| w * test.eval(&grid.point(j)) * u[j]).sum()
    }

    pub fn mass(&self) -> f64 {
        self.omega.iter().sum()
    }
}

/// Builds `O_n` on the grid and its harmonic measure seen from `x₀`.
pub fn exhaustion_shell(op: &LinearOperator, n: usize, x0: &[f64; 3]) -> Result<Shell> {
    let spec = op.spec();
    let grid = op.grid();
    let delta = shell_delta(n);
    if delta < 2.0 * grid.eps_k() {
        bail!(Resolution, "shell δ = {delta} is below twice the excision radius {}", grid.eps_k());
    }
    let len = op.len();
    let inside: Vec<bool> = (0..len)
        .map(|i| {
            let p = grid.point(i);
            spec.signed_d(&p) > delta && spec.d_k(&p) > delta
        })
        .collect();
    let mut map = vec![u32::MAX; len];
    let mut ids = Vec::new();
    for i in 0..len {
        if inside[i] {
            map[i] = ids.len() as u32;
            ids.push(i);
        }
    }
    let s = op.stiffness();
    let mut rows = Vec::with_capacity(ids.len());
    let mut is_layer = vec![false; len];
    for &i in &ids {
        let mut r = Vec::new();
        for p in s.row_ptr[i]..s.row_ptr[i + 1] {
            let j = s.col[p] as usize;
            if inside[j] {
                r.push((map[j], s.val[p]));
            } else {
                is_layer[j] = true;
            }
        }
        rows.push(r);
    }
    let layer: Vec<usize> = (0..len).filter(|&j| is_layer[j]).collect();
    if layer.is_empty() || ids.is_empty() {
        bail!(Resolution, "shell δ = {delta} has no interior or no boundary layer");
    }
    let width = layer.iter().map(|&j| grid.local_width(j)).fold(0.0, f64::max);
    if delta < 2.0 * width {
        bail!(Resolution, "shell δ = {delta} is below two cells ({width}) at its boundary");
    }
    let ground = op.ground();
    let weights = grid.interpolation_weights(x0);
    if weights.is_empty() || weights.iter().any(|&(i, _)| !inside[i]) {
        bail!(Placement, "basis point {:?} is not inside the shell δ = {delta}", x0);
    }
    let a = Csr::from_rows(rows);
    let factor = Factor::new(&a, Preconditioner::Ic0);
    let mut b = vec![0.0; ids.len()];
    for (i, c) in weights {
        b[map[i] as usize] = c * ground[i];
    }
    let mut z = vec![0.0; ids.len()];
    pcg(&a, &factor, &b, &mut z, KERNEL_TOL, MAX_CG_ITER)?;
    let mut omega = vec![0.0; len];
    for (k, &i) in ids.iter().enumerate() {
        for p in s.row_ptr[i]..s.row_ptr[i + 1] {
            let j = s.col[p] as usize;
            if !inside[j] {
                omega[j] -= z[k] * s.val[p] / ground[j];
            }
        }
    }
    let omega = layer.iter().map(|&j| omega[j]).collect();
    Ok(Shell { n, delta, unknowns: ids.len(), layer, omega })
}

/// Every resolvable shell with `n ≤ n_max`, finest last. Fails below `min_shells`.
pub fn canonical_exhaustion(op: &LinearOperator, x0: &[f64; 3], n_max: usize, min_shells: usize) -> Result<Vec<Shell>> {
    let mut shells = Vec::new();
    for n in 1..=n_max {
        match exhaustion_shell(op, n, x0) {
            Ok(s) => shells.push(s),
            Err(crate::Error::Resolution(_)) => break,
            Err(e) => return Err(e),
        }
    }
    if shells.len() < min_shells {
        bail!(Resolution, "only {} resolvable exhaustion shells, need {min_shells}", shells.len());
    }
    Ok(shells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub deltas: Vec<f64>,
    pub names: Vec<String>,
    /// `values[t][s]`: functional of test `t` on shell `s`.
    pub values: Vec<Vec<f64>>,
    /// Least-squares polynomial in `δ` through every shell, read at `δ = 0`:
    /// quadratic from four shells on, linear below.
    pub limits: Vec<f64>,
}

impl TraceReport {
    pub fn last(&self, t: usize) -> f64 {
        *self.values[t].last().unwrap_or(&f64::NAN)
    }

    /// Largest `|limit - expected| / scale` over the dictionary.
    pub fn max_error(&self, expected: &[f64], scale: f64) -> f64 {
        self.limits.iter().zip(expected).map(|(l, e)| (l - e).abs() / scale).fold(0.0, f64::max)
    }
}

/// Trace functionals of `u` on every shell, with limits as `δ → 0`.
pub fn boundary_trace(op: &LinearOperator, u: &ScalarField, shells: &[Shell], dictionary: &[TraceTest]) -> Result<TraceReport> {
    if shells.len() < 3 {
        bail!(Resolution, "boundary traces need at least three shells, got {}", shells.len());
    }
    if u.len() != op.len() {
        bail!(Parameter, "field length does not match the operator");
    }
    let deltas: Vec<f64> = shells.iter().map(|s| s.delta).collect();
    let values: Vec<Vec<f64>> =
        dictionary.iter().map(|t| shells.iter().map(|s| s.functional(op, &u.values, t)).collect()).collect();
    let degree = if shells.len() >= 4 { 2 } else { 1 };
    let limits = values.iter().map(|v| polynomial_intercept(&deltas, v, degree)).collect();
    Ok(TraceReport { deltas, names: dictionary.iter().map(|t| t.name()).collect(), values, limits })
}

/// Constant term of the least-squares polynomial of the given degree (≤ 2).
fn polynomial_intercept(x: &[f64], y: &[f64], degree: usize) -> f64 {
    let m = degree + 1;
    let mut a = [[0.0f64; 4]; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let pw = [1.0, xi, xi * xi];
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][3] += pw[r] * yi;
        }
    }
    for c in 0..m {
        let piv = (c..m).max_by(|&p, &q| a[p][c].abs().partial_cmp(&a[q][c].abs()).unwrap()).unwrap();
        a.swap(c, piv);
        if a[c][c] == 0.0 {
            return y.iter().sum::<f64>() / y.len() as f64;
        }
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..4 {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    a[0][3] / a[0][0]
}

/// `∫ φ dω^{x₀}`: the weighted solution with data `φ` on ∂Ω ∪ K, read at `x₀`.
pub fn harmonic_functional(op: &LinearOperator, test: &TraceTest, x0: &[f64; 3]) -> Result<f64> {
    let t = *test;
    let data = BoundaryData {
        on_k: t.eval(&[0.0; 3]),
        on_boundary: BoundaryValues::Function(Arc::new(move |p: &[f64; 3]| t.eval(p))),
    };
    let u = op.with_mode(BoundaryMode::Weighted(data)).solve_load(&vec![0.0; op.len()], KERNEL_TOL)?.field;
    match op.grid().interpolate(&u.values, x0) {
        Some(v) => Ok(v),
        None => bail!(Placement, "basis point {:?} is off the grid", x0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_recovers_polynomials() {
        let x = [0.2, 0.15, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|t| 3.0 - 2.0 * t + 5.0 * t * t).collect();
        assert!((polynomial_intercept(&x, &y, 2) - 3.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|t| 1.0 + t).collect();
        assert!((polynomial_intercept(&x[..3], &y[..3], 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dictionary_is_bounded_by_one_on_the_ball() {
        for t in default_dictionary([0.0, 0.0, 1.0]) {
            for p in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0; 3], [0.3, -0.5, 0.6]] {
                assert!(t.eval(&p).abs() <= 1.0 + 1e-12);
            }
        }
    }
}

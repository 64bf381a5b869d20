//! Graded tensor grids on `Ω \ K` for `N = 3`, `K = {0}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::geometry::{DomainSpec, SingularSet};

/// Cap on geometric grading levels per attractor.
pub const MAX_LEVELS: usize = 40;
/// Nodes closer than this to ∂Ω are treated as boundary points.
const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    /// Active node with a stencil neighbour outside Ω.
    BoundaryCollar,
    /// Active node with a stencil neighbour inside the excised ball `d_K < ε_K`.
    ExcisionCollar,
    Excluded,
}

/// Extra refinement toward a point, used to resolve kernels at a pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Focus {
    pub point: [f64; 3],
    pub min_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    pub n_base: usize,
    pub grading_ratio: f64,
    pub eps_k: f64,
    pub focus: Vec<Focus>,
}

impl GridOptions {
    pub fn new(n_base: usize, grading_ratio: f64, eps_k: f64) -> Self {
        GridOptions { n_base, grading_ratio, eps_k, focus: Vec::new() }
    }

    pub fn with_focus(mut self, point: [f64; 3], min_width: f64) -> Self {
        self.focus.push(Focus { point, min_width });
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: DomainSpec,
    options: GridOptions,
    axes: [Vec<f64>; 3],
    dual: [Vec<f64>; 3],
    class: Vec<NodeClass>,
    index: Vec<u32>,
    active: Vec<u32>,
    volume: Vec<f64>,
    min_width: f64,
}

const NONE: u32 = u32::MAX;

/// Builds the graded grid with the given base resolution and excision radius.
pub fn build_grid(spec: &DomainSpec, n_base: usize, grading_ratio: f64, eps_k: f64) -> Result<Grid> {
    Grid::new(spec, GridOptions::new(n_base, grading_ratio, eps_k))
}

struct Attractor {
    at: f64,
    width: f64,
}

/// Geometric widths `w, w/q, w/q², ...` below `h0`, smallest first.
fn graded_widths(width: f64, ratio: f64, h0: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if width >= h0 || ratio >= 1.0 {
        return Ok(out);
    }
    let mut w = width;
    while w < h0 * ratio * (1.0 + 1e-12) {
        out.push(w);
        if out.len() > MAX_LEVELS {
            bail!(Resolution, "grading from width {width} to {h0} needs more than {MAX_LEVELS} levels");
        }
        w /= ratio;
    }
    Ok(out)
}

/// Splits every primal cell among its active corners. Cells cut by ∂Ω are
/// sampled and each sample goes to the nearest active corner.
fn cell_volumes(spec: &DomainSpec, axes: &[Vec<f64>; 3], inside: &[bool], index: &[u32], n: usize) -> Vec<f64> {
    const M: usize = 6;
    let dims = [axes[0].len(), axes[1].len(), axes[2].len()];
    let mut volume = vec![0.0; n];
    for k in 0..dims[2] - 1 {
        for j in 0..dims[1] - 1 {
            for i in 0..dims[0] - 1 {
                let lo = [axes[0][i], axes[1][j], axes[2][k]];
                let hi = [axes[0][i + 1], axes[1][j + 1], axes[2][k + 1]];
                let mut corners = [(usize::MAX, [0.0; 3]); 8];
                let mut n_in = 0;
                let mut n_out = 0;
                for (c, corner) in corners.iter_mut().enumerate() {
                    let ijk = [i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)];
                    let id = ijk[0] + dims[0] * (ijk[1] + dims[1] * ijk[2]);
                    let p = [axes[0][ijk[0]], axes[1][ijk[1]], axes[2][ijk[2]]];
                    if inside[id] {
                        *corner = (index[id] as usize, p);
                        n_in += 1;
                    } else if spec.signed_d(&p) <= BOUNDARY_TOL {
                        n_out += 1;
                    }
                }
                if n_in == 0 {
                    continue;
                }
                let cell = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
                if n_out == 0 {
                    for (a, _) in corners.iter().filter(|c| c.0 != usize::MAX) {
                        volume[*a] += cell / 8.0;
                    }
                    continue;
                }
                let h = [(hi[0] - lo[0]) / M as f64, (hi[1] - lo[1]) / M as f64, (hi[2] - lo[2]) / M as f64];
                let piece = h[0] * h[1] * h[2];
                for kk in 0..M {
                    for jj in 0..M {
                        for ii in 0..M {
                            let q = [
                                lo[0] + (ii as f64 + 0.5) * h[0],
                                lo[1] + (jj as f64 + 0.5) * h[1],
                                lo[2] + (kk as f64 + 0.5) * h[2],
                            ];
                            if spec.signed_d(&q) <= 0.0 {
                                continue;
                            }
                            let mut best = (f64::INFINITY, usize::MAX);
                            for (a, p) in corners.iter().filter(|c| c.0 != usize::MAX) {
                                let d = sq_dist(p, &q);
                                if d < best.0 {
                                    best = (d, *a);
                                }
                            }
                            volume[best.1] += piece;
                        }
                    }
                }
            }
        }
    }
    volume
}

fn build_axis(lo: f64, hi: f64, h0: f64, ratio: f64, attractors: &mut Vec<Attractor>) -> Result<Vec<f64>> {
    attractors.sort_by(|a, b| a.at.partial_cmp(&b.at).unwrap());
    let mut merged: Vec<Attractor> = Vec::new();
    for a in attractors.drain(..) {
        if let Some(last) = merged.last_mut() {
            if (a.at - last.at).abs() < 1e-12 {
                last.width = last.width.min(a.width);
                continue;
            }
        }
        merged.push(a);
    }
    // Breakpoints with an optional grading width at each.
    let mut pts: Vec<(f64, Option<f64>)> = Vec::new();
    if merged.first().map_or(true, |a| a.at - lo > 1e-12) {
        pts.push((lo, None));
    }
    for a in &merged {
        pts.push((a.at.clamp(lo, hi), Some(a.width)));
    }
    if merged.last().map_or(true, |a| hi - a.at > 1e-12) {
        pts.push((hi, None));
    }
    let mut coords = vec![pts[0].0];
    for seg in pts.windows(2) {
        let (a, wa) = seg[0];
        let (b, wb) = seg[1];
        let len = b - a;
        let left = match wa {
            Some(w) => graded_widths(w, ratio, h0)?,
            None => Vec::new(),
        };
        let right = match wb {
            Some(w) => graded_widths(w, ratio, h0)?,
            None => Vec::new(),
        };
        let graded: f64 = left.iter().sum::<f64>() + right.iter().sum::<f64>();
        let middle = len - graded;
        if middle < -1e-12 {
            bail!(Resolution, "attractors at {a} and {b} are too close for the requested grading");
        }
        let m = libm::round(middle / h0) as usize;
        let mut widths: Vec<f64> = left.clone();
        if m >= 1 {
            let w = middle / m as f64;
            widths.extend(core::iter::repeat(w).take(m));
        } else if !widths.is_empty() || !right.is_empty() {
            // Absorb the short remainder by stretching the graded cells.
            let scale = len / graded;
            for w in widths.iter_mut() {
                *w *= scale;
            }
            let mut r: Vec<f64> = right.iter().map(|w| w * scale).collect();
            r.reverse();
            widths.extend(r);
            push_widths(&mut coords, a, b, &widths);
            continue;
        } else {
            widths.push(len);
        }
        widths.extend(right.iter().rev());
        push_widths(&mut coords, a, b, &widths);
    }
    Ok(coords)
}

fn push_widths(coords: &mut Vec<f64>, a: f64, b: f64, widths: &[f64]) {
    let mut x = a;
    for (i, w) in widths.iter().enumerate() {
        x += w;
        coords.push(if i + 1 == widths.len() { b } else { x });
    }
}

impl Grid {
    pub fn new(spec: &DomainSpec, options: GridOptions) -> Result<Self> {
        if spec.dim() != 3 || *spec.singular() != SingularSet::Origin {
            bail!(DomainKind, "grids are built for N = 3 with K = {{0}}");
        }
        let GridOptions { n_base, grading_ratio: ratio, eps_k, .. } = options;
        if n_base < 17 {
            bail!(Parameter, "n_base = {n_base} must be at least 17");
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            bail!(Parameter, "grading ratio {ratio} must lie in (0, 1]");
        }
        if !(eps_k > 0.0) {
            bail!(Parameter, "excision radius must be positive");
        }
        let bbox = spec.bounding_box();
        let extent = bbox.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
        let h0 = extent / (n_base - 1) as f64;
        // Cells adjacent to K are at most 0.45 ε_K wide so that ε_K ≥ 2 h_min.
        let k_width = 0.45 * eps_k;
        let mut axes: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (a, axis) in axes.iter_mut().enumerate() {
            let (lo, hi) = bbox[a];
            let mut att = vec![Attractor { at: 0.0, width: k_width }];
            for f in &options.focus {
                att.push(Attractor { at: f.point[a], width: f.min_width });
            }
            *axis = build_axis(lo, hi, h0, ratio, &mut att)?;
        }
        let min_width = axes
            .iter()
            .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
            .fold(f64::INFINITY, f64::min);
        let near_k = axes
            .iter()
            .map(|c| {
                let i = c.iter().position(|&x| x == 0.0).unwrap_or(0);
                let l = if i > 0 { c[i] - c[i - 1] } else { f64::INFINITY };
                let r = if i + 1 < c.len() { c[i + 1] - c[i] } else { f64::INFINITY };
                l.min(r)
            })
            .fold(f64::INFINITY, f64::min);
        if eps_k < 2.0 * near_k {
            bail!(Resolution, "ε_K = {eps_k} is smaller than two cells ({near_k}) at K");
        }
        let dual: [Vec<f64>; 3] = core::array::from_fn(|a| {
            let c = &axes[a];
            (0..c.len())
                .map(|i| {
                    let l = if i > 0 { c[i] - c[i - 1] } else { 0.0 };
                    let r = if i + 1 < c.len() { c[i + 1] - c[i] } else { 0.0 };
                    0.5 * (l + r)
                })
                .collect()
        });
        let dims = [axes[0].len(), axes[1].len(), axes[2].len()];
        let total = dims[0] * dims[1] * dims[2];
        let mut inside = vec![false; total];
        let mut hole = vec![false; total];
        for kz in 0..dims[2] {
            for jy in 0..dims[1] {
                for ix in 0..dims[0] {
                    let p = [axes[0][ix], axes[1][jy], axes[2][kz]];
                    let id = ix + dims[0] * (jy + dims[1] * kz);
                    let d = spec.signed_d(&p);
                    if d > BOUNDARY_TOL {
                        if spec.d_k(&p) < eps_k {
                            hole[id] = true;
                        } else {
                            inside[id] = true;
                        }
                    }
                }
            }
        }
        let mut class = vec![NodeClass::Excluded; total];
        let mut index = vec![NONE; total];
        let mut active = Vec::new();
        let strides = [1, dims[0], dims[0] * dims[1]];
        for id in 0..total {
            if !inside[id] {
                continue;
            }
            let ijk = [id % dims[0], (id / dims[0]) % dims[1], id / (dims[0] * dims[1])];
            let mut c = NodeClass::Interior;
            for a in 0..3 {
                for dir in [-1i64, 1] {
                    let j = ijk[a] as i64 + dir;
                    if j < 0 || j as usize >= dims[a] {
                        c = NodeClass::BoundaryCollar;
                        continue;
                    }
                    let n = (id as i64 + dir * strides[a] as i64) as usize;
                    if hole[n] {
                        c = NodeClass::ExcisionCollar;
                    } else if !inside[n] && c == NodeClass::Interior {
                        c = NodeClass::BoundaryCollar;
                    }
                }
            }
            class[id] = c;
            index[id] = active.len() as u32;
            active.push(id as u32);
        }
        let volume = cell_volumes(spec, &axes, &inside, &index, active.len());
        if active.is_empty() {
            bail!(Resolution, "grid has no active nodes");
        }
        Ok(Grid { spec: spec.clone(), options, axes, dual, class, index, active, volume, min_width })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }
    pub fn options(&self) -> &GridOptions {
        &self.options
    }
    pub fn eps_k(&self) -> f64 {
        self.options.eps_k
    }
    pub fn axes(&self) -> &[Vec<f64>; 3] {
        &self.axes
    }
    pub fn dual_widths(&self) -> &[Vec<f64>; 3] {
        &self.dual
    }
    pub fn dims(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }
    /// Number of active (unknown-carrying) nodes.
    pub fn len(&self) -> usize {
        self.active.len()
    }
    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
    pub fn total_nodes(&self) -> usize {
        self.class.len()
    }
    pub fn min_width(&self) -> f64 {
        self.min_width
    }
    /// Dual-cell volumes of the active nodes.
    pub fn volumes(&self) -> &[f64] {
        &self.volume
    }

    pub fn flat_id(&self, i: usize) -> usize {
        self.active[i] as usize
    }

    pub fn ijk(&self, flat: usize) -> [usize; 3] {
        let d = self.dims();
        [flat % d[0], (flat / d[0]) % d[1], flat / (d[0] * d[1])]
    }

    pub fn flat(&self, ijk: [usize; 3]) -> usize {
        let d = self.dims();
        ijk[0] + d[0] * (ijk[1] + d[1] * ijk[2])
    }

    /// Active index of a flat node id.
    pub fn active_index(&self, flat: usize) -> Option<usize> {
        match self.index[flat] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    pub fn class_of_flat(&self, flat: usize) -> NodeClass {
        self.class[flat]
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.class[self.active[i] as usize]
    }

    pub fn point_of_flat(&self, flat: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(flat);
        [self.axes[0][i], self.axes[1][j], self.axes[2][k]]
    }

    /// Coordinates of active node `i`.
    pub fn point(&self, i: usize) -> [f64; 3] {
        self.point_of_flat(self.active[i] as usize)
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.active.iter().filter(|&&id| self.class[id as usize] == class).count()
    }

    /// Largest cell width next to active node `i`.
    pub fn local_width(&self, i: usize) -> f64 {
        let ijk = self.ijk(self.active[i] as usize);
        let mut w: f64 = 0.0;
        for a in 0..3 {
            let c = &self.axes[a];
            if ijk[a] > 0 {
                w = w.max(c[ijk[a]] - c[ijk[a] - 1]);
            }
            if ijk[a] + 1 < c.len() {
                w = w.max(c[ijk[a] + 1] - c[ijk[a]]);
            }
        }
        w
    }

    /// Trilinear weights at `x` over the active corners of the enclosing
    /// cell, renormalised to sum to 1. Empty if no corner is active.
    pub fn interpolation_weights(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut lo = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let c = &self.axes[a];
            let j = c.partition_point(|&v| v <= x[a]).clamp(1, c.len() - 1);
            lo[a] = j - 1;
            t[a] = ((x[a] - c[j - 1]) / (c[j] - c[j - 1])).clamp(0.0, 1.0);
        }
        let mut out = Vec::with_capacity(8);
        for corner in 0..8 {
            let mut ijk = lo;
            let mut wt = 1.0;
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    ijk[a] += 1;
                    wt *= t[a];
                } else {
                    wt *= 1.0 - t[a];
                }
            }
            if let Some(i) = self.active_index(self.flat(ijk)) {
                if wt > 0.0 {
                    out.push((i, wt));
                }
            }
        }
        let total: f64 = out.iter().map(|e| e.1).sum();
        out.iter_mut().for_each(|e| e.1 /= total);
        out
    }

    /// Trilinear interpolation of nodal `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let w = self.interpolation_weights(x);
        if w.is_empty() {
            return None;
        }
        Some(w.iter().map(|&(i, a)| a * values[i]).sum())
    }

    /// Nearest active node to `x`; ties go to the smallest active index.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut cand: [[usize; 2]; 3] = [[0; 2]; 3];
        for a in 0..3 {
            let c = &self.axes[a];
            let j = c.partition_point(|&v| v < x[a]);
            cand[a] = [j.saturating_sub(1), j.min(c.len() - 1)];
        }
        let mut best: Option<(f64, usize)> = None;
        for &i in &cand[0] {
            for &j in &cand[1] {
                for &k in &cand[2] {
                    if let Some(idx) = self.active_index(self.flat([i, j, k])) {
                        let p = self.point(idx);
                        let d2 = sq_dist(&p, x);
                        if best.map_or(true, |(bd, bi)| d2 < bd || (d2 == bd && idx < bi)) {
                            best = Some((d2, idx));
                        }
                    }
                }
            }
        }
        if best.is_some() {
            return best.map(|b| b.1);
        }
        let mut best: Option<(f64, usize)> = None;
        for idx in 0..self.len() {
            let d2 = sq_dist(&self.point(idx), x);
            if best.map_or(true, |(bd, _)| d2 < bd) {
                best = Some((d2, idx));
            }
        }
        best.map(|b| b.1)
    }
}

fn sq_dist(a: &[f64; 3], b: &[f64]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_grid_contract() {
        let s = DomainSpec::unit_ball(0.16).unwrap();
        let g = build_grid(&s, 33, 0.8, 0.02).unwrap();
        assert!(g.eps_k() >= 2.0 * g.min_width());
        for i in 0..g.len() {
            assert!(s.d_k(&g.point(i)) >= 0.02);
        }
        assert!(g.count(NodeClass::ExcisionCollar) > 0);
        assert!(g.count(NodeClass::BoundaryCollar) > 0);
        assert!(g.dims()[0] > 33);
    }

    #[test]
    fn uniform_when_ratio_is_one() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let g = build_grid(&s, 33, 1.0, 0.2).unwrap();
        let w: Vec<f64> = g.axes()[0].windows(2).map(|p| p[1] - p[0]).collect();
        assert!(w.iter().all(|x| (x - 0.0625).abs() < 1e-12));
        assert_eq!(g.dims(), [33, 33, 33]);
    }

    #[test]
    fn tiny_excision_rejected() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        assert!(matches!(build_grid(&s, 33, 0.8, 1e-9), Err(crate::Error::Resolution(_))));
        assert!(matches!(build_grid(&s, 33, 1.0, 0.05), Err(crate::Error::Resolution(_))));
    }

    #[test]
    fn focus_refines_near_pole() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let g = Grid::new(&s, GridOptions::new(33, 0.8, 0.02).with_focus([1.0, 0.0, 0.0], 0.002)).unwrap();
        let x = &g.axes()[0];
        let last = x[x.len() - 1] - x[x.len() - 2];
        assert!((last - 0.002).abs() < 1e-12);
        assert_eq!(x[x.len() - 1], 1.0);
    }

    #[test]
    fn nearest_ties_are_lexicographic() {
        let s = DomainSpec::unit_ball(0.0).unwrap();
        let g = build_grid(&s, 17, 1.0, 0.25).unwrap();
        let i = g.nearest(&[0.0625, 0.5, 0.0]).unwrap();
        let p = g.point(i);
        assert!((p[1] - 0.5).abs() < 1e-12 && p[2] == 0.0);
        assert_eq!(p[0], 0.0);
        let _ = i;
    }
}

//! Experiment configuration. One TOML document with a versioned `schema`
//! field; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skl_core::{DomainKind, DomainSpec, SingularSet};

use crate::error::{RunError, RunResult};

pub const SCHEMA: &str = "skl/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Ball,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Singular {
    Origin,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<Vec<f64>>,
    pub singular: Singular,
    /// Dimension `k` of a spherical `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_radius: Option<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            dim: 3,
            shape: Shape::Ball,
            radius: Some(1.0),
            half_widths: None,
            singular: Singular::Origin,
            singular_dim: None,
            singular_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_base: usize,
    /// Resolution used for the refinement-stability comparisons.
    pub coarse_n_base: usize,
    pub grading: f64,
    pub eps_k: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_base: 65, coarse_n_base: 33, grading: 0.8, eps_k: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigConfig {
    pub tol: f64,
    pub samples: usize,
    /// Largest accepted relative error against the Bessel-zero oracle.
    pub rel_tol: f64,
    pub time_budget_s: f64,
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig { tol: 1e-8, samples: 200, rel_tol: 0.03, time_budget_s: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenConfig {
    pub sources: Vec<[f64; 3]>,
    /// Probes per source in the oracle comparison.
    pub oracle_probes: usize,
    pub oracle_tol: f64,
    pub samples: usize,
    pub symmetry_pairs: usize,
    /// Scales `t` of the diagonal probes `±t·(1,1,1)/√3` near the origin.
    pub diagonal_scales: Vec<f64>,
    pub log_gain: f64,
    pub stability: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            sources: vec![[0.3, 0.2, -0.1], [-0.2, 0.4, 0.3], [0.1, -0.1, -0.5], [-0.5, 0.0, 0.0], [0.2, -0.5, 0.4]],
            oracle_probes: 5,
            oracle_tol: 0.05,
            samples: 200,
            symmetry_pairs: 10,
            diagonal_scales: vec![0.4, 0.28, 0.2, 0.14, 0.1, 0.07, 0.05],
            log_gain: 2.0,
            stability: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MartinConfig {
    pub x0: [f64; 3],
    pub boundary_pole: [f64; 3],
    pub samples: usize,
    /// Radial range of the log-log slope fit at `ξ = 0`, as multiples of `ε_K` and absolute.
    pub slope_r_min_eps: f64,
    pub slope_r_max: f64,
    pub slope_points: usize,
    pub slope_tol: f64,
    pub continuity_offsets: Vec<f64>,
}

impl Default for MartinConfig {
    fn default() -> Self {
        MartinConfig {
            x0: [0.5, 0.0, 0.0],
            boundary_pole: [0.0, 0.0, 1.0],
            samples: 200,
            slope_r_min_eps: 2.0,
            slope_r_max: 0.25,
            slope_points: 12,
            slope_tol: 0.05,
            continuity_offsets: vec![0.4, 0.2, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmeasureConfig {
    pub radii: Vec<f64>,
    pub boundary_pole: [f64; 3],
    /// Cell width requested at the boundary pole.
    pub boundary_width: f64,
    pub probes: usize,
    pub glob00_tol: f64,
    /// Largest accepted ratio between doubling constants along the ladder.
    pub doubling_stability: f64,
}

impl Default for HmeasureConfig {
    fn default() -> Self {
        HmeasureConfig {
            radii: vec![0.2, 0.1, 0.05],
            boundary_pole: [0.0, 0.0, 1.0],
            boundary_width: 0.005,
            probes: 60,
            glob00_tol: 0.1,
            doubling_stability: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatConfig {
    pub mu: f64,
    pub n_base: usize,
    pub t_final: f64,
    pub dt_max: f64,
    pub sources: Vec<[f64; 3]>,
    pub probes: usize,
    pub green_tol: f64,
    pub decay_tol: f64,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            mu: 0.16,
            n_base: 33,
            t_final: 3.0,
            dt_max: 0.01,
            sources: vec![[0.3, 0.2, -0.1], [-0.2, 0.4, 0.3]],
            probes: 10,
            green_tol: 0.05,
            decay_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BvpConfig {
    pub mu: f64,
    pub tests: usize,
    pub residual_tol: f64,
    pub slack: f64,
    pub trace_tol: f64,
    pub max_shells: usize,
    pub min_shells: usize,
    pub atom: [f64; 3],
    pub boundary_pole: [f64; 3],
    pub singular_exponents: Vec<f64>,
}

impl Default for BvpConfig {
    fn default() -> Self {
        BvpConfig {
            mu: 0.16,
            tests: 10,
            residual_tol: 0.02,
            slack: 0.10,
            trace_tol: 0.10,
            max_shells: 40,
            min_shells: 3,
            atom: [0.0, -0.4, 0.2],
            boundary_pole: [0.0, 0.0, 1.0],
            singular_exponents: vec![0.0, 0.2, 1.5, 2.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierConfig {
    pub samples: usize,
    pub eps: f64,
    pub subcritical_mu: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig { samples: 10_000, eps: 0.5, subcritical_mu: 0.16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub n_base: usize,
    pub grading: f64,
    pub eps_k: f64,
    pub widths: Vec<f64>,
}

impl LadderConfig {
    pub fn to_ladder(&self) -> skl_core::kernels::LpLadder {
        skl_core::kernels::LpLadder {
            n_base: self.n_base,
            grading: self.grading,
            eps_k: self.eps_k,
            widths: self.widths.clone(),
        }
    }

    fn from_ladder(l: skl_core::kernels::LpLadder) -> Self {
        LadderConfig { n_base: l.n_base, grading: l.grading, eps_k: l.eps_k, widths: l.widths }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpConfig {
    pub mu: f64,
    pub boundary_pole: [f64; 3],
    pub boundary_ps: Vec<f64>,
    pub singular_ps: Vec<f64>,
    pub boundary: LadderConfig,
    pub singular: LadderConfig,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig {
            mu: 0.16,
            boundary_pole: [0.0, 0.0, -1.0],
            boundary_ps: vec![1.8, 2.2],
            singular_ps: vec![3.0, 4.0],
            boundary: LadderConfig::from_ladder(skl_core::kernels::LpLadder::boundary()),
            singular: LadderConfig::from_ladder(skl_core::kernels::LpLadder::singular()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plots: bool,
    /// Binary dumps of every solved field.
    pub dumps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("skl-out"), plots: true, dumps: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub spread_cap: f64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub mu: Vec<f64>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub eig: EigConfig,
    #[serde(default)]
    pub green: GreenConfig,
    #[serde(default)]
    pub martin: MartinConfig,
    #[serde(default)]
    pub hmeasure: HmeasureConfig,
    #[serde(default)]
    pub heat: HeatConfig,
    #[serde(default)]
    pub bvp: BvpConfig,
    #[serde(default)]
    pub barriers: BarrierConfig,
    #[serde(default)]
    pub lp_scan: LpConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_cap() -> f64 {
    skl_core::kernels::DEFAULT_SPREAD_CAP
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: SCHEMA.to_string(),
            seed: 7,
            spread_cap: default_cap(),
            threads: None,
            mu: vec![0.0, 0.16, 0.25],
            domain: DomainConfig::default(),
            grid: GridConfig::default(),
            eig: EigConfig::default(),
            green: GreenConfig::default(),
            martin: MartinConfig::default(),
            hmeasure: HmeasureConfig::default(),
            heat: HeatConfig::default(),
            bvp: BvpConfig::default(),
            barriers: BarrierConfig::default(),
            lp_scan: LpConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn check_point(name: &str, p: &[f64; 3]) -> RunResult<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {p:?} is not finite")))
    }
}

fn check_positive(name: &str, v: f64) -> RunResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be positive")))
    }
}

fn check_unit(name: &str, v: f64) -> RunResult<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in (0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> RunResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical serialisation without the output block, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { output: OutputConfig::default(), ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn spec(&self, mu: f64) -> RunResult<DomainSpec> {
        let d = &self.domain;
        let kind = match d.shape {
            Shape::Ball => DomainKind::Ball { radius: d.radius.ok_or_else(|| invalid("domain.radius is required for a ball"))? },
            Shape::Box => DomainKind::Box {
                half_widths: d.half_widths.clone().ok_or_else(|| invalid("domain.half_widths is required for a box"))?,
            },
        };
        let singular = match d.singular {
            Singular::Origin => SingularSet::Origin,
            Singular::Sphere => SingularSet::Sphere {
                dim: d.singular_dim.ok_or_else(|| invalid("domain.singular_dim is required for a sphere"))?,
                radius: d.singular_radius.ok_or_else(|| invalid("domain.singular_radius is required for a sphere"))?,
            },
        };
        DomainSpec::new(d.dim, kind, singular, mu).map_err(|e| invalid(e.to_string()))
    }

    /// Checks every numeric field against the preconditions of the solvers
    /// it feeds, before anything is computed.
    pub fn validate(&self) -> RunResult<()> {
        if self.schema != SCHEMA {
            return Err(invalid(format!("schema = {:?}, expected {SCHEMA:?}", self.schema)));
        }
        if self.mu.is_empty() {
            return Err(invalid("mu list is empty"));
        }
        for &mu in self.mu.iter().chain([self.heat.mu, self.bvp.mu, self.lp_scan.mu, self.barriers.subcritical_mu].iter()) {
            if !mu.is_finite() {
                return Err(invalid(format!("mu = {mu} is not finite")));
            }
            self.spec(mu)?;
        }
        check_positive("spread_cap", self.spread_cap)?;
        if self.spread_cap < 1.0 {
            return Err(invalid(format!("spread_cap = {} must be at least 1", self.spread_cap)));
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(invalid("threads must be positive"));
            }
        }
        let g = &self.grid;
        for (name, n) in [("grid.n_base", g.n_base), ("grid.coarse_n_base", g.coarse_n_base), ("heat.n_base", self.heat.n_base)] {
            if n < 17 {
                return Err(invalid(format!("{name} = {n} violates n_base ≥ 17")));
            }
        }
        check_unit("grid.grading", g.grading)?;
        check_positive("grid.eps_k", g.eps_k)?;
        check_positive("eig.tol", self.eig.tol)?;
        check_positive("eig.rel_tol", self.eig.rel_tol)?;
        check_positive("eig.time_budget_s", self.eig.time_budget_s)?;
        let gr = &self.green;
        if gr.sources.is_empty() {
            return Err(invalid("green.sources is empty"));
        }
        for (i, s) in gr.sources.iter().chain(&self.heat.sources).enumerate() {
            check_point(&format!("source {i}"), s)?;
        }
        check_positive("green.oracle_tol", gr.oracle_tol)?;
        check_positive("green.log_gain", gr.log_gain)?;
        check_positive("green.stability", gr.stability)?;
        if gr.diagonal_scales.len() < 2 || gr.diagonal_scales.iter().any(|t| !(*t > 0.0 && *t < 0.5)) {
            return Err(invalid("green.diagonal_scales needs at least two scales in (0, 0.5)"));
        }
        let m = &self.martin;
        check_point("martin.x0", &m.x0)?;
        check_point("martin.boundary_pole", &m.boundary_pole)?;
        check_positive("martin.slope_r_max", m.slope_r_max)?;
        check_positive("martin.slope_tol", m.slope_tol)?;
        if m.slope_points < 3 {
            return Err(invalid("martin.slope_points must be at least 3"));
        }
        if m.continuity_offsets.iter().any(|t| !(*t > 0.0 && *t < std::f64::consts::PI)) {
            return Err(invalid("martin.continuity_offsets must lie in (0, π)"));
        }
        let h = &self.hmeasure;
        if h.radii.is_empty() || h.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("hmeasure.radii must be positive"));
        }
        check_positive("hmeasure.boundary_width", h.boundary_width)?;
        check_positive("hmeasure.glob00_tol", h.glob00_tol)?;
        check_positive("hmeasure.doubling_stability", h.doubling_stability)?;
        let ht = &self.heat;
        check_positive("heat.t_final", ht.t_final)?;
        check_positive("heat.dt_max", ht.dt_max)?;
        if ht.dt_max >= ht.t_final {
            return Err(invalid("heat.dt_max must be below heat.t_final"));
        }
        let b = &self.bvp;
        if b.tests == 0 {
            return Err(invalid("bvp.tests must be positive"));
        }
        if b.min_shells < 3 || b.max_shells < b.min_shells {
            return Err(invalid("bvp shells need 3 ≤ min_shells ≤ max_shells"));
        }
        check_point("bvp.atom", &b.atom)?;
        let spec = self.spec(b.mu)?;
        for &e in &b.singular_exponents {
            if !(e >= 0.0 && e < spec.alpha_plus() + 2.0) {
                return Err(invalid(format!("singular exponent b = {e} violates 0 ≤ b < α₊ + 2")));
            }
        }
        let br = &self.barriers;
        if br.samples == 0 {
            return Err(invalid("barriers.samples must be positive"));
        }
        if !(br.eps > 0.0 && br.eps < 1.0) {
            return Err(invalid(format!("barriers.eps = {} must lie in (0, 1)", br.eps)));
        }
        let lp = &self.lp_scan;
        for (name, l) in [("boundary", &lp.boundary), ("singular", &lp.singular)] {
            if l.n_base < 17 {
                return Err(invalid(format!("lp_scan.{name}.n_base = {} violates n_base ≥ 17", l.n_base)));
            }
            check_unit(&format!("lp_scan.{name}.grading"), l.grading)?;
            if l.widths.len() < 2 || l.widths.iter().any(|w| !(*w > 0.0)) {
                return Err(invalid(format!("lp_scan.{name}.widths needs two positive levels")));
            }
        }
        if lp.boundary_ps.iter().chain(&lp.singular_ps).any(|p| !(*p > 0.0)) {
            return Err(invalid("lp_scan exponents must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("schema = \"skl/1\"\nmu = [0.16]\n").unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.mu, vec![0.16]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("schema = \"skl/1\"\nmu = [0.0]\n[grid]\nn_base = 33\ncoarse_n_base = 17\ngrading = 0.8\neps_k = 0.02\nsize = 3\n").unwrap_err();
        assert!(err.to_string().contains("size"), "{err}");
        let err = ExperimentConfig::from_toml("schema = \"skl/2\"\nmu = [0.0]\n").unwrap_err();
        assert!(err.to_string().contains("schema"));
    }

    #[test]
    fn supercritical_mu_names_the_invariant() {
        let err = ExperimentConfig::from_toml("schema = \"skl/1\"\nmu = [0.3]\n").unwrap_err();
        assert!(matches!(err, RunError::Config(_)));
        assert!(err.to_string().contains("μ ≤ H²"), "{err}");
    }

    #[test]
    fn numeric_preconditions() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.n_base = 9;
        assert!(cfg.validate().unwrap_err().to_string().contains("n_base ≥ 17"));
        let mut cfg = ExperimentConfig::default();
        cfg.grid.grading = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.bvp.singular_exponents = vec![3.0];
        assert!(cfg.validate().is_err());
    }
}

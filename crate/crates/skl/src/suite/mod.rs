//! Experiments behind each subcommand. Every experiment returns its criteria
//! and writes its reports through the lab's artifact sink.

pub mod barriers;
pub mod bvp;
pub mod eig;
pub mod green;
pub mod heat;
pub mod hmeasure;
pub mod lp;
pub mod martin;

use skl_core::geometry::dist;
use skl_core::kernels::{RatioReport, SamplePlan};

use crate::error::RunResult;
use crate::lab::Lab;
use crate::output::{Criterion, Plot, Style};

/// Acceptance criteria and the experiment that carries each.
pub const CRITERIA: [(u8, &str, Subcommand); 10] = [
    (1, "eigenvalue oracle match", Subcommand::Eig),
    (2, "Green oracle match", Subcommand::Green),
    (3, "envelope suites", Subcommand::Green),
    (4, "critical-log discrimination", Subcommand::Green),
    (5, "Martin normalisation and exponent", Subcommand::Martin),
    (6, "harmonic measure", Subcommand::Hmeasure),
    (7, "L^p thresholds", Subcommand::LpScan),
    (8, "BVP suite", Subcommand::Bvp),
    (9, "heat/Green identity", Subcommand::Heat),
    (10, "barrier sign sweep", Subcommand::Barriers),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Subcommand {
    Eig,
    Green,
    Martin,
    Hmeasure,
    Heat,
    Bvp,
    Barriers,
    LpScan,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Eig,
        Subcommand::Green,
        Subcommand::Martin,
        Subcommand::Hmeasure,
        Subcommand::Heat,
        Subcommand::Bvp,
        Subcommand::Barriers,
        Subcommand::LpScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Eig => "eig",
            Subcommand::Green => "green",
            Subcommand::Martin => "martin",
            Subcommand::Hmeasure => "hmeasure",
            Subcommand::Heat => "heat",
            Subcommand::Bvp => "bvp",
            Subcommand::Barriers => "barriers",
            Subcommand::LpScan => "lp-scan",
        }
    }

    pub fn run(self, lab: &Lab) -> RunResult<Vec<Criterion>> {
        let out = match self {
            Subcommand::Eig => eig::run(lab),
            Subcommand::Green => green::run(lab),
            Subcommand::Martin => martin::run(lab),
            Subcommand::Hmeasure => hmeasure::run(lab),
            Subcommand::Heat => heat::run(lab),
            Subcommand::Bvp => bvp::run(lab),
            Subcommand::Barriers => barriers::run(lab),
            Subcommand::LpScan => lp::run(lab),
        }?;
        lab.criteria_csv(&format!("{}_criteria", self.name()), &out)?;
        Ok(out)
    }
}

pub fn tag(mu: f64) -> String {
    format!("mu{mu}")
}

pub fn plan(lab: &Lab, samples: usize) -> SamplePlan {
    SamplePlan { cap: lab.cfg.spread_cap, ..SamplePlan::new(samples, lab.cfg.seed) }
}

/// Spread cap, sample count and refinement stability of a report pair.
pub fn suite_checks(group: u8, name: &str, coarse: &RatioReport, fine: &RatioReport, samples: usize, stability: f64) -> Vec<Criterion> {
    let change = (fine.spread / coarse.spread).max(coarse.spread / fine.spread);
    vec![
        Criterion::flag(group, format!("{name} spread"), fine.spread, fine.cap, fine.pass),
        Criterion::at_least(group, format!("{name} samples"), fine.records.len() as f64, samples as f64),
        Criterion::at_most(group, format!("{name} refinement change"), change, stability),
    ]
}

/// Ratio against `|x - y|` for one or more reports.
pub fn ratio_plot(title: &str, reports: &[(&str, &RatioReport)]) -> Plot {
    let mut p = Plot::new(title, "|x - y|", "numeric / envelope").log_log();
    for (label, r) in reports {
        let pts = r.records.iter().map(|c| (dist(&c.x, &c.y), c.ratio)).collect();
        p = p.with(*label, pts, Style::Points);
    }
    p
}

pub fn write_ratio(lab: &Lab, name: &str, report: &RatioReport) -> RunResult<()> {
    lab.emit(|a| a.ratio_csv(name, report).map(|_| ()))
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_is_exact_on_lines() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let (s, c) = fit_line(&pts);
        assert!((s + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn every_criterion_has_a_carrier() {
        let ids: Vec<u8> = CRITERIA.iter().map(|c| c.0).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }
}

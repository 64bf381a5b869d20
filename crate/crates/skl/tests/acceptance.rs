//! Acceptance criteria 1-10 on the default configuration. One line per
//! criterion; exits nonzero when any fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use skl::cli::run_experiments;
use skl::suite::{Subcommand, CRITERIA};
use skl::{Artifacts, ExperimentConfig, Lab};

fn main() {
    let out = std::env::var_os("SKL_ACCEPTANCE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance"));
    let mut cfg = ExperimentConfig::default();
    cfg.output.dir = out.clone();
    let artifacts = Artifacts::new(&out, cfg.output.plots, cfg.output.dumps).expect("output directory");
    let lab = Lab::new(cfg, Some(artifacts));
    let start = Instant::now();
    let mut seen = BTreeSet::new();
    let carriers: Vec<Subcommand> = CRITERIA.iter().map(|c| c.2).filter(|s| seen.insert(s.name())).collect();
    let summary = run_experiments(&lab, &carriers);
    let mut failed = 0;
    for (n, title, carrier) in CRITERIA {
        let checks: Vec<_> = summary.criteria.iter().filter(|c| c.group == n).collect();
        let errors: Vec<_> = summary.errors.iter().filter(|e| e.stage == carrier.name()).collect();
        let bad: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        let pass = !checks.is_empty() && bad.is_empty() && errors.is_empty();
        if !pass {
            failed += 1;
        }
        println!("criterion {n:>2} {title}: {} ({} checks, {} failing)", if pass { "PASS" } else { "FAIL" }, checks.len(), bad.len());
        for c in bad {
            println!("      {}: value {} bound {}", c.name, c.value, c.bound);
        }
        for e in errors {
            println!("      error in {}: {} {}", e.stage, e.kind, e.message);
        }
    }
    let extra: Vec<_> = summary.criteria.iter().filter(|c| c.group == 0).collect();
    println!(
        "supplementary checks: {} of {} pass; wall clock {:.0} s; reports in {}",
        extra.iter().filter(|c| c.pass).count(),
        extra.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    let _ = lab.emit(|a| a.json("summary", &summary).map(|_| ()));
    if failed > 0 {
        std::process::exit(1);
    }
}

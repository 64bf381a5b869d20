//! Shared state of one run: configuration, cached operators and eigenpairs,
//! and the artifact sink.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use skl_core::discretization::{principal_eigenpair, BoundaryMode, EigenPair, Grid, GridOptions, LinearOperator};
use skl_core::DomainSpec;

use crate::config::ExperimentConfig;
use crate::error::RunResult;
use crate::output::{Artifacts, Criterion, Plot};

type Key = (u64, usize, u64, u64, Vec<[u64; 4]>);

fn key(mu: f64, o: &GridOptions) -> Key {
    let focus = o.focus.iter().map(|f| [f.point[0].to_bits(), f.point[1].to_bits(), f.point[2].to_bits(), f.min_width.to_bits()]).collect();
    (mu.to_bits(), o.n_base, o.grading_ratio.to_bits(), o.eps_k.to_bits(), focus)
}

pub struct Lab {
    pub cfg: ExperimentConfig,
    ops: Mutex<HashMap<Key, Arc<LinearOperator>>>,
    eigs: Mutex<HashMap<Key, Arc<EigenPair>>>,
    out: Option<Mutex<Artifacts>>,
}

impl Lab {
    pub fn new(cfg: ExperimentConfig, out: Option<Artifacts>) -> Self {
        Lab { cfg, ops: Mutex::new(HashMap::new()), eigs: Mutex::new(HashMap::new()), out: out.map(Mutex::new) }
    }

    pub fn spec(&self, mu: f64) -> RunResult<DomainSpec> {
        self.cfg.spec(mu)
    }

    /// Grid options of the configured grid at base resolution `n_base`.
    pub fn options(&self, n_base: usize) -> GridOptions {
        GridOptions::new(n_base, self.cfg.grid.grading, self.cfg.grid.eps_k)
    }

    pub fn fine(&self) -> GridOptions {
        self.options(self.cfg.grid.n_base)
    }

    pub fn coarse(&self) -> GridOptions {
        self.options(self.cfg.grid.coarse_n_base)
    }

    /// Zero-mode operator, assembled once per `(μ, grid)`.
    pub fn operator(&self, mu: f64, options: &GridOptions) -> RunResult<Arc<LinearOperator>> {
        let k = key(mu, options);
        if let Some(op) = self.ops.lock().unwrap().get(&k) {
            return Ok(op.clone());
        }
        let spec = self.spec(mu)?;
        let grid = Arc::new(Grid::new(&spec, options.clone())?);
        let op = Arc::new(LinearOperator::assemble(&spec, grid, BoundaryMode::Zero)?);
        self.ops.lock().unwrap().insert(k, op.clone());
        Ok(op)
    }

    pub fn eigen(&self, mu: f64, options: &GridOptions) -> RunResult<Arc<EigenPair>> {
        let k = key(mu, options);
        if let Some(e) = self.eigs.lock().unwrap().get(&k) {
            return Ok(e.clone());
        }
        let op = self.operator(mu, options)?;
        let e = Arc::new(principal_eigenpair(&op, self.cfg.eig.tol)?);
        self.eigs.lock().unwrap().insert(k, e.clone());
        Ok(e)
    }

    /// Drops cached operators and eigenpairs.
    pub fn clear(&self) {
        self.ops.lock().unwrap().clear();
        self.eigs.lock().unwrap().clear();
    }

    /// Runs `f` against the artifact sink, if there is one.
    pub fn emit(&self, f: impl FnOnce(&mut Artifacts) -> RunResult<()>) -> RunResult<()> {
        match &self.out {
            Some(out) => f(&mut out.lock().unwrap()),
            None => Ok(()),
        }
    }

    pub fn plot(&self, name: &str, plot: impl FnOnce() -> Plot) -> RunResult<()> {
        self.emit(|a| a.svg(name, &plot()).map(|_| ()))
    }

    /// Table of criteria, one CSV per subcommand.
    pub fn criteria_csv(&self, name: &str, criteria: &[Criterion]) -> RunResult<()> {
        self.emit(|a| {
            let rows = criteria.iter().map(|c| {
                vec![c.group.to_string(), c.name.clone(), format!("{}", c.value), format!("{}", c.bound), c.pass.to_string()]
            });
            a.csv(name, &["criterion", "name", "value", "bound", "pass"], rows).map(|_| ())
        })
    }
}

//! Graded grids on `Ω∖K`, the assembled operator and its solvers.

mod eigen;
mod grid;
mod heat;
mod operator;
pub mod sparse;

pub use eigen::{principal_eigenpair, EigenPair};
pub use grid::{build_grid, Focus, Grid, GridOptions, NodeClass, MAX_LEVELS};
pub use heat::{heat_evolve, heat_evolve_with, HeatOptions, HeatRun};
pub use operator::{
    assemble, solve, BoundaryData, BoundaryLink, BoundaryMode, BoundaryValues, FieldKind, FieldMeta,
    LinearOperator, ScalarField, Solved, MAX_CG_ITER,
};
pub use sparse::CgStats;

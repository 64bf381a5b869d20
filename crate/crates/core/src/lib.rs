//! Numerical kernels for the Schrödinger operator `-L_mu = -Δ - mu/d_K^2`
//! on a punctured domain `Ω \ K`.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration and the
//! command line runner live in the `skl` companion crate.
#![no_std]

extern crate alloc;

pub mod bvp;
pub mod closed_forms;
pub mod discretization;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod spectral_oracle;

mod sample;

pub use error::{Error, Result};
pub use geometry::{DomainKind, DomainSpec, SingularSet, WeightSpec};

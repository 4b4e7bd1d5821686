//! Numerical core for a two-species diffusive Lotka-Volterra competition
//! model on a periodically evolving one-dimensional domain.
//!
//! The domain `Omega(t) = rho(t) Omega(0)` is pulled back to the fixed
//! reference interval, where the densities satisfy
//!
//! ```text
//! v1_t - (d1/rho^2) v1_yy = v1 (a1 - c1 v1 - b1 v2) - (n rho'/rho) v1
//! v2_t - (d2/rho^2) v2_yy = v2 (a2 - b2 v1 - c2 v2) - (n rho'/rho) v2
//! ```
//!
//! with homogeneous Dirichlet data. The crate is `no_std` (it needs `alloc`).

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod indexes;
pub mod model;
pub mod monotone;
pub mod periodic;
pub mod presets;
pub mod quadrature;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Field, Grid, StatePair, Trajectory};
pub use model::{Interval, ModelParams, Species, SpeciesParams};
pub use periodic::{EvolutionLaw, PeriodicFn, Profile};

//! Large eddy simulation of incompressible channel flow with the rational
//! (Padé-deconvolution) subgrid model and its gradient, Smagorinsky and
//! no-model baselines.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: stretched channel geometry and the filter-width profile.
//! * [`fields`]: field containers, transforms and differential operators.
//! * [`filters`]: Gaussian transfer function and its Taylor / Padé
//!   approximants, explicit Gaussian filtering, inverse Helmholtz smoothing.
//! * [`sgs`]: the subgrid stress closures and their momentum forcing.
//! * [`solver`]: fractional-step time integration at constant mass flux.
//! * [`stats`]: plane/time averaged statistics in wall units.
//! * [`apriori`]: periodic-box verification of the models against exactly
//!   filtered synthetic fields.

pub mod apriori;
pub mod error;
pub mod fields;
pub mod filters;
pub mod grid;
pub mod linalg;
pub mod sgs;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use fields::{
    Dims, ScalarField, SpectralOps, SymmetricTensorField, VelocityField, VelocityGradient,
};

pub use filters::{FilterKind, FilterParams};
pub use grid::{ChannelGrid, GridConfig};
pub use sgs::{SgsConfig, SgsModel};
pub use solver::{RunConfig, Solver, SolverState};
pub use stats::{FlowStatistics, ProfileReport};

pub use num_complex::Complex64;

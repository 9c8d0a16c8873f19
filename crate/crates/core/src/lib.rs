//! Nonlocal Cahn–Hilliard equation with a singular (logarithmic) potential:
//! simulation and strict-separation diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod potential;

pub use config::{simulate, RunConfig};
pub use dynamics::{
    chemical_potential, energy, step, EnergySample, RunSettings, SeriesRow, SimState,
    Snapshot, SolverConfig, Trajectory,
};
pub use error::{Error, Result};
pub use grid::{BoundaryMode, Domain, Field, Norm};
pub use kernel::{check_bounds, ConvolutionMode, Kernel, KernelCheckReport, KernelSpec};
pub use potential::{check_assumptions, AssumptionReport, Potential, PotentialParams};

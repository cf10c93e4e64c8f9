//! Three-component Cahn–Hilliard phase-field simulation with linear,
//! unconditionally energy-stable IEQ time steppers.
//!
//! The crate is organised bottom-up: [`grid`] provides fields and the
//! discrete operators, [`model`] the free-energy algebra, [`solver`] the
//! projected PCG, [`schemes`] the three time steppers, [`sim`] the
//! experiment drivers and [`io`] the on-disk formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod par;
pub mod schemes;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Boundary, Field, FieldTriple, Grid};
pub use model::{ModelParams, SurfaceTensions};
pub use schemes::{PhaseState, SchemeKind, StepDiagnostics};
pub use sim::SimConfig;
pub use solver::SolverOptions;

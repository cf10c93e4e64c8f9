//! Experiment drivers: configuration, initial conditions, the time loop and
//! the temporal convergence study.

pub mod analysis;
mod config;
mod convergence;
mod init;
mod run;

pub use config::{FieldFormat, GridSpec, InitialSpec, ModelSpec, OutputSpec, SimConfig, TimeSpec};
pub use convergence::{convergence_study, difference_norms, ConvergenceReport};
pub use init::{init_lens, init_spinodal, init_state, lens_profile, LENS_RADIUS, SPINODAL_AMPLITUDE};
pub use run::{
    final_state, initial_state, run, run_observed, step_schedule, write_state, RunSummary, StopReason, MASS_DRIFT_TOL,
    SPD_PROBE_TOL,
};

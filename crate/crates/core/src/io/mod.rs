//! On-disk formats: the energy log (CSV), field snapshots (legacy VTK) and
//! exact restart checkpoints (raw little-endian `f64`).

mod checkpoint;
mod csv;
mod vtk;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
pub use csv::{read_energy_log, EnergyLogRow, EnergyLogWriter, ENERGY_LOG_HEADER};
pub use vtk::{read_vtk, write_vtk};

use crate::error::Error;

pub(crate) fn format_error(path: &std::path::Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), message: message.into() }
}

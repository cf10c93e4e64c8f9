use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::format_error;
use crate::error::Result;
use crate::schemes::StepDiagnostics;

pub const ENERGY_LOG_HEADER: &str = "step,t,E_original,E_discrete,grad_mu_sq_1,grad_mu_sq_2,grad_mu_sq_3,\
mass_1,mass_2,mass_3,hyperplane_max_err,u_drift_inf,cg_iters,energy_law_residual";

/// One line of the energy log.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLogRow {
    pub step: usize,
    pub t: f64,
    pub e_original: f64,
    pub e_discrete: f64,
    pub grad_mu_sq: [f64; 3],
    pub mass: [f64; 3],
    pub hyperplane_max_err: f64,
    pub u_drift_inf: f64,
    pub cg_iters: usize,
    pub energy_law_residual: f64,
}

impl From<&StepDiagnostics> for EnergyLogRow {
    fn from(d: &StepDiagnostics) -> Self {
        Self {
            step: d.step,
            t: d.t,
            e_original: d.e_original,
            e_discrete: d.e_discrete,
            grad_mu_sq: d.grad_mu_sq,
            mass: d.mass,
            hyperplane_max_err: d.hyperplane_max_err,
            u_drift_inf: d.u_drift_inf,
            cg_iters: d.cg_iterations,
            energy_law_residual: d.energy_law_residual(),
        }
    }
}

impl EnergyLogRow {
    /// Floats use 17 significant digits so that parsing recovers them exactly.
    pub fn to_csv_line(&self) -> String {
        let floats = [
            self.e_original,
            self.e_discrete,
            self.grad_mu_sq[0],
            self.grad_mu_sq[1],
            self.grad_mu_sq[2],
            self.mass[0],
            self.mass[1],
            self.mass[2],
            self.hyperplane_max_err,
            self.u_drift_inf,
        ];
        let mut line = format!("{},{:.16e}", self.step, self.t);
        for v in floats {
            line.push_str(&format!(",{v:.16e}"));
        }
        line.push_str(&format!(",{},{:.16e}", self.cg_iters, self.energy_law_residual));
        line
    }

    fn parse(line: &str) -> std::result::Result<Self, String> {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 14 {
            return Err(format!("expected 14 columns, found {}", cols.len()));
        }
        let f = |i: usize| cols[i].parse::<f64>().map_err(|e| format!("column {}: {e}", i + 1));
        let u = |i: usize| cols[i].parse::<usize>().map_err(|e| format!("column {}: {e}", i + 1));
        Ok(Self {
            step: u(0)?,
            t: f(1)?,
            e_original: f(2)?,
            e_discrete: f(3)?,
            grad_mu_sq: [f(4)?, f(5)?, f(6)?],
            mass: [f(7)?, f(8)?, f(9)?],
            hyperplane_max_err: f(10)?,
            u_drift_inf: f(11)?,
            cg_iters: u(12)?,
            energy_law_residual: f(13)?,
        })
    }
}

/// Streams energy-log rows, writing the header first.
pub struct EnergyLogWriter<W: Write> {
    out: W,
}

impl<W: Write> EnergyLogWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{ENERGY_LOG_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_row(&mut self, row: &EnergyLogRow) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv_line())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_energy_log(path: impl AsRef<Path>) -> Result<Vec<EnergyLogRow>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(ENERGY_LOG_HEADER) {
        return Err(format_error(path, "missing or unexpected header"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(EnergyLogRow::parse(&line).map_err(|m| format_error(path, format!("line {}: {m}", k + 2)))?);
    }
    Ok(rows)
}

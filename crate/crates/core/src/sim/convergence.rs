use std::io::Write;

use super::config::SimConfig;
use super::run::final_state;
use crate::error::{Error, Result};
use crate::grid::FieldTriple;
use crate::par;
use crate::schemes::SchemeKind;

/// Errors between solutions at adjacent step sizes and the observed orders.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    /// `δt, δt/2, …`, one per level.
    pub dts: Vec<f64>,
    /// `l2[k]`: error between levels `k` and `k + 1`, summed over phases.
    pub l2: Vec<f64>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
    /// `order_l2[k] = log2(l2[k] / l2[k + 1])`.
    pub order_l2: Vec<f64>,
    pub order_l1: Vec<f64>,
    pub order_linf: Vec<f64>,
}

/// `(L², L¹, L∞)` norms of `a − b`, each summed over the three phases.
pub fn difference_norms(a: &FieldTriple, b: &FieldTriple) -> [f64; 3] {
    let diff = a.zip_map(b, |x, y| x - y);
    let mut out = [0.0; 3];
    for e in diff.iter() {
        out[0] += e.norm();
        out[1] += e.map(f64::abs).sum() * e.grid().cell_volume();
        out[2] += e.max_abs();
    }
    out
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

impl ConvergenceReport {
    pub fn from_solutions(scheme: SchemeKind, dts: Vec<f64>, solutions: &[FieldTriple]) -> Self {
        let norms: Vec<[f64; 3]> = solutions.windows(2).map(|w| difference_norms(&w[0], &w[1])).collect();
        let col = |j: usize| norms.iter().map(|n| n[j]).collect::<Vec<_>>();
        let (l2, l1, linf) = (col(0), col(1), col(2));
        Self {
            scheme,
            dts,
            order_l2: orders(&l2),
            order_l1: orders(&l1),
            order_linf: orders(&linf),
            l2,
            l1,
            linf,
        }
    }

    /// Orders at the finest adjacent pair of errors, `(L², L¹, L∞)`.
    pub fn finest_orders(&self) -> Option<[f64; 3]> {
        Some([*self.order_l2.last()?, *self.order_l1.last()?, *self.order_linf.last()?])
    }

    /// A table with one row per error level; the order columns are empty
    /// on the first row.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "dt,L2,order_L2,L1,order_L1,Linf,order_Linf")?;
        let order = |v: &[f64], k: usize| if k == 0 { String::new() } else { format!("{:.4}", v[k - 1]) };
        for k in 0..self.l2.len() {
            writeln!(
                out,
                "{:.6e},{:.6e},{},{:.6e},{},{:.6e},{}",
                self.dts[k],
                self.l2[k],
                order(&self.order_l2, k),
                self.l1[k],
                order(&self.order_l1, k),
                self.linf[k],
                order(&self.order_linf, k)
            )?;
        }
        Ok(())
    }
}

/// Runs `base` at `δt, δt/2, …` (`levels` runs, concurrently) and compares
/// the final phases of adjacent levels.
pub fn convergence_study(base: &SimConfig, levels: usize) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!("convergence study needs at least 3 levels, got {levels}")));
    }
    base.validate()?;
    let dts: Vec<f64> = (0..levels).map(|k| base.time.dt / (1u64 << k) as f64).collect();
    let configs: Vec<SimConfig> = dts
        .iter()
        .map(|&dt| {
            let mut c = base.clone();
            c.time.dt = dt;
            c.time.stop_energy_slope = None;
            c.output.dir = None;
            c
        })
        .collect();
    let results = par::map(configs, |c| final_state(&c).map(|s| s.c));
    let solutions = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_solutions(base.time.scheme, dts, &solutions))
}

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::config::{FieldFormat, InitialSpec, SimConfig};
use super::init::{init_lens, init_spinodal, init_state};
use crate::error::{Error, Result};
use crate::io::{self, CheckpointMeta, EnergyLogRow, EnergyLogWriter};
use crate::model::ModelParams;
use crate::schemes::{self, PhaseState, StepDiagnostics, HYPERPLANE_TOL};

/// Largest accepted drift of a component mean from its initial value.
pub const MASS_DRIFT_TOL: f64 = 1e-12;

/// Symmetry tolerance of the periodic operator probes.
pub const SPD_PROBE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    FinalTime,
    EnergySlope,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: PhaseState,
    /// Row 0 describes the initial state; row `k` the state after step `k`.
    pub diagnostics: Vec<StepDiagnostics>,
    pub stop: StopReason,
}

impl RunSummary {
    pub fn steps(&self) -> usize {
        self.final_state.step_index
    }
}

/// The step lengths that take `0` to `t_final` in steps of `dt`, the last
/// one shortened if `t_final` is not a multiple of `dt`.
pub fn step_schedule(dt: f64, t_final: f64) -> Vec<f64> {
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        return vec![dt; nearest.max(1.0) as usize];
    }
    let full = ratio.floor() as usize;
    let mut out = vec![dt; full];
    out.push(t_final - full as f64 * dt);
    out
}

pub fn initial_state(config: &SimConfig, params: &ModelParams) -> Result<PhaseState> {
    let grid = config.grid()?;
    match &config.initial {
        InitialSpec::Lens => init_state(init_lens(grid, params.eps), params),
        InitialSpec::Spinodal { seed } => init_state(init_spinodal(grid, *seed), params),
        InitialSpec::File { path } => {
            let ck = io::read_checkpoint(path)?;
            if ck.c.grid() != grid {
                return Err(Error::Config {
                    path: "initial.path".into(),
                    message: format!("checkpoint grid {:?} does not match configured grid {:?}", ck.c.grid(), grid),
                });
            }
            match ck.u {
                Some(u) => PhaseState::from_parts(ck.c, u, 0.0, 0),
                None => init_state(ck.c, params),
            }
        }
    }
}

struct Output {
    dir: PathBuf,
    log: EnergyLogWriter<BufWriter<File>>,
    format: FieldFormat,
}

impl Output {
    fn create(dir: &Path, config: &SimConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), config.to_toml_string())?;
        let log = EnergyLogWriter::new(BufWriter::new(File::create(dir.join("energy.csv"))?))?;
        Ok(Self { dir: dir.to_path_buf(), log, format: config.output.field_format })
    }

    fn snapshot(&self, state: &PhaseState, config: &SimConfig) -> Result<()> {
        let name = format!("fields_{:06}", state.step_index);
        if matches!(self.format, FieldFormat::Vtk | FieldFormat::Both) {
            let title = format!("tcch step {} t {:.9e}", state.step_index, state.t);
            io::write_vtk(self.dir.join(format!("{name}.vtk")), &state.c, &title)?;
        }
        if matches!(self.format, FieldFormat::Raw | FieldFormat::Both) {
            write_state(&self.dir.join(name), state, config)?;
        }
        Ok(())
    }
}

/// Writes `state` as a restart checkpoint.
pub fn write_state(dir: &Path, state: &PhaseState, config: &SimConfig) -> Result<()> {
    let mut meta = CheckpointMeta { step: state.step_index, t: state.t, ..Default::default() };
    let m = &config.model;
    meta.extra.insert("sigma".into(), format!("{},{},{}", m.sigma[0], m.sigma[1], m.sigma[2]));
    meta.extra.insert("epsilon".into(), m.epsilon.to_string());
    meta.extra.insert("mobility".into(), m.mobility.to_string());
    meta.extra.insert("lambda".into(), m.lambda.to_string());
    meta.extra.insert("b".into(), m.b.to_string());
    meta.extra.insert("scheme".into(), config.time.scheme.to_string());
    io::write_checkpoint(dir, &state.c, Some(&state.u), &meta)
}

fn check_invariants(state: &PhaseState, initial_means: [f64; 3], diag: &StepDiagnostics) -> std::result::Result<(), String> {
    if !diag.is_finite() || !state.c.is_finite() || !state.u.is_finite() {
        return Err("non-finite values".into());
    }
    if !(diag.hyperplane_max_err <= HYPERPLANE_TOL) {
        return Err(format!("hyperplane error {:e} exceeds {HYPERPLANE_TOL:e}", diag.hyperplane_max_err));
    }
    for (i, (m, m0)) in diag.mass.iter().zip(initial_means).enumerate() {
        let drift = (m - m0).abs();
        if !(drift <= MASS_DRIFT_TOL) {
            return Err(format!("mean of c{} drifted by {drift:e}", i + 1));
        }
    }
    Ok(())
}

/// Runs a configured simulation, writing the energy log and snapshots when
/// an output directory is configured.
pub fn run(config: &SimConfig) -> Result<RunSummary> {
    run_observed(config, |_, _| {})
}

/// Like [`run`], calling `observe` after every step.
pub fn run_observed(config: &SimConfig, mut observe: impl FnMut(&PhaseState, &StepDiagnostics)) -> Result<RunSummary> {
    config.validate()?;
    let params = config.model_params()?;
    let mut state = initial_state(config, &params)?;
    let (diagnostics, stop) = run_from(config, &params, &mut state, |s, d| observe(s, d))?;
    Ok(RunSummary { final_state: state, diagnostics, stop })
}

fn run_from(
    config: &SimConfig,
    params: &ModelParams,
    state: &mut PhaseState,
    mut observe: impl FnMut(&PhaseState, &StepDiagnostics),
) -> Result<(Vec<StepDiagnostics>, StopReason)> {
    let kind = config.time.scheme;
    let out_cfg = &config.output;
    let mut output = match &out_cfg.dir {
        Some(dir) => Some(Output::create(dir, config)?),
        None => None,
    };
    let initial_means = state.means;
    let first = schemes::state_diagnostics(state, kind, params)?;
    if let Some(o) = output.as_mut() {
        o.log.write_row(&EnergyLogRow::from(&first))?;
        o.snapshot(state, config)?;
    }
    observe(state, &first);
    let mut rows = vec![first];
    let schedule = step_schedule(config.time.dt, config.time.t_final);
    let last = schedule.len();
    let mut stop = StopReason::FinalTime;

    for (k, dt) in schedule.into_iter().enumerate().map(|(k, dt)| (k + 1, dt)) {
        let (mut next, diag) = schemes::step(state, kind, dt, params, &config.solver)
            .map_err(|e| with_step(e, k))?;
        if k == last {
            next.t = config.time.t_final;
        }
        let diag = StepDiagnostics { t: next.t, ..diag };
        if let Err(what) = check_invariants(&next, initial_means, &diag) {
            dump(output.as_ref(), &next, config);
            return Err(Error::InvariantViolation { step: k, what });
        }
        if out_cfg.spd_probe_every > 0 && k % out_cfg.spd_probe_every == 0 {
            let report = schemes::spd_probe_state(&next, kind, config.time.dt, params, 2, k as u64)?;
            if !report.passes(SPD_PROBE_TOL) {
                dump(output.as_ref(), &next, config);
                return Err(Error::InvariantViolation { step: k, what: format!("operator probe failed: {report:?}") });
            }
        }
        let slope_stop = config
            .time
            .stop_energy_slope
            .is_some_and(|tol| ((diag.e_discrete - rows[rows.len() - 1].e_discrete) / dt).abs() < tol);
        let finishing = k == last || slope_stop;
        if let Some(o) = output.as_mut() {
            if k % out_cfg.energy_every == 0 || finishing {
                o.log.write_row(&EnergyLogRow::from(&diag))?;
            }
            if (out_cfg.fields_every > 0 && k % out_cfg.fields_every == 0) || finishing {
                o.snapshot(&next, config)?;
            }
        }
        observe(&next, &diag);
        rows.push(diag);
        *state = next;
        if slope_stop {
            stop = StopReason::EnergySlope;
            break;
        }
    }
    if let Some(o) = output.as_mut() {
        o.log.flush()?;
        write_state(&o.dir.join("final"), state, config)?;
    }
    Ok((rows, stop))
}

fn with_step(e: Error, step: usize) -> Error {
    Error::AtStep { step, source: Box::new(e) }
}

fn dump(output: Option<&Output>, state: &PhaseState, config: &SimConfig) {
    if let Some(o) = output {
        let _ = write_state(&o.dir.join(format!("dump_{:06}", state.step_index)), state, config);
    }
}

/// Runs `config` with its output disabled and returns only the final state.
pub fn final_state(config: &SimConfig) -> Result<PhaseState> {
    let mut quiet = config.clone();
    quiet.output.dir = None;
    Ok(run(&quiet)?.final_state)
}

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use tcch_core::model::{self, SurfaceTensions};
use tcch_core::schemes::SchemeKind;
use tcch_core::sim::{self, InitialSpec, RunSummary, SimConfig, StopReason};
use tcch_core::Error;

use crate::{Command, Preset};

/// 2 for failures during a run, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_runtime() => 2,
        _ => 1,
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::CheckParams { sigma } => {
            let [a, b, c] = <[f64; 3]>::try_from(sigma.as_slice())
                .map_err(|_| anyhow::anyhow!("--sigma needs exactly three values, got {}", sigma.len()))?;
            print!("{}", check_params(a, b, c)?);
            Ok(())
        }
        Command::Run { config, overrides } => {
            let config = SimConfig::from_file(&config, &overrides.set)?;
            run_and_report(&config)
        }
        Command::Lens { case, preset } => {
            let sigma = lens_tensions(&case)?;
            let mut config = preset_config(&preset, 2, format!("lens_{case}"));
            config.model.sigma = sigma;
            config.initial = InitialSpec::Lens;
            run_and_report(&apply_overrides(config, &preset.overrides.set)?)
        }
        Command::Spinodal { dim, seed, preset } => {
            let mut config = preset_config(&preset, dim as usize, format!("spinodal_{dim}d_{seed}"));
            config.initial = InitialSpec::Spinodal { seed };
            run_and_report(&apply_overrides(config, &preset.overrides.set)?)
        }
        Command::Convergence { config, levels, out, overrides } => {
            let config = SimConfig::from_file(&config, &overrides.set)?;
            let report = sim::convergence_study(&config, levels)?;
            match out {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    let mut w = BufWriter::new(file);
                    report.write_csv(&mut w)?;
                    w.flush()?;
                    if let Some(o) = report.finest_orders() {
                        eprintln!(
                            "{}: finest orders L2 {:.3}, L1 {:.3}, Linf {:.3}; table written to {}",
                            report.scheme,
                            o[0],
                            o[1],
                            o[2],
                            path.display()
                        );
                    }
                }
                None => report.write_csv(io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn lens_tensions(case: &str) -> Result<[f64; 3]> {
    Ok(match case {
        "a" => [1.0, 1.0, 1.0],
        "b" => [1.0, 0.6, 0.6],
        "c" => [1.0, 0.8, 1.4],
        "d" => [3.0, 1.0, 1.0],
        "e" => [1.0, 1.0, 3.0],
        other => bail!("unknown lens case `{other}`"),
    })
}

fn preset_config(preset: &Preset, dim: usize, default_dir: String) -> SimConfig {
    let mut config = SimConfig::default();
    config.grid.dim = dim;
    config.grid.n = preset.n;
    config.time.scheme = SchemeKind::Cn;
    config.time.dt = preset.dt;
    config.time.t_final = preset.t_final;
    config.time.stop_energy_slope = preset.stop_slope;
    config.output.dir = Some(preset.out.clone().unwrap_or_else(|| PathBuf::from(default_dir)));
    config
}

/// Applies `--set` overrides to a preset by round-tripping through TOML, so
/// presets and config files are validated the same way.
fn apply_overrides(config: SimConfig, overrides: &[String]) -> Result<SimConfig> {
    Ok(SimConfig::from_toml_str(&config.to_toml_string(), overrides)?)
}

fn run_and_report(config: &SimConfig) -> Result<()> {
    let summary = sim::run(config)?;
    print!("{}", run_report(config, &summary));
    Ok(())
}

fn run_report(config: &SimConfig, summary: &RunSummary) -> String {
    let first = &summary.diagnostics[0];
    let last = summary.diagnostics.last().expect("row 0 always present");
    let iters: usize = summary.diagnostics.iter().map(|d| d.cg_iterations).sum();
    let mut s = String::new();
    let _ = writeln!(s, "scheme {} on {}^{} ({:?})", config.time.scheme, config.grid.n, config.grid.dim, config.grid.bc);
    let _ = writeln!(s, "steps {}, t = {}", summary.steps(), summary.final_state.t);
    let _ = writeln!(
        s,
        "stopped: {}",
        match summary.stop {
            StopReason::FinalTime => "final time reached",
            StopReason::EnergySlope => "energy slope below threshold",
        }
    );
    let _ = writeln!(s, "E_discrete {:.10e} -> {:.10e}", first.e_discrete, last.e_discrete);
    let _ = writeln!(s, "max hyperplane error {:.3e}, CG iterations {iters}", last.hyperplane_max_err);
    if let Some(dir) = &config.output.dir {
        let _ = writeln!(s, "output: {}", dir.display());
    }
    s
}

/// Text report of the derived constants for tensions `(σ12, σ13, σ23)`.
pub fn check_params(s12: f64, s13: f64, s23: f64) -> Result<String> {
    let t = SurfaceTensions::new(s12, s13, s23)?;
    let sp = model::spreading_coeffs(&t)?;
    let co = model::coercivity_constant(sp.sigma);
    let mut s = String::new();
    let _ = writeln!(s, "sigma12 = {s12}, sigma13 = {s13}, sigma23 = {s23}");
    for (i, v) in sp.sigma.iter().enumerate() {
        let _ = writeln!(s, "Sigma_{} = {}", i + 1, fmt_num(*v));
    }
    let _ = writeln!(s, "Sigma_T = {}", fmt_num(sp.sigma_t));
    if co.admissible {
        let _ = writeln!(s, "admissible: yes");
    } else {
        let _ = writeln!(s, "admissible: no ({})", co.failing.join("; "));
    }
    let _ = writeln!(s, "coercivity constant = {}", fmt_num(co.lower_bound));
    let partial = sp.sigma.iter().all(|&v| v > 0.0);
    let _ = writeln!(s, "spreading: {}", if partial { "partial" } else { "total" });
    match model::young_angles(&t) {
        Ok(a) => {
            let deg = a.map(f64::to_degrees);
            let _ = writeln!(
                s,
                "Young angles: theta_1 = {:.4} deg, theta_2 = {:.4} deg, theta_3 = {:.4} deg",
                deg[0], deg[1], deg[2]
            );
        }
        Err(_) => {
            let _ = writeln!(s, "total spreading: no finite contact angles");
        }
    }
    Ok(s)
}

/// Shortest representation that survives rounding noise, e.g. `0.4` rather
/// than `0.39999999999999997`.
fn fmt_num(v: f64) -> String {
    let short = format!("{:.12}", v);
    let trimmed = short.trim_end_matches('0').trim_end_matches('.');
    if trimmed == "-0" {
        "0".into()
    } else {
        trimmed.into()
    }
}

//! Simulation configuration (TOML).
//!
//! ```toml
//! [grid]
//! dim = 2            # 2 or 3
//! n = 64             # cells per axis, power of two >= 4
//! bc = "periodic"    # or "neumann"
//!
//! [model]
//! sigma = [1.0, 1.0, 1.0]   # sigma12, sigma13, sigma23
//! epsilon = 0.03
//! mobility = 1e-6
//! lambda = 7.0
//! b = 2.0
//!
//! [time]
//! scheme = "cn"             # ls1, cn or bdf
//! dt = 0.01
//! t_final = 1.0
//! stop_energy_slope = 1e-8  # optional: stop once |ΔE|/δt falls below
//!
//! [initial]
//! kind = "spinodal"         # lens | spinodal | file
//! seed = 42                 # spinodal only
//! # path = "ckpt"           # file only: checkpoint directory
//!
//! [output]
//! dir = "out"               # omit to keep results in memory only
//! energy_every = 1
//! fields_every = 0          # 0: initial and final snapshots only
//! field_format = "vtk"      # vtk, raw or both
//! spd_probe_every = 0       # 0 disables the operator probes
//!
//! [solver]
//! rel_tol = 1e-10
//! abs_tol = 1e-14
//! max_iter = 640            # default: 10 n
//! precondition = true
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};
use crate::model::{ModelParams, SurfaceTensions};
use crate::schemes::SchemeKind;
use crate::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub model: ModelSpec,
    pub time: TimeSpec,
    pub initial: InitialSpec,
    pub output: OutputSpec,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub bc: Boundary,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 2, n: 64, bc: Boundary::Periodic }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub sigma: [f64; 3],
    pub epsilon: f64,
    pub mobility: f64,
    pub lambda: f64,
    pub b: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { sigma: [1.0; 3], epsilon: 0.03, mobility: 1e-6, lambda: 7.0, b: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub t_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_energy_slope: Option<f64>,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { scheme: SchemeKind::Cn, dt: 0.01, t_final: 1.0, stop_energy_slope: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Lens,
    Spinodal { seed: u64 },
    /// A checkpoint directory.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    #[default]
    Vtk,
    Raw,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub energy_every: usize,
    pub fields_every: usize,
    pub field_format: FieldFormat,
    pub spd_probe_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, energy_every: 1, fields_every: 0, field_format: FieldFormat::Vtk, spd_probe_every: 0 }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

impl SimConfig {
    /// Parses a TOML document, applies `path=value` overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table = toml::from_str(text).map_err(|e| config_error("<document>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: SimConfig = serde_path_to_error::deserialize(toml::Value::Table(value))
            .map_err(|e| config_error(&e.path().to_string(), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. A relative initial-condition path is resolved
    /// against the file's directory.
    pub fn from_file(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(&path.display().to_string(), e.to_string()))?;
        let mut config = Self::from_toml_str(&text, overrides)?;
        if let InitialSpec::File { path: p } = &mut config.initial {
            if p.is_relative() {
                if let Some(parent) = path.parent() {
                    *p = parent.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.bc).map_err(|e| config_error("grid", e.to_string()))
    }

    pub fn tensions(&self) -> Result<SurfaceTensions> {
        let [a, b, c] = self.model.sigma;
        SurfaceTensions::new(a, b, c).map_err(|e| config_error("model.sigma", e.to_string()))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(self.tensions()?, m.epsilon, m.mobility, m.lambda, m.b)
            .map_err(|e| config_error("model", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        let params = self.model_params()?;
        params.require_admissible().map_err(|e| config_error("model.sigma", e.to_string()))?;
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(config_error("time.dt", format!("must be > 0, got {}", t.dt)));
        }
        if !(t.t_final.is_finite() && t.t_final >= t.dt * (1.0 - 1e-12)) {
            return Err(config_error("time.t_final", format!("must be >= dt, got {}", t.t_final)));
        }
        if let Some(s) = t.stop_energy_slope {
            if !(s > 0.0) {
                return Err(config_error("time.stop_energy_slope", "must be > 0"));
            }
        }
        if self.output.energy_every == 0 {
            return Err(config_error("output.energy_every", "must be >= 1"));
        }
        self.solver.validate().map_err(|e| config_error("solver", e.to_string()))?;
        Ok(())
    }
}

/// Applies `a.b.c=value`; `value` is read as a TOML value when possible and
/// as a bare string otherwise.
fn apply_override(root: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(spec, "override must have the form path=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_error(path, "empty key in override path"));
    }
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut table = root;
    for key in parents {
        let entry = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_error(path, format!("`{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = SimConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c, SimConfig::default());
        let p = c.model_params().unwrap();
        assert_eq!((p.eps, p.b, p.mobility, p.lambda), (0.03, 2.0, 1e-6, 7.0));
    }

    #[test]
    fn parses_full_document() {
        let text = r#"
            [grid]
            dim = 3
            n = 16
            bc = "neumann"
            [model]
            sigma = [1.0, 0.8, 1.4]
            [time]
            scheme = "bdf"
            dt = 0.5
            t_final = 2.0
            stop_energy_slope = 1e-8
            [initial]
            kind = "spinodal"
            seed = 7
            [output]
            dir = "x"
            field_format = "both"
            [solver]
            rel_tol = 1e-12
            max_iter = 50
        "#;
        let c = SimConfig::from_toml_str(text, &[]).unwrap();
        assert_eq!(c.grid.bc, Boundary::Neumann);
        assert_eq!(c.time.scheme, SchemeKind::Bdf);
        assert_eq!(c.initial, InitialSpec::Spinodal { seed: 7 });
        assert_eq!(c.output.field_format, FieldFormat::Both);
        assert_eq!(c.solver.max_iter, Some(50));
        let round = SimConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = SimConfig::from_toml_str("[time]\ndtt = 1.0\n", &[]).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "time.dtt");
                assert!(message.contains("dtt"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = SimConfig::from_toml_str("[time]\ndt = \"fast\"\n", &[]).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "time.dt"), "{err}");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let over = vec!["time.dt=0.5".to_string(), "initial.kind=spinodal".into(), "initial.seed=3".into(), "time.scheme=ls1".into()];
        let c = SimConfig::from_toml_str("[time]\nt_final = 1.0\n", &over).unwrap();
        assert_eq!(c.time.dt, 0.5);
        assert_eq!(c.time.scheme, SchemeKind::Ls1);
        assert_eq!(c.initial, InitialSpec::Spinodal { seed: 3 });
        assert!(SimConfig::from_toml_str("", &["nonsense".into()]).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            "[time]\ndt = 0.0\n",
            "[time]\ndt = 1.0\nt_final = 0.5\n",
            "[model]\nepsilon = -1.0\n",
            "[model]\nsigma = [1.0, 1.0, 2.0]\n",
            "[model]\nsigma = [1.0, -1.0, 1.0]\n",
            "[grid]\nn = 12\n",
            "[output]\nenergy_every = 0\n",
        ];
        for text in bad {
            assert!(matches!(SimConfig::from_toml_str(text, &[]), Err(Error::Config { .. })), "{text}");
        }
    }
}

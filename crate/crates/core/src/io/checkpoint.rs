//! Restart checkpoints.
//!
//! A checkpoint is a directory holding `c1.f64`, `c2.f64`, `c3.f64` and
//! optionally `u.f64`, each the cell values as raw little-endian `f64` in
//! the grid's row-major order (x fastest), plus `meta.txt` with one
//! `key=value` pair per line:
//!
//! ```text
//! format=tcch-checkpoint-1
//! dim=2
//! n=64
//! bc=periodic
//! step=100
//! t=1.0000000000000000e0
//! ```
//!
//! Further keys (model parameters, scheme) are written for reference and
//! preserved on reading.

use std::collections::BTreeMap;
use std::path::Path;

use super::format_error;
use crate::error::Result;
use crate::grid::{Boundary, Field, FieldTriple, Grid};

const FORMAT: &str = "tcch-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointMeta {
    pub step: usize,
    pub t: f64,
    /// Extra `key=value` entries.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub c: FieldTriple,
    pub u: Option<Field>,
    pub meta: CheckpointMeta,
}

fn write_raw(path: &Path, f: &Field) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_raw(path: &Path, grid: Grid) -> Result<Field> {
    let bytes = std::fs::read(path)?;
    if bytes.len() != 8 * grid.len() {
        return Err(format_error(path, format!("expected {} bytes, found {}", 8 * grid.len(), bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Field::from_values(grid, values)
}

pub fn write_checkpoint(dir: impl AsRef<Path>, c: &FieldTriple, u: Option<&Field>, meta: &CheckpointMeta) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let grid = c.grid();
    for (i, f) in c.iter().enumerate() {
        write_raw(&dir.join(format!("c{}.f64", i + 1)), f)?;
    }
    if let Some(u) = u {
        write_raw(&dir.join("u.f64"), u)?;
    }
    let mut text = format!(
        "format={FORMAT}\ndim={}\nn={}\nbc={}\nstep={}\nt={:.16e}\n",
        grid.dim(),
        grid.n(),
        grid.bc(),
        meta.step,
        meta.t
    );
    for (k, v) in &meta.extra {
        text.push_str(&format!("{k}={v}\n"));
    }
    std::fs::write(dir.join("meta.txt"), text)?;
    Ok(())
}

pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.txt");
    let text = std::fs::read_to_string(&meta_path)?;
    let mut map = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_error(&meta_path, format!("expected key=value, found `{line}`")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut take = |key: &str| map.remove(key).ok_or_else(|| format_error(&meta_path, format!("missing `{key}`")));
    if take("format")? != FORMAT {
        return Err(format_error(&meta_path, "unknown checkpoint format"));
    }
    let num = |key: &str, v: String| v.parse::<usize>().map_err(|e| format_error(&meta_path, format!("{key}: {e}")));
    let dim = num("dim", take("dim")?)?;
    let n = num("n", take("n")?)?;
    let bc = match take("bc")?.as_str() {
        "periodic" => Boundary::Periodic,
        "neumann" => Boundary::Neumann,
        other => return Err(format_error(&meta_path, format!("unknown bc `{other}`"))),
    };
    let step = num("step", take("step")?)?;
    let t = take("t")?.parse::<f64>().map_err(|e| format_error(&meta_path, format!("t: {e}")))?;
    let grid = Grid::new(dim, n, bc)?;
    let c = FieldTriple::new([
        read_raw(&dir.join("c1.f64"), grid)?,
        read_raw(&dir.join("c2.f64"), grid)?,
        read_raw(&dir.join("c3.f64"), grid)?,
    ])?;
    let u_path = dir.join("u.f64");
    let u = if u_path.exists() { Some(read_raw(&u_path, grid)?) } else { None };
    Ok(Checkpoint { c, u, meta: CheckpointMeta { step, t, extra: map } })
}

use std::io::{BufWriter, Write};
use std::path::Path;

use super::format_error;
use crate::error::Result;
use crate::grid::{Boundary, Field, FieldTriple, Grid};

const NAMES: [&str; 3] = ["c1", "c2", "c3"];

/// Writes `c1, c2, c3` as a legacy binary STRUCTURED_POINTS file with
/// big-endian `f32` values.
pub fn write_vtk(path: impl AsRef<Path>, c: &FieldTriple, title: &str) -> Result<()> {
    let grid = c.grid();
    let n = grid.n();
    let nz = if grid.dim() == 3 { n } else { 1 };
    let h = grid.h();
    let mut out = BufWriter::new(std::fs::File::create(path.as_ref())?);
    let title: String = title.chars().filter(|ch| *ch != '\n').take(255).collect();
    write!(
        out,
        "# vtk DataFile Version 3.0\n{title}\nBINARY\nDATASET STRUCTURED_POINTS\n\
         DIMENSIONS {n} {n} {nz}\nORIGIN 0 0 0\nSPACING {h} {h} {h}\nPOINT_DATA {}\n",
        grid.len()
    )?;
    for (name, field) in NAMES.iter().zip(c.iter()) {
        write!(out, "SCALARS {name} float 1\nLOOKUP_TABLE default\n")?;
        let mut bytes = Vec::with_capacity(4 * grid.len());
        for v in field.values() {
            bytes.extend_from_slice(&(*v as f32).to_be_bytes());
        }
        out.write_all(&bytes)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file produced by [`write_vtk`]. The boundary tag is not stored in
/// the format and is taken from the caller.
pub fn read_vtk(path: impl AsRef<Path>, bc: Boundary) -> Result<FieldTriple> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<String> {
        let rest = bytes.get(*pos..)?;
        let end = rest.iter().position(|b| *b == b'\n')?;
        *pos += end + 1;
        Some(String::from_utf8_lossy(&rest[..end]).into_owned())
    };
    let mut dims = None;
    let mut points = None;
    for _ in 0..8 {
        let line = next_line(&mut pos).ok_or_else(|| format_error(path, "truncated header"))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.first().copied() {
            Some("DIMENSIONS") => dims = Some(words[1..].iter().filter_map(|w| w.parse::<usize>().ok()).collect::<Vec<_>>()),
            Some("POINT_DATA") => points = words.get(1).and_then(|w| w.parse::<usize>().ok()),
            Some("ASCII") => return Err(format_error(path, "only BINARY files are supported")),
            _ => {}
        }
    }
    let dims = dims.ok_or_else(|| format_error(path, "missing DIMENSIONS"))?;
    let points = points.ok_or_else(|| format_error(path, "missing POINT_DATA"))?;
    if dims.len() != 3 || dims[0] != dims[1] || dims.iter().product::<usize>() != points {
        return Err(format_error(path, format!("unsupported DIMENSIONS {dims:?}")));
    }
    let dim = if dims[2] == 1 { 2 } else { 3 };
    let grid = Grid::new(dim, dims[0], bc)?;
    let mut fields = Vec::with_capacity(3);
    for name in NAMES {
        let scalars = next_line(&mut pos).ok_or_else(|| format_error(path, "missing SCALARS"))?;
        if scalars.split_whitespace().nth(1) != Some(name) {
            return Err(format_error(path, format!("expected SCALARS {name}, found `{scalars}`")));
        }
        next_line(&mut pos).ok_or_else(|| format_error(path, "missing LOOKUP_TABLE"))?;
        let raw = bytes
            .get(pos..pos + 4 * points)
            .ok_or_else(|| format_error(path, format!("truncated data for {name}")))?;
        let values = raw.chunks_exact(4).map(|b| f32::from_be_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        pos += 4 * points + 1;
        fields.push(Field::from_values(grid, values)?);
    }
    let [a, b, c]: [Field; 3] = fields.try_into().expect("three fields");
    FieldTriple::new([a, b, c])
}

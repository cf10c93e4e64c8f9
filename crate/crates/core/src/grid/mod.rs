//! Uniform cell-centred grids on the unit square/cube and the scalar fields
//! that live on them.
//!
//! Cell `(i, j, k)` has centre `((i + ½)h, (j + ½)h, (k + ½)h)` with `h = 1/n`.
//! Storage is C row-major with `x` varying fastest: the flat index of a 2D
//! cell is `j*n + i`, of a 3D cell `(k*n + j)*n + i`.
//!
//! The discrete gradient energy is `‖∇u‖² := −(Δ_h u, u)_h`, so the stencil
//! Laplacian is the only differential operator in the crate and every
//! summation-by-parts step of the energy estimates holds exactly.

mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub use spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    /// Homogeneous Neumann via mirrored ghost cells.
    Neumann,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::Neumann => f.write_str("neumann"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
    bc: Boundary,
}

impl Grid {
    /// `dim` is 2 or 3; `n` cells per axis, a power of two and at least 4.
    pub fn new(dim: usize, n: usize, bc: Boundary) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "cells per axis must be a power of two >= 4, got {n}"
            )));
        }
        Ok(Self { dim, n, bc })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bc(&self) -> Boundary {
        self.bc
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of cells, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Axis indices `[i, j, k]` of a flat index (`k = 0` in 2D).
    pub fn indices(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n) % n * usize::from(self.dim == 3)]
    }

    pub fn flat(&self, ijk: [usize; 3]) -> usize {
        let n = self.n;
        if self.dim == 2 {
            ijk[1] * n + ijk[0]
        } else {
            (ijk[2] * n + ijk[1]) * n + ijk[0]
        }
    }

    /// Cell centre of a flat index (`z = 0` in 2D).
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let h = self.h();
        let [i, j, k] = self.indices(idx);
        let z = if self.dim == 3 { (k as f64 + 0.5) * h } else { 0.0 };
        [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, z]
    }

    /// Spectral data for this grid, built once and shared.
    pub fn spectral(&self) -> std::sync::Arc<Spectral> {
        Spectral::for_grid(*self)
    }
}

/// One real value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync + Send) -> Self {
        Self::from_index_fn(grid, |idx| f(grid.center(idx)))
    }

    pub fn from_index_fn(grid: Grid, f: impl Fn(usize) -> f64 + Sync + Send) -> Self {
        let mut values = vec![0.0; grid.len()];
        par::fill(&mut values, f);
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Field {
        let v = &self.values;
        Field::from_index_fn(self.grid, |i| f(v[i]))
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Field {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let (a, b) = (&self.values, &other.values);
        Field::from_index_fn(self.grid, |i| f(a[i], b[i]))
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Field) {
        assert_eq!(self.grid, x.grid, "grid mismatch");
        let xv = &x.values;
        par::for_each_chunk(&mut self.values, |off, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v += alpha * xv[off + k];
            }
        });
    }

    /// `self = x + beta * self`.
    pub fn xpby(&mut self, x: &Field, beta: f64) {
        assert_eq!(self.grid, x.grid, "grid mismatch");
        let xv = &x.values;
        par::for_each_chunk(&mut self.values, |off, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = xv[off + k] + beta * *v;
            }
        });
    }

    pub fn scale(&mut self, alpha: f64) {
        par::for_each_chunk(&mut self.values, |_, chunk| chunk.iter_mut().for_each(|v| *v *= alpha));
    }

    pub fn add_scalar(&mut self, c: f64) {
        par::for_each_chunk(&mut self.values, |_, chunk| chunk.iter_mut().for_each(|v| *v += c));
    }

    pub fn sum(&self) -> f64 {
        let v = &self.values;
        par::sum(v.len(), |i| v[i])
    }

    /// Discrete mean; also the integral since |Ω| = 1.
    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `h^dim Σ u v` without the grid check.
    pub fn dot(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let (a, b) = (&self.values, &other.values);
        self.grid.cell_volume() * par::sum(a.len(), |i| a[i] * b[i])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn laplacian(&self) -> Field {
        laplacian(self)
    }

    pub fn inv_laplacian(&self) -> Result<Field> {
        inv_laplacian(self)
    }

    pub fn grad_norm_sq(&self) -> f64 {
        grad_norm_sq(self)
    }
}

/// Second-order central stencil (5-point in 2D, 7-point in 3D).
pub fn laplacian(u: &Field) -> Field {
    let g = u.grid;
    let n = g.n;
    let inv_h2 = (n * n) as f64;
    let v = &u.values;
    let periodic = g.bc == Boundary::Periodic;
    // Offset of the neighbouring line along a slow axis; a mirror ghost
    // (Neumann) is the line itself.
    let neighbour = |line_index: usize, stride: usize, step_up: bool| -> isize {
        let i = line_index % n;
        match (step_up, i + 1 < n, i > 0) {
            (true, true, _) => stride as isize,
            (false, _, true) => -(stride as isize),
            _ if periodic => {
                let wrap = ((n - 1) * stride) as isize;
                if step_up {
                    -wrap
                } else {
                    wrap
                }
            }
            _ => 0,
        }
    };
    let mut out = vec![0.0; g.len()];
    par::for_each_block(&mut out, n, |start, row| {
        let line = start / n;
        let offsets = [
            (neighbour(line, n, false), neighbour(line, n, true)),
            (neighbour(line / n, n * n, false), neighbour(line / n, n * n, true)),
        ];
        let offsets = &offsets[..g.dim - 1];
        let at = |idx: usize, off: isize| v[(idx as isize + off) as usize];
        for (i, o) in row.iter_mut().enumerate() {
            let idx = start + i;
            let center = v[idx];
            let left = if i > 0 { v[idx - 1] } else if periodic { v[idx + n - 1] } else { center };
            let right = if i + 1 < n { v[idx + 1] } else if periodic { v[idx + 1 - n] } else { center };
            let mut acc = left + right - 2.0 * center;
            for &(down, up) in offsets {
                acc += at(idx, down) + at(idx, up) - 2.0 * center;
            }
            *o = acc * inv_h2;
        }
    });
    Field { grid: g, values: out }
}

/// Relative tolerance on the input mean accepted by [`inv_laplacian`].
pub const ZERO_MEAN_TOL: f64 = 1e-12;

/// Means below this magnitude are accepted regardless of the field scale,
/// so that fields made purely of round-off do not trip the check.
pub const ZERO_MEAN_FLOOR: f64 = 1e-30;

/// Exact inverse of [`laplacian`] on zero-mean fields, returning the
/// zero-mean preimage. Periodic grids use Fourier modes and Neumann grids
/// cosine modes; each mode is divided by the stencil's own eigenvalue.
pub fn inv_laplacian(u: &Field) -> Result<Field> {
    check_zero_mean(u)?;
    let spectral = u.grid.spectral();
    let mut out = [u.clone()];
    spectral.apply_multiplier(&mut out, spectral.inverse_symbol());
    let [v] = out;
    Ok(v)
}

pub(crate) fn check_zero_mean(u: &Field) -> Result<()> {
    let mean = u.mean();
    let max_abs = u.max_abs();
    if mean.abs() > ZERO_MEAN_TOL * max_abs && mean.abs() > ZERO_MEAN_FLOOR {
        return Err(Error::NonZeroMeanInput { mean, max_abs });
    }
    Ok(())
}

/// Midpoint-rule L² inner product.
pub fn inner(u: &Field, v: &Field) -> Result<f64> {
    if u.grid != v.grid {
        return Err(Error::GridMismatch);
    }
    Ok(u.dot(v))
}

/// `‖∇u‖² := −(Δ_h u, u)`.
pub fn grad_norm_sq(u: &Field) -> f64 {
    -laplacian(u).dot(u)
}

/// `u − mean(u)`. A mean already at round-off level of `max|u|` is left in
/// place, which makes the projection exactly idempotent.
pub fn project_zero_mean(u: &Field) -> Field {
    let mut out = u.clone();
    let mean = u.mean();
    if mean.abs() > ROUND_OFF_MEAN * u.max_abs() {
        out.add_scalar(-mean);
    }
    out
}

const ROUND_OFF_MEAN: f64 = 64.0 * f64::EPSILON;

/// Three fields on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTriple([Field; 3]);

impl FieldTriple {
    pub fn new(fields: [Field; 3]) -> Result<Self> {
        let g = fields[0].grid;
        if fields.iter().any(|f| f.grid != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self(fields))
    }

    pub fn zeros(grid: Grid) -> Self {
        Self([Field::zeros(grid), Field::zeros(grid), Field::zeros(grid)])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> Self {
        Self(std::array::from_fn(|c| Field::from_index_fn(grid, |i| f(c, i))))
    }

    pub fn grid(&self) -> Grid {
        self.0[0].grid
    }

    pub fn fields(&self) -> &[Field; 3] {
        &self.0
    }

    pub fn fields_mut(&mut self) -> &mut [Field; 3] {
        &mut self.0
    }

    pub fn into_fields(self) -> [Field; 3] {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Field> {
        self.0.iter()
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> FieldTriple {
        FieldTriple(std::array::from_fn(|i| f(&self.0[i])))
    }

    /// Componentwise combination `f(a_i, b_i)`.
    pub fn zip_map(&self, other: &FieldTriple, f: impl Fn(f64, f64) -> f64 + Sync + Send + Copy) -> FieldTriple {
        FieldTriple(std::array::from_fn(|i| self.0[i].zip_map(&other.0[i], f)))
    }

    /// `Σ_i (u_i, v_i)`.
    pub fn inner(&self, other: &FieldTriple) -> f64 {
        (0..3).map(|i| self.0[i].dot(&other.0[i])).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, x: &FieldTriple) {
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            a.axpy(alpha, b);
        }
    }

    pub fn xpby(&mut self, x: &FieldTriple, beta: f64) {
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            a.xpby(b, beta);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|f| f.scale(alpha));
    }

    pub fn means(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.0[i].mean())
    }

    /// Pointwise `c1 + c2 + c3`.
    pub fn component_sum(&self) -> Field {
        let [a, b, c] = [&self.0[0].values, &self.0[1].values, &self.0[2].values];
        Field::from_index_fn(self.grid(), |i| a[i] + b[i] + c[i])
    }

    /// `max |c1 + c2 + c3 − target|`.
    pub fn hyperplane_error(&self, target: f64) -> f64 {
        let [a, b, c] = [&self.0[0].values, &self.0[1].values, &self.0[2].values];
        par::max(a.len(), |i| (a[i] + b[i] + c[i] - target).abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(Field::max_abs).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Field::is_finite)
    }
}

impl std::ops::Index<usize> for FieldTriple {
    type Output = Field;
    fn index(&self, i: usize) -> &Field {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for FieldTriple {
    fn index_mut(&mut self, i: usize) -> &mut Field {
        &mut self.0[i]
    }
}

/// Orthogonal projector onto `{Σφ_i = 0 pointwise, mean(φ_i) = 0}`.
pub fn project_subspace(phi: &FieldTriple) -> FieldTriple {
    let mut out = phi.clone();
    project_subspace_in_place(&mut out);
    out
}

pub fn project_subspace_in_place(phi: &mut FieldTriple) {
    let third = phi.component_sum();
    let t = third.values();
    for f in phi.0.iter_mut() {
        par::for_each_chunk(&mut f.values, |off, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v -= t[off + k] / 3.0;
            }
        });
        let m = f.mean();
        f.add_scalar(-m);
    }
}

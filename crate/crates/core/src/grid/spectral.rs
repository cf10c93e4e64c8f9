//! Diagonalisation of the stencil Laplacian by fast transforms.
//!
//! Periodic grids are transformed directly. A Neumann grid of `n` cells is
//! mirrored into a periodic grid of `2n` cells per axis; the mirror-ghost
//! stencil on the original cells coincides with the periodic stencil on the
//! even extension, so cosine-mode behaviour comes out of the same FFT.
//!
//! Real fields are processed two at a time, packed as real and imaginary
//! parts. This is exact because every multiplier used here is real and even
//! in the wavenumber.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Boundary, Field, Grid};
use crate::par;

pub struct Spectral {
    grid: Grid,
    /// Transform length per axis: `n` (periodic) or `2n` (Neumann).
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    eigenvalues: Vec<f64>,
    inverse_symbol: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).field("len", &self.len).finish()
    }
}

fn cache() -> &'static Mutex<HashMap<Grid, Arc<Spectral>>> {
    static CACHE: OnceLock<Mutex<HashMap<Grid, Arc<Spectral>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

impl Spectral {
    pub fn for_grid(grid: Grid) -> Arc<Spectral> {
        let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
        map.entry(grid).or_insert_with(|| Arc::new(Spectral::build(grid))).clone()
    }

    fn build(grid: Grid) -> Self {
        let n = grid.n();
        let len = match grid.bc() {
            Boundary::Periodic => n,
            Boundary::Neumann => 2 * n,
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);

        let inv_h2 = (n * n) as f64;
        let axis: Vec<f64> = (0..len)
            .map(|k| (2.0 * (2.0 * std::f64::consts::PI * k as f64 / len as f64).cos() - 2.0) * inv_h2)
            .collect();
        let total = len.pow(grid.dim() as u32);
        let eigenvalues: Vec<f64> = (0..total)
            .map(|idx| {
                let (k0, k1, k2) = (idx % len, (idx / len) % len, idx / (len * len));
                let mut e = axis[k0] + axis[k1];
                if grid.dim() == 3 {
                    e += axis[k2];
                }
                e
            })
            .collect();
        let inverse_symbol = eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &e)| if k == 0 { 0.0 } else { 1.0 / e })
            .collect();
        Self { grid, len, forward, inverse, eigenvalues, inverse_symbol }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Stencil eigenvalue of every transform mode (non-positive, zero only
    /// for the constant mode at index 0).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `1/λ_k`, with the constant mode mapped to zero.
    pub fn inverse_symbol(&self) -> &[f64] {
        &self.inverse_symbol
    }

    /// Builds a per-mode multiplier from the mode eigenvalue.
    pub fn multiplier(&self, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        self.eigenvalues.iter().enumerate().map(|(k, &e)| f(k, e)).collect()
    }

    /// Replaces each field by `F⁻¹(m · F u)`. `mult` must be real and even
    /// in the wavenumber (any function of the eigenvalue is).
    pub fn apply_multiplier(&self, fields: &mut [Field], mult: &[f64]) {
        assert_eq!(mult.len(), self.eigenvalues.len(), "multiplier length");
        for f in fields.iter() {
            assert_eq!(f.grid(), self.grid, "grid mismatch");
        }
        let mut pairs: Vec<&mut [Field]> = fields.chunks_mut(2).collect();
        let jobs: Vec<&mut &mut [Field]> = pairs.iter_mut().collect();
        par::map(jobs, |pair| self.apply_pair(pair, mult));
    }

    fn apply_pair(&self, pair: &mut [Field], mult: &[f64]) {
        let mut buf = self.pack(pair);
        self.transform(&mut buf, &self.forward);
        let scale = 1.0 / buf.len() as f64;
        par::for_each_chunk(&mut buf, |off, chunk| {
            for (k, z) in chunk.iter_mut().enumerate() {
                *z *= mult[off + k] * scale;
            }
        });
        self.transform(&mut buf, &self.inverse);
        self.unpack(&buf, pair);
    }

    fn pack(&self, pair: &[Field]) -> Vec<Complex<f64>> {
        let total = self.eigenvalues.len();
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        let re = pair[0].values();
        let im = pair.get(1).map(|f| f.values());
        let n = self.grid.n();
        let len = self.len;
        let src = |idx: usize| -> usize {
            if self.grid.bc() == Boundary::Periodic {
                return idx;
            }
            let fold = |e: usize| if e < n { e } else { 2 * n - 1 - e };
            let (e0, e1, e2) = (idx % len, (idx / len) % len, idx / (len * len));
            self.grid.flat([fold(e0), fold(e1), fold(e2)])
        };
        par::fill(&mut buf, |idx| {
            let s = src(idx);
            Complex::new(re[s], im.map_or(0.0, |v| v[s]))
        });
        buf
    }

    fn unpack(&self, buf: &[Complex<f64>], pair: &mut [Field]) {
        let len = self.len;
        let grid = self.grid;
        let ext = |idx: usize| -> usize {
            let [i, j, k] = grid.indices(idx);
            (k * len + j) * len + i
        };
        for (slot, field) in pair.iter_mut().enumerate() {
            par::fill(field.values_mut(), |idx| {
                let z = buf[ext(idx)];
                if slot == 0 { z.re } else { z.im }
            });
        }
    }

    /// Full d-dimensional transform in place.
    fn transform(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let dim = self.grid.dim();
        self.transform_last_axis(buf, fft);
        let mut tmp = vec![Complex::new(0.0, 0.0); buf.len()];
        for axis in 0..dim - 1 {
            self.swap_with_last(buf, &mut tmp, axis);
            self.transform_last_axis(&mut tmp, fft);
            self.swap_with_last(&tmp, buf, axis);
        }
    }

    /// Transforms along the contiguous axis (flat index `% len`).
    fn transform_last_axis(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let len = self.len;
        let lines = (par::CHUNK / len).max(1);
        par::for_each_block(buf, lines * len, |_, block| {
            let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(block, &mut scratch);
        });
    }

    /// `dst = src` with the contiguous axis exchanged with another one: the
    /// slow axis for `axis == 0`, the middle axis for `axis == 1` in 3D; a
    /// plain transpose in 2D. Each permutation is an involution.
    fn swap_with_last(&self, src: &[Complex<f64>], dst: &mut [Complex<f64>], axis: usize) {
        let len = self.len;
        let dim = self.grid.dim();
        par::fill(dst, |idx| {
            let (a, b, c) = (idx % len, (idx / len) % len, idx / (len * len));
            // (a, b, c) are the fastest, middle, slowest indices.
            let s = match (dim, axis) {
                (2, _) => a * len + b,
                (3, 0) => (a * len + b) * len + c,
                _ => (c * len + a) * len + b,
            };
            src[s]
        });
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{Field, FieldTriple, Grid};
use crate::model::ModelParams;
use crate::schemes::PhaseState;

/// Radius of the initial lens.
pub const LENS_RADIUS: f64 = 0.15;

/// Phases of the lens profile at point `x`: a disc of radius 0.15 centred in
/// the domain, split horizontally into phase 1 (upper half) and phase 2
/// (lower half), embedded in phase 3. In 3D the disc becomes a ball.
pub fn lens_profile(x: [f64; 3], dim: usize, eps: f64) -> [f64; 3] {
    let dz2 = if dim == 3 { (x[2] - 0.5).powi(2) } else { 0.0 };
    let r = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) + dz2).sqrt();
    let c3 = 0.5 * (1.0 + ((r - LENS_RADIUS) / eps).tanh());
    let c1 = 0.5 * (1.0 - c3) * (1.0 + ((x[1] - 0.5) / eps).tanh());
    [c1, 1.0 - c1 - c3, c3]
}

pub fn init_lens(grid: Grid, eps: f64) -> FieldTriple {
    let cells: Vec<[f64; 3]> = (0..grid.len()).map(|i| lens_profile(grid.center(i), grid.dim(), eps)).collect();
    FieldTriple::from_fn(grid, |comp, i| cells[i][comp])
}

/// Amplitude of the spinodal perturbation.
pub const SPINODAL_AMPLITUDE: f64 = 0.001;

/// Near-uniform mixture: `φ_i = 0.5 + 0.001 r_i` with independent uniform
/// `r_i ∈ [−1, 1]` (each made exactly mean-free), normalised to
/// `c_i = φ_i / Σφ_j`.
pub fn init_spinodal(grid: Grid, seed: u64) -> FieldTriple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: Vec<Field> = (0..3)
        .map(|_| {
            let r: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            Field::from_index_fn(grid, |i| 0.5 + SPINODAL_AMPLITUDE * (r[i] - mean))
        })
        .collect();
    let total = Field::from_index_fn(grid, |i| phi[0].values()[i] + phi[1].values()[i] + phi[2].values()[i]);
    FieldTriple::from_fn(grid, |comp, i| phi[comp].values()[i] / total.values()[i])
}

/// Initial state with `U⁰ = √(F(c⁰) + B)`.
pub fn init_state(c0: FieldTriple, params: &ModelParams) -> Result<PhaseState> {
    PhaseState::new(c0, params)
}

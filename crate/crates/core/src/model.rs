//! Model algebra: spreading coefficients, admissibility, the bulk potential
//! and its quadratization, energies, and the Young contact angles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, FieldTriple};
use crate::par;

/// Pairwise surface tensions `σ12, σ13, σ23`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTensions {
    pub s12: f64,
    pub s13: f64,
    pub s23: f64,
}

impl SurfaceTensions {
    pub fn new(s12: f64, s13: f64, s23: f64) -> Result<Self> {
        let ok = |s: f64| s.is_finite() && s > 0.0;
        if !(ok(s12) && ok(s13) && ok(s23)) {
            return Err(Error::NonPositiveTension(s12, s13, s23));
        }
        Ok(Self { s12, s13, s23 })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s12, self.s13, self.s23]
    }
}

/// `Σ_i = σ_ij + σ_ik − σ_jk` and `Σ_T` with `3/Σ_T = Σ 1/Σ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadingCoefficients {
    pub sigma: [f64; 3],
    pub sigma_t: f64,
}

pub fn spreading_coeffs(t: &SurfaceTensions) -> Result<SpreadingCoefficients> {
    let sigma = [t.s12 + t.s13 - t.s23, t.s12 + t.s23 - t.s13, t.s13 + t.s23 - t.s12];
    if let Some(i) = sigma.iter().position(|&s| s == 0.0) {
        return Err(Error::ZeroSpreadingCoefficient { index: i + 1 });
    }
    let inv_sum: f64 = sigma.iter().map(|s| 1.0 / s).sum();
    Ok(SpreadingCoefficients { sigma, sigma_t: 3.0 / inv_sum })
}

/// Outcome of the admissibility test together with the coercivity constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Coercivity {
    pub admissible: bool,
    /// Minimum of `Σ Σ_i ξ_i²` over unit `ξ` with `Σ ξ_i = 0`. Positive
    /// exactly when admissible.
    pub lower_bound: f64,
    /// Human-readable clauses of the admissibility condition that fail.
    pub failing: Vec<String>,
}

pub fn coercivity_constant(sigma: [f64; 3]) -> Coercivity {
    let [s1, s2, s3] = sigma;
    let mut failing = Vec::new();
    let cross = s1 * s2 + s1 * s3 + s2 * s3;
    if cross <= 0.0 {
        failing.push(format!("Σ1Σ2 + Σ1Σ3 + Σ2Σ3 = {cross} is not > 0"));
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let s = sigma[i] + sigma[j];
        if s <= 0.0 {
            failing.push(format!("Σ{} + Σ{} = {s} is not > 0", i + 1, j + 1));
        }
    }
    // Quadratic form in the orthonormal plane basis (1,-1,0)/√2, (1,1,-2)/√6.
    let p = (s1 + s2) / 2.0;
    let q = (s1 + s2 + 4.0 * s3) / 6.0;
    let r = (s1 - s2) / (2.0 * 3f64.sqrt());
    let lower_bound = (p + q) / 2.0 - (((p - q) / 2.0).powi(2) + r * r).sqrt();
    Coercivity { admissible: failing.is_empty(), lower_bound, failing }
}

/// Physical and numerical parameters of the model, with derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tensions: SurfaceTensions,
    /// `Σ1, Σ2, Σ3`.
    pub sigma: [f64; 3],
    pub sigma_t: f64,
    /// Coercivity constant; may be non-positive when not admissible.
    pub sigma_min: f64,
    pub admissible: bool,
    /// Interface width ε.
    pub eps: f64,
    /// Mobility M0.
    pub mobility: f64,
    /// Sixth-order coefficient Λ.
    pub lambda: f64,
    /// Quadratization shift B.
    pub b: f64,
}

impl ModelParams {
    pub fn new(tensions: SurfaceTensions, eps: f64, mobility: f64, lambda: f64, b: f64) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("epsilon", eps)?;
        positive("mobility", mobility)?;
        positive("B", b)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let sp = spreading_coeffs(&tensions)?;
        let co = coercivity_constant(sp.sigma);
        Ok(Self {
            tensions,
            sigma: sp.sigma,
            sigma_t: sp.sigma_t,
            sigma_min: co.lower_bound,
            admissible: co.admissible,
            eps,
            mobility,
            lambda,
            b,
        })
    }

    /// ε = 0.03, B = 2, M0 = 1e-6, Λ = 7.
    pub fn with_defaults(tensions: SurfaceTensions) -> Result<Self> {
        Self::new(tensions, 0.03, 1e-6, 7.0, 2.0)
    }

    pub fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::NotAdmissible(coercivity_constant(self.sigma).failing.join("; ")))
        }
    }

    /// `Σ_j H_j / Σ_j` weights.
    pub(crate) fn inv_sigma(&self) -> [f64; 3] {
        self.sigma.map(|s| 1.0 / s)
    }
}

/// A point `(c1, c2, c3)`, not necessarily on the hyperplane or in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint(pub [f64; 3]);

/// `F = F0 + P` with `F0 = Σ (Σ_i/2) c_i²(1−c_i)²` and `P = 3Λ c1²c2²c3²`.
pub fn bulk_potential(p: PhasePoint, params: &ModelParams) -> f64 {
    let c = p.0;
    let f0: f64 = (0..3).map(|i| 0.5 * params.sigma[i] * (c[i] * (1.0 - c[i])).powi(2)).sum();
    f0 + 3.0 * params.lambda * (c[0] * c[1] * c[2]).powi(2)
}

/// Smallest admissible value of `F + B` under the square root.
pub const QUADRATIZATION_FLOOR: f64 = 1e-12;

/// `H_i = ∂U/∂c_i = (∂F/∂c_i) / (2√(F + B))` for `U = √(F + B)`.
pub fn h_functions(p: PhasePoint, params: &ModelParams) -> Result<[f64; 3]> {
    let c = p.0;
    let shifted = bulk_potential(p, params) + params.b;
    if !(shifted >= QUADRATIZATION_FLOOR) {
        return Err(Error::QuadratizationFloor { value: shifted, cell: None });
    }
    let denom = 2.0 * shifted.sqrt();
    let six_lambda = 6.0 * params.lambda;
    let sq = [c[0] * c[0], c[1] * c[1], c[2] * c[2]];
    let others = [sq[1] * sq[2], sq[0] * sq[2], sq[0] * sq[1]];
    Ok(std::array::from_fn(|i| {
        let double_well = params.sigma[i] * (c[i] - sq[i]) * (1.0 - 2.0 * c[i]);
        (double_well + six_lambda * c[i] * others[i]) / denom
    }))
}

fn point(c: &FieldTriple, idx: usize) -> PhasePoint {
    PhasePoint([c[0].values()[idx], c[1].values()[idx], c[2].values()[idx]])
}

/// Cellwise `F(C)`.
pub fn bulk_field(c: &FieldTriple, params: &ModelParams) -> Field {
    Field::from_index_fn(c.grid(), |idx| bulk_potential(point(c, idx), params))
}

/// Cellwise `U = √(F(C) + B)`.
pub fn aux_field(c: &FieldTriple, params: &ModelParams) -> Result<Field> {
    let f = bulk_field(c, params);
    if let Some((cell, v)) = f
        .values()
        .iter()
        .map(|v| v + params.b)
        .enumerate()
        .find(|(_, v)| !(*v >= QUADRATIZATION_FLOOR))
    {
        return Err(Error::QuadratizationFloor { value: v, cell: Some(cell) });
    }
    Ok(f.map(|v| (v + params.b).sqrt()))
}

/// Cellwise `(H1, H2, H3)`.
pub fn h_field(c: &FieldTriple, params: &ModelParams) -> Result<FieldTriple> {
    let grid = c.grid();
    let mut cells = vec![[0.0; 3]; grid.len()];
    par::fill(&mut cells, |idx| h_functions(point(c, idx), params).unwrap_or([f64::NAN; 3]));
    if let Some(cell) = cells.iter().position(|h| h[0].is_nan()) {
        let value = bulk_potential(point(c, cell), params) + params.b;
        if !(value >= QUADRATIZATION_FLOOR) {
            return Err(Error::QuadratizationFloor { value, cell: Some(cell) });
        }
    }
    Ok(FieldTriple::from_fn(grid, |comp, idx| cells[idx][comp]))
}

/// Pointwise `Σ_j H_j/Σ_j`, the weight entering the Lagrange multiplier.
pub fn h_over_sigma(h: &FieldTriple, params: &ModelParams) -> Field {
    let inv = params.inv_sigma();
    let [a, b, c] = [h[0].values(), h[1].values(), h[2].values()];
    Field::from_index_fn(h.grid(), |i| a[i] * inv[0] + b[i] * inv[1] + c[i] * inv[2])
}

/// `β = −(8/ε) Σ_T (Σ_j H_j/Σ_j) U`, scaled by `w`.
pub fn beta_field(h: &FieldTriple, u: &Field, w: f64, params: &ModelParams) -> Field {
    let k = -8.0 / params.eps * params.sigma_t * w;
    h_over_sigma(h, params).zip_map(u, |hs, u| k * hs * u)
}

fn gradient_energy(c: &FieldTriple, params: &ModelParams) -> f64 {
    (0..3).map(|i| 0.375 * params.sigma[i] * params.eps * c[i].grad_norm_sq()).sum()
}

/// `Σ (3/8)Σ_i ε ‖∇c_i‖² + (12/ε)(F(C), 1)`.
pub fn energy_original(c: &FieldTriple, params: &ModelParams) -> f64 {
    gradient_energy(c, params) + 12.0 / params.eps * bulk_field(c, params).sum() * c.grid().cell_volume()
}

/// `Σ (3/8)Σ_i ε ‖∇c_i‖² + (12/ε)‖U‖² − (12/ε)B|Ω|`.
pub fn energy_quadratized(c: &FieldTriple, u: &Field, params: &ModelParams) -> f64 {
    gradient_energy(c, params) + 12.0 / params.eps * (u.dot(u) - params.b)
}

/// Two-level energy of the BDF2 scheme:
/// `Σ (3/8)Σ_i ε (‖∇c_i‖²/2 + ‖∇(2c_i − c_i^prev)‖²/2) + (12/ε)(‖U‖²/2 + ‖2U − U^prev‖²/2) − (12/ε)B`.
pub fn energy_bdf(current: (&FieldTriple, &Field), previous: (&FieldTriple, &Field), params: &ModelParams) -> f64 {
    let (c, u) = current;
    let (cp, up) = previous;
    let extrap = c.zip_map(cp, |a, b| 2.0 * a - b);
    let u_extrap = u.zip_map(up, |a, b| 2.0 * a - b);
    0.5 * (gradient_energy(c, params) + gradient_energy(&extrap, params))
        + 12.0 / params.eps * (0.5 * u.dot(u) + 0.5 * u_extrap.dot(&u_extrap) - params.b)
}

/// Young contact angles `θ_i = π − A_i`, with `A_i` the interior angles of
/// the triangle with sides `(σ23, σ13, σ12)` opposite `(A1, A2, A3)`.
pub fn young_angles(t: &SurfaceTensions) -> Result<[f64; 3]> {
    let sides = [t.s23, t.s13, t.s12];
    let closes = (0..3).all(|i| sides[i] < sides[(i + 1) % 3] + sides[(i + 2) % 3]);
    if !closes {
        return Err(Error::TotalSpreading);
    }
    Ok(std::array::from_fn(|i| {
        let (a, b, c) = (sides[i], sides[(i + 1) % 3], sides[(i + 2) % 3]);
        let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
        std::f64::consts::PI - cos.acos()
    }))
}

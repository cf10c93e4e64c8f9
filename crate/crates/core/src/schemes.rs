//! The three linear IEQ time steppers as one parameterised condensed solve.
//!
//! Each scheme advances `(c, U)` by solving a symmetric positive definite
//! system for the zero-mean parts of `c^{n+1}` on the subspace
//! `{Σφ_i = 0, mean(φ_i) = 0}`, then updating `U` algebraically and
//! reconstructing the chemical potentials pointwise. The schemes differ only
//! in the weights `(a, g, w)`, the point at which `H` is evaluated, and the
//! history data entering the right-hand side:
//!
//! | scheme | `a`          | `g`   | `w`   | `H` at                      |
//! |--------|--------------|-------|-------|-----------------------------|
//! | LS1    | `1/(M0δt)`   | `3/4` | `1`   | `c^n`                       |
//! | CN     | `1/(M0δt)`   | `3/8` | `1/2` | `3/2 c^n − 1/2 c^{n−1}`     |
//! | BDF    | `3/(2M0δt)`  | `3/4` | `1`   | `2c^n − c^{n−1}`            |
//!
//! The two-level schemes take their first step with LS1. A CN step whose
//! length differs from the previous one extrapolates `H` with the actual
//! step ratio; a BDF step of a different length falls back to LS1.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{project_subspace, project_subspace_in_place, Field, FieldTriple, Grid};
use crate::model::{self, ModelParams};
use crate::par;
use crate::solver::{pcg_solve, SolverOptions, SpectralPreconditioner};

/// Maximum `|c1 + c2 + c3 − 1|` accepted for an initial state.
pub const HYPERPLANE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    #[default]
    Ls1,
    Cn,
    Bdf,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Ls1, SchemeKind::Cn, SchemeKind::Bdf];

    /// Formal temporal order.
    pub fn order(self) -> u32 {
        match self {
            SchemeKind::Ls1 => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Ls1 => "ls1",
            SchemeKind::Cn => "cn",
            SchemeKind::Bdf => "bdf",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls1" => Ok(SchemeKind::Ls1),
            "cn" => Ok(SchemeKind::Cn),
            "bdf" => Ok(SchemeKind::Bdf),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}` (expected ls1, cn or bdf)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeCoefficients {
    pub kind: SchemeKind,
    pub dt: f64,
    /// Weight of `Σ_i(−Δ⁻¹)`.
    pub a: f64,
    /// Weight of `−εΣ_iΔ`.
    pub g: f64,
    /// Weight of the IEQ coupling.
    pub w: f64,
    /// `H` is evaluated at `c^n + r (c^n − c^{n−1})`.
    pub extrapolation: f64,
}

impl SchemeCoefficients {
    /// Coefficients for a step of the same length as the previous one.
    pub fn new(kind: SchemeKind, dt: f64, mobility: f64) -> Self {
        let inv = 1.0 / (mobility * dt);
        let (a, g, w, r) = match kind {
            SchemeKind::Ls1 => (inv, 0.75, 1.0, 0.0),
            SchemeKind::Cn => (inv, 0.375, 0.5, 0.5),
            SchemeKind::Bdf => (1.5 * inv, 0.75, 1.0, 1.0),
        };
        Self { kind, dt, a, g, w, extrapolation: r }
    }

    /// Coefficients of the scheme actually used to advance `state` by `dt`
    /// when `kind` is requested (see the module docs for the fallbacks).
    pub fn for_state(kind: SchemeKind, state: &PhaseState, dt: f64, mobility: f64) -> Self {
        match (kind, &state.prev) {
            (SchemeKind::Ls1, _) | (_, None) => Self::new(SchemeKind::Ls1, dt, mobility),
            (SchemeKind::Cn, Some(prev)) => Self { extrapolation: dt / (2.0 * prev.dt), ..Self::new(kind, dt, mobility) },
            (SchemeKind::Bdf, Some(prev)) if same_step(prev.dt, dt) => Self::new(kind, dt, mobility),
            (SchemeKind::Bdf, Some(_)) => Self::new(SchemeKind::Ls1, dt, mobility),
        }
    }
}

fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// A stored earlier time level; `dt` is the step that led from it to the
/// following level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub c: FieldTriple,
    pub u: Field,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub c: FieldTriple,
    pub u: Field,
    pub prev: Option<Level>,
    pub t: f64,
    pub step_index: usize,
    /// Conserved component means.
    pub means: [f64; 3],
}

impl PhaseState {
    /// Initial state with `U = √(F(c) + B)`.
    pub fn new(c: FieldTriple, params: &ModelParams) -> Result<Self> {
        let u = model::aux_field(&c, params)?;
        Self::from_parts(c, u, 0.0, 0)
    }

    /// State from stored fields, e.g. a checkpoint.
    pub fn from_parts(c: FieldTriple, u: Field, t: f64, step_index: usize) -> Result<Self> {
        if u.grid() != c.grid() {
            return Err(Error::GridMismatch);
        }
        let max_err = c.hyperplane_error(1.0);
        if !(max_err <= HYPERPLANE_TOL) {
            return Err(Error::HyperplaneViolation { max_err });
        }
        let means = c.means();
        Ok(Self { c, u, prev: None, t, step_index, means })
    }

    pub fn grid(&self) -> Grid {
        self.c.grid()
    }

    /// The scheme-matched discrete energy: the quadratized energy for LS1
    /// and CN, the two-level energy for BDF.
    pub fn discrete_energy(&self, kind: SchemeKind, params: &ModelParams) -> f64 {
        match (kind, &self.prev) {
            (SchemeKind::Bdf, Some(p)) => model::energy_bdf((&self.c, &self.u), (&p.c, &p.u), params),
            _ => model::energy_quadratized(&self.c, &self.u, params),
        }
    }

    /// `max |U − √(F(c) + B)|`.
    pub fn u_drift(&self, params: &ModelParams) -> Result<f64> {
        let exact = model::aux_field(&self.c, params)?;
        let (a, b) = (self.u.values(), exact.values());
        Ok(par::max(a.len(), |i| (a[i] - b[i]).abs()))
    }

    fn history(&self) -> Result<&Level> {
        self.prev.as_ref().ok_or(Error::MissingHistory)
    }
}

/// Per-step record of energies and invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub scheme_used: SchemeKind,
    pub e_original: f64,
    pub e_discrete: f64,
    pub grad_mu_sq: [f64; 3],
    pub mass: [f64; 3],
    pub hyperplane_max_err: f64,
    pub u_drift_inf: f64,
    pub energy_law: EnergyLawTerms,
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

impl StepDiagnostics {
    pub fn energy_law_residual(&self) -> f64 {
        self.energy_law.residual()
    }

    pub fn is_finite(&self) -> bool {
        [self.e_original, self.e_discrete, self.hyperplane_max_err, self.u_drift_inf, self.energy_law.residual()]
            .iter()
            .chain(&self.grad_mu_sq)
            .chain(&self.mass)
            .all(|v| v.is_finite())
    }
}

/// The addends of a discrete energy law; their sum vanishes up to solver
/// tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLawTerms {
    pub energy_change: f64,
    pub stiffness: f64,
    pub auxiliary: f64,
    pub dissipation: f64,
}

impl EnergyLawTerms {
    pub fn residual(&self) -> f64 {
        self.energy_change + self.stiffness + self.auxiliary + self.dissipation
    }
}

/// `Σ_j H_j φ_j`.
fn contract(h: &FieldTriple, phi: &FieldTriple) -> Field {
    let (h0, h1, h2) = (h[0].values(), h[1].values(), h[2].values());
    let (p0, p1, p2) = (phi[0].values(), phi[1].values(), phi[2].values());
    Field::from_index_fn(h.grid(), |i| h0[i] * p0[i] + h1[i] * p1[i] + h2[i] * p2[i])
}

/// `Σ_j H_j α_j` for constants `α`.
fn contract_const(h: &FieldTriple, alpha: [f64; 3]) -> Field {
    let (h0, h1, h2) = (h[0].values(), h[1].values(), h[2].values());
    Field::from_index_fn(h.grid(), |i| h0[i] * alpha[0] + h1[i] * alpha[1] + h2[i] * alpha[2])
}

/// `out_i = Σ_i s_i + (c_H H_i + c_β χ) p`, where `χ = Σ_j H_j/Σ_j`.
fn combine(s: &FieldTriple, h: &FieldTriple, chi: &Field, p: &Field, sigma: [f64; 3], c_h: f64, c_beta: f64) -> FieldTriple {
    let (chi, p) = (chi.values(), p.values());
    FieldTriple::from_fn(s.grid(), |comp, i| {
        let (sv, hv) = (s[comp].values()[i], h[comp].values()[i]);
        sigma[comp] * sv + (c_h * hv + c_beta * chi[i]) * p[i]
    })
}

/// Spectral multiplier of `a(−Δ⁻¹) − gεΔ`, zero on the constant mode.
fn stiffness_multiplier(grid: Grid, a: f64, g_eps: f64) -> Vec<f64> {
    grid.spectral().multiplier(|k, eig| if k == 0 { 0.0 } else { -a / eig - g_eps * eig })
}

/// `Π A Π` for one step, with `H` frozen.
#[derive(Debug, Clone)]
pub struct CondensedOperator {
    coeffs: SchemeCoefficients,
    sigma: [f64; 3],
    h: FieldTriple,
    chi: Field,
    coupling: f64,
    beta: f64,
    multiplier: Vec<f64>,
}

impl CondensedOperator {
    pub fn new(coeffs: SchemeCoefficients, h: FieldTriple, params: &ModelParams) -> Self {
        let grid = h.grid();
        let chi = model::h_over_sigma(&h, params);
        Self {
            coeffs,
            sigma: params.sigma,
            coupling: coeffs.w * 24.0 / params.eps,
            beta: -coeffs.w * 8.0 / params.eps * params.sigma_t,
            multiplier: stiffness_multiplier(grid, coeffs.a, coeffs.g * params.eps),
            chi,
            h,
        }
    }

    pub fn coefficients(&self) -> &SchemeCoefficients {
        &self.coeffs
    }

    pub fn h(&self) -> &FieldTriple {
        &self.h
    }

    /// The input is projected first, so round-off that Krylov iterates
    /// accumulate outside the subspace never reaches the operator.
    pub fn apply(&self, phi: &FieldTriple) -> Result<FieldTriple> {
        let phi = project_subspace(phi);
        let mut s = phi.clone();
        phi.grid().spectral().apply_multiplier(s.fields_mut(), &self.multiplier);
        let p = contract(&self.h, &phi);
        let mut out = combine(&s, &self.h, &self.chi, &p, self.sigma, self.coupling, self.beta);
        project_subspace_in_place(&mut out);
        Ok(out)
    }
}

/// One application of the condensed operator.
pub fn apply_condensed_operator(
    phi: &FieldTriple,
    coeffs: &SchemeCoefficients,
    h: &FieldTriple,
    params: &ModelParams,
) -> Result<FieldTriple> {
    CondensedOperator::new(*coeffs, h.clone(), params).apply(phi)
}

/// The point at which `H` is evaluated.
pub fn evaluation_point(state: &PhaseState, coeffs: &SchemeCoefficients) -> Result<FieldTriple> {
    let r = coeffs.extrapolation;
    if coeffs.kind == SchemeKind::Ls1 {
        return Ok(state.c.clone());
    }
    let prev = state.history()?;
    Ok(state.c.zip_map(&prev.c, move |a, b| a + r * (a - b)))
}

/// Right-hand side of the condensed system (projected) and the constant `Q`
/// of the update `U^{n+1} = Σ_j H_j c_j^{n+1} + Q`.
pub fn assemble_rhs(
    state: &PhaseState,
    coeffs: &SchemeCoefficients,
    h: &FieldTriple,
    params: &ModelParams,
) -> Result<(FieldTriple, Field)> {
    let grid = state.grid();
    let alpha = state.means;
    let (c_hist, u_hist) = match coeffs.kind {
        SchemeKind::Ls1 | SchemeKind::Cn => {
            if coeffs.kind == SchemeKind::Cn {
                state.history()?;
            }
            (state.c.clone(), state.u.clone())
        }
        SchemeKind::Bdf => {
            let prev = state.history()?;
            let third = 1.0 / 3.0;
            (
                state.c.zip_map(&prev.c, move |a, b| (4.0 * a - b) * third),
                state.u.zip_map(&prev.u, move |a, b| (4.0 * a - b) * third),
            )
        }
    };
    let q = u_hist.zip_map(&contract(h, &c_hist), |u, p| u - p);
    let h_alpha = contract_const(h, alpha);
    let k = match coeffs.kind {
        SchemeKind::Cn => {
            let (u, q, ha) = (state.u.values(), q.values(), h_alpha.values());
            Field::from_index_fn(grid, |i| 0.5 * (u[i] + q[i] + ha[i]))
        }
        _ => q.zip_map(&h_alpha, |q, ha| q + ha),
    };

    // History term, plus the explicit half of the stiffness term for CN.
    let explicit = if coeffs.kind == SchemeKind::Cn { 0.375 * params.eps } else { 0.0 };
    let mult = grid.spectral().multiplier(|m, eig| if m == 0 { 0.0 } else { -coeffs.a / eig + explicit * eig });
    let mut s = FieldTriple::from_fn(grid, |comp, i| c_hist[comp].values()[i] - alpha[comp]);
    grid.spectral().apply_multiplier(s.fields_mut(), &mult);

    let chi = model::h_over_sigma(h, params);
    let beta = 8.0 / params.eps * params.sigma_t;
    let mut rhs = combine(&s, h, &chi, &k, params.sigma, -24.0 / params.eps, beta);
    project_subspace_in_place(&mut rhs);
    Ok((rhs, q))
}

/// Chemical potentials `μ^{n+1}` (or `μ^{n+½}` for CN) evaluated pointwise
/// from the scheme's defining relation.
pub fn reconstruct_mu(
    c_new: &FieldTriple,
    u_new: &Field,
    h: &FieldTriple,
    coeffs: &SchemeCoefficients,
    state: &PhaseState,
    params: &ModelParams,
) -> FieldTriple {
    let (c_bar, u_star) = match coeffs.kind {
        SchemeKind::Cn => (c_new.zip_map(&state.c, |a, b| 0.5 * (a + b)), u_new.zip_map(&state.u, |a, b| 0.5 * (a + b))),
        _ => (c_new.clone(), u_new.clone()),
    };
    chemical_potential(&c_bar, &u_star, h, params)
}

/// `μ_i = −(3/4)εΣ_iΔc_i + (24/ε)H_i U + β`, `β = −(8/ε)Σ_T(Σ_j H_j/Σ_j)U`.
pub fn chemical_potential(c: &FieldTriple, u: &Field, h: &FieldTriple, params: &ModelParams) -> FieldTriple {
    let mut s = c.map(Field::laplacian);
    s.scale(-0.75 * params.eps);
    let chi = model::h_over_sigma(h, params);
    combine(&s, h, &chi, u, params.sigma, 24.0 / params.eps, -8.0 / params.eps * params.sigma_t)
}

fn weighted_grad_sq(fields: &FieldTriple, weights: [f64; 3]) -> f64 {
    fields.iter().zip(weights).map(|(f, w)| w * f.grad_norm_sq()).sum()
}

/// The terms of the discrete energy law of the step `prev → next` taken
/// with `coeffs`. `next.prev` must hold `prev`'s current level.
pub fn energy_law_terms(
    prev: &PhaseState,
    next: &PhaseState,
    mu: &FieldTriple,
    coeffs: &SchemeCoefficients,
    params: &ModelParams,
) -> Result<EnergyLawTerms> {
    let stiff_w = params.sigma.map(|s| 0.375 * params.eps * s);
    let diss_w = params.inv_sigma().map(|s| coeffs.dt * params.mobility * s);
    let aux = 12.0 / params.eps;
    Ok(match coeffs.kind {
        SchemeKind::Ls1 => {
            let dc = next.c.zip_map(&prev.c, |a, b| a - b);
            let du = next.u.zip_map(&prev.u, |a, b| a - b);
            EnergyLawTerms {
                energy_change: model::energy_quadratized(&next.c, &next.u, params)
                    - model::energy_quadratized(&prev.c, &prev.u, params),
                stiffness: weighted_grad_sq(&dc, stiff_w),
                auxiliary: aux * du.dot(&du),
                dissipation: weighted_grad_sq(mu, diss_w),
            }
        }
        SchemeKind::Cn => EnergyLawTerms {
            energy_change: model::energy_quadratized(&next.c, &next.u, params)
                - model::energy_quadratized(&prev.c, &prev.u, params),
            stiffness: 0.0,
            auxiliary: 0.0,
            dissipation: weighted_grad_sq(mu, diss_w),
        },
        SchemeKind::Bdf => {
            let before = prev.history()?;
            let d2c = FieldTriple::from_fn(next.grid(), |comp, i| {
                next.c[comp].values()[i] - 2.0 * prev.c[comp].values()[i] + before.c[comp].values()[i]
            });
            let (un, uc, ub) = (next.u.values(), prev.u.values(), before.u.values());
            let d2u = Field::from_index_fn(next.grid(), |i| un[i] - 2.0 * uc[i] + ub[i]);
            let e_next = model::energy_bdf((&next.c, &next.u), (&prev.c, &prev.u), params);
            let e_prev = model::energy_bdf((&prev.c, &prev.u), (&before.c, &before.u), params);
            EnergyLawTerms {
                energy_change: 2.0 * (e_next - e_prev),
                stiffness: weighted_grad_sq(&d2c, stiff_w),
                auxiliary: aux * d2u.dot(&d2u),
                dissipation: 2.0 * weighted_grad_sq(mu, diss_w),
            }
        }
    })
}

/// Advances `state` by `dt` with the requested scheme.
pub fn step(
    state: &PhaseState,
    kind: SchemeKind,
    dt: f64,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<(PhaseState, StepDiagnostics)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be > 0, got {dt}")));
    }
    let coeffs = SchemeCoefficients::for_state(kind, state, dt, params.mobility);
    step_with(state, &coeffs, kind, params, opts)
}

/// Advances `state` with explicit coefficients. `energy_kind` selects the
/// discrete energy reported in the diagnostics.
pub fn step_with(
    state: &PhaseState,
    coeffs: &SchemeCoefficients,
    energy_kind: SchemeKind,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<(PhaseState, StepDiagnostics)> {
    let grid = state.grid();
    let h = model::h_field(&evaluation_point(state, coeffs)?, params)?;
    let (rhs, q) = assemble_rhs(state, coeffs, &h, params)?;
    let op = CondensedOperator::new(*coeffs, h, params);
    let precond = if opts.precondition {
        Some(SpectralPreconditioner::new(grid, params.sigma_min, coeffs.a, coeffs.g, params.eps)?)
    } else {
        None
    };
    let alpha = state.means;
    let guess = project_subspace(&FieldTriple::from_fn(grid, |comp, i| state.c[comp].values()[i] - alpha[comp]));
    let (chat, stats) = pcg_solve(&|phi| op.apply(phi), &rhs, Some(&guess), precond.as_ref(), opts, None)?;

    let c_new = FieldTriple::from_fn(grid, |comp, i| chat[comp].values()[i] + alpha[comp]);
    let u_new = contract(op.h(), &c_new).zip_map(&q, |p, q| p + q);
    let mu = reconstruct_mu(&c_new, &u_new, op.h(), coeffs, state, params);

    let next = PhaseState {
        c: c_new,
        u: u_new,
        prev: Some(Level { c: state.c.clone(), u: state.u.clone(), dt: coeffs.dt }),
        t: state.t + coeffs.dt,
        step_index: state.step_index + 1,
        means: state.means,
    };
    let energy_law = energy_law_terms(state, &next, &mu, coeffs, params)?;
    let diag = diagnostics(&next, &mu, energy_kind, coeffs.kind, energy_law, stats.iterations, stats.final_relative_residual, params)?;
    Ok((next, diag))
}

#[allow(clippy::too_many_arguments)]
fn diagnostics(
    state: &PhaseState,
    mu: &FieldTriple,
    energy_kind: SchemeKind,
    scheme_used: SchemeKind,
    energy_law: EnergyLawTerms,
    cg_iterations: usize,
    cg_residual: f64,
    params: &ModelParams,
) -> Result<StepDiagnostics> {
    Ok(StepDiagnostics {
        step: state.step_index,
        t: state.t,
        scheme_used,
        e_original: model::energy_original(&state.c, params),
        e_discrete: state.discrete_energy(energy_kind, params),
        grad_mu_sq: std::array::from_fn(|i| mu[i].grad_norm_sq()),
        mass: state.c.means(),
        hyperplane_max_err: state.c.hyperplane_error(1.0),
        u_drift_inf: state.u_drift(params)?,
        energy_law,
        cg_iterations,
        cg_residual,
    })
}

/// Diagnostics of a state that was not produced by a step (the initial
/// state or a restart), with `μ` from the continuous relation.
pub fn state_diagnostics(state: &PhaseState, energy_kind: SchemeKind, params: &ModelParams) -> Result<StepDiagnostics> {
    let h = model::h_field(&state.c, params)?;
    let mu = chemical_potential(&state.c, &state.u, &h, params);
    diagnostics(state, &mu, energy_kind, SchemeKind::Ls1, EnergyLawTerms::default(), 0, 0.0, params)
}

/// Random element of the constrained subspace with unit-scale entries.
pub fn random_subspace(grid: Grid, rng: &mut impl Rng) -> FieldTriple {
    let vals: Vec<Vec<f64>> = (0..3).map(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    project_subspace(&FieldTriple::from_fn(grid, |c, i| vals[c][i]))
}

/// Outcome of random symmetry and positivity probes of an operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdReport {
    /// Largest `|(AΦ,Ψ) − (Φ,AΨ)| / (‖AΦ‖‖Ψ‖ + ‖Φ‖‖AΨ‖)`.
    pub max_symmetry_defect: f64,
    /// Smallest `(AΦ,Φ)/‖Φ‖²`.
    pub min_rayleigh: f64,
    pub pairs: usize,
}

impl SpdReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_symmetry_defect <= tol && self.min_rayleigh > 0.0
    }
}

pub fn spd_probe(op: &CondensedOperator, pairs: usize, seed: u64) -> Result<SpdReport> {
    let grid = op.h().grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SpdReport { max_symmetry_defect: 0.0, min_rayleigh: f64::INFINITY, pairs };
    for _ in 0..pairs {
        let phi = random_subspace(grid, &mut rng);
        let psi = random_subspace(grid, &mut rng);
        let (a_phi, a_psi) = (op.apply(&phi)?, op.apply(&psi)?);
        let scale = a_phi.norm() * psi.norm() + phi.norm() * a_psi.norm();
        let defect = (a_phi.inner(&psi) - phi.inner(&a_psi)).abs() / scale;
        report.max_symmetry_defect = report.max_symmetry_defect.max(defect);
        for (v, av) in [(&phi, &a_phi), (&psi, &a_psi)] {
            report.min_rayleigh = report.min_rayleigh.min(av.inner(v) / v.inner(v));
        }
    }
    Ok(report)
}

/// Probes the operator of the step `state → state + dt` under `kind`.
pub fn spd_probe_state(
    state: &PhaseState,
    kind: SchemeKind,
    dt: f64,
    params: &ModelParams,
    pairs: usize,
    seed: u64,
) -> Result<SpdReport> {
    let coeffs = SchemeCoefficients::for_state(kind, state, dt, params.mobility);
    let h = model::h_field(&evaluation_point(state, &coeffs)?, params)?;
    spd_probe(&CondensedOperator::new(coeffs, h, params), pairs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::model::SurfaceTensions;

    fn params(t: (f64, f64, f64)) -> ModelParams {
        ModelParams::with_defaults(SurfaceTensions::new(t.0, t.1, t.2).unwrap()).unwrap()
    }

    fn noisy_state(grid: Grid, seed: u64, p: &ModelParams) -> PhaseState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<[f64; 3]> = (0..grid.len())
            .map(|_| std::array::from_fn(|_| 0.5 + 0.05 * rng.random_range(-1.0..1.0)))
            .collect();
        let c = FieldTriple::from_fn(grid, |comp, i| noise[i][comp] / noise[i].iter().sum::<f64>());
        PhaseState::new(c, p).unwrap()
    }

    fn tight() -> SolverOptions {
        SolverOptions { rel_tol: 1e-12, ..Default::default() }
    }

    #[test]
    fn coefficient_table() {
        let c = SchemeCoefficients::new(SchemeKind::Ls1, 0.1, 1e-6);
        assert!((c.a - 1e7).abs() < 1e-6 && c.g == 0.75 && c.w == 1.0);
        let c = SchemeCoefficients::new(SchemeKind::Cn, 0.1, 1e-6);
        assert!((c.a - 1e7).abs() < 1e-6 && c.g == 0.375 && c.w == 0.5);
        let c = SchemeCoefficients::new(SchemeKind::Bdf, 0.1, 1e-6);
        assert!((c.a - 1.5e7).abs() < 1e-6 && c.g == 0.75 && c.w == 1.0);
        assert_eq!("BDF".parse::<SchemeKind>().unwrap(), SchemeKind::Bdf);
        assert!("euler".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn startup_and_fallbacks() {
        let g = Grid::new(2, 8, Boundary::Periodic).unwrap();
        let p = params((1.0, 1.0, 1.0));
        let mut s = noisy_state(g, 1, &p);
        assert_eq!(SchemeCoefficients::for_state(SchemeKind::Bdf, &s, 0.1, 1e-6).kind, SchemeKind::Ls1);
        s.prev = Some(Level { c: s.c.clone(), u: s.u.clone(), dt: 0.1 });
        assert_eq!(SchemeCoefficients::for_state(SchemeKind::Bdf, &s, 0.1, 1e-6).kind, SchemeKind::Bdf);
        assert_eq!(SchemeCoefficients::for_state(SchemeKind::Bdf, &s, 0.05, 1e-6).kind, SchemeKind::Ls1);
        let cn = SchemeCoefficients::for_state(SchemeKind::Cn, &s, 0.05, 1e-6);
        assert_eq!(cn.kind, SchemeKind::Cn);
        assert!((cn.extrapolation - 0.25).abs() < 1e-15);
    }

    #[test]
    fn missing_history_is_reported() {
        let g = Grid::new(2, 8, Boundary::Periodic).unwrap();
        let p = params((1.0, 1.0, 1.0));
        let s = noisy_state(g, 1, &p);
        for kind in [SchemeKind::Cn, SchemeKind::Bdf] {
            let coeffs = SchemeCoefficients::new(kind, 0.1, p.mobility);
            let h = model::h_field(&s.c, &p).unwrap();
            assert!(matches!(assemble_rhs(&s, &coeffs, &h, &p), Err(Error::MissingHistory)));
            assert!(matches!(evaluation_point(&s, &coeffs), Err(Error::MissingHistory)));
        }
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        let g = Grid::new(2, 16, Boundary::Periodic).unwrap();
        let p = params((1.0, 1.0, 1.0));
        let third = 1.0 / 3.0;
        let c = FieldTriple::from_fn(g, |comp, _| if comp == 2 { 1.0 - 2.0 * third } else { third });
        let mut s = PhaseState::new(c, &p).unwrap();
        let e0 = s.discrete_energy(SchemeKind::Ls1, &p);
        for kind in SchemeKind::ALL {
            for _ in 0..2 {
                let (next, d) = step(&s, kind, 0.1, &p, &tight()).unwrap();
                let mut diff = next.c.clone();
                diff.axpy(-1.0, &s.c);
                assert!(diff.max_abs() < 1e-15, "{kind}: {}", diff.max_abs());
                assert!((d.e_discrete - e0).abs() <= 1e-12 * e0.abs());
                assert!(d.energy_law_residual().abs() <= 1e-12 * e0.abs());
                for i in 0..3 {
                    assert!(d.grad_mu_sq[i].abs() < 1e-20);
                }
                s = next;
            }
        }
    }

    #[test]
    fn condensed_operator_is_spd_including_total_spreading() {
        for tensions in [(1.0, 1.0, 1.0), (3.0, 1.0, 1.0), (1.0, 0.8, 1.4)] {
            let p = params(tensions);
            for bc in [Boundary::Periodic, Boundary::Neumann] {
                let g = Grid::new(2, 16, bc).unwrap();
                let s0 = noisy_state(g, 3, &p);
                let (s1, _) = step(&s0, SchemeKind::Ls1, 0.1, &p, &tight()).unwrap();
                for kind in SchemeKind::ALL {
                    let r = spd_probe_state(&s1, kind, 0.1, &p, 4, 9).unwrap();
                    assert!(r.passes(1e-10), "{tensions:?} {bc:?} {kind}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn zero_input_maps_to_zero() {
        let g = Grid::new(2, 8, Boundary::Periodic).unwrap();
        let p = params((1.0, 1.0, 1.0));
        let s = noisy_state(g, 2, &p);
        let h = model::h_field(&s.c, &p).unwrap();
        let coeffs = SchemeCoefficients::new(SchemeKind::Ls1, 0.1, p.mobility);
        let out = apply_condensed_operator(&FieldTriple::zeros(g), &coeffs, &h, &p).unwrap();
        assert_eq!(out.max_abs(), 0.0);
        let bad = FieldTriple::from_fn(g, |c, _| if c == 0 { 1.0 } else { -0.5 });
        assert_eq!(apply_condensed_operator(&bad, &coeffs, &h, &p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn solve_satisfies_condensed_system() {
        let g = Grid::new(2, 16, Boundary::Neumann).unwrap();
        let p = params((1.0, 0.8, 1.4));
        let s = noisy_state(g, 4, &p);
        let coeffs = SchemeCoefficients::new(SchemeKind::Ls1, 0.05, p.mobility);
        let h = model::h_field(&s.c, &p).unwrap();
        let (rhs, _) = assemble_rhs(&s, &coeffs, &h, &p).unwrap();
        assert!(project_subspace(&rhs).zip_map(&rhs, |a, b| a - b).max_abs() <= 1e-12 * rhs.max_abs());
        let (next, _) = step(&s, SchemeKind::Ls1, 0.05, &p, &tight()).unwrap();
        let chat = FieldTriple::from_fn(g, |c, i| next.c[c].values()[i] - s.means[c]);
        let mut res = apply_condensed_operator(&project_subspace(&chat), &coeffs, &h, &p).unwrap();
        res.axpy(-1.0, &rhs);
        assert!(res.norm() <= 1e-10 * rhs.norm(), "{}", res.norm() / rhs.norm());
    }

    #[test]
    fn chemical_potentials_satisfy_link_and_energy_laws_hold() {
        let g = Grid::new(2, 16, Boundary::Periodic).unwrap();
        for tensions in [(1.0, 1.0, 1.0), (3.0, 1.0, 1.0)] {
            let p = params(tensions);
            for kind in SchemeKind::ALL {
                let mut s = noisy_state(g, 5, &p);
                for n in 0..4 {
                    let coeffs = SchemeCoefficients::for_state(kind, &s, 0.1, p.mobility);
                    let h = model::h_field(&evaluation_point(&s, &coeffs).unwrap(), &p).unwrap();
                    let (next, d) = step(&s, kind, 0.1, &p, &tight()).unwrap();
                    let mu = reconstruct_mu(&next.c, &next.u, &h, &coeffs, &s, &p);
                    let inv = p.inv_sigma();
                    let link = FieldTriple::from_fn(g, |c, i| mu[c].values()[i] * inv[c]).component_sum();
                    assert!(link.max_abs() <= 1e-10 * mu.max_abs().max(1.0), "{kind} link {}", link.max_abs());
                    let e = d.e_discrete.abs().max(1.0);
                    let terms = d.energy_law;
                    assert!(terms.residual().abs() <= 1e-8 * e, "{tensions:?} {kind} step {n}: {terms:?}");
                    assert!(terms.stiffness >= -1e-12 && terms.auxiliary >= -1e-12 && terms.dissipation >= -1e-12);
                    let lhs: f64 = (0..3).map(|i| inv[i] * mu[i].grad_norm_sq()).sum();
                    let rhs: f64 = (0..3).map(|i| p.sigma_min * mu[i].grad_norm_sq() * inv[i] * inv[i]).sum();
                    assert!(lhs >= rhs - 1e-9 * rhs.abs().max(1.0));
                    s = next;
                }
            }
        }
    }

    #[test]
    fn cn_with_changed_step_keeps_its_energy_law() {
        let g = Grid::new(2, 16, Boundary::Periodic).unwrap();
        let p = params((1.0, 1.0, 1.0));
        let s = noisy_state(g, 6, &p);
        let (s, _) = step(&s, SchemeKind::Cn, 0.1, &p, &tight()).unwrap();
        let (_, d) = step(&s, SchemeKind::Cn, 0.03, &p, &tight()).unwrap();
        assert_eq!(d.scheme_used, SchemeKind::Cn);
        assert!(d.energy_law_residual().abs() <= 1e-8 * d.e_discrete.abs().max(1.0));
    }

    #[test]
    fn hyperplane_violation_rejected() {
        let g = Grid::new(2, 8, Boundary::Periodic).unwrap();
        let p = params((1.0, 1.0, 1.0));
        let c = FieldTriple::from_fn(g, |_, _| 0.4);
        assert!(matches!(PhaseState::new(c, &p), Err(Error::HyperplaneViolation { .. })));
    }
}

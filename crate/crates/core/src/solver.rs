//! Matrix-free preconditioned conjugate gradients on the constrained subspace
//! `{Σφ_i = 0 pointwise, mean(φ_i) = 0}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{project_subspace_in_place, FieldTriple, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Iteration cap; `None` means ten times the cells per axis.
    pub max_iter: Option<usize>,
    pub precondition: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_iter: None, precondition: true }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be > 0".into()));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter("solver max_iter must be >= 1".into()));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, grid: Grid) -> usize {
        self.max_iter.unwrap_or(10 * grid.n())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverStats {
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
}

/// Constant-coefficient spectral approximation of the condensed operator:
/// every mode of every component is divided by `Σ̲ (a/|λ_k| + g ε |λ_k|)`.
#[derive(Debug, Clone)]
pub struct SpectralPreconditioner {
    grid: Grid,
    multiplier: Vec<f64>,
}

impl SpectralPreconditioner {
    pub fn new(grid: Grid, sigma_min: f64, a: f64, g: f64, eps: f64) -> Result<Self> {
        if !(sigma_min > 0.0) {
            return Err(Error::NotAdmissible(format!("coercivity constant {sigma_min} is not > 0")));
        }
        let multiplier = grid.spectral().multiplier(|k, eig| {
            if k == 0 {
                0.0
            } else {
                let lam = eig.abs();
                1.0 / (sigma_min * (a / lam + g * eps * lam))
            }
        });
        Ok(Self { grid, multiplier })
    }

    pub fn apply(&self, r: &FieldTriple) -> FieldTriple {
        assert_eq!(r.grid(), self.grid, "grid mismatch");
        let mut out = r.clone();
        self.grid.spectral().apply_multiplier(out.fields_mut(), &self.multiplier);
        project_subspace_in_place(&mut out);
        out
    }
}

/// Per-iteration callback: iteration number, current iterate, current residual.
pub type Monitor<'a> = dyn FnMut(usize, &FieldTriple, &FieldTriple) + 'a;

/// Solves `A x = b` for subspace `b` by PCG.
///
/// `apply_a` must map the subspace into itself. `x0` is an optional starting
/// guess (projected before use). Convergence is declared when the
/// unpreconditioned residual satisfies `‖r‖ ≤ max(rel_tol‖b‖, abs_tol)`.
pub fn pcg_solve(
    apply_a: &dyn Fn(&FieldTriple) -> Result<FieldTriple>,
    b: &FieldTriple,
    x0: Option<&FieldTriple>,
    precond: Option<&SpectralPreconditioner>,
    opts: &SolverOptions,
    mut monitor: Option<&mut Monitor<'_>>,
) -> Result<(FieldTriple, SolverStats)> {
    opts.validate()?;
    let grid = b.grid();
    let b_norm = b.norm();
    let target = (opts.rel_tol * b_norm).max(opts.abs_tol);
    let rel = |r: f64| if b_norm > 0.0 { r / b_norm } else { r };

    let (mut x, mut r) = match x0 {
        Some(x0) => {
            let mut x = x0.clone();
            project_subspace_in_place(&mut x);
            let mut r = b.clone();
            r.axpy(-1.0, &apply_a(&x)?);
            (x, r)
        }
        None => (FieldTriple::zeros(grid), b.clone()),
    };
    let mut r_norm = r.norm();
    if let Some(m) = monitor.as_deref_mut() {
        m(0, &x, &r);
    }
    if r_norm <= target {
        return Ok((x, SolverStats { iterations: 0, final_relative_residual: rel(r_norm), converged: true }));
    }

    let precondition = |r: &FieldTriple| match (opts.precondition, precond) {
        (true, Some(m)) => m.apply(r),
        _ => r.clone(),
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z);
    let max_iter = opts.max_iter_for(grid);

    for it in 1..=max_iter {
        let ap = apply_a(&p)?;
        let pap = p.inner(&ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged { iterations: it, relative_residual: rel(r_norm) });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        debug_assert!(in_subspace(&x), "CG iterate left the subspace");
        r_norm = r.norm();
        if let Some(m) = monitor.as_deref_mut() {
            m(it, &x, &r);
        }
        if r_norm <= target {
            return Ok((x, SolverStats { iterations: it, final_relative_residual: rel(r_norm), converged: true }));
        }
        z = precondition(&r);
        let rz_new = r.inner(&z);
        p.xpby(&z, rz_new / rz);
        rz = rz_new;
    }
    Err(Error::SolverDiverged { iterations: max_iter, relative_residual: rel(r_norm) })
}

fn in_subspace(x: &FieldTriple) -> bool {
    let scale = x.max_abs().max(1e-300);
    x.hyperplane_error(0.0) <= 1e-10 * scale.max(1.0) && x.means().iter().all(|m| m.abs() <= 1e-10 * scale.max(1.0))
}

//! Acceptance gate. Each criterion prints one PASS/FAIL line straight to
//! stdout, past the test harness capture; the test fails if any criterion
//! fails.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcch_core::model::{self, ModelParams, PhasePoint, SurfaceTensions};
use tcch_core::schemes::{self, SchemeKind, StepDiagnostics};
use tcch_core::sim::{self, ConvergenceReport, InitialSpec, SimConfig};
use tcch_core::{FieldTriple, SolverOptions};

const REL_TOL: f64 = 1e-12;

const ORDER_WINDOWS: [(SchemeKind, f64, f64); 3] =
    [(SchemeKind::Ls1, 0.85, 1.1), (SchemeKind::Cn, 1.8, 2.1), (SchemeKind::Bdf, 1.6, 2.1)];
const CONVERGENCE_N: usize = 64;
const CONVERGENCE_T: f64 = 0.1;
const CONVERGENCE_DT: f64 = 0.02;
const CONVERGENCE_LEVELS: usize = 5;

const CN_LAW_STEPS: usize = 100;
const CN_LAW_DT: f64 = 0.01;
const CN_LAW_TOL: f64 = 1e-8;

const STABILITY_DTS: [f64; 3] = [1e-3, 1e-1, 1.0];
const STABILITY_TENSIONS: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 0.8, 1.4], [3.0, 1.0, 1.0]];
const STABILITY_STEPS: usize = 50;
const STABILITY_TOL: f64 = 1e-10;
/// Large-step CN runs need far more than the default `10 n` iterations.
const STABILITY_MAX_ITER: usize = 20_000;

const HYPERPLANE_TOL: f64 = 1e-10;
const MASS_TOL: f64 = 1e-12;

const SPD_PAIRS: usize = 20;
const SPD_TOL: f64 = 1e-10;

const DRIFT_T: f64 = 0.05;
const DRIFT_DT: f64 = 0.01;
const DRIFT_RATIO: (f64, f64) = (1.5, 2.5);

const ORACLE_SAMPLES: usize = 10_000;
const COERCIVITY_SAMPLES: usize = 100_000;

struct Gate {
    lines: Vec<(bool, String)>,
}

impl Gate {
    fn new() -> Self {
        Self { lines: Vec::new() }
    }

    fn record(&mut self, pass: bool, what: impl Into<String>) {
        let what = what.into();
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{} {what}", if pass { "PASS" } else { "FAIL" });
        let _ = out.flush();
        self.lines.push((pass, what));
    }

    fn finish(self) {
        let failed: Vec<_> = self.lines.iter().filter(|(p, _)| !p).map(|(_, w)| w.as_str()).collect();
        assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
    }
}

fn base_config(n: usize, sigma: [f64; 3], scheme: SchemeKind, dt: f64, t_final: f64, initial: InitialSpec) -> SimConfig {
    let mut c = SimConfig::default();
    c.grid.n = n;
    c.model.sigma = sigma;
    c.time.scheme = scheme;
    c.time.dt = dt;
    c.time.t_final = t_final;
    c.initial = initial;
    c.solver.rel_tol = REL_TOL;
    c
}

/// Tracks the worst hyperplane error and mean drift over every run.
#[derive(Default)]
struct InvariantLog {
    hyperplane: f64,
    mass: f64,
    runs: usize,
}

impl InvariantLog {
    fn absorb(&mut self, rows: &[StepDiagnostics]) {
        let m0 = rows[0].mass;
        for r in rows {
            self.hyperplane = self.hyperplane.max(r.hyperplane_max_err);
            for (m, m0) in r.mass.iter().zip(&m0) {
                self.mass = self.mass.max((m - m0).abs());
            }
        }
        self.runs += 1;
    }
}

/// Quadrature-weighted `(L², L¹, L∞)` norms of `a − b`, summed over phases.
fn error_norms(a: &FieldTriple, b: &FieldTriple) -> [f64; 3] {
    let vol = a.grid().cell_volume();
    let mut out = [0.0; 3];
    for i in 0..3 {
        let d: Vec<f64> = a[i].values().iter().zip(b[i].values()).map(|(x, y)| x - y).collect();
        out[0] += (d.iter().map(|v| v * v).sum::<f64>() * vol).sqrt();
        out[1] += d.iter().map(|v| v.abs()).sum::<f64>() * vol;
        out[2] += d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    out
}

fn temporal_order(gate: &mut Gate, log: &mut InvariantLog) {
    for (kind, lo, hi) in ORDER_WINDOWS {
        let base = base_config(CONVERGENCE_N, [1.0; 3], kind, CONVERGENCE_DT, CONVERGENCE_T, InitialSpec::Lens);
        let dts: Vec<f64> = (0..CONVERGENCE_LEVELS).map(|k| CONVERGENCE_DT / f64::powi(2.0, k as i32)).collect();
        let mut finals = Vec::new();
        for &dt in &dts {
            let mut c = base.clone();
            c.time.dt = dt;
            let run = sim::run(&c).expect("convergence run");
            assert!((run.final_state.t - CONVERGENCE_T).abs() < 1e-12);
            log.absorb(&run.diagnostics);
            finals.push(run.final_state.c);
        }
        let errs: Vec<[f64; 3]> = finals.windows(2).map(|w| error_norms(&w[0], &w[1])).collect();
        let k = errs.len() - 1;
        let order: [f64; 3] = std::array::from_fn(|j| (errs[k - 1][j] / errs[k][j]).log2());
        let report = ConvergenceReport::from_solutions(kind, dts, &finals);
        let agrees = report
            .finest_orders()
            .is_some_and(|o| (0..3).all(|j| (o[j] - order[j]).abs() <= 1e-9 * order[j].abs().max(1.0)));
        let inside = order.iter().all(|o| (lo..=hi).contains(o));
        gate.record(
            inside && agrees,
            format!(
                "temporal order {kind}: finest-pair orders L2 {:.3}, L1 {:.3}, Linf {:.3} in [{lo}, {hi}] (errors {:.3e} / {:.3e} / {:.3e}; library report agrees: {agrees})",
                order[0], order[1], order[2], errs[k][0], errs[k][1], errs[k][2]
            ),
        );
    }
}

fn cn_energy_law(gate: &mut Gate, log: &mut InvariantLog) {
    let c = base_config(
        64,
        [1.0; 3],
        SchemeKind::Cn,
        CN_LAW_DT,
        CN_LAW_DT * CN_LAW_STEPS as f64,
        InitialSpec::Spinodal { seed: 42 },
    );
    let run = sim::run(&c).expect("CN energy-law run");
    log.absorb(&run.diagnostics);
    let rows = &run.diagnostics[1..];
    let worst = rows
        .iter()
        .map(|d| d.energy_law_residual().abs() / d.e_discrete.abs().max(1.0))
        .fold(0.0, f64::max);
    // Independent check of the energy-change term from the logged energies.
    let consistent = run.diagnostics.windows(2).all(|w| {
        let de = w[1].e_discrete - w[0].e_discrete;
        (w[1].energy_law.energy_change - de).abs() <= 1e-9 * w[1].e_discrete.abs().max(1.0)
    });
    gate.record(
        rows.len() == CN_LAW_STEPS && worst <= CN_LAW_TOL && consistent,
        format!(
            "CN energy-law identity: max |residual|/max(1,|E|) = {worst:.3e} <= {CN_LAW_TOL:e} over {} steps (ΔE term matches logged energies: {consistent})",
            rows.len()
        ),
    );
}

fn unconditional_stability(gate: &mut Gate, log: &mut InvariantLog) {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for kind in SchemeKind::ALL {
        for &dt in &STABILITY_DTS {
            for sigma in STABILITY_TENSIONS {
                let c = base_config(
                    64,
                    sigma,
                    kind,
                    dt,
                    dt * STABILITY_STEPS as f64,
                    InitialSpec::Spinodal { seed: 42 },
                );
                let c = SimConfig { solver: SolverOptions { max_iter: Some(STABILITY_MAX_ITER), ..c.solver }, ..c };
                let run = sim::run(&c).expect("stability run");
                log.absorb(&run.diagnostics);
                let rows = &run.diagnostics;
                for w in rows.windows(2) {
                    let rise = (w[1].e_discrete - w[0].e_discrete) / w[0].e_discrete.abs().max(f64::MIN_POSITIVE);
                    worst = worst.max(rise);
                    if w[1].e_discrete > w[0].e_discrete + STABILITY_TOL * w[0].e_discrete.abs() {
                        failures.push(format!("{kind} dt={dt} sigma={sigma:?} step {}", w[1].step));
                    }
                }
                if rows.len() != STABILITY_STEPS + 1 || !rows.iter().all(|r| r.is_finite()) {
                    failures.push(format!("{kind} dt={dt} sigma={sigma:?}: incomplete or non-finite"));
                }
            }
        }
    }
    gate.record(
        failures.is_empty(),
        format!(
            "unconditional stability: 27 runs x {STABILITY_STEPS} steps, E_discrete non-increasing (largest relative step change {worst:.3e}, tolerance {STABILITY_TOL:e}){}",
            if failures.is_empty() { String::new() } else { format!("; violations: {}", failures.join(", ")) }
        ),
    );
}

fn spd_structure(gate: &mut Gate) {
    for kind in SchemeKind::ALL {
        let mut lines = Vec::new();
        let mut pass = true;
        for sigma in [[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]] {
            // One startup step so CN and BDF probe their own operators.
            let c = base_config(64, sigma, SchemeKind::Ls1, 0.01, 0.01, InitialSpec::Spinodal { seed: 42 });
            let state = sim::run(&c).expect("probe state").final_state;
            let params = c.model_params().unwrap();
            let r = schemes::spd_probe_state(&state, kind, 0.01, &params, SPD_PAIRS, 7).expect("probe");
            pass &= r.pairs == SPD_PAIRS && r.max_symmetry_defect <= SPD_TOL && r.min_rayleigh > 0.0;
            lines.push(format!(
                "Σ = {:?}: defect {:.2e}, min (AΦ,Φ)/(Φ,Φ) {:.3e}",
                params.sigma, r.max_symmetry_defect, r.min_rayleigh
            ));
        }
        gate.record(pass, format!("SPD structure {kind}: {SPD_PAIRS} pairs per set; {}", lines.join("; ")));
    }
}

fn u_drift_order(gate: &mut Gate, log: &mut InvariantLog) {
    let drift = |dt: f64, log: &mut InvariantLog| {
        let c = base_config(64, [1.0; 3], SchemeKind::Ls1, dt, DRIFT_T, InitialSpec::Lens);
        let run = sim::run(&c).expect("drift run");
        log.absorb(&run.diagnostics);
        let params = c.model_params().unwrap();
        // Independent evaluation of max |U − √(F(c) + B)|.
        let s = &run.final_state;
        (0..s.c.grid().len())
            .map(|i| {
                let p = PhasePoint([s.c[0].values()[i], s.c[1].values()[i], s.c[2].values()[i]]);
                (s.u.values()[i] - (model::bulk_potential(p, &params) + params.b).sqrt()).abs()
            })
            .fold(0.0, f64::max)
    };
    let coarse = drift(DRIFT_DT, log);
    let fine = drift(DRIFT_DT / 2.0, log);
    let ratio = coarse / fine;
    gate.record(
        (DRIFT_RATIO.0..=DRIFT_RATIO.1).contains(&ratio),
        format!(
            "U-drift order: LS1 lens T={DRIFT_T}, drift {coarse:.3e} (dt {DRIFT_DT}) / {fine:.3e} (dt {}) = {ratio:.3} in [{}, {}]",
            DRIFT_DT / 2.0,
            DRIFT_RATIO.0,
            DRIFT_RATIO.1
        ),
    );
}

fn pairwise_form(c: [f64; 3], p: &ModelParams) -> f64 {
    let [s12, s13, s23] = p.tensions.as_array();
    let [c1, c2, c3] = c;
    let sig = [s12 + s13 - s23, s12 + s23 - s13, s13 + s23 - s12];
    s12 * (c1 * c2).powi(2)
        + s13 * (c1 * c3).powi(2)
        + s23 * (c2 * c3).powi(2)
        + c1 * c2 * c3 * (sig[0] * c1 + sig[1] * c2 + sig[2] * c3)
        + 3.0 * p.lambda * (c1 * c2 * c3).powi(2)
}

fn oracle_suite(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sets: Vec<ModelParams> = STABILITY_TENSIONS
        .iter()
        .map(|s| ModelParams::with_defaults(SurfaceTensions::new(s[0], s[1], s[2]).unwrap()).unwrap())
        .collect();

    let mut worst_form = 0.0f64;
    for k in 0..ORACLE_SAMPLES {
        let p = &sets[k % sets.len()];
        let (c1, c2) = (rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2));
        let c = [c1, c2, 1.0 - c1 - c2];
        let f = model::bulk_potential(PhasePoint(c), p);
        worst_form = worst_form.max((f - pairwise_form(c, p)).abs() / (1.0 + f.abs()));
    }

    let mut worst_fd = 0.0f64;
    let mut fd_samples = 0;
    while fd_samples < ORACLE_SAMPLES {
        let p = &sets[fd_samples % sets.len()];
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.2..1.2));
        let u = |c: [f64; 3]| (model::bulk_potential(PhasePoint(c), p) + p.b).sqrt();
        if u(c).powi(2) < 0.5 {
            continue;
        }
        let h = model::h_functions(PhasePoint(c), p).unwrap();
        for i in 0..3 {
            let step = 1e-6;
            let (mut up, mut down) = (c, c);
            up[i] += step;
            down[i] -= step;
            let fd = (u(up) - u(down)) / (2.0 * step);
            worst_fd = worst_fd.max((h[i] - fd).abs() / fd.abs().max(1e-3));
        }
        fd_samples += 1;
    }

    let mut coercivity_ok = true;
    let mut coercivity_gap = 0.0f64;
    for p in &sets {
        let e1 = [1.0, -1.0, 0.0].map(|v: f64| v / 2f64.sqrt());
        let e2 = [1.0, 1.0, -2.0].map(|v: f64| v / 6f64.sqrt());
        let mut best = f64::INFINITY;
        for _ in 0..COERCIVITY_SAMPLES {
            let t: f64 = rng.random_range(0.0..2.0 * PI);
            let xi: [f64; 3] = std::array::from_fn(|i| t.cos() * e1[i] + t.sin() * e2[i]);
            best = best.min((0..3).map(|i| p.sigma[i] * xi[i] * xi[i]).sum());
        }
        coercivity_ok &= best >= p.sigma_min - 1e-9 && best - p.sigma_min <= 1e-3;
        coercivity_gap = coercivity_gap.max(best - p.sigma_min);
    }

    let mut worst_sine = 0.0f64;
    let mut young_samples = 0;
    while young_samples < ORACLE_SAMPLES {
        let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..2.0));
        let t = SurfaceTensions::new(s[0], s[1], s[2]).unwrap();
        let Ok(th) = model::young_angles(&t) else { continue };
        let r = [th[0].sin() / s[2], th[1].sin() / s[1], th[2].sin() / s[0]];
        worst_sine = worst_sine.max((r[0] - r[1]).abs().max((r[0] - r[2]).abs()) / r[0]);
        young_samples += 1;
    }
    let equal = model::young_angles(&SurfaceTensions::new(1.0, 1.0, 1.0).unwrap()).unwrap();
    let equal_ok = equal.iter().all(|a| (a.to_degrees() - 120.0).abs() <= 1e-10);

    let pass = worst_form <= 1e-12 && worst_fd <= 1e-5 && coercivity_ok && worst_sine <= 1e-12 && equal_ok;
    gate.record(
        pass,
        format!(
            "oracle suite: bulk form {worst_form:.2e} <= 1e-12; H vs finite differences {worst_fd:.2e} <= 1e-5; coercivity sampled minimum within {coercivity_gap:.2e} <= 1e-3 (bound holds: {coercivity_ok}); Young sine ratio {worst_sine:.2e} <= 1e-12; (1,1,1) gives 120 deg: {equal_ok}"
        ),
    );
}

#[test]
fn acceptance() {
    let mut gate = Gate::new();
    let mut log = InvariantLog::default();
    oracle_suite(&mut gate);
    spd_structure(&mut gate);
    u_drift_order(&mut gate, &mut log);
    cn_energy_law(&mut gate, &mut log);
    unconditional_stability(&mut gate, &mut log);
    temporal_order(&mut gate, &mut log);
    gate.record(
        log.hyperplane <= HYPERPLANE_TOL && log.mass <= MASS_TOL,
        format!(
            "hyperplane and mass: over {} runs, max |Σc−1| = {:.2e} <= {HYPERPLANE_TOL:e}, max mean drift = {:.2e} <= {MASS_TOL:e}",
            log.runs, log.hyperplane, log.mass
        ),
    );
    gate.finish();
}

/// Steady lens shapes. Takes hours at full resolution.
#[test]
#[ignore]
fn lens_contact_angles() {
    let mut gate = Gate::new();
    let run_lens = |sigma: [f64; 3]| {
        let mut c = base_config(128, sigma, SchemeKind::Cn, 0.01, 1e6, InitialSpec::Lens);
        c.time.stop_energy_slope = Some(1e-8);
        c.solver.rel_tol = 1e-10;
        sim::run(&c).expect("lens run").final_state
    };
    let equal = run_lens([1.0, 1.0, 1.0]);
    let junctions = sim::analysis::triple_junctions(&equal.c, 0.15);
    let angles: Vec<[f64; 3]> = junctions
        .iter()
        .map(|j| sim::analysis::junction_angles(&equal.c, j.center, 0.05, 0.08).map(f64::to_degrees))
        .collect();
    let ok = junctions.len() == 2 && angles.iter().flatten().all(|a| (a - 120.0).abs() <= 10.0);
    gate.record(ok, format!("lens (1,1,1) contact angles: {} junctions, angles {angles:.1?} within 120 ± 10 deg", junctions.len()));

    let spread = run_lens([1.0, 1.0, 3.0]);
    let none = sim::analysis::triple_junctions(&spread.c, 0.15).is_empty();
    let overlap = sim::analysis::overlap(&spread.c, 1, 2);
    gate.record(none, format!("lens (1,1,3): no triple junction ({none}), overlap(c2, c3) = {overlap:.3e}"));
    gate.finish();
}

//! Post-run measurements on 2D phase fields: triple junctions, contact
//! angles and phase overlap.

use std::f64::consts::PI;

use crate::grid::{Boundary, Field, FieldTriple, Grid};

/// A connected cluster of cells where all three phases are present.
#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub center: [f64; 2],
    pub cells: usize,
}

/// `∫ c_i c_j`.
pub fn overlap(c: &FieldTriple, i: usize, j: usize) -> f64 {
    c[i].dot(&c[j])
}

fn min_phase(c: &FieldTriple, idx: usize) -> f64 {
    c[0].values()[idx].min(c[1].values()[idx]).min(c[2].values()[idx])
}

/// Clusters of cells with `min(c1, c2, c3) > threshold` (8-connected),
/// each reported by its `min(c)`-weighted centroid.
pub fn triple_junctions(c: &FieldTriple, threshold: f64) -> Vec<Junction> {
    let grid = c.grid();
    assert_eq!(grid.dim(), 2, "junction detection is 2D only");
    let n = grid.n() as isize;
    let periodic = grid.bc() == Boundary::Periodic;
    let inside: Vec<bool> = (0..grid.len()).map(|i| min_phase(c, i) > threshold).collect();
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for seed in 0..grid.len() {
        if !inside[seed] || seen[seed] {
            continue;
        }
        seen[seed] = true;
        let [si, sj, _] = grid.indices(seed);
        let mut stack = vec![(si as isize, sj as isize)];
        let (mut wx, mut wy, mut wsum, mut count) = (0.0, 0.0, 0.0, 0);
        while let Some((i, j)) = stack.pop() {
            let idx = grid.flat([i.rem_euclid(n) as usize, j.rem_euclid(n) as usize, 0]);
            let w = min_phase(c, idx);
            wx += w * (i as f64 + 0.5);
            wy += w * (j as f64 + 0.5);
            wsum += w;
            count += 1;
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let (ni, nj) = (i + di, j + dj);
                if !periodic && (ni < 0 || nj < 0 || ni >= n || nj >= n) {
                    continue;
                }
                let nidx = grid.flat([ni.rem_euclid(n) as usize, nj.rem_euclid(n) as usize, 0]);
                if inside[nidx] && !seen[nidx] {
                    seen[nidx] = true;
                    stack.push((ni, nj));
                }
            }
        }
        let h = grid.h();
        let rough = [wx / wsum * h, wy / wsum * h];
        let center = refine_center(c, rough, 2.0 * h).map(|v| v.rem_euclid(1.0));
        match out.iter_mut().find(|j: &&mut Junction| periodic_distance(j.center, center) < 2.0 * h) {
            Some(j) => j.cells += count,
            None => out.push(Junction { center, cells: count }),
        }
    }
    out
}

fn periodic_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = |x: f64, y: f64| {
        let t = (x - y).abs();
        t.min(1.0 - t)
    };
    d(a[0], b[0]).hypot(d(a[1], b[1]))
}

/// Location of the largest interpolated `min(c)` within `reach` of `start`.
fn refine_center(c: &FieldTriple, start: [f64; 2], reach: f64) -> [f64; 2] {
    const STEPS: i32 = 32;
    let mut best = (f64::NEG_INFINITY, start);
    for a in -STEPS..=STEPS {
        for b in -STEPS..=STEPS {
            let x = [start[0] + reach * a as f64 / STEPS as f64, start[1] + reach * b as f64 / STEPS as f64];
            let m = sample(&c[0], x).min(sample(&c[1], x)).min(sample(&c[2], x));
            if m > best.0 {
                best = (m, x);
            }
        }
    }
    best.1
}

/// Bilinear interpolation of a cell-centred 2D field.
pub fn sample(f: &Field, x: [f64; 2]) -> f64 {
    let grid: Grid = f.grid();
    let n = grid.n() as isize;
    let at = |i: isize, j: isize| {
        let (i, j) = match grid.bc() {
            Boundary::Periodic => (i.rem_euclid(n), j.rem_euclid(n)),
            Boundary::Neumann => (i.clamp(0, n - 1), j.clamp(0, n - 1)),
        };
        f.values()[grid.flat([i as usize, j as usize, 0])]
    };
    let u = x[0] * n as f64 - 0.5;
    let v = x[1] * n as f64 - 0.5;
    let (i0, j0) = (u.floor() as isize, v.floor() as isize);
    let (fx, fy) = (u - u.floor(), v - v.floor());
    (1.0 - fx) * (1.0 - fy) * at(i0, j0) + fx * (1.0 - fy) * at(i0 + 1, j0) + (1.0 - fx) * fy * at(i0, j0 + 1) + fx * fy * at(i0 + 1, j0 + 1)
}

/// Angular extent of each phase (by argmax) on a circle around `center`.
pub fn sector_angles(c: &FieldTriple, center: [f64; 2], radius: f64, samples: usize) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for k in 0..samples {
        let a = 2.0 * PI * (k as f64 + 0.5) / samples as f64;
        let x = [center[0] + radius * a.cos(), center[1] + radius * a.sin()];
        let v = [sample(&c[0], x), sample(&c[1], x), sample(&c[2], x)];
        let best = (0..3).max_by(|&i, &j| v[i].total_cmp(&v[j])).expect("three phases");
        counts[best] += 1;
    }
    counts.map(|n| 2.0 * PI * n as f64 / samples as f64)
}

/// Contact angles at a junction: sector angles measured on two circles and
/// extrapolated linearly to zero radius, which removes the first-order
/// effect of interface curvature.
pub fn junction_angles(c: &FieldTriple, center: [f64; 2], r1: f64, r2: f64) -> [f64; 3] {
    let a1 = sector_angles(c, center, r1, 2880);
    let a2 = sector_angles(c, center, r2, 2880);
    std::array::from_fn(|i| (r2 * a1[i] - r1 * a2[i]) / (r2 - r1))
}

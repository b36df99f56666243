#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swing_continuum::fields::{Field, FieldSet, Quantity};
use swing_continuum::geometry::Point;
use swing_continuum::grid::{thicken_protrusions, RasterGrid};

/// Connected, protrusion-free blob fitting in a 20×20 rectangle.
pub fn seeded_blob(seed: u64) -> RasterGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nx = rng.gen_range(4..=18);
        let ny = rng.gen_range(4..=18);
        let disks: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=4))
            .map(|_| (rng.gen_range(0.0..nx as f64), rng.gen_range(0.0..ny as f64), rng.gen_range(1.5..6.0)))
            .collect();
        let mask: Vec<bool> = (0..nx * ny)
            .map(|k| {
                let (i, j) = ((k / ny) as f64, (k % ny) as f64);
                disks.iter().any(|&(x, y, r)| (i - x).powi(2) + (j - y).powi(2) <= r * r)
            })
            .collect();
        if mask.iter().filter(|&&m| m).count() < 4 {
            continue;
        }
        let Ok(grid) = RasterGrid::from_mask(1.0, nx, ny, Point::new(0.0, 0.0), mask) else { continue };
        let Ok(grid) = thicken_protrusions(&grid) else { continue };
        if grid.nx() <= 20 && grid.ny() <= 20 && grid.n_cells() >= 2 && grid.component_count() == 1 {
            return grid;
        }
    }
}

/// Random positive coefficient fields on `grid`.
pub fn random_fields(grid: &Arc<RasterGrid>, seed: u64) -> FieldSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_cells();
    let mut draw = |q, lo: f64, hi: f64| {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        Field::new(grid.clone(), q, v).unwrap()
    };
    let m = draw(Quantity::M, 0.5, 2.0);
    let d = draw(Quantity::D, 0.05, 0.5);
    let mut p = draw(Quantity::P, -1.0, 1.0);
    let mean = p.mean();
    p.values_mut().iter_mut().for_each(|v| *v -= mean);
    let bx = draw(Quantity::Bx, 0.5, 3.0);
    let by = draw(Quantity::By, 0.5, 3.0);
    FieldSet::new(m, d, p, bx, by).unwrap()
}

pub fn uniform_fields(grid: &Arc<RasterGrid>, m: f64, d: f64, b: f64) -> FieldSet {
    let f = |q, v| Field::constant(grid.clone(), q, v);
    FieldSet::new(f(Quantity::M, m), f(Quantity::D, d), f(Quantity::P, 0.0), f(Quantity::Bx, b), f(Quantity::By, b)).unwrap()
}

/// Literal dense assembly: unmasked cells carry NaN, so a selector that
/// wrongly keeps a coupling across the boundary poisons the entry.
pub fn dense_xi_oracle(fields: &FieldSet) -> Vec<Vec<f64>> {
    let grid = fields.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let full = |f: &Field| {
        let mut v = vec![f64::NAN; nx * ny];
        for (c, &k) in grid.cells().iter().enumerate() {
            v[k] = f.values()[c];
        }
        v
    };
    let (bx, by) = (full(&fields.b_x), full(&fields.b_y));
    let masked = |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && grid.mask()[i as usize * ny + j as usize];
    // Inward normal: +1 where the low-side neighbour is missing.
    let normal = |i: isize, j: isize| {
        let nx_ = (!masked(i - 1, j)) as i32 - (!masked(i + 1, j)) as i32;
        let ny_ = (!masked(i, j - 1)) as i32 - (!masked(i, j + 1)) as i32;
        (nx_, ny_)
    };
    let eta_plus = |n: i32| if n <= 0 { 1.0 } else { 0.0 };
    let eta_minus = |n: i32| if n >= 0 { 1.0 } else { 0.0 };
    let nyi = ny as isize;
    let n = nx * ny;
    let mut dense = vec![vec![0.0; n]; n];
    for k in 0..n {
        if !grid.mask()[k] {
            continue;
        }
        let (i, j) = ((k / ny) as isize, (k % ny) as isize);
        let (n_x, n_y) = normal(i, j);
        let ki = k as isize;
        let edge = |b: &[f64], l: isize| 0.5 * (b[k] + b[l as usize]);
        let mut terms: Vec<(isize, f64)> = Vec::new();
        if eta_plus(n_x) == 1.0 {
            terms.push((ki - nyi, edge(&bx, ki - nyi)));
        }
        if eta_minus(n_x) == 1.0 {
            terms.push((ki + nyi, edge(&bx, ki + nyi)));
        }
        if eta_plus(n_y) == 1.0 {
            terms.push((ki - 1, edge(&by, ki - 1)));
        }
        if eta_minus(n_y) == 1.0 {
            terms.push((ki + 1, edge(&by, ki + 1)));
        }
        let beta: f64 = terms.iter().map(|t| t.1).sum();
        for l in 0..n as isize {
            let mut v = if l == ki { -beta } else { 0.0 };
            for &(target, b) in &terms {
                if target == l {
                    v += b;
                }
            }
            dense[k][l as usize] = v;
        }
    }
    dense
}

/// Bellman–Ford relaxation over the 8-neighbour lattice.
pub fn arrival_oracle(c: &Field, source: usize) -> Vec<f64> {
    let grid = c.grid();
    let (nx, ny, delta) = (grid.nx() as isize, grid.ny() as isize, grid.delta());
    let n = grid.n_cells();
    let mut edges = Vec::new();
    for a in 0..n {
        let (i, j) = grid.ij(grid.k_of(a));
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ii, jj) = (i as isize + di, j as isize + dj);
                if ii < 0 || jj < 0 || ii >= nx || jj >= ny || !grid.is_masked(ii, jj) {
                    continue;
                }
                let b = grid.cell_of(grid.k(ii as usize, jj as usize)).unwrap();
                let len = delta * ((di * di + dj * dj) as f64).sqrt();
                edges.push((a, b, len / (0.5 * (c.values()[a] + c.values()[b]))));
            }
        }
    }
    let mut t = vec![f64::INFINITY; n];
    t[source] = 0.0;
    loop {
        let mut changed = false;
        for &(a, b, w) in &edges {
            if t[a] + w < t[b] {
                t[b] = t[a] + w;
                changed = true;
            }
        }
        if !changed {
            return t;
        }
    }
}

/// Maximum absolute difference over probes and matching samples.
pub fn max_omega_error(a: &swing_continuum::Trajectory, b: &swing_continuum::Trajectory) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut e: f64 = 0.0;
    for p in 0..a.probes.len() {
        for s in 0..a.len() {
            e = e.max((a.omega[p][s] - b.omega[p][s]).abs()).max((a.theta[p][s] - b.theta[p][s]).abs());
        }
    }
    e
}

//! Artificial diffusion: explicit heat-equation smoothing of deposited
//! fields with reflecting (zero-flux) mask boundaries.

use std::fmt::Debug;

use sprs::TriMat;

use super::{Field, FieldSet, Quantity};
use crate::exec::Execution;
use crate::grid::RasterGrid;
use crate::linalg::SparseMatrix;
use crate::{Error, Result};

/// At `kappa ≤ 1/8` the step operator has a nonnegative spectrum, which
/// makes the relative-change ratio nonincreasing in the step count.
pub const DEFAULT_KAPPA: f64 = 0.125;
pub const DEFAULT_SMOOTHNESS_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Decides when diffusion stops.
pub trait StopCriterion: Debug + Send + Sync {
    /// Called before each step. `smoothness` is the last step's
    /// `‖Δu‖₂/‖u‖₂` (infinite before the first step).
    fn fired(&self, iterations: usize, smoothness: f64) -> bool;

    fn max_iterations(&self) -> usize;
}

/// Stops once the relative per-step change drops below `tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeChange {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for RelativeChange {
    fn default() -> Self {
        RelativeChange { tol: DEFAULT_SMOOTHNESS_TOL, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

impl StopCriterion for RelativeChange {
    fn fired(&self, _iterations: usize, smoothness: f64) -> bool {
        smoothness < self.tol
    }

    fn max_iterations(&self) -> usize {
        self.max_iterations
    }
}

/// Runs exactly `n` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedSteps(pub usize);

impl StopCriterion for FixedSteps {
    fn fired(&self, iterations: usize, _smoothness: f64) -> bool {
        iterations >= self.0
    }

    fn max_iterations(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionMode {
    /// Every quantity gets the largest step count any of m, d, b_x, b_y
    /// needed to satisfy the criterion.
    #[default]
    Shared,
    /// m, d, b_x and b_y stop individually.
    PerQuantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOutcome {
    pub field: Field,
    pub iterations: usize,
    pub smoothness: f64,
}

/// Masked 5-point Laplacian with zero-flux boundaries, over compressed
/// cell indices.
pub fn neumann_laplacian(grid: &RasterGrid) -> SparseMatrix {
    let n = grid.n_cells();
    let mut tri = TriMat::new((n, n));
    for c in 0..n {
        let mut degree = 0.0;
        for nb in grid.neighbors(c).into_iter().flatten() {
            tri.add_triplet(c, nb, 1.0);
            degree += 1.0;
        }
        tri.add_triplet(c, c, -degree);
    }
    tri.to_csr()
}

pub fn smoothness(change_norm: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        0.0
    } else {
        change_norm / norm
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa <= 0.25) {
        return Err(Error::invalid(format!("kappa = {kappa} must lie in (0, 0.25]")));
    }
    Ok(())
}

struct Stencil {
    neighbors: Vec<[usize; 4]>,
    degree: Vec<u8>,
}

impl Stencil {
    fn new(grid: &RasterGrid) -> Self {
        let mut neighbors = Vec::with_capacity(grid.n_cells());
        let mut degree = Vec::with_capacity(grid.n_cells());
        for c in 0..grid.n_cells() {
            let mut row = [0usize; 4];
            let mut n = 0;
            for nb in grid.neighbors(c).into_iter().flatten() {
                row[n] = nb;
                n += 1;
            }
            neighbors.push(row);
            degree.push(n as u8);
        }
        Stencil { neighbors, degree }
    }

    /// One step in place; returns `(‖Δu‖₂, ‖u‖₂)` with the norm taken
    /// before the update.
    fn step(&self, kappa: f64, u: &mut Vec<f64>, scratch: &mut Vec<f64>) -> (f64, f64) {
        scratch.clear();
        let mut change = 0.0;
        let mut norm = 0.0;
        for c in 0..u.len() {
            let here = u[c];
            let mut lap = 0.0;
            for &nb in &self.neighbors[c][..self.degree[c] as usize] {
                lap += u[nb] - here;
            }
            let du = kappa * lap;
            change += du * du;
            norm += here * here;
            scratch.push(here + du);
        }
        std::mem::swap(u, scratch);
        (change.sqrt(), norm.sqrt())
    }
}

/// One explicit step `u + κ L_N u`.
pub fn diffusion_step(field: &Field, kappa: f64) -> Result<Field> {
    check_kappa(kappa)?;
    let stencil = Stencil::new(field.grid());
    let mut u = field.values().to_vec();
    let mut scratch = Vec::with_capacity(u.len());
    stencil.step(kappa, &mut u, &mut scratch);
    field.with_values(u)
}

fn run(stencil: &Stencil, mut u: Vec<f64>, kappa: f64, stop: &dyn StopCriterion, start: usize, start_s: f64) -> Result<(Vec<f64>, usize, f64)> {
    let mut scratch = Vec::with_capacity(u.len());
    let mut iterations = start;
    let mut s = start_s;
    while !stop.fired(iterations, s) {
        if iterations >= stop.max_iterations() {
            return Err(Error::DiffusionNotConverged { iterations, smoothness: s });
        }
        let (change, norm) = stencil.step(kappa, &mut u, &mut scratch);
        s = smoothness(change, norm);
        iterations += 1;
    }
    Ok((u, iterations, s))
}

/// Diffuses one field until `stop` fires.
pub fn artificial_diffusion(field: &Field, kappa: f64, stop: &dyn StopCriterion) -> Result<DiffusionOutcome> {
    check_kappa(kappa)?;
    let stencil = Stencil::new(field.grid());
    let (u, iterations, smoothness) = run(&stencil, field.values().to_vec(), kappa, stop, 0, f64::INFINITY)?;
    Ok(DiffusionOutcome { field: field.with_values(u)?, iterations, smoothness })
}

/// Diffuses all five coefficient fields.
///
/// The injection field sums to zero, so its relative change never settles;
/// it always receives the largest step count of the other four.
pub fn diffuse_fieldset(
    set: &FieldSet,
    kappa: f64,
    stop: &dyn StopCriterion,
    mode: DiffusionMode,
    exec: Execution,
) -> Result<(FieldSet, [usize; 5])> {
    check_kappa(kappa)?;
    let stencil = Stencil::new(set.grid());
    let driven = [Quantity::M, Quantity::D, Quantity::Bx, Quantity::By];
    let first: Vec<Result<(Vec<f64>, usize, f64)>> = exec.map(&driven, |&q| {
        let f = set.get(q).expect("coefficient");
        run(&stencil, f.values().to_vec(), kappa, stop, 0, f64::INFINITY)
    });
    let first = first.into_iter().collect::<Result<Vec<_>>>()?;
    let shared = first.iter().map(|r| r.1).max().unwrap_or(0);

    let jobs: Vec<(Quantity, Option<usize>)> = std::iter::once((Quantity::P, None))
        .chain(driven.iter().enumerate().map(|(n, &q)| (q, Some(n))))
        .collect();
    let results: Vec<Result<(Quantity, Vec<f64>, usize)>> = exec.map(&jobs, |&(q, slot)| match (mode, slot) {
        (_, None) => {
            let p = set.get(Quantity::P).expect("coefficient");
            let (u, n, _) = run(&stencil, p.values().to_vec(), kappa, &FixedSteps(shared), 0, f64::INFINITY)?;
            Ok((q, u, n))
        }
        (DiffusionMode::PerQuantity, Some(n)) => Ok((q, first[n].0.clone(), first[n].1)),
        (DiffusionMode::Shared, Some(n)) => {
            let (ref u, done, s) = first[n];
            let (u, n, _) = run(&stencil, u.clone(), kappa, &FixedSteps(shared), done, s)?;
            Ok((q, u, n))
        }
    });

    let mut fields: Vec<Option<Field>> = vec![None; 5];
    let mut counts = [0usize; 5];
    for r in results {
        let (q, u, n) = r?;
        let slot = Quantity::COEFFICIENTS.iter().position(|&c| c == q).expect("coefficient");
        fields[slot] = Some(set.get(q).expect("coefficient").with_values(u)?);
        counts[slot] = n;
    }
    let fields: Vec<Field> = fields.into_iter().map(|f| f.expect("every coefficient diffused")).collect();
    let fields: [Field; 5] = fields.try_into().expect("five fields");
    Ok((FieldSet::from_array(fields)?, counts))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::Point;

    fn rect(nx: usize, ny: usize) -> Arc<RasterGrid> {
        Arc::new(RasterGrid::rectangle(nx, ny, 1.0, Point::new(0.0, 0.0)).unwrap())
    }

    #[test]
    fn constant_is_fixed_point() {
        let f = Field::constant(rect(6, 5), Quantity::M, 2.5);
        let out = artificial_diffusion(&f, 0.2, &FixedSteps(50)).unwrap();
        assert_eq!(out.field, f);
        let out = artificial_diffusion(&f, DEFAULT_KAPPA, &RelativeChange::default()).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn conserves_total_and_is_monotone() {
        let g = rect(9, 7);
        let values: Vec<f64> = (0..g.n_cells()).map(|c| ((c * 37) % 11) as f64).collect();
        let f = Field::new(g, Quantity::D, values).unwrap();
        let mut cur = f.clone();
        for _ in 0..40 {
            let next = diffusion_step(&cur, 0.25).unwrap();
            assert!(next.max() <= cur.max() + 1e-15);
            assert!(next.min() >= cur.min() - 1e-15);
            cur = next;
        }
        assert!((cur.total() - f.total()).abs() <= 1e-12 * f.total());
    }

    #[test]
    fn matches_dense_laplacian() {
        let g = rect(4, 3);
        let lap = neumann_laplacian(&g);
        let u: Vec<f64> = (0..12).map(|c| (c as f64).sin()).collect();
        let mut lu = vec![0.0; 12];
        crate::linalg::matvec(&lap, &u, &mut lu);
        let f = Field::new(g, Quantity::M, u.clone()).unwrap();
        let stepped = diffusion_step(&f, 0.1).unwrap();
        for c in 0..12 {
            assert!((stepped.values()[c] - (u[c] + 0.1 * lu[c])).abs() < 1e-15);
        }
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let g = rect(20, 1);
        let mut values = vec![0.0; 20];
        values[0] = 1.0;
        let f = Field::new(g, Quantity::M, values).unwrap();
        let err = artificial_diffusion(&f, 0.1, &RelativeChange { tol: 1e-12, max_iterations: 10 }).unwrap_err();
        assert!(matches!(err, Error::DiffusionNotConverged { iterations: 10, .. }));
        assert!(artificial_diffusion(&f, 0.3, &FixedSteps(1)).is_err());
    }

    #[test]
    fn shared_mode_uses_one_count() {
        let g = rect(8, 8);
        let spiky: Vec<f64> = (0..64).map(|c| if c % 9 == 0 { 5.0 } else { 1.0 }).collect();
        let mut p = vec![0.0; 64];
        p[0] = 1.0;
        p[63] = -1.0;
        let set = FieldSet::new(
            Field::new(g.clone(), Quantity::M, spiky.clone()).unwrap(),
            Field::constant(g.clone(), Quantity::D, 1.0),
            Field::new(g.clone(), Quantity::P, p).unwrap(),
            Field::new(g.clone(), Quantity::Bx, spiky).unwrap(),
            Field::constant(g, Quantity::By, 1.0),
        )
        .unwrap();
        let stop = RelativeChange::default();
        let (shared, counts) = diffuse_fieldset(&set, DEFAULT_KAPPA, &stop, DiffusionMode::Shared, Execution::Sequential).unwrap();
        assert!(counts.iter().all(|&n| n == counts[0]) && counts[0] > 1);
        let (_, per) = diffuse_fieldset(&set, DEFAULT_KAPPA, &stop, DiffusionMode::PerQuantity, Execution::Parallel).unwrap();
        assert_eq!(per[1], 1);
        assert_eq!(per[2], counts[2]);
        let single = artificial_diffusion(&set.m, DEFAULT_KAPPA, &FixedSteps(counts[0])).unwrap();
        assert_eq!(single.field.values(), shared.m.values());
        assert!(shared.p.total().abs() < 1e-14);
    }
}

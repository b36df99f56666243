//! Continuum engine: finite-volume assembly of `Ξ`, the steady-state
//! Poisson solve and Crank–Nicolson integration of the swing PDE
//! `m θ̈ + d θ̇ = p + Ξθ/Δ²` with zero-flux boundaries.

use std::path::Path;
use std::sync::Arc;

use sprs::TriMat;

use crate::analysis::NodeCellMap;
use crate::fields::{Field, FieldSet, Quantity};
use crate::grid::RasterGrid;
use crate::linalg::{solve_pinned, SolverChoice, SparseMatrix};
use crate::network::{BusId, FaultScenario, FaultTarget};
use crate::stepping::{CrankNicolson, Forcing, ForcingEvent, SwingSystem};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Keeps the coupling towards `−axis` for an inward normal component `n`.
fn keep_minus(n: i8) -> bool {
    n <= 0
}

/// Keeps the coupling towards `+axis` for an inward normal component `n`.
fn keep_plus(n: i8) -> bool {
    n >= 0
}

/// The stencil matrix over masked cells (compressed indices).
///
/// Off-diagonals are cell-pair averages of `b_x` (x-neighbours) or `b_y`
/// (y-neighbours); the diagonal is minus the sum of the retained couplings.
#[derive(Debug, Clone)]
pub struct XiMatrix {
    matrix: SparseMatrix,
    grid_hash: String,
}

impl XiMatrix {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn grid_hash(&self) -> &str {
        &self.grid_hash
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col).copied().unwrap_or(0.0)
    }

    /// `K = −Ξ/Δ²`, the positive semidefinite stiffness used by the stepper.
    pub fn stiffness(&self, delta: f64) -> SparseMatrix {
        self.matrix.map(|v| -v / (delta * delta))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.outer_iterator().map(|row| row.iter().map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.data().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.matrix
            .outer_iterator()
            .enumerate()
            .all(|(r, row)| row.iter().all(|(c, &v)| self.matrix.get(c, r) == Some(&v)))
    }
}

pub fn assemble_xi(fields: &FieldSet, grid: &RasterGrid) -> Result<XiMatrix> {
    if fields.grid().hash() != grid.hash() {
        return Err(Error::GridMismatch { expected: grid.hash().into(), found: fields.grid().hash().into() });
    }
    let (bx, by) = (fields.b_x.values(), fields.b_y.values());
    let n = grid.n_cells();
    let mut tri = TriMat::with_capacity((n, n), 5 * n);
    for c in 0..n {
        let normal = grid.normal(grid.k_of(c));
        let [xm, xp, ym, yp] = grid.neighbors(c);
        let couplings = [
            (xm.filter(|_| keep_minus(normal.x)), bx),
            (xp.filter(|_| keep_plus(normal.x)), bx),
            (ym.filter(|_| keep_minus(normal.y)), by),
            (yp.filter(|_| keep_plus(normal.y)), by),
        ];
        let mut beta = 0.0;
        for (nb, b) in couplings {
            if let Some(l) = nb {
                let edge = 0.5 * (b[c] + b[l]);
                tri.add_triplet(c, l, edge);
                beta += edge;
            }
        }
        tri.add_triplet(c, c, -beta);
    }
    Ok(XiMatrix { matrix: tri.to_csr(), grid_hash: grid.hash().to_string() })
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= mean;
    }
}

/// Solves `Ξθ/Δ² + p = 0` in the zero-mean gauge.
pub fn pde_steady_state(fields: &FieldSet, grid: &RasterGrid) -> Result<Field> {
    let xi = assemble_xi(fields, grid)?;
    steady_from_xi(&xi, fields, grid.delta(), SolverChoice::Auto)
}

fn steady_from_xi(xi: &XiMatrix, fields: &FieldSet, delta: f64, solver: SolverChoice) -> Result<Field> {
    let k = xi.stiffness(delta);
    let mut theta = solve_pinned(&k, fields.p.values(), 0, solver)?;
    remove_mean(&mut theta);
    Field::new(fields.grid().clone(), Quantity::Theta, theta)
}

/// Compressed cell index of a fault target. A bus target needs `map`.
pub fn resolve_target(grid: &RasterGrid, target: FaultTarget, map: Option<&NodeCellMap>) -> Result<usize> {
    match target {
        FaultTarget::Cell(k) => grid
            .cell_of(k)
            .ok_or_else(|| Error::invalid(format!("fault cell k = {k} is not a masked cell"))),
        FaultTarget::Bus(id) => {
            let map = map.ok_or_else(|| Error::invalid(format!("fault at bus {id} needs a network to map it to a cell")))?;
            map.check_grid(grid)?;
            map.cell_of_bus(id).ok_or(Error::UnknownProbe(id as usize))
        }
    }
}

/// Probes labelled by their full-raster index `k`.
pub fn cell_probes(grid: &RasterGrid, ks: &[usize]) -> Result<Vec<(u64, usize)>> {
    ks.iter()
        .map(|&k| grid.cell_of(k).map(|c| (k as u64, c)).ok_or(Error::UnknownProbe(k)))
        .collect()
}

/// Probes at the cells of the given buses, labelled by bus id.
pub fn bus_probes(map: &NodeCellMap, ids: &[BusId]) -> Result<Vec<(u64, usize)>> {
    ids.iter()
        .map(|&id| map.cell_of_bus(id).map(|c| (id, c)).ok_or(Error::UnknownProbe(id as usize)))
        .collect()
}

/// θ̃ and ω̃ over all cells at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub theta: Field,
    pub omega: Field,
}

impl Snapshot {
    /// Writes `theta_<t>.field` and `omega_<t>.field` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let comment = format!("t = {}", crate::format::sig9(self.t));
        for f in [&self.theta, &self.omega] {
            let path = dir.join(format!("{}_{}.field", f.quantity().tag(), crate::format::sig9(self.t)));
            let text = crate::fields::field_to_text_with_comment(f, Some(&comment));
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Finalized fields with the assembled `Ξ`, a factorized stepper and the
/// pre-fault equilibrium; reusable across scenarios.
#[derive(Debug)]
pub struct ContinuumModel {
    fields: FieldSet,
    xi: XiMatrix,
    stepper: CrankNicolson,
    theta0: Vec<f64>,
}

impl ContinuumModel {
    pub fn new(fields: FieldSet, dt: f64, solver: SolverChoice) -> Result<Self> {
        fields.validate(true)?;
        let grid = fields.grid().clone();
        let xi = assemble_xi(&fields, &grid)?;
        let theta0 = steady_from_xi(&xi, &fields, grid.delta(), solver)?.into_values();
        let system = SwingSystem::new(fields.m.values().to_vec(), fields.d.values().to_vec(), xi.stiffness(grid.delta()))?;
        let stepper = CrankNicolson::new(system, dt, solver)?;
        Ok(ContinuumModel { fields, xi, stepper, theta0 })
    }

    pub fn grid(&self) -> &Arc<RasterGrid> {
        self.fields.grid()
    }

    pub fn fields(&self) -> &FieldSet {
        &self.fields
    }

    pub fn xi(&self) -> &XiMatrix {
        &self.xi
    }

    pub fn stepper(&self) -> &CrankNicolson {
        &self.stepper
    }

    /// Zero-mean pre-fault equilibrium.
    pub fn steady_state(&self) -> &[f64] {
        &self.theta0
    }

    /// Post-fault frequency `(Σp + Δp)/Σd` of the continuum model.
    pub fn post_fault_frequency(&self, delta_p: f64) -> f64 {
        (self.fields.p.total() + delta_p) / self.fields.d.total()
    }

    pub fn forcing(&self, scenarios: &[FaultScenario], map: Option<&NodeCellMap>) -> Result<Forcing> {
        let mut events = Vec::with_capacity(scenarios.len());
        for s in scenarios {
            s.validate()?;
            let cell = resolve_target(self.grid(), s.target, map)?;
            events.push(ForcingEvent::from_times(cell, s.delta_p, s.t_on, s.t_off, self.stepper.dt())?);
        }
        Ok(Forcing { base: self.fields.p.values().to_vec(), events })
    }

    /// Simulates from the equilibrium; `probes` pairs labels with
    /// compressed cell indices (see [`cell_probes`], [`bus_probes`]).
    pub fn run(&self, scenarios: &[FaultScenario], map: Option<&NodeCellMap>, t_end: f64, stride: usize, probes: &[(u64, usize)]) -> Result<Trajectory> {
        let forcing = self.forcing(scenarios, map)?;
        let steps = self.stepper.steps_for(t_end)?;
        self.stepper.simulate(&self.theta0, &forcing, steps, stride, probes)
    }

    /// Full-field states at the steps nearest to `times`.
    pub fn snapshots(&self, scenarios: &[FaultScenario], map: Option<&NodeCellMap>, times: &[f64]) -> Result<Vec<Snapshot>> {
        let forcing = self.forcing(scenarios, map)?;
        let dt = self.stepper.dt();
        let mut wanted: Vec<usize> = times.iter().map(|t| (t / dt).round().max(0.0) as usize).collect();
        wanted.sort_unstable();
        wanted.dedup();
        let last = wanted.last().copied().unwrap_or(0);
        let omega0 = self.stepper.initial_omega(&self.theta0, &forcing);
        let grid = self.grid().clone();
        let mut out = Vec::with_capacity(wanted.len());
        self.stepper.run_from(&self.theta0, &omega0, &forcing, last, |step, theta, omega| {
            if wanted.binary_search(&step).is_ok() {
                out.push(Snapshot {
                    t: step as f64 * dt,
                    theta: Field::new(grid.clone(), Quantity::Theta, theta.to_vec())?,
                    omega: Field::new(grid.clone(), Quantity::Omega, omega.to_vec())?,
                });
            }
            Ok(())
        })?;
        Ok(out)
    }
}

/// One-shot simulation of a single fault with probes at cells `k`.
pub fn crank_nicolson_simulate(fields: &FieldSet, scenario: &FaultScenario, dt: f64, t_end: f64, probes: &[usize]) -> Result<Trajectory> {
    let model = ContinuumModel::new(fields.clone(), dt, SolverChoice::Auto)?;
    let probes = cell_probes(model.grid(), probes)?;
    model.run(std::slice::from_ref(scenario), None, t_end, 1, &probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn uniform(grid: &Arc<RasterGrid>, m: f64, d: f64, b: f64, p: Vec<f64>) -> FieldSet {
        FieldSet::new(
            Field::constant(grid.clone(), Quantity::M, m),
            Field::constant(grid.clone(), Quantity::D, d),
            Field::new(grid.clone(), Quantity::P, p).unwrap(),
            Field::constant(grid.clone(), Quantity::Bx, b),
            Field::constant(grid.clone(), Quantity::By, b),
        )
        .unwrap()
    }

    #[test]
    fn uniform_interior_stencil() {
        let g = Arc::new(RasterGrid::rectangle(5, 5, 1.0, Point::new(0.0, 0.0)).unwrap());
        let xi = assemble_xi(&uniform(&g, 1.0, 1.0, 2.0, vec![0.0; 25]), &g).unwrap();
        let c = g.cell_of(g.k(2, 2)).unwrap();
        assert_eq!(xi.get(c, c), -8.0);
        for nb in g.neighbors(c).into_iter().flatten() {
            assert_eq!(xi.get(c, nb), 2.0);
        }
        let corner = g.cell_of(g.k(0, 0)).unwrap();
        assert_eq!(xi.get(corner, corner), -4.0);
        assert!(xi.row_sums().iter().all(|s| s.abs() < 1e-12));
        assert!(xi.is_symmetric());
    }

    #[test]
    fn two_cell_steady_state() {
        let delta = 3.0;
        let g = Arc::new(RasterGrid::rectangle(2, 1, delta, Point::new(0.0, 0.0)).unwrap());
        let (b, p) = (1.5, 0.7);
        let theta = pde_steady_state(&uniform(&g, 1.0, 1.0, b, vec![p, -p]), &g).unwrap();
        let v = theta.values();
        assert!((v[0] - v[1] - p * delta * delta / b).abs() < 1e-12);
        assert!((v[0] + v[1]).abs() < 1e-12);
        let zero = pde_steady_state(&uniform(&g, 1.0, 1.0, b, vec![0.0, 0.0]), &g).unwrap();
        assert!(zero.values().iter().all(|&x| x == 0.0));
        assert!(matches!(pde_steady_state(&uniform(&g, 1.0, 1.0, b, vec![1.0, 0.0]), &g), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn single_cell_first_order_and_second_order() {
        let g = Arc::new(RasterGrid::rectangle(1, 1, 1.0, Point::new(0.0, 0.0)).unwrap());
        let (m, d, dp) = (2.0, 0.5, -0.3);
        let fields = uniform(&g, m, d, 1.0, vec![0.0]);
        let s = FaultScenario::permanent(FaultTarget::Cell(0), dp, 0.0);
        let traj = crank_nicolson_simulate(&fields, &s, 1e-3, 5.0, &[0]).unwrap();
        for (t, w) in traj.times.iter().zip(&traj.omega[0]) {
            let exact = dp / d * (1.0 - (-d * t / m).exp());
            assert!((w - exact).abs() < 1e-6, "t = {t}: {w} vs {exact}");
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let g = Arc::new(RasterGrid::rectangle(4, 3, 50.0, Point::new(0.0, 0.0)).unwrap());
        let mut p = vec![0.0; 12];
        p[0] = 1.0;
        p[11] = -1.0;
        let model = ContinuumModel::new(uniform(&g, 1.0, 0.2, 5e3, p), 0.01, SolverChoice::Auto).unwrap();
        let probes = cell_probes(model.grid(), &[0, 5, 11]).unwrap();
        let traj = model.run(&[], None, 2.0, 10, &probes).unwrap();
        for (pi, &(_, c)) in probes.iter().enumerate() {
            assert!(traj.theta[pi].iter().all(|&t| (t - model.steady_state()[c]).abs() < 1e-12));
            assert!(traj.omega[pi].iter().all(|&w| w.abs() < 1e-12));
        }
        let snaps = model.snapshots(&[], None, &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(snaps.len(), 2);
        assert!(cell_probes(model.grid(), &[12]).is_err());
    }
}

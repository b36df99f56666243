use std::sync::Arc;

use log::debug;

use super::{Field, FieldSet, Quantity};
use crate::geometry::Point;
use crate::grid::RasterGrid;
use crate::network::PowerNetwork;
use crate::{Error, Result};

/// Cell receiving the deposit of a point; errors when the containing cell
/// is outside the mask.
fn home_cell(grid: &RasterGrid, p: Point, what: &str) -> Result<usize> {
    grid.locate(p)
        .and_then(|(i, j)| grid.cell_of(grid.k(i, j)))
        .ok_or_else(|| Error::Inconsistent(format!("{what} at ({}, {}) lies outside the grid mask", p.x, p.y)))
}

/// Adds each bus's `m`, `d` or `p` to its nearest masked cell.
pub fn deposit_nodal(net: &PowerNetwork, grid: &Arc<RasterGrid>, quantity: Quantity) -> Result<Field> {
    let pick: fn(&crate::network::Bus) -> f64 = match quantity {
        Quantity::M => |b| b.m,
        Quantity::D => |b| b.d,
        Quantity::P => |b| b.p,
        other => return Err(Error::invalid(format!("deposit_nodal handles m, d, p, not {other}"))),
    };
    let mut values = vec![0.0; grid.n_cells()];
    for bus in net.buses() {
        let c = home_cell(grid, bus.position(), &format!("bus {}", bus.id))?;
        values[c] += pick(bus);
    }
    Field::new(grid.clone(), quantity, values)
}

/// A crossing of the face between full-index cell `low` and its `+x`
/// (`x_axis`) or `+y` neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceCrossing {
    pub x_axis: bool,
    pub low: usize,
}

/// Faces crossed by the straight segment `a → b`, walking the
/// 4-connected chain of cells it passes through (exact ties step x first).
///
/// The walk makes exactly `|Δi| + |Δj|` crossings between the endpoint
/// cells, so it always terminates at the cell containing `b`.
pub fn segment_faces(grid: &RasterGrid, a: Point, b: Point) -> Result<Vec<FaceCrossing>> {
    let outside = |p: Point| Error::Inconsistent(format!("branch endpoint ({}, {}) is outside the grid", p.x, p.y));
    let (mut i, mut j) = grid.locate(a).ok_or_else(|| outside(a))?;
    let (ie, je) = grid.locate(b).ok_or_else(|| outside(b))?;
    let o = grid.origin();
    let gx = (a.x - o.x) / grid.delta();
    let gy = (a.y - o.y) / grid.delta();
    let dx = (b.x - a.x) / grid.delta();
    let dy = (b.y - a.y) / grid.delta();
    let sx: isize = if ie > i { 1 } else { -1 };
    let sy: isize = if je > j { 1 } else { -1 };
    let first = |cell: usize, g: f64, d: f64, s: isize| {
        if d == 0.0 {
            f64::INFINITY
        } else {
            ((cell as f64 + 0.5 * s as f64) - g) / d
        }
    };
    let mut t_x = first(i, gx, dx, sx);
    let mut t_y = first(j, gy, dy, sy);
    let step_x = if dx == 0.0 { f64::INFINITY } else { 1.0 / dx.abs() };
    let step_y = if dy == 0.0 { f64::INFINITY } else { 1.0 / dy.abs() };

    let mut out = Vec::with_capacity(i.abs_diff(ie) + j.abs_diff(je));
    while (i, j) != (ie, je) {
        let go_x = if i == ie {
            false
        } else if j == je {
            true
        } else {
            t_x <= t_y
        };
        if go_x {
            let low = if sx > 0 { grid.k(i, j) } else { grid.k(i - 1, j) };
            out.push(FaceCrossing { x_axis: true, low });
            i = (i as isize + sx) as usize;
            t_x += step_x;
        } else {
            let low = if sy > 0 { grid.k(i, j) } else { grid.k(i, j - 1) };
            out.push(FaceCrossing { x_axis: false, low });
            j = (j as isize + sy) as usize;
            t_y += step_y;
        }
    }
    Ok(out)
}

/// Deposits branch couplings into `(b_x, b_y)`.
///
/// A branch crossing `n` cell faces gives each crossed face the coupling
/// `n·b′·Δ²`, so the chain of faces has series susceptance `b′`. Each cell
/// then takes, per axis, the mean over its two faces of those that were
/// crossed by some branch.
pub fn deposit_lines(net: &PowerNetwork, grid: &Arc<RasterGrid>) -> Result<(Field, Field)> {
    let n_full = grid.nx() * grid.ny();
    let mut face_x = vec![0.0; n_full];
    let mut face_y = vec![0.0; n_full];
    let mut hit_x = vec![false; n_full];
    let mut hit_y = vec![false; n_full];
    let area = grid.delta() * grid.delta();
    let buses = net.buses();
    for (bi, bj, coupling) in net.coupling_edges() {
        let (a, b) = (buses[bi].position(), buses[bj].position());
        if a.distance(b) == 0.0 {
            return Err(Error::invalid(format!("branch {}-{} has zero length", buses[bi].id, buses[bj].id)));
        }
        home_cell(grid, a, &format!("bus {}", buses[bi].id))?;
        home_cell(grid, b, &format!("bus {}", buses[bj].id))?;
        let faces = segment_faces(grid, a, b)?;
        if faces.is_empty() {
            debug!("branch {}-{} lies inside one cell; no coupling deposited", buses[bi].id, buses[bj].id);
            continue;
        }
        let value = faces.len() as f64 * coupling * area;
        for f in faces {
            if f.x_axis {
                face_x[f.low] += value;
                hit_x[f.low] = true;
            } else {
                face_y[f.low] += value;
                hit_y[f.low] = true;
            }
        }
    }
    let ny = grid.ny();
    let cell_mean = |k: usize, faces: &[f64], hits: &[bool], lower: Option<usize>| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for f in [lower, Some(k)].into_iter().flatten() {
            if hits[f] {
                sum += faces[f];
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    };
    let mut bx = Vec::with_capacity(grid.n_cells());
    let mut by = Vec::with_capacity(grid.n_cells());
    for &k in grid.cells() {
        let (i, j) = grid.ij(k);
        bx.push(cell_mean(k, &face_x, &hit_x, (i > 0).then(|| k - ny)));
        by.push(cell_mean(k, &face_y, &hit_y, (j > 0).then(|| k - 1)));
    }
    Ok((Field::new(grid.clone(), Quantity::Bx, bx)?, Field::new(grid.clone(), Quantity::By, by)?))
}

/// Raw deposited field set (no smoothing).
pub fn deposit_all(net: &PowerNetwork, grid: &Arc<RasterGrid>) -> Result<FieldSet> {
    let (b_x, b_y) = deposit_lines(net, grid)?;
    FieldSet::new(
        deposit_nodal(net, grid, Quantity::M)?,
        deposit_nodal(net, grid, Quantity::D)?,
        deposit_nodal(net, grid, Quantity::P)?,
        b_x,
        b_y,
    )
}

use std::collections::VecDeque;

use log::warn;

use super::RasterGrid;
use crate::geometry::{point_segment_distance, Point};
use crate::network::PowerNetwork;
use crate::{Error, Result};

pub const DEFAULT_DELTA_KM: f64 = 50.0;

/// Rule deciding which cells of the raster belong to the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskRule {
    /// Cells whose centre lies within this distance (km) of a bus or branch.
    Dilation(f64),
    /// Every cell of the buses' bounding rectangle, with the first cell
    /// centred on the lower-left bus. A lattice network with spacing Δ maps
    /// one bus per cell under this rule.
    BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub delta: f64,
    pub rule: MaskRule,
}

impl GridSpec {
    pub fn dilation(delta: f64, dilation: f64) -> Self {
        GridSpec { delta, rule: MaskRule::Dilation(dilation) }
    }

    pub fn bounding_box(delta: f64) -> Self {
        GridSpec { delta, rule: MaskRule::BoundingBox }
    }
}

/// Raw mask: cells whose centre is within `dilation` of a point or segment.
///
/// The rectangle is anchored so that the lowest-left point sits on a cell
/// centre, and padded by the dilation radius plus two cells on every side.
/// No island removal or thickening is applied.
pub fn rasterize_mask(points: &[Point], segments: &[(Point, Point)], delta: f64, dilation: f64) -> Result<RasterGrid> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta = {delta} must be positive")));
    }
    if !(dilation >= delta && dilation.is_finite()) {
        return Err(Error::invalid(format!("dilation = {dilation} must be at least delta = {delta}")));
    }
    if points.is_empty() {
        return Err(Error::invalid("cannot rasterize an empty network"));
    }
    let (lo, hi) = bounds(points);
    let pad = (dilation / delta).ceil() as usize + 2;
    let origin = Point::new(lo.x - pad as f64 * delta, lo.y - pad as f64 * delta);
    let nx = ((hi.x - lo.x) / delta).ceil() as usize + 2 * pad + 1;
    let ny = ((hi.y - lo.y) / delta).ceil() as usize + 2 * pad + 1;
    let mut mask = vec![false; nx * ny];
    // Tolerance keeps lattice-aligned distances such as exactly 2Δ inside.
    let reach = dilation * (1.0 + 1e-12);
    let center = |i: usize, j: usize| Point::new(origin.x + i as f64 * delta, origin.y + j as f64 * delta);
    let mut paint = |a: Point, b: Point| {
        let i0 = (((a.x.min(b.x) - reach - origin.x) / delta).floor().max(0.0)) as usize;
        let i1 = (((a.x.max(b.x) + reach - origin.x) / delta).ceil() as usize).min(nx - 1);
        let j0 = (((a.y.min(b.y) - reach - origin.y) / delta).floor().max(0.0)) as usize;
        let j1 = (((a.y.max(b.y) + reach - origin.y) / delta).ceil() as usize).min(ny - 1);
        for i in i0..=i1 {
            for j in j0..=j1 {
                if point_segment_distance(center(i, j), a, b) <= reach {
                    mask[ny * i + j] = true;
                }
            }
        }
    };
    for &p in points {
        paint(p, p);
    }
    for &(a, b) in segments {
        paint(a, b);
    }
    RasterGrid::from_mask(delta, nx, ny, origin, mask)
}

/// Builds the domain raster for a network.
///
/// Only the largest 4-connected island is kept (smaller ones are dropped
/// with a warning), then one-cell-wide protrusions are thickened until every
/// masked cell has a masked neighbour on both axes.
pub fn build_grid(net: &PowerNetwork, spec: &GridSpec) -> Result<RasterGrid> {
    let points: Vec<Point> = net.buses().iter().map(|b| b.position()).collect();
    let raw = match spec.rule {
        MaskRule::Dilation(dilation) => {
            let segments: Vec<(Point, Point)> = net
                .coupling_edges()
                .map(|(i, j, _)| (points[i], points[j]))
                .collect();
            rasterize_mask(&points, &segments, spec.delta, dilation)?
        }
        MaskRule::BoundingBox => {
            if !(spec.delta > 0.0 && spec.delta.is_finite()) {
                return Err(Error::invalid(format!("delta = {} must be positive", spec.delta)));
            }
            let (lo, hi) = bounds(&points);
            let nx = ((hi.x - lo.x) / spec.delta).round() as usize + 1;
            let ny = ((hi.y - lo.y) / spec.delta).round() as usize + 1;
            RasterGrid::rectangle(nx, ny, spec.delta, lo)?
        }
    };

    let (nx, ny) = (raw.nx(), raw.ny());
    let mut mask = raw.mask().to_vec();
    let islands = components(nx, ny, &mask);
    if islands.len() > 1 {
        let dropped: Vec<usize> = islands[1..].iter().map(Vec::len).collect();
        warn!("dropping {} disconnected mask island(s) of sizes {:?}", dropped.len(), dropped);
        mask = vec![false; nx * ny];
        for &k in &islands[0] {
            mask[k] = true;
        }
    }
    if mask.iter().filter(|&&m| m).count() <= 1 {
        return Err(Error::invalid(format!(
            "delta = {} is so large that the mask is a single cell",
            spec.delta
        )));
    }
    let grid = RasterGrid::from_mask(spec.delta, nx, ny, raw.origin(), mask)?;
    thicken_protrusions(&grid)
}

/// Adds the lateral neighbours of every degenerate cell, padding the
/// rectangle when needed.
///
/// The lateral pair is widened towards the cell's existing neighbour on the
/// other axis, so every fix is a block at least two cells wide in both
/// directions and cannot leave a new protrusion behind.
pub fn thicken_protrusions(grid: &RasterGrid) -> Result<RasterGrid> {
    let mut grid = grid.clone();
    loop {
        if grid.degenerate().is_empty() {
            return Ok(grid);
        }
        let needs_pad = grid.degenerate().iter().any(|&k| {
            let (i, j) = grid.ij(k);
            i == 0 || j == 0 || i + 1 == grid.nx() || j + 1 == grid.ny()
        });
        if needs_pad {
            grid = pad(&grid, 2)?;
        }
        let mut mask = grid.mask().to_vec();
        for &k in grid.degenerate() {
            let (i, j) = grid.ij(k);
            let (i, j) = (i as isize, j as isize);
            let span = |lo: bool, hi: bool, at: isize| match (lo, hi) {
                (false, false) => (at - 1, at + 1),
                (true, _) => (at - 1, at),
                (false, true) => (at, at + 1),
            };
            let (x0, x1) = span(grid.is_masked(i - 1, j), grid.is_masked(i + 1, j), i);
            let (y0, y1) = span(grid.is_masked(i, j - 1), grid.is_masked(i, j + 1), j);
            for a in x0..=x1 {
                for b in y0..=y1 {
                    mask[grid.k(a as usize, b as usize)] = true;
                }
            }
        }
        grid = RasterGrid::from_mask(grid.delta(), grid.nx(), grid.ny(), grid.origin(), mask)?;
    }
}

fn pad(grid: &RasterGrid, cells: usize) -> Result<RasterGrid> {
    let (nx, ny) = (grid.nx() + 2 * cells, grid.ny() + 2 * cells);
    let mut mask = vec![false; nx * ny];
    for &k in grid.cells() {
        let (i, j) = grid.ij(k);
        mask[ny * (i + cells) + j + cells] = true;
    }
    let o = grid.origin();
    let shift = cells as f64 * grid.delta();
    RasterGrid::from_mask(grid.delta(), nx, ny, Point::new(o.x - shift, o.y - shift), mask)
}

fn bounds(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// 4-connected components of a mask, largest first (ties broken by the
/// smallest contained `k`). Each list is in increasing `k`.
pub(crate) fn components(nx: usize, ny: usize, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; nx * ny];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for start in 0..nx * ny {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / ny, k % ny);
            let mut visit = |n: usize| {
                if mask[n] && label[n] == usize::MAX {
                    label[n] = id;
                    members.push(n);
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(k - ny);
            }
            if i + 1 < nx {
                visit(k + ny);
            }
            if j > 0 {
                visit(k - 1);
            }
            if j + 1 < ny {
                visit(k + 1);
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_lattice_network, InjectionPattern, LatticeConfig};
    use crate::network::{Bus, Meta};

    fn bus(id: u64, x: f64, y: f64) -> Bus {
        Bus { id, x, y, m: 1.0, d: 1.0, p: 0.0, v: 1.0 }
    }

    #[test]
    fn single_point_disk_has_13_cells() {
        let g = rasterize_mask(&[Point::new(0.0, 0.0)], &[], 1.0, 2.0).unwrap();
        assert_eq!(g.n_cells(), 13);
        // Brute-force enumeration of centres within 2Δ.
        let mut count = 0;
        for k in 0..g.nx() * g.ny() {
            let inside = g.center(k).distance(Point::new(0.0, 0.0)) <= 2.0;
            assert_eq!(inside, g.mask()[k]);
            count += inside as usize;
        }
        assert_eq!(count, 13);
    }

    #[test]
    fn built_disk_is_thickened() {
        let net = PowerNetwork::new(Meta::default(), vec![bus(1, 0.0, 0.0)], vec![]).unwrap();
        let g = build_grid(&net, &GridSpec::dilation(1.0, 2.0)).unwrap();
        assert!(g.degenerate().is_empty());
        assert_eq!(g.n_cells(), 21);
    }

    #[test]
    fn horizontal_line_gives_three_wide_strip() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(10.0, 0.0);
        let g = rasterize_mask(&[a, b], &[(a, b)], 1.0, 1.0).unwrap();
        for k in 0..g.nx() * g.ny() {
            assert_eq!(g.mask()[k], point_segment_distance(g.center(k), a, b) <= 1.0);
        }
        let (i, _) = g.locate(Point::new(5.0, 0.0)).unwrap();
        let column: usize = (0..g.ny()).filter(|&j| g.mask()[g.k(i, j)]).count();
        assert_eq!(column, 3);
    }

    #[test]
    fn components_are_ranked() {
        let mask = vec![true, false, true, true];
        let islands = components(2, 2, &mask);
        assert_eq!(islands.len(), 1);
        let mask = vec![true, false, false, true];
        let islands = components(2, 2, &mask);
        assert_eq!(islands, vec![vec![0], vec![3]]);
    }

    #[test]
    fn lattice_bounding_box_is_one_bus_per_cell() {
        let cfg = LatticeConfig { nx: 4, ny: 3, spacing: 50.0, injection: InjectionPattern::Zero, ..Default::default() };
        let net = generate_lattice_network(&cfg).unwrap();
        let g = build_grid(&net, &GridSpec::bounding_box(50.0)).unwrap();
        assert_eq!((g.nx(), g.ny(), g.n_cells()), (4, 3, 12));
        for b in net.buses() {
            let (c, d) = g.nearest_cell(b.position());
            assert!(d < 1e-9);
            assert_eq!(g.k_of(c) as u64 + 1, b.id);
        }
    }

    #[test]
    fn oversized_delta_is_rejected() {
        let net = PowerNetwork::new(Meta::default(), vec![bus(1, 0.0, 0.0), bus(2, 1.0, 0.0)], vec![(1, 2, 1.0)]).unwrap();
        assert!(build_grid(&net, &GridSpec::bounding_box(10.0)).is_err());
        assert!(build_grid(&net, &GridSpec::dilation(10.0, 5.0)).is_err());
    }

    #[test]
    fn staircase_thickening_terminates() {
        let (nx, ny) = (8, 8);
        let mut mask = vec![false; nx * ny];
        for (i, j) in [(1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4), (5, 5)] {
            mask[i * ny + j] = true;
        }
        let grid = RasterGrid::from_mask(1.0, nx, ny, Point::new(0.0, 0.0), mask).unwrap();
        assert!(!grid.degenerate().is_empty());
        let thick = thicken_protrusions(&grid).unwrap();
        assert!(thick.degenerate().is_empty());
        assert_eq!(thick.component_count(), 1);
        assert!(thick.n_cells() < 40);
    }
}

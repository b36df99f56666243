//! Regular raster over the service territory.
//!
//! Cell `(i, j)` has x index `i ∈ [0, nx)` and y index `j ∈ [0, ny)`; its
//! centre is `origin + (iΔ, jΔ)`. The vectorized index is `k = ny·i + j`
//! (the 0-based form of `k = N_y(i−1)+j`), so x-neighbours sit at `k ± ny`
//! and y-neighbours at `k ± 1`. Masked cells are additionally numbered
//! `0..n_cells` in increasing `k`; that compressed index orders every
//! field and matrix.

mod build;
mod io;

use sha2::{Digest, Sha256};

use crate::geometry::Point;
use crate::{Error, Result};

pub use build::{build_grid, rasterize_mask, thicken_protrusions, GridSpec, MaskRule, DEFAULT_DELTA_KM};
pub use io::{grid_from_text, grid_to_text, load_grid, save_grid};

/// Inward-pointing boundary normal; each component in `{−1, 0, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Normal {
    pub x: i8,
    pub y: i8,
}

impl Normal {
    pub fn is_zero(self) -> bool {
        self.x == 0 && self.y == 0
    }
}

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    delta: f64,
    nx: usize,
    ny: usize,
    origin: Point,
    mask: Vec<bool>,
    normals: Vec<Normal>,
    /// Compressed index → `k`.
    cells: Vec<usize>,
    /// `k` → compressed index (`NONE` when unmasked).
    lookup: Vec<usize>,
    degenerate: Vec<usize>,
    hash: String,
}

impl RasterGrid {
    /// Builds the index maps, normals and content hash for a mask given in
    /// `k` order.
    pub fn from_mask(delta: f64, nx: usize, ny: usize, origin: Point, mask: Vec<bool>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("grid spacing delta = {delta} must be positive")));
        }
        if nx == 0 || ny == 0 || mask.len() != nx * ny {
            return Err(Error::invalid("grid mask dimensions do not match nx·ny"));
        }
        let mut cells = Vec::new();
        let mut lookup = vec![NONE; nx * ny];
        for (k, &m) in mask.iter().enumerate() {
            if m {
                lookup[k] = cells.len();
                cells.push(k);
            }
        }
        if cells.is_empty() {
            return Err(Error::invalid("grid mask is empty"));
        }
        let mut grid = RasterGrid { delta, nx, ny, origin, mask, normals: Vec::new(), cells, lookup, degenerate: Vec::new(), hash: String::new() };
        let (normals, degenerate) = boundary_normals(&grid);
        grid.normals = normals;
        grid.degenerate = degenerate;
        grid.hash = grid.compute_hash();
        Ok(grid)
    }

    /// Fully masked `nx × ny` rectangle whose cell `(0, 0)` is centred on `origin`.
    pub fn rectangle(nx: usize, ny: usize, delta: f64, origin: Point) -> Result<Self> {
        RasterGrid::from_mask(delta, nx, ny, origin, vec![true; nx * ny])
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Number of masked cells.
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn k(&self, i: usize, j: usize) -> usize {
        self.ny * i + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    pub fn is_masked(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny && self.mask[self.k(i as usize, j as usize)]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `k` of masked cell number `cell`.
    pub fn k_of(&self, cell: usize) -> usize {
        self.cells[cell]
    }

    /// Compressed index of `k`, if masked.
    pub fn cell_of(&self, k: usize) -> Option<usize> {
        self.lookup.get(k).copied().filter(|&c| c != NONE)
    }

    /// `k` of every masked cell, increasing.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Normal of cell `k` (zero when unmasked).
    pub fn normal(&self, k: usize) -> Normal {
        self.normals[k]
    }

    pub fn normals(&self) -> &[Normal] {
        &self.normals
    }

    /// Masked cells with both neighbours missing along one axis.
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn center(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        Point::new(self.origin.x + i as f64 * self.delta, self.origin.y + j as f64 * self.delta)
    }

    /// `(i, j)` of the cell containing `p`, if inside the rectangle.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let i = ((p.x - self.origin.x) / self.delta).round();
        let j = ((p.y - self.origin.y) / self.delta).round();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny).then(|| (i as usize, j as usize))
    }

    /// Compressed index of the nearest masked cell to `p`, with its
    /// distance. Uses the containing cell when masked, otherwise searches.
    pub fn nearest_cell(&self, p: Point) -> (usize, f64) {
        if let Some((i, j)) = self.locate(p) {
            if let Some(c) = self.cell_of(self.k(i, j)) {
                return (c, p.distance(self.center(self.k(i, j))));
            }
        }
        self.cells
            .iter()
            .enumerate()
            .map(|(c, &k)| (c, p.distance(self.center(k))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("grid is nonempty")
    }

    /// Masked 4-neighbours of compressed cell `cell` as compressed indices:
    /// `[−x, +x, −y, +y]`.
    pub fn neighbors(&self, cell: usize) -> [Option<usize>; 4] {
        let (i, j) = self.ij(self.cells[cell]);
        let (i, j) = (i as isize, j as isize);
        let at = |a: isize, b: isize| self.is_masked(a, b).then(|| self.lookup[self.k(a as usize, b as usize)]);
        [at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1)]
    }

    /// Number of 4-connected components of the mask.
    pub fn component_count(&self) -> usize {
        build::components(self.nx, self.ny, &self.mask).len()
    }

    fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"swingpde-grid");
        h.update(self.delta.to_bits().to_le_bytes());
        h.update((self.nx as u64).to_le_bytes());
        h.update((self.ny as u64).to_le_bytes());
        h.update(self.origin.x.to_bits().to_le_bytes());
        h.update(self.origin.y.to_bits().to_le_bytes());
        h.update(self.mask.iter().map(|&m| m as u8).collect::<Vec<u8>>());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Inward normals for every cell plus the list of degenerate cells.
///
/// `n_x = +1` when the −x neighbour is missing and the +x neighbour is
/// masked, `−1` in the mirrored case, `0` when both are masked; likewise
/// `n_y`. A masked cell with both neighbours missing on an axis gets `0` on
/// that axis and is reported as degenerate.
pub fn boundary_normals(grid: &RasterGrid) -> (Vec<Normal>, Vec<usize>) {
    let mut normals = vec![Normal::default(); grid.nx * grid.ny];
    let mut degenerate = Vec::new();
    let axis = |lo: bool, hi: bool| -> (i8, bool) {
        match (lo, hi) {
            (true, true) => (0, false),
            (false, true) => (1, false),
            (true, false) => (-1, false),
            (false, false) => (0, true),
        }
    };
    for &k in &grid.cells {
        let (i, j) = grid.ij(k);
        let (i, j) = (i as isize, j as isize);
        let (nx, dx) = axis(grid.is_masked(i - 1, j), grid.is_masked(i + 1, j));
        let (ny, dy) = axis(grid.is_masked(i, j - 1), grid.is_masked(i, j + 1));
        normals[k] = Normal { x: nx, y: ny };
        if dx || dy {
            degenerate.push(k);
        }
    }
    (normals, degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_map_round_trip() {
        let g = RasterGrid::rectangle(4, 3, 1.0, Point::new(0.0, 0.0)).unwrap();
        for c in 0..g.n_cells() {
            let k = g.k_of(c);
            let (i, j) = g.ij(k);
            assert_eq!(g.k(i, j), k);
            assert_eq!(g.cell_of(k), Some(c));
        }
        // x-neighbours differ by ny in k.
        assert_eq!(g.k(2, 1) - g.k(1, 1), 3);
    }

    #[test]
    fn rectangle_normals() {
        let g = RasterGrid::rectangle(5, 4, 1.0, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(g.normal(g.k(0, 2)), Normal { x: 1, y: 0 });
        assert_eq!(g.normal(g.k(4, 2)), Normal { x: -1, y: 0 });
        assert_eq!(g.normal(g.k(2, 0)), Normal { x: 0, y: 1 });
        assert_eq!(g.normal(g.k(2, 2)), Normal { x: 0, y: 0 });
        assert_eq!(g.normal(g.k(0, 0)), Normal { x: 1, y: 1 });
        assert_eq!(g.normal(g.k(4, 3)), Normal { x: -1, y: -1 });
        assert!(g.degenerate().is_empty());
        // Zero normal exactly where all 4 axis neighbours are masked.
        for c in 0..g.n_cells() {
            let all = g.neighbors(c).iter().all(Option::is_some);
            assert_eq!(all, g.normal(g.k_of(c)).is_zero());
        }
    }

    #[test]
    fn degenerate_cells_flagged() {
        let g = RasterGrid::rectangle(3, 1, 1.0, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(g.degenerate().len(), 3);
        let single = RasterGrid::rectangle(1, 1, 1.0, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(single.degenerate(), &[0]);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RasterGrid::rectangle(3, 3, 1.0, Point::new(0.0, 0.0)).unwrap();
        let b = RasterGrid::rectangle(3, 3, 1.0, Point::new(0.0, 0.0)).unwrap();
        let c = RasterGrid::rectangle(3, 3, 2.0, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn nearest_cell_lookup() {
        let mut mask = vec![true; 9];
        mask[4] = false;
        let g = RasterGrid::from_mask(1.0, 3, 3, Point::new(0.0, 0.0), mask).unwrap();
        let (c, d) = g.nearest_cell(Point::new(2.1, 0.0));
        assert_eq!(g.k_of(c), g.k(2, 0));
        assert!((d - 0.1).abs() < 1e-12);
        let (_, d) = g.nearest_cell(Point::new(1.0, 1.0));
        assert_eq!(d, 1.0);
    }
}

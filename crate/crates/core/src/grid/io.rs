//! Plain-text grid export.
//!
//! ```text
//! swingpde-grid 1
//! delta 50
//! nx 3
//! ny 2
//! origin 0 0
//! cells 6
//! hash <sha256 hex>
//! mask
//! 1 1
//! ...
//! normal_x
//! ...
//! normal_y
//! ...
//! ```
//! Each array block has `nx` rows of `ny` integers, so reading the blocks
//! row by row visits cells in increasing `k`.

use std::fmt::Write as _;
use std::path::Path;

use super::RasterGrid;
use crate::geometry::Point;
use crate::{Error, Result};

const MAGIC: &str = "swingpde-grid 1";

pub fn grid_to_text(grid: &RasterGrid) -> String {
    let mut s = String::new();
    let o = grid.origin();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "delta {}", grid.delta()).unwrap();
    writeln!(s, "nx {}", grid.nx()).unwrap();
    writeln!(s, "ny {}", grid.ny()).unwrap();
    writeln!(s, "origin {} {}", o.x, o.y).unwrap();
    writeln!(s, "cells {}", grid.n_cells()).unwrap();
    writeln!(s, "hash {}", grid.hash()).unwrap();
    let block = |s: &mut String, name: &str, value: &dyn Fn(usize) -> i32| {
        writeln!(s, "{name}").unwrap();
        for i in 0..grid.nx() {
            let row: Vec<String> = (0..grid.ny()).map(|j| value(grid.k(i, j)).to_string()).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
    };
    block(&mut s, "mask", &|k| grid.mask()[k] as i32);
    block(&mut s, "normal_x", &|k| grid.normal(k).x as i32);
    block(&mut s, "normal_y", &|k| grid.normal(k).y as i32);
    s
}

pub fn grid_from_text(text: &str) -> Result<RasterGrid> {
    let err = |m: String| Error::parse("grid file", m);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(MAGIC) {
        return Err(err(format!("missing '{MAGIC}' header")));
    }
    let mut header = |key: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| err(format!("missing '{key}' line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(err(format!("expected '{key}', found '{line}'")));
        }
        Ok(parts.map(String::from).collect())
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("bad number '{v}': {e}")));
    let int = |v: &str| v.parse::<usize>().map_err(|e| err(format!("bad count '{v}': {e}")));
    let one = |v: Vec<String>, key: &str| v.into_iter().next().ok_or_else(|| err(format!("'{key}' has no value")));

    let delta = num(&one(header("delta")?, "delta")?)?;
    let nx = int(&one(header("nx")?, "nx")?)?;
    let ny = int(&one(header("ny")?, "ny")?)?;
    let origin = header("origin")?;
    if origin.len() != 2 {
        return Err(err("origin needs two coordinates".into()));
    }
    let origin = Point::new(num(&origin[0])?, num(&origin[1])?);
    let cells = int(&one(header("cells")?, "cells")?)?;
    let hash = one(header("hash")?, "hash")?;

    let mut read_block = |name: &str| -> Result<Vec<i32>> {
        match lines.next() {
            Some(l) if l == name => {}
            other => return Err(err(format!("expected block '{name}', found {other:?}"))),
        }
        let mut out = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let line = lines.next().ok_or_else(|| err(format!("block '{name}' ends at row {i}")))?;
            let row: Vec<i32> = line
                .split_whitespace()
                .map(|v| v.parse::<i32>().map_err(|e| err(format!("bad integer '{v}': {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != ny {
                return Err(err(format!("block '{name}' row {i} has {} values, expected {ny}", row.len())));
            }
            out.extend(row);
        }
        Ok(out)
    };
    let mask = read_block("mask")?;
    let normal_x = read_block("normal_x")?;
    let normal_y = read_block("normal_y")?;
    if mask.iter().any(|&v| v != 0 && v != 1) {
        return Err(err("mask entries must be 0 or 1".into()));
    }
    let grid = RasterGrid::from_mask(delta, nx, ny, origin, mask.iter().map(|&v| v == 1).collect())?;
    if grid.n_cells() != cells {
        return Err(Error::Inconsistent(format!("grid file declares {cells} cells, mask has {}", grid.n_cells())));
    }
    for k in 0..nx * ny {
        let n = grid.normal(k);
        if (n.x as i32, n.y as i32) != (normal_x[k], normal_y[k]) {
            let (i, j) = grid.ij(k);
            return Err(Error::Inconsistent(format!("grid file normal at ({i}, {j}) disagrees with its mask")));
        }
    }
    if grid.hash() != hash {
        return Err(Error::GridMismatch { expected: hash, found: grid.hash().to_string() });
    }
    Ok(grid)
}

pub fn save_grid(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid_to_text(grid)).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    grid_from_text(&text)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::rasterize_mask;

    #[test]
    fn text_round_trip() {
        let a = Point::new(3.5, -1.25);
        let b = Point::new(9.0, 4.0);
        let g = rasterize_mask(&[a, b], &[(a, b)], 0.7, 1.5).unwrap();
        let text = grid_to_text(&g);
        let back = grid_from_text(&text).unwrap();
        assert_eq!(back, g);
        assert!(text.starts_with("swingpde-grid 1\ndelta 0.7\n"));
    }

    #[test]
    fn tampered_mask_is_detected() {
        let g = RasterGrid::rectangle(3, 3, 1.0, Point::new(0.0, 0.0)).unwrap();
        let text = grid_to_text(&g).replacen("mask\n1 1 1", "mask\n0 1 1", 1);
        assert!(grid_from_text(&text).is_err());
    }
}

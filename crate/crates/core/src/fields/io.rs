//! Field file format.
//!
//! ```text
//! swingpde-field 1
//! grid <sha256 hex of the grid>
//! quantity m
//! nx 3
//! ny 2
//! 1.5 nan
//! ...
//! ```
//! `nx` rows of `ny` values (9 significant digits), cells outside the mask
//! written as `nan`. Optional `# ...` comment lines are ignored.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::{Field, FieldSet, Quantity};
use crate::format::sig9;
use crate::grid::RasterGrid;
use crate::{Error, Result};

const MAGIC: &str = "swingpde-field 1";

pub fn field_to_text(field: &Field) -> String {
    field_to_text_with_comment(field, None)
}

pub fn field_to_text_with_comment(field: &Field, comment: Option<&str>) -> String {
    let g = field.grid();
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    if let Some(c) = comment {
        writeln!(s, "# {c}").unwrap();
    }
    writeln!(s, "grid {}", g.hash()).unwrap();
    writeln!(s, "quantity {}", field.quantity().tag()).unwrap();
    writeln!(s, "nx {}", g.nx()).unwrap();
    writeln!(s, "ny {}", g.ny()).unwrap();
    for i in 0..g.nx() {
        let row: Vec<String> = (0..g.ny())
            .map(|j| match g.cell_of(g.k(i, j)) {
                Some(c) => sig9(field.values()[c]),
                None => "nan".into(),
            })
            .collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}

/// Parses a field file against `grid`, rejecting a hash mismatch.
pub fn field_from_text(text: &str, grid: Arc<RasterGrid>) -> Result<Field> {
    let err = |m: String| Error::parse("field file", m);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(MAGIC) {
        return Err(err(format!("missing '{MAGIC}' header")));
    }
    let mut header = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| err(format!("missing '{key}' line")))?;
        match line.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(err(format!("expected '{key}', found '{line}'"))),
        }
    };
    let hash = header("grid")?;
    if hash != grid.hash() {
        return Err(Error::GridMismatch { expected: grid.hash().to_string(), found: hash });
    }
    let quantity = Quantity::from_tag(&header("quantity")?)?;
    let nx: usize = header("nx")?.parse().map_err(|e| err(format!("bad nx: {e}")))?;
    let ny: usize = header("ny")?.parse().map_err(|e| err(format!("bad ny: {e}")))?;
    if (nx, ny) != (grid.nx(), grid.ny()) {
        return Err(Error::Inconsistent(format!("field is {nx}x{ny}, grid is {}x{}", grid.nx(), grid.ny())));
    }
    let mut values = vec![0.0; grid.n_cells()];
    for i in 0..nx {
        let line = lines.next().ok_or_else(|| err(format!("field ends at row {i}")))?;
        let row: Vec<&str> = line.split_whitespace().collect();
        if row.len() != ny {
            return Err(err(format!("row {i} has {} values, expected {ny}", row.len())));
        }
        for (j, v) in row.into_iter().enumerate() {
            let v: f64 = v.parse().map_err(|e| err(format!("bad value '{v}' at ({i}, {j}): {e}")))?;
            match grid.cell_of(grid.k(i, j)) {
                Some(c) if v.is_finite() => values[c] = v,
                Some(_) => return Err(err(format!("masked cell ({i}, {j}) holds a non-finite value"))),
                None if v.is_nan() => {}
                None => return Err(err(format!("unmasked cell ({i}, {j}) must be nan"))),
            }
        }
    }
    if lines.next().is_some() {
        return Err(err("trailing data after the last row".into()));
    }
    Field::new(grid, quantity, values)
}

pub fn save_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, field_to_text(field)).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: impl AsRef<Path>, grid: Arc<RasterGrid>) -> Result<Field> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    field_from_text(&text, grid)
}

/// Writes `<dir>/<tag>.field` for the five coefficients.
pub fn save_fieldset(set: &FieldSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in set.fields() {
        save_field(f, dir.join(format!("{}.field", f.quantity().tag())))?;
    }
    Ok(())
}

pub fn load_fieldset(dir: impl AsRef<Path>, grid: Arc<RasterGrid>) -> Result<FieldSet> {
    let dir = dir.as_ref();
    let load = |q: Quantity| -> Result<Field> {
        let f = load_field(dir.join(format!("{}.field", q.tag())), grid.clone())?;
        if f.quantity() != q {
            return Err(Error::Inconsistent(format!("{}.field holds quantity {}", q.tag(), f.quantity())));
        }
        Ok(f)
    };
    FieldSet::new(load(Quantity::M)?, load(Quantity::D)?, load(Quantity::P)?, load(Quantity::Bx)?, load(Quantity::By)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn blob() -> Arc<RasterGrid> {
        let mut mask = vec![true; 12];
        mask[0] = false;
        mask[11] = false;
        Arc::new(RasterGrid::from_mask(1.0, 4, 3, Point::new(0.0, 0.0), mask).unwrap())
    }

    #[test]
    fn round_trip_with_nan_exterior() {
        let g = blob();
        let values: Vec<f64> = (0..g.n_cells()).map(|c| (c as f64 + 0.5).sqrt() * 1e-3).collect();
        let f = Field::new(g.clone(), Quantity::D, values).unwrap();
        let text = field_to_text(&f);
        assert!(text.lines().nth(5).unwrap().starts_with("nan "));
        let back = field_from_text(&text, g).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 5e-9 * b.abs());
        }
        // Re-serializing parsed values is byte-identical.
        assert_eq!(field_to_text(&back), text);
    }

    #[test]
    fn hash_mismatch_is_rejected() {
        let g = blob();
        let other = Arc::new(RasterGrid::rectangle(4, 3, 1.0, Point::new(0.0, 0.0)).unwrap());
        let text = field_to_text(&Field::zeros(g, Quantity::M));
        assert!(matches!(field_from_text(&text, other), Err(Error::GridMismatch { .. })));
    }
}

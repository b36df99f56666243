use super::{Field, FieldSet, Quantity};
use crate::geometry::Polygon;
use crate::{Error, Result};

pub const DAMPING_FLOOR_RATIO: f64 = 1e-3;
pub const INERTIA_FLOOR_RATIO: f64 = 1e-3;

/// Lower bound applied after filtering: 0 for inertia and susceptances,
/// `1e-3·mean(d)` for damping, none for signed quantities.
pub fn floor_for(field: &Field) -> Option<f64> {
    match field.quantity() {
        Quantity::M | Quantity::Bx | Quantity::By | Quantity::B | Quantity::WaveSpeed => Some(0.0),
        Quantity::D => Some(DAMPING_FLOOR_RATIO * field.mean()),
        _ => None,
    }
}

/// Restores `Σ values = total`.
///
/// With a floor `f` the excess over the floor is rescaled
/// (`f + (u − f)·s`), keeping every value at or above `f`; without one a
/// uniform shift is added.
pub fn renormalize_total(values: &mut [f64], total: f64, floor: Option<f64>) {
    let n = values.len() as f64;
    let current: f64 = values.iter().sum();
    match floor {
        Some(f) => {
            let excess = current - n * f;
            let wanted = total - n * f;
            if excess > 0.0 && wanted >= 0.0 {
                let s = wanted / excess;
                for v in values.iter_mut() {
                    *v = f + (*v - f) * s;
                }
            }
        }
        None => {
            let shift = (total - current) / n;
            for v in values.iter_mut() {
                *v += shift;
            }
        }
    }
}

/// Multiplies the values of cells whose centres lie inside `region`.
pub fn region_scale(field: &Field, region: &Polygon, factor: f64) -> Result<Field> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(format!("region scale factor = {factor} must be positive")));
    }
    let g = field.grid();
    let values = g
        .cells()
        .iter()
        .zip(field.values())
        .map(|(&k, &v)| if region.contains(g.center(k)) { v * factor } else { v })
        .collect();
    field.with_values(values)
}

/// Cell-wise mean `(b_x + b_y)/2` and the anisotropy
/// `max |b_x − b_y|/(b_x + b_y)` over cells with positive sum.
pub fn isotropy_reduce(b_x: &Field, b_y: &Field) -> Result<(Field, f64)> {
    b_x.same_grid(b_y)?;
    let mut anisotropy: f64 = 0.0;
    let values = b_x
        .values()
        .iter()
        .zip(b_y.values())
        .map(|(&x, &y)| {
            if x + y > 0.0 {
                anisotropy = anisotropy.max((x - y).abs() / (x + y));
            }
            0.5 * (x + y)
        })
        .collect();
    Ok((Field::new(b_x.grid().clone(), Quantity::B, values)?, anisotropy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalizeOptions {
    pub inertia_floor_ratio: f64,
    pub damping_floor_ratio: f64,
    /// Optional positive floor for b_x, b_y relative to their mean.
    pub susceptance_floor_ratio: Option<f64>,
    /// Replace b_x and b_y by their cell-wise mean.
    pub isotropic: bool,
}

impl Default for FinalizeOptions {
    fn default() -> Self {
        FinalizeOptions {
            inertia_floor_ratio: INERTIA_FLOOR_RATIO,
            damping_floor_ratio: DAMPING_FLOOR_RATIO,
            susceptance_floor_ratio: None,
            isotropic: false,
        }
    }
}

/// Applies the strictly positive floors required by the time integrator
/// (preserving each total) and optionally the isotropy reduction.
pub fn finalize(set: &FieldSet, opts: &FinalizeOptions) -> Result<FieldSet> {
    // Small negative ripples are removed by the floors below; only
    // non-finite values are rejected up front.
    for f in set.fields() {
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("field {} holds non-finite values", f.quantity())));
        }
    }
    let floored = |f: &Field, ratio: f64| -> Result<Field> {
        let mean = f.mean();
        if mean <= 0.0 {
            return Err(Error::invalid(format!("field {} has nonpositive mean {mean}", f.quantity())));
        }
        let floor = ratio * mean;
        let mut values: Vec<f64> = f.values().iter().map(|v| v.max(floor)).collect();
        renormalize_total(&mut values, f.total(), Some(floor));
        f.with_values(values)
    };
    let m = floored(&set.m, opts.inertia_floor_ratio)?;
    let d = floored(&set.d, opts.damping_floor_ratio)?;
    let (mut b_x, mut b_y) = (set.b_x.clone(), set.b_y.clone());
    if opts.isotropic {
        let (b, _) = isotropy_reduce(&b_x, &b_y)?;
        b_x = b.clone().with_quantity(Quantity::Bx);
        b_y = b.with_quantity(Quantity::By);
    }
    if let Some(ratio) = opts.susceptance_floor_ratio {
        b_x = floored(&b_x, ratio)?;
        b_y = floored(&b_y, ratio)?;
    } else {
        for f in [&mut b_x, &mut b_y] {
            let values = f.values().iter().map(|v| v.max(0.0)).collect();
            *f = f.with_values(values)?;
        }
    }
    let out = FieldSet::new(m, d, set.p.clone(), b_x, b_y)?;
    out.validate(true)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::Point;
    use crate::grid::RasterGrid;

    fn grid() -> Arc<RasterGrid> {
        Arc::new(RasterGrid::rectangle(4, 4, 1.0, Point::new(0.0, 0.0)).unwrap())
    }

    #[test]
    fn region_scale_cases() {
        let g = grid();
        let f = Field::new(g.clone(), Quantity::Bx, (0..16).map(|c| c as f64 + 1.0).collect()).unwrap();
        let all = Polygon::rectangle(-1.0, -1.0, 10.0, 10.0).unwrap();
        assert_eq!(region_scale(&f, &all, 1.0).unwrap(), f);
        let doubled = region_scale(&f, &all, 2.0).unwrap();
        assert!(doubled.values().iter().zip(f.values()).all(|(a, b)| *a == 2.0 * b));
        let half = Polygon::rectangle(-1.0, -1.0, 1.5, 10.0).unwrap();
        let out = region_scale(&f, &half, 3.0).unwrap();
        for c in 0..16 {
            let x = g.center(g.k_of(c)).x;
            assert_eq!(out.values()[c], if x < 1.5 { 3.0 } else { 1.0 } * f.values()[c]);
        }
        assert!(region_scale(&f, &all, 0.0).is_err());
    }

    #[test]
    fn isotropy_cases() {
        let g = grid();
        let a = Field::constant(g.clone(), Quantity::Bx, 2.0);
        let (b, an) = isotropy_reduce(&a, &a.clone().with_quantity(Quantity::By)).unwrap();
        assert_eq!(an, 0.0);
        assert!(b.values().iter().all(|&v| v == 2.0));
        let (b, an) = isotropy_reduce(&a, &Field::zeros(g, Quantity::By)).unwrap();
        assert_eq!(an, 1.0);
        assert!(b.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn finalize_floors_preserve_totals() {
        let g = grid();
        let mut m: Vec<f64> = vec![0.0; 16];
        m[3] = 8.0;
        let set = FieldSet::new(
            Field::new(g.clone(), Quantity::M, m).unwrap(),
            Field::constant(g.clone(), Quantity::D, 0.5),
            Field::zeros(g.clone(), Quantity::P),
            Field::constant(g.clone(), Quantity::Bx, 1.0),
            Field::constant(g, Quantity::By, 3.0),
        )
        .unwrap();
        let out = finalize(&set, &FinalizeOptions { isotropic: true, ..Default::default() }).unwrap();
        assert!(out.m.min() >= 1e-3 * 0.5 - 1e-15);
        assert!((out.m.total() - 8.0).abs() < 1e-12);
        assert_eq!(out.d, set.d);
        assert!(out.b_x.values().iter().all(|&v| v == 2.0));
    }
}

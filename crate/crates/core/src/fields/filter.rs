//! Spectral low-pass filtering of fields.

use std::collections::VecDeque;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::ops::{floor_for, renormalize_total};
use super::{Field, FieldSet};
use crate::exec::Execution;
use crate::{Error, Result};

/// How the bounding rectangle outside the mask is filled before the
/// transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillMode {
    /// Nearest-masked-cell fill, then even reflection to twice the size so
    /// the periodic transform sees no jump at the rectangle edges.
    #[default]
    Mirror,
    /// Zeros outside the mask, no reflection.
    Zero,
}

/// Low-passes a rectangular array (row `i` of `ny` values at `i·ny`).
///
/// Coefficients with `max(|k_x|/k_x^max, |k_y|/k_y^max) > cutoff` are
/// zeroed, where `|k|` is the folded frequency index and `k^max = ⌊N/2⌋`.
pub fn filter_rectangle(values: &[f64], nx: usize, ny: usize, cutoff: f64) -> Vec<f64> {
    assert_eq!(values.len(), nx * ny, "rectangle size");
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    fft2(&mut planner, &mut data, nx, ny, false);
    let ratio = |a: usize, n: usize| {
        let kmax = n / 2;
        if kmax == 0 {
            0.0
        } else {
            a.min(n - a) as f64 / kmax as f64
        }
    };
    for a in 0..nx {
        let rx = ratio(a, nx);
        for b in 0..ny {
            if rx.max(ratio(b, ny)) > cutoff {
                data[a * ny + b] = Complex64::new(0.0, 0.0);
            }
        }
    }
    fft2(&mut planner, &mut data, nx, ny, true);
    let scale = 1.0 / (nx * ny) as f64;
    data.iter().map(|c| c.re * scale).collect()
}

fn fft2(planner: &mut FftPlanner<f64>, data: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let row = if inverse { planner.plan_fft_inverse(ny) } else { planner.plan_fft_forward(ny) };
    for chunk in data.chunks_exact_mut(ny) {
        row.process(chunk);
    }
    let col = if inverse { planner.plan_fft_inverse(nx) } else { planner.plan_fft_forward(nx) };
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for i in 0..nx {
            buf[i] = data[i * ny + j];
        }
        col.process(&mut buf);
        for i in 0..nx {
            data[i * ny + j] = buf[i];
        }
    }
}

/// Embeds a field in the bounding rectangle of its mask.
///
/// Returns the array, its dimensions and the `(i, j)` of the rectangle's
/// first cell in the grid.
pub fn extend_rectangle(field: &Field, fill: FillMode) -> (Vec<f64>, usize, usize, (usize, usize)) {
    let g = field.grid();
    let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
    for &k in g.cells() {
        let (i, j) = g.ij(k);
        i0 = i0.min(i);
        i1 = i1.max(i);
        j0 = j0.min(j);
        j1 = j1.max(j);
    }
    let (w, h) = (i1 - i0 + 1, j1 - j0 + 1);
    let mut rect = vec![0.0; w * h];
    let mut known = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (c, &k) in g.cells().iter().enumerate() {
        let (i, j) = g.ij(k);
        let r = (i - i0) * h + (j - j0);
        rect[r] = field.values()[c];
        known[r] = true;
        queue.push_back(r);
    }
    if fill == FillMode::Zero {
        return (rect, w, h, (i0, j0));
    }
    while let Some(r) = queue.pop_front() {
        let (a, b) = (r / h, r % h);
        let near = [
            (a > 0).then(|| r - h),
            (a + 1 < w).then(|| r + h),
            (b > 0).then(|| r - 1),
            (b + 1 < h).then(|| r + 1),
        ];
        for n in near.into_iter().flatten() {
            if !known[n] {
                known[n] = true;
                rect[n] = rect[r];
                queue.push_back(n);
            }
        }
    }
    let (ew, eh) = (2 * w, 2 * h);
    let mut ext = vec![0.0; ew * eh];
    for a in 0..ew {
        let sa = if a < w { a } else { ew - 1 - a };
        for b in 0..eh {
            let sb = if b < h { b } else { eh - 1 - b };
            ext[a * eh + b] = rect[sa * h + sb];
        }
    }
    (ext, ew, eh, (i0, j0))
}

/// Low-pass filter of a field restricted back to its mask, with the
/// quantity's floor applied and the masked total restored.
pub fn fourier_lowpass(field: &Field, cutoff: f64, fill: FillMode) -> Result<Field> {
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(Error::invalid(format!("cutoff = {cutoff} must lie in (0, 1]")));
    }
    if cutoff >= 1.0 {
        // Every coefficient is kept, so the transform pair is the identity.
        // Returning early also skips the renormalization, whose rescale
        // factor can be off 1 by an ulp.
        return Ok(field.clone());
    }
    let floor = floor_for(field);
    let total = field.total();
    let (ext, ew, eh, (i0, j0)) = extend_rectangle(field, fill);
    let filtered = filter_rectangle(&ext, ew, eh, cutoff);
    let g = field.grid();
    let mut values: Vec<f64> = g
        .cells()
        .iter()
        .map(|&k| {
            let (i, j) = g.ij(k);
            filtered[(i - i0) * eh + (j - j0)]
        })
        .collect();
    if let Some(f) = floor {
        for v in &mut values {
            *v = v.max(f);
        }
    }
    renormalize_total(&mut values, total, floor);
    field.with_values(values)
}

/// Filters all five coefficient fields.
pub fn lowpass_fieldset(set: &FieldSet, cutoff: f64, fill: FillMode, exec: Execution) -> Result<FieldSet> {
    let fields = set.fields();
    let out = exec.map(&fields, |f| fourier_lowpass(f, cutoff, fill));
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;
    FieldSet::from_array(out.try_into().expect("five fields"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fields::Quantity;
    use crate::geometry::Point;
    use crate::grid::RasterGrid;

    fn noisy(n: usize) -> Vec<f64> {
        (0..n).map(|c| ((c * 7919) % 101) as f64 / 10.0 + 1.0).collect()
    }

    #[test]
    fn unit_cutoff_is_identity() {
        let v = noisy(35);
        let out = filter_rectangle(&v, 7, 5, 1.0);
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).abs() < 1e-10);
        }
        let g = Arc::new(RasterGrid::rectangle(7, 5, 1.0, Point::new(0.0, 0.0)).unwrap());
        let f = Field::new(g, Quantity::M, v).unwrap();
        assert_eq!(fourier_lowpass(&f, 1.0, FillMode::Mirror).unwrap(), f);
    }

    #[test]
    fn rectangle_filter_is_a_projection() {
        let v = noisy(16 * 12);
        let once = filter_rectangle(&v, 16, 12, 0.3);
        let twice = filter_rectangle(&once, 16, 12, 0.3);
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn masked_total_preserved_and_floored() {
        let mut mask = vec![true; 100];
        for k in [0, 1, 10, 55, 99, 98] {
            mask[k] = false;
        }
        let g = Arc::new(RasterGrid::from_mask(1.0, 10, 10, Point::new(0.0, 0.0), mask).unwrap());
        let values: Vec<f64> = (0..g.n_cells()).map(|c| if c % 13 == 0 { 20.0 } else { 0.0 }).collect();
        for q in [Quantity::M, Quantity::D, Quantity::P] {
            let f = Field::new(g.clone(), q, values.clone()).unwrap();
            for fill in [FillMode::Mirror, FillMode::Zero] {
                let out = fourier_lowpass(&f, 0.3, fill).unwrap();
                assert!((out.total() - f.total()).abs() <= 1e-12 * f.total().abs());
                if q != Quantity::P {
                    assert!(out.min() >= 0.0);
                }
            }
        }
        assert!(fourier_lowpass(&Field::zeros(g, Quantity::M), 0.0, FillMode::Mirror).is_err());
    }

    #[test]
    fn mirror_extension_is_even() {
        let g = Arc::new(RasterGrid::rectangle(3, 2, 1.0, Point::new(0.0, 0.0)).unwrap());
        let f = Field::new(g, Quantity::M, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (ext, w, h, _) = extend_rectangle(&f, FillMode::Mirror);
        assert_eq!((w, h), (6, 4));
        assert_eq!(&ext[0..4], &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(&ext[20..24], &[1.0, 2.0, 2.0, 1.0]);
    }
}

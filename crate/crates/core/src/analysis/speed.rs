use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::fields::{Field, FieldSet, Quantity};
use crate::{Error, Result};

/// Cell-wise `c = √(b/m)` with the cell-centred `b = (b_x + b_y)/2`.
pub fn wave_speed_map(fields: &FieldSet) -> Result<Field> {
    let b = fields.b_center();
    let values = b
        .values()
        .iter()
        .zip(fields.m.values())
        .map(|(&b, &m)| {
            if m > 0.0 {
                Ok((b / m).sqrt())
            } else {
                Err(Error::invalid("wave speed needs strictly positive inertia; finalize the fields first"))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Field::new(fields.grid().clone(), Quantity::WaveSpeed, values)
}

/// How a single representative speed is formed for a homogeneous medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpeedAverage {
    /// Mean of the cell-wise speeds.
    #[default]
    MeanOfSpeed,
    /// `√(mean b / mean m)`.
    SpeedOfMeans,
}

pub fn average_wave_speed(fields: &FieldSet, how: SpeedAverage) -> Result<f64> {
    Ok(match how {
        SpeedAverage::MeanOfSpeed => wave_speed_map(fields)?.mean(),
        SpeedAverage::SpeedOfMeans => (fields.b_center().mean() / fields.m.mean()).sqrt(),
    })
}

#[derive(Debug, PartialEq)]
struct Entry {
    time: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest travel time from the cell `source` (full index `k`) over the
/// 8-connected masked lattice; a move costs its length (`Δ` or `√2Δ`)
/// divided by the mean speed of its two cells.
pub fn front_arrival(c: &Field, source: usize) -> Result<Field> {
    let g = c.grid();
    let start = g
        .cell_of(source)
        .ok_or_else(|| Error::invalid(format!("front source k = {source} is not a masked cell")))?;
    if let Some(bad) = c.values().iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        let (i, j) = g.ij(g.k_of(bad));
        return Err(Error::invalid(format!("wave speed must be positive, found {} at ({i}, {j})", c.values()[bad])));
    }
    let speed = c.values();
    let n = g.n_cells();
    let mut time = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    time[start] = 0.0;
    let mut heap = BinaryHeap::from([Entry { time: 0.0, cell: start }]);
    let straight = g.delta();
    let diagonal = std::f64::consts::SQRT_2 * g.delta();
    while let Some(Entry { time: t, cell }) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        let (i, j) = g.ij(g.k_of(cell));
        let (i, j) = (i as isize, j as isize);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if (di, dj) == (0, 0) || !g.is_masked(i + di, j + dj) {
                    continue;
                }
                let nb = g.cell_of(g.k((i + di) as usize, (j + dj) as usize)).expect("masked");
                let length = if di != 0 && dj != 0 { diagonal } else { straight };
                let cand = t + length / (0.5 * (speed[cell] + speed[nb]));
                if cand < time[nb] {
                    time[nb] = cand;
                    heap.push(Entry { time: cand, cell: nb });
                }
            }
        }
    }
    Field::new(g.clone(), Quantity::Arrival, time)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::Point;
    use crate::grid::RasterGrid;

    fn set(grid: &Arc<RasterGrid>, b: f64, m: f64) -> FieldSet {
        FieldSet::new(
            Field::constant(grid.clone(), Quantity::M, m),
            Field::constant(grid.clone(), Quantity::D, 1.0),
            Field::zeros(grid.clone(), Quantity::P),
            Field::constant(grid.clone(), Quantity::Bx, b),
            Field::constant(grid.clone(), Quantity::By, b),
        )
        .unwrap()
    }

    #[test]
    fn speed_formula() {
        let g = Arc::new(RasterGrid::rectangle(3, 3, 1.0, Point::new(0.0, 0.0)).unwrap());
        let c = wave_speed_map(&set(&g, 4.0, 1.0)).unwrap();
        assert!(c.values().iter().all(|&v| v == 2.0));
        let c2 = wave_speed_map(&set(&g, 8.0, 1.0)).unwrap();
        assert!(c2.values().iter().all(|&v| (v - 2.0 * 2f64.sqrt()).abs() < 1e-15));
        assert_eq!(average_wave_speed(&set(&g, 4.0, 1.0), SpeedAverage::SpeedOfMeans).unwrap(), 2.0);
    }

    #[test]
    fn homogeneous_front_is_near_euclidean() {
        let g = Arc::new(RasterGrid::rectangle(31, 31, 2.0, Point::new(0.0, 0.0)).unwrap());
        let c = Field::constant(g.clone(), Quantity::WaveSpeed, 3.0);
        let src = g.k(15, 15);
        let t = front_arrival(&c, src).unwrap();
        for cell in 0..g.n_cells() {
            let k = g.k_of(cell);
            let r = g.center(k).distance(g.center(src));
            if k == src {
                assert_eq!(t.values()[cell], 0.0);
            } else {
                assert!(t.values()[cell] > 0.0);
                assert!((t.values()[cell] - r / 3.0).abs() <= 0.1 * r / 3.0);
            }
        }
        assert!(front_arrival(&c, 31 * 31).is_err());
    }
}

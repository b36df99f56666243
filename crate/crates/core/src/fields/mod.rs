//! Continuum coefficient fields on a [`RasterGrid`].
//!
//! Values are per-cell totals (the integral of the density over the cell),
//! so sums over cells equal the corresponding network sums.

mod deposit;
mod diffusion;
mod filter;
mod io;
mod ops;

use std::sync::Arc;

use crate::grid::RasterGrid;
use crate::{Error, Result};

pub use deposit::{deposit_lines, deposit_nodal, deposit_all, segment_faces, FaceCrossing};
pub use diffusion::{
    artificial_diffusion, diffuse_fieldset, diffusion_step, neumann_laplacian, smoothness, DiffusionMode,
    DiffusionOutcome, FixedSteps, RelativeChange, StopCriterion, DEFAULT_KAPPA, DEFAULT_MAX_ITERATIONS,
    DEFAULT_SMOOTHNESS_TOL,
};
pub use filter::{extend_rectangle, filter_rectangle, fourier_lowpass, lowpass_fieldset, FillMode};
pub use io::{field_from_text, field_to_text, field_to_text_with_comment, load_field, load_fieldset, save_field, save_fieldset};
pub use ops::{
    floor_for, finalize, isotropy_reduce, region_scale, renormalize_total, FinalizeOptions, DAMPING_FLOOR_RATIO,
    INERTIA_FLOOR_RATIO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    M,
    D,
    P,
    Bx,
    By,
    /// Isotropic susceptance.
    B,
    Theta,
    Omega,
    WaveSpeed,
    Arrival,
}

impl Quantity {
    pub const COEFFICIENTS: [Quantity; 5] = [Quantity::M, Quantity::D, Quantity::P, Quantity::Bx, Quantity::By];

    pub fn tag(self) -> &'static str {
        match self {
            Quantity::M => "m",
            Quantity::D => "d",
            Quantity::P => "p",
            Quantity::Bx => "b_x",
            Quantity::By => "b_y",
            Quantity::B => "b",
            Quantity::Theta => "theta",
            Quantity::Omega => "omega",
            Quantity::WaveSpeed => "c",
            Quantity::Arrival => "arrival",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "m" => Quantity::M,
            "d" => Quantity::D,
            "p" => Quantity::P,
            "b_x" => Quantity::Bx,
            "b_y" => Quantity::By,
            "b" => Quantity::B,
            "theta" => Quantity::Theta,
            "omega" => Quantity::Omega,
            "c" => Quantity::WaveSpeed,
            "arrival" => Quantity::Arrival,
            other => return Err(Error::parse("field quantity", format!("unknown quantity '{other}'"))),
        })
    }

    /// Quantities that must stay nonnegative.
    pub fn is_nonnegative(self) -> bool {
        matches!(self, Quantity::M | Quantity::D | Quantity::Bx | Quantity::By | Quantity::B | Quantity::WaveSpeed)
    }
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// One scalar per masked cell, in compressed-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<RasterGrid>,
    quantity: Quantity,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<RasterGrid>, quantity: Quantity, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::invalid(format!(
                "field {quantity} has {} values for {} masked cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(Field { grid, quantity, values })
    }

    pub fn zeros(grid: Arc<RasterGrid>, quantity: Quantity) -> Self {
        let n = grid.n_cells();
        Field { grid, quantity, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<RasterGrid>, quantity: Quantity, value: f64) -> Self {
        let n = grid.n_cells();
        Field { grid, quantity, values: vec![value; n] }
    }

    pub fn grid(&self) -> &Arc<RasterGrid> {
        &self.grid
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Field::new(self.grid.clone(), self.quantity, values)
    }

    pub fn with_quantity(mut self, quantity: Quantity) -> Self {
        self.quantity = quantity;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks the value at every cell is finite (and nonnegative where the
    /// quantity demands it).
    pub fn validate(&self) -> Result<()> {
        for (c, &v) in self.values.iter().enumerate() {
            let (i, j) = self.grid.ij(self.grid.k_of(c));
            if !v.is_finite() {
                return Err(Error::invalid(format!("field {} is non-finite at cell ({i}, {j})", self.quantity)));
            }
            if self.quantity.is_nonnegative() && v < 0.0 {
                return Err(Error::invalid(format!("field {} is negative ({v}) at cell ({i}, {j})", self.quantity)));
            }
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.hash() != other.grid.hash() {
            return Err(Error::GridMismatch { expected: self.grid.hash().into(), found: other.grid.hash().into() });
        }
        Ok(())
    }
}

/// The five coefficient fields of the continuum model on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub m: Field,
    pub d: Field,
    pub p: Field,
    pub b_x: Field,
    pub b_y: Field,
}

impl FieldSet {
    pub fn new(m: Field, d: Field, p: Field, b_x: Field, b_y: Field) -> Result<Self> {
        for f in [&d, &p, &b_x, &b_y] {
            m.same_grid(f)?;
        }
        let set = FieldSet {
            m: m.with_quantity(Quantity::M),
            d: d.with_quantity(Quantity::D),
            p: p.with_quantity(Quantity::P),
            b_x: b_x.with_quantity(Quantity::Bx),
            b_y: b_y.with_quantity(Quantity::By),
        };
        Ok(set)
    }

    /// Builds a set from fields in [`Quantity::COEFFICIENTS`] order.
    pub fn from_array(fields: [Field; 5]) -> Result<Self> {
        let [m, d, p, b_x, b_y] = fields;
        FieldSet::new(m, d, p, b_x, b_y)
    }

    pub fn into_array(self) -> [Field; 5] {
        [self.m, self.d, self.p, self.b_x, self.b_y]
    }

    pub fn grid(&self) -> &Arc<RasterGrid> {
        self.m.grid()
    }

    pub fn get(&self, q: Quantity) -> Option<&Field> {
        match q {
            Quantity::M => Some(&self.m),
            Quantity::D => Some(&self.d),
            Quantity::P => Some(&self.p),
            Quantity::Bx => Some(&self.b_x),
            Quantity::By => Some(&self.b_y),
            _ => None,
        }
    }

    pub fn fields(&self) -> [&Field; 5] {
        [&self.m, &self.d, &self.p, &self.b_x, &self.b_y]
    }

    /// Cell-centred isotropic susceptance `(b_x + b_y)/2`.
    pub fn b_center(&self) -> Field {
        let values = self.b_x.values().iter().zip(self.b_y.values()).map(|(x, y)| 0.5 * (x + y)).collect();
        Field::new(self.grid().clone(), Quantity::B, values).expect("same grid")
    }

    /// Validates finiteness, nonnegativity and, when `finalized`, that m and
    /// d are strictly positive.
    pub fn validate(&self, finalized: bool) -> Result<()> {
        for f in self.fields() {
            f.validate()?;
        }
        if finalized {
            for f in [&self.m, &self.d] {
                if f.min() <= 0.0 {
                    return Err(Error::invalid(format!("field {} has a nonpositive cell; finalize the fields first", f.quantity())));
                }
            }
        }
        Ok(())
    }
}

use std::collections::BTreeMap;

use crate::grid::RasterGrid;
use crate::network::{BusId, PowerNetwork};
use crate::{Error, Result};

/// Nearest masked cell of every bus.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCellMap {
    grid_hash: String,
    bus_ids: Vec<BusId>,
    cells: Vec<usize>,
    distances: Vec<f64>,
    index: BTreeMap<BusId, usize>,
}

impl NodeCellMap {
    pub fn new(net: &PowerNetwork, grid: &RasterGrid) -> Self {
        let mut bus_ids = Vec::with_capacity(net.len());
        let mut cells = Vec::with_capacity(net.len());
        let mut distances = Vec::with_capacity(net.len());
        let mut index = BTreeMap::new();
        for (pos, bus) in net.buses().iter().enumerate() {
            let (c, d) = grid.nearest_cell(bus.position());
            bus_ids.push(bus.id);
            cells.push(c);
            distances.push(d);
            index.insert(bus.id, pos);
        }
        NodeCellMap { grid_hash: grid.hash().to_string(), bus_ids, cells, distances, index }
    }

    pub fn check_grid(&self, grid: &RasterGrid) -> Result<()> {
        if grid.hash() != self.grid_hash {
            return Err(Error::GridMismatch { expected: self.grid_hash.clone(), found: grid.hash().to_string() });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn bus_ids(&self) -> &[BusId] {
        &self.bus_ids
    }

    /// Compressed cell index per bus, in network bus order.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Distance (km) from each bus to its cell centre.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn cell_of_bus(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).map(|&pos| self.cells[pos])
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

//! Discrete power-network model: buses, branches, fault scenarios.

mod generate;
mod io;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::{Error, Result};

pub use generate::{generate_lattice_network, generate_synthetic_continental, ContinentalConfig, Heterogeneity, InjectionPattern, LatticeConfig};
pub use io::{load_network, parse_network, save_network, to_json};

pub type BusId = u64;

/// Relative tolerance on `|Σp| / Σ|p|` for a network to count as balanced.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// A network node. Loads carry `m = 0`; generators `m > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: BusId,
    /// Planar position in km.
    pub x: f64,
    pub y: f64,
    /// Inertia (p.u. s²).
    pub m: f64,
    /// Damping (p.u. s).
    pub d: f64,
    /// Active power injection (p.u.).
    pub p: f64,
    /// Voltage magnitude (p.u.).
    pub v: f64,
}

impl Bus {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_generator(&self) -> bool {
        self.m > 0.0
    }
}

/// A lossless line with raw susceptance `b` and folded coupling `v_i v_j b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub b: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    pub units: String,
}

/// Immutable, validated network.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    pub meta: Meta,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    index: BTreeMap<BusId, usize>,
}

impl PowerNetwork {
    /// Validates every invariant and folds voltage magnitudes into the
    /// branch couplings. `branches` are `(from, to, raw b)`.
    pub fn new(meta: Meta, buses: Vec<Bus>, branches: Vec<(BusId, BusId, f64)>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::Validation("network has no buses".into()));
        }
        let mut index = BTreeMap::new();
        for (pos, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, pos).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", bus.id)));
            }
            let finite = [bus.x, bus.y, bus.m, bus.d, bus.p, bus.v].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Validation(format!("bus {}: non-finite field", bus.id)));
            }
            if bus.m < 0.0 {
                return Err(Error::Validation(format!("bus {}: negative inertia m = {}", bus.id, bus.m)));
            }
            if bus.d <= 0.0 {
                return Err(Error::Validation(format!("bus {}: nonpositive damping d = {}", bus.id, bus.d)));
            }
            if bus.v <= 0.0 {
                return Err(Error::Validation(format!("bus {}: nonpositive voltage v = {}", bus.id, bus.v)));
            }
        }

        let mut seen = HashSet::new();
        let mut folded = Vec::with_capacity(branches.len());
        for (from, to, b) in branches {
            if from == to {
                return Err(Error::Validation(format!("branch {from}-{to}: self loop")));
            }
            let (Some(&i), Some(&j)) = (index.get(&from), index.get(&to)) else {
                return Err(Error::Validation(format!("branch {from}-{to}: unknown endpoint")));
            };
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Validation(format!("branch {from}-{to}: nonpositive susceptance b = {b}")));
            }
            if !seen.insert((from.min(to), from.max(to))) {
                return Err(Error::Validation(format!("branch {from}-{to}: duplicate branch")));
            }
            folded.push(Branch { from, to, b, coupling: buses[i].v * buses[j].v * b });
        }

        let net = PowerNetwork { meta, buses, branches: folded, index };
        let sizes = net.component_sizes();
        if sizes.len() > 1 {
            return Err(Error::Disconnected { components: sizes.len(), sizes });
        }
        let imbalance = net.total_injection();
        let scale: f64 = net.buses.iter().map(|b| b.p.abs()).sum();
        if imbalance.abs() > BALANCE_TOLERANCE * scale.max(1e-300) && imbalance != 0.0 {
            return Err(Error::Unbalanced { imbalance });
        }
        Ok(net)
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    /// Position of bus `id` in [`Self::buses`].
    pub fn position_of(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.position_of(id).map(|i| &self.buses[i])
    }

    /// Index of the bus with the lowest id (the angle reference).
    pub fn reference_index(&self) -> usize {
        *self.index.values().next().expect("nonempty")
    }

    pub fn total_injection(&self) -> f64 {
        self.buses.iter().map(|b| b.p).sum()
    }

    pub fn total_damping(&self) -> f64 {
        self.buses.iter().map(|b| b.d).sum()
    }

    pub fn total_inertia(&self) -> f64 {
        self.buses.iter().map(|b| b.m).sum()
    }

    /// Edges as `(index_i, index_j, coupling)`.
    pub fn coupling_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.branches.iter().map(|br| (self.index[&br.from], self.index[&br.to], br.coupling))
    }

    /// Sizes of the connected components of the branch graph, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.buses.len();
        let mut uf = petgraph::unionfind::UnionFind::<usize>::new(n);
        for (i, j, _) in self.coupling_edges() {
            uf.union(i, j);
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..n {
            *counts.entry(uf.find(i)).or_default() += 1;
        }
        let mut sizes: Vec<usize> = counts.into_values().collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// Where a fault is applied: a bus of the discrete network or a cell
/// (full-rectangle index `k`) of the continuum grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultTarget {
    Bus(BusId),
    Cell(usize),
}

/// A step change `delta_p` of injection at `target`, switched on at `t_on`
/// and optionally reversed at `t_off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultScenario {
    pub target: FaultTarget,
    pub delta_p: f64,
    #[serde(default)]
    pub t_on: f64,
    #[serde(default)]
    pub t_off: Option<f64>,
}

impl FaultScenario {
    pub fn permanent(target: FaultTarget, delta_p: f64, t_on: f64) -> Self {
        FaultScenario { target, delta_p, t_on, t_off: None }
    }

    pub fn none(target: FaultTarget) -> Self {
        FaultScenario::permanent(target, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_on.is_finite() && self.t_on >= 0.0) {
            return Err(Error::invalid(format!("fault t_on = {} must be >= 0", self.t_on)));
        }
        if !self.delta_p.is_finite() {
            return Err(Error::invalid("fault delta_p must be finite"));
        }
        if let Some(off) = self.t_off {
            if !(off > self.t_on) {
                return Err(Error::invalid(format!("fault t_off = {off} must exceed t_on = {}", self.t_on)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: BusId, p: f64, d: f64) -> Bus {
        Bus { id, x: id as f64, y: 0.0, m: 1.0, d, p, v: 1.0 }
    }

    #[test]
    fn folds_voltage_into_coupling() {
        let mut b1 = bus(1, 1.0, 0.1);
        b1.v = 1.1;
        let mut b2 = bus(2, -1.0, 0.1);
        b2.v = 0.9;
        let net = PowerNetwork::new(Meta::default(), vec![b1, b2], vec![(1, 2, 2.0)]).unwrap();
        let br = &net.branches()[0];
        assert_eq!(br.b, 2.0);
        assert!((br.coupling - 1.1 * 0.9 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_invariant_violations() {
        let err = PowerNetwork::new(Meta::default(), vec![bus(1, 0.0, 0.1), bus(2, 0.0, 0.0)], vec![(1, 2, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("bus 2"), "{err}");

        let err = PowerNetwork::new(Meta::default(), vec![bus(1, 0.0, 0.1), bus(2, 0.0, 0.1)], vec![(1, 2, 1.0), (2, 1, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let buses = vec![bus(1, 0.0, 0.1), bus(2, 0.0, 0.1), bus(3, 0.0, 0.1)];
        let err = PowerNetwork::new(Meta::default(), buses, vec![(1, 2, 1.0)]).unwrap_err();
        match err {
            Error::Disconnected { components, sizes } => {
                assert_eq!(components, 2);
                assert_eq!(sizes, vec![2, 1]);
            }
            other => panic!("unexpected {other}"),
        }

        let err = PowerNetwork::new(Meta::default(), vec![bus(1, 1.0, 0.1), bus(2, 0.0, 0.1)], vec![(1, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Unbalanced { .. }));

        let err = PowerNetwork::new(Meta::default(), vec![bus(1, 0.0, 0.1), bus(2, 0.0, 0.1)], vec![(1, 1, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("self loop"));
    }

    #[test]
    fn fault_validation() {
        let t = FaultTarget::Bus(1);
        assert!(FaultScenario::permanent(t, -1.0, 0.0).validate().is_ok());
        assert!(FaultScenario::permanent(t, -1.0, -1.0).validate().is_err());
        let f = FaultScenario { target: t, delta_p: 1.0, t_on: 2.0, t_off: Some(2.0) };
        assert!(f.validate().is_err());
    }
}

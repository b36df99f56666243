//! Synthetic network generators.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bus, BusId, Meta, PowerNetwork};
use crate::geometry::{Point, Polygon};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionPattern {
    /// `+P` at the first corner bus, `-P` at the opposite one.
    BalancedDipole,
    Zero,
}

#[derive(Debug, Clone)]
pub struct LatticeConfig {
    pub nx: usize,
    pub ny: usize,
    pub b: f64,
    pub m: f64,
    pub d: f64,
    /// Bus spacing in km.
    pub spacing: f64,
    pub injection: InjectionPattern,
    /// Dipole strength `P` (p.u.).
    pub dipole_power: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { nx: 10, ny: 10, b: 1.0, m: 1.0, d: 0.1, spacing: 50.0, injection: InjectionPattern::Zero, dipole_power: 1.0 }
    }
}

/// Rectangular lattice with nearest-neighbour branches.
///
/// The bus at lattice position `(i, j)` (x index `i`, y index `j`) sits at
/// `(i·spacing, j·spacing)` and has id `i·ny + j + 1`.
pub fn generate_lattice_network(cfg: &LatticeConfig) -> Result<PowerNetwork> {
    let LatticeConfig { nx, ny, b, m, d, spacing, injection, dipole_power } = *cfg;
    if nx == 0 || ny == 0 || nx * ny < 2 {
        return Err(Error::invalid(format!("lattice {nx}x{ny} needs at least two buses")));
    }
    if !(b > 0.0 && d > 0.0 && m >= 0.0 && spacing > 0.0) {
        return Err(Error::invalid("lattice requires b > 0, d > 0, m >= 0, spacing > 0"));
    }
    let id = |i: usize, j: usize| (i * ny + j + 1) as BusId;
    let mut buses = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            buses.push(Bus { id: id(i, j), x: i as f64 * spacing, y: j as f64 * spacing, m, d, p: 0.0, v: 1.0 });
        }
    }
    if injection == InjectionPattern::BalancedDipole {
        buses[0].p = dipole_power;
        buses[nx * ny - 1].p = -dipole_power;
    }
    let mut branches = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            if i + 1 < nx {
                branches.push((id(i, j), id(i + 1, j), b));
            }
            if j + 1 < ny {
                branches.push((id(i, j), id(i, j + 1), b));
            }
        }
    }
    let meta = Meta { name: format!("lattice-{nx}x{ny}"), units: "km, p.u.".into() };
    PowerNetwork::new(meta, buses, branches)
}

/// Relative spread of each drawn parameter: a value is
/// `base · (1 + h·u)` with `u` uniform in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Heterogeneity {
    pub inertia: f64,
    pub damping: f64,
    pub susceptance: f64,
    pub injection: f64,
}

impl Heterogeneity {
    pub fn uniform(h: f64) -> Self {
        Heterogeneity { inertia: h, damping: h, susceptance: h, injection: h }
    }
}

#[derive(Debug, Clone)]
pub struct ContinentalConfig {
    pub seed: u64,
    pub n_buses: usize,
    pub region: Polygon,
    pub heterogeneity: Heterogeneity,
    /// Fraction of buses that are generators (`m > 0`).
    pub generator_fraction: f64,
    /// Mean generator inertia (p.u. s²).
    pub inertia: f64,
    /// Mean bus damping (p.u. s).
    pub damping: f64,
    /// Susceptance of a line of `reference_length` km; scales as 1/length.
    pub susceptance: f64,
    pub reference_length: f64,
    /// Mean load (p.u., drawn as a negative injection).
    pub load: f64,
    /// Target branch count as a multiple of the bus count.
    pub branch_ratio: f64,
}

impl Default for ContinentalConfig {
    fn default() -> Self {
        ContinentalConfig {
            seed: 0,
            n_buses: 3800,
            region: Polygon::europe_like(),
            heterogeneity: Heterogeneity::uniform(0.5),
            generator_fraction: 618.0 / 3809.0,
            inertia: 0.3,
            damping: 0.05,
            susceptance: 50.0,
            reference_length: 30.0,
            load: 1.0,
            branch_ratio: 1.3,
        }
    }
}

fn spread(rng: &mut ChaCha8Rng, h: f64) -> f64 {
    if h == 0.0 {
        1.0
    } else {
        (1.0 + h * rng.gen_range(-1.0..=1.0)).max(0.05)
    }
}

/// Seeded planar network inside `cfg.region`.
///
/// Buses are placed uniformly in the polygon; the edge set is the Euclidean
/// minimum spanning tree of the Delaunay triangulation plus the shortest
/// remaining Delaunay edges up to `branch_ratio · n_buses` branches, so the
/// graph is connected and planar. Injections are balanced exactly.
pub fn generate_synthetic_continental(cfg: &ContinentalConfig) -> Result<PowerNetwork> {
    if cfg.n_buses < 10 {
        return Err(Error::invalid(format!("n_buses = {} must be >= 10", cfg.n_buses)));
    }
    if cfg.region.vertices.len() < 3 || cfg.region.area().abs() < 1e-12 {
        return Err(Error::invalid("region polygon is degenerate"));
    }
    if !(cfg.damping > 0.0 && cfg.inertia >= 0.0 && cfg.susceptance > 0.0 && cfg.reference_length > 0.0) {
        return Err(Error::invalid("continental generator requires damping > 0, inertia >= 0, susceptance > 0"));
    }
    if !(0.0..=1.0).contains(&cfg.generator_fraction) {
        return Err(Error::invalid("generator_fraction must lie in [0, 1]"));
    }
    let h = cfg.heterogeneity;
    for v in [h.inertia, h.damping, h.susceptance, h.injection] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::invalid("heterogeneity factors must lie in [0, 1)"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.region.bounding_box();
    let mut points: Vec<Point> = Vec::with_capacity(cfg.n_buses);
    let mut occupied = HashSet::new();
    while points.len() < cfg.n_buses {
        let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        // Keep points distinct at 1 m resolution for the triangulation.
        if cfg.region.contains(p) && occupied.insert(((p.x * 1e3) as i64, (p.y * 1e3) as i64)) {
            points.push(p);
        }
    }

    let dpoints: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p.x, y: p.y }).collect();
    let tri = delaunator::triangulate(&dpoints);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut seen = HashSet::new();
    for t in tri.triangles.chunks_exact(3) {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                edges.push(key);
            }
        }
    }
    edges.sort_by(|&(a, b), &(c, d)| {
        let l1 = points[a].distance(points[b]);
        let l2 = points[c].distance(points[d]);
        l1.total_cmp(&l2).then((a, b).cmp(&(c, d)))
    });
    let target = ((cfg.branch_ratio * cfg.n_buses as f64).round() as usize).max(cfg.n_buses - 1);
    let mut uf = petgraph::unionfind::UnionFind::<usize>::new(cfg.n_buses);
    let mut chosen = vec![false; edges.len()];
    let mut count = 0;
    for (e, &(a, b)) in edges.iter().enumerate() {
        if uf.union(a, b) {
            chosen[e] = true;
            count += 1;
        }
    }
    for flag in chosen.iter_mut() {
        if count >= target {
            break;
        }
        if !*flag {
            *flag = true;
            count += 1;
        }
    }

    let n_gen = ((cfg.generator_fraction * cfg.n_buses as f64).round() as usize).max(1);
    let mut order: Vec<usize> = (0..cfg.n_buses).collect();
    for i in 0..n_gen {
        let j = rng.gen_range(i..cfg.n_buses);
        order.swap(i, j);
    }
    let mut is_gen = vec![false; cfg.n_buses];
    for &g in &order[..n_gen] {
        is_gen[g] = true;
    }

    let mut buses = Vec::with_capacity(cfg.n_buses);
    let mut gen_weight = vec![0.0; cfg.n_buses];
    let mut total_load = 0.0;
    for (i, p) in points.iter().enumerate() {
        let m = if is_gen[i] { cfg.inertia * spread(&mut rng, h.inertia) } else { 0.0 };
        let d = cfg.damping * spread(&mut rng, h.damping);
        let inj = if is_gen[i] {
            gen_weight[i] = spread(&mut rng, h.injection);
            0.0
        } else {
            let load = -cfg.load * spread(&mut rng, h.injection);
            total_load += load;
            load
        };
        buses.push(Bus { id: i as BusId + 1, x: p.x, y: p.y, m, d, p: inj, v: 1.0 });
    }
    let weight_sum: f64 = gen_weight.iter().sum();
    for (bus, w) in buses.iter_mut().zip(&gen_weight) {
        if *w > 0.0 {
            bus.p = -total_load * w / weight_sum;
        }
    }
    // Absorb the rounding residual in the largest generator.
    let residual: f64 = buses.iter().map(|b| b.p).sum();
    if let Some(big) = buses.iter_mut().filter(|b| b.m > 0.0).max_by(|a, b| a.p.total_cmp(&b.p)) {
        big.p -= residual;
    }

    let mut branches = Vec::with_capacity(count);
    for (e, &(a, b)) in edges.iter().enumerate() {
        if chosen[e] {
            let len = points[a].distance(points[b]).max(1e-3);
            let sus = cfg.susceptance * (cfg.reference_length / len) * spread(&mut rng, h.susceptance);
            branches.push((a as BusId + 1, b as BusId + 1, sus));
        }
    }
    let meta = Meta { name: format!("synthetic-continental-seed{}-n{}", cfg.seed, cfg.n_buses), units: "km, p.u.".into() };
    PowerNetwork::new(meta, buses, branches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(nx: usize, ny: usize, injection: InjectionPattern) -> PowerNetwork {
        generate_lattice_network(&LatticeConfig { nx, ny, b: 1.0, m: 1.0, d: 0.1, spacing: 50.0, injection, dipole_power: 1.0 }).unwrap()
    }

    #[test]
    fn lattice_counts() {
        let net = lattice(2, 2, InjectionPattern::Zero);
        assert_eq!(net.len(), 4);
        assert_eq!(net.branches().len(), 4);
        assert!(net.buses().iter().all(|b| b.p == 0.0));

        let path = lattice(3, 1, InjectionPattern::Zero);
        assert_eq!(path.branches().len(), 2);

        let dip = lattice(10, 10, InjectionPattern::BalancedDipole);
        assert_eq!(dip.total_injection(), 0.0);
        assert_eq!(dip.buses().iter().filter(|b| b.p != 0.0).count(), 2);
    }

    #[test]
    fn lattice_rejects_bad_counts() {
        assert!(generate_lattice_network(&LatticeConfig { nx: 1, ny: 1, ..Default::default() }).is_err());
        assert!(generate_lattice_network(&LatticeConfig { nx: 0, ny: 4, ..Default::default() }).is_err());
        assert!(generate_lattice_network(&LatticeConfig { d: 0.0, ..Default::default() }).is_err());
    }

    fn small(seed: u64) -> ContinentalConfig {
        ContinentalConfig { seed, n_buses: 200, ..Default::default() }
    }

    #[test]
    fn continental_is_deterministic() {
        let a = generate_synthetic_continental(&small(7)).unwrap();
        let b = generate_synthetic_continental(&small(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_continental(&small(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn continental_branch_ratio_and_balance() {
        let net = generate_synthetic_continental(&small(3)).unwrap();
        assert_eq!(net.branches().len(), 260);
        assert!(net.total_injection().abs() < 1e-9);
        let region = Polygon::europe_like();
        assert!(net.buses().iter().all(|b| region.contains(b.position())));
    }

    #[test]
    fn zero_heterogeneity_gives_equal_parameters() {
        let cfg = ContinentalConfig { heterogeneity: Heterogeneity::default(), generator_fraction: 1.0, ..small(1) };
        let net = generate_synthetic_continental(&cfg).unwrap();
        let m0 = net.buses()[0].m;
        let d0 = net.buses()[0].d;
        assert!(net.buses().iter().all(|b| b.m == m0 && b.d == d0));

        let cfg = ContinentalConfig { heterogeneity: Heterogeneity::default(), ..small(1) };
        let net = generate_synthetic_continental(&cfg).unwrap();
        assert!(net.buses().iter().filter(|b| b.is_generator()).all(|b| b.m == cfg.inertia));
        assert!(net.buses().iter().all(|b| b.d == cfg.damping));
    }

    #[test]
    fn continental_rejects_tiny() {
        assert!(generate_synthetic_continental(&ContinentalConfig { n_buses: 5, ..Default::default() }).is_err());
    }
}

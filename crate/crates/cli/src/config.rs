//! TOML run configuration. Every command-line flag has a counterpart here;
//! flags win over the file.
//!
//! ```toml
//! [paths]
//! output_dir = "run"
//! network = "run/network.json"
//!
//! [grid]
//! delta = 41.0
//! dilation = 60.0
//!
//! [simulation]
//! dt = 0.02
//! t_end = 30.0
//! probes = [1, 318, 635]
//!
//! [[scenarios]]
//! name = "trip-7"
//! bus = 7
//! delta_p = -1.0
//! t_on = 1.0
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use swing_continuum::network::{FaultScenario, FaultTarget};
use swing_continuum::screening::NamedScenario;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub generate: Generate,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub diffusion: Diffusion,
    #[serde(default)]
    pub filter: Filter,
    #[serde(default)]
    pub finalize: Finalize,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub screen: Screen,
    #[serde(default)]
    pub compare: Compare,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub output_dir: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub fields: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub lattice: Option<String>,
    pub continental: Option<bool>,
    pub seed: Option<u64>,
    pub buses: Option<usize>,
    pub heterogeneity: Option<f64>,
    pub spacing: Option<f64>,
    pub b: Option<f64>,
    pub m: Option<f64>,
    pub d: Option<f64>,
    pub dipole: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub delta: Option<f64>,
    pub dilation: Option<f64>,
    /// `dilation` or `bounding-box`.
    pub rule: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diffusion {
    pub kappa: Option<f64>,
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub steps: Option<usize>,
    /// `shared` or `per-quantity`.
    pub mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub cutoff: Option<f64>,
    /// `mirror` or `zero`.
    pub fill: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finalize {
    pub inertia_floor: Option<f64>,
    pub damping_floor: Option<f64>,
    pub susceptance_floor: Option<f64>,
    pub isotropic: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub stride: Option<usize>,
    /// `auto`, `direct` or `iterative`.
    pub solver: Option<String>,
    pub probes: Option<Vec<u64>>,
    pub probe_cells: Option<Vec<usize>>,
    pub snapshots: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    pub strategy: Option<String>,
    pub workers: Option<usize>,
    pub sequential: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compare {
    /// `steady`, `dynamics` or `both`.
    pub mode: Option<String>,
    pub outlier_factor: Option<f64>,
    pub arrival_threshold: Option<f64>,
    pub bin_width: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub bus: Option<u64>,
    pub cell: Option<usize>,
    pub delta_p: f64,
    #[serde(default)]
    pub t_on: f64,
    pub t_off: Option<f64>,
}

impl ScenarioConfig {
    pub fn to_named(&self, index: usize) -> Result<NamedScenario> {
        let target = match (self.bus, self.cell) {
            (Some(b), None) => FaultTarget::Bus(b),
            (None, Some(c)) => FaultTarget::Cell(c),
            _ => bail!("scenario {} must set exactly one of `bus` or `cell`", index + 1),
        };
        let name = self.name.clone().unwrap_or_else(|| format!("scenario-{}", index + 1));
        let scenario = FaultScenario { target, delta_p: self.delta_p, t_on: self.t_on, t_off: self.t_off };
        scenario.validate().with_context(|| format!("scenario '{name}'"))?;
        Ok(NamedScenario { name, scenario })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Parses `bus:ID:DELTA_P[:T_ON[:T_OFF]]` or `cell:K:...`.
pub fn parse_fault(spec: &str, index: usize) -> Result<NamedScenario> {
    let parts: Vec<&str> = spec.split(':').collect();
    if !(3..=5).contains(&parts.len()) {
        bail!("fault '{spec}' is not TARGET:ID:DELTA_P[:T_ON[:T_OFF]]");
    }
    let number = |s: &str| s.parse::<f64>().with_context(|| format!("fault '{spec}': bad number '{s}'"));
    let id: u64 = parts[1].parse().with_context(|| format!("fault '{spec}': bad id '{}'", parts[1]))?;
    let cfg = ScenarioConfig {
        name: Some(format!("fault-{}", index + 1)),
        bus: (parts[0] == "bus").then_some(id),
        cell: (parts[0] == "cell").then_some(id as usize),
        delta_p: number(parts[2])?,
        t_on: parts.get(3).map(|s| number(s)).transpose()?.unwrap_or(0.0),
        t_off: parts.get(4).map(|s| number(s)).transpose()?,
    };
    if cfg.bus.is_none() && cfg.cell.is_none() {
        bail!("fault '{spec}': target must be `bus` or `cell`");
    }
    cfg.to_named(index)
}

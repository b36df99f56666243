use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use swing_continuum::analysis::{
    average_wave_speed, compare_dynamics, compare_steady, front_arrival, wave_speed_map, DynamicsOptions, NodeCellMap,
    SpeedAverage, DEFAULT_ARRIVAL_FRACTION, DEFAULT_OUTLIER_FACTOR,
};
use swing_continuum::fields::{
    deposit_all, diffuse_fieldset, finalize, fourier_lowpass, load_field, load_fieldset, lowpass_fieldset, region_scale,
    save_field, save_fieldset, DiffusionMode, FieldSet, FillMode, FinalizeOptions, FixedSteps, RelativeChange,
    StopCriterion, DAMPING_FLOOR_RATIO, DEFAULT_KAPPA, DEFAULT_MAX_ITERATIONS, DEFAULT_SMOOTHNESS_TOL,
    INERTIA_FLOOR_RATIO,
};
use swing_continuum::format::sig9;
use swing_continuum::geometry::Polygon;
use swing_continuum::grid::{build_grid, load_grid, save_grid, GridSpec, DEFAULT_DELTA_KM};
use swing_continuum::linalg::SolverChoice;
use swing_continuum::network::{
    generate_lattice_network, generate_synthetic_continental, load_network, save_network, ContinentalConfig,
    FaultScenario, FaultTarget, Heterogeneity, InjectionPattern, LatticeConfig, PowerNetwork,
};
use swing_continuum::ode::{ode_steady_state, simulate_swing_events, SimulationParams};
use swing_continuum::pde::{bus_probes, cell_probes, pde_steady_state, ContinuumModel};
use swing_continuum::screening::{screen, NamedScenario, ScreeningConfig, Strategy};
use swing_continuum::{Execution, RasterGrid, Trajectory};

use crate::config::{parse_fault, RunConfig};
use crate::{
    Cli, Command, CompareArgs, DepositArgs, DiffuseArgs, FieldArgs, FilterArgs, FinalizeArgs, FrontArgs, GenArgs,
    GridBuildArgs, OdeSteadyArgs, RegionScaleArgs, SimArgs,
};

pub const OUTPUT_DIR_ENV: &str = "SWINGPDE_OUTPUT_DIR";

const NETWORK_FILE: &str = "network.json";
const GRID_FILE: &str = "grid.txt";
const RAW_DIR: &str = "fields_raw";
const SMOOTH_DIR: &str = "fields_smooth";
const FILTERED_DIR: &str = "fields_filtered";
/// Default probe count when none are requested.
const DEFAULT_PROBES: usize = 16;
const DEFAULT_DT: f64 = 0.01;
const DEFAULT_T_END: f64 = 10.0;

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli
        .output_dir
        .clone()
        .or_else(|| cfg.paths.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;
    let ctx = Ctx { cfg, out };
    match cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::OdeSteady(a) => ode_steady(&ctx, a),
        Command::OdeSim(a) => ode_sim(&ctx, a),
        Command::GridBuild(a) => grid_build(&ctx, a),
        Command::Deposit(a) => deposit(&ctx, a),
        Command::Diffuse(a) => diffuse(&ctx, a),
        Command::Filter(a) => filter(&ctx, a),
        Command::RegionScale(a) => region(&ctx, a),
        Command::PdeSteady(a) => pde_steady(&ctx, a),
        Command::PdeSim(a) => pde_sim(&ctx, a),
        Command::Speedmap(a) => speedmap(&ctx, a),
        Command::Front(a) => front(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Screen(a) => screen_cmd(&ctx, a),
    }
}

impl Ctx {
    fn default_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn network_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone().or_else(|| self.cfg.paths.network.clone()).unwrap_or_else(|| self.default_path(NETWORK_FILE))
    }

    fn network(&self, flag: &Option<PathBuf>) -> Result<PowerNetwork> {
        let path = self.network_path(flag);
        load_network(&path).with_context(|| format!("loading network {}", path.display()))
    }

    /// The network when given explicitly, or when the default file exists.
    fn optional_network(&self, flag: &Option<PathBuf>) -> Result<Option<PowerNetwork>> {
        let explicit = flag.is_some() || self.cfg.paths.network.is_some();
        if explicit || self.network_path(flag).exists() {
            self.network(flag).map(Some)
        } else {
            Ok(None)
        }
    }

    fn grid(&self, flag: &Option<PathBuf>) -> Result<Arc<RasterGrid>> {
        let path = flag.clone().or_else(|| self.cfg.paths.grid.clone()).unwrap_or_else(|| self.default_path(GRID_FILE));
        let grid = load_grid(&path).with_context(|| format!("loading grid {}", path.display()))?;
        Ok(Arc::new(grid))
    }

    /// Explicit directory, else the most processed stage present.
    fn fields_dir(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        if let Some(p) = flag.clone().or_else(|| self.cfg.paths.fields.clone()) {
            return Ok(p);
        }
        [FILTERED_DIR, SMOOTH_DIR, RAW_DIR]
            .iter()
            .map(|d| self.default_path(d))
            .find(|p| p.is_dir())
            .ok_or_else(|| anyhow!("no field directory found in {} (run `deposit` first)", self.out.display()))
    }

    fn fields(&self, flag: &Option<PathBuf>, grid: Arc<RasterGrid>) -> Result<FieldSet> {
        let dir = self.fields_dir(flag)?;
        info!("reading fields from {}", dir.display());
        load_fieldset(&dir, grid).with_context(|| format!("loading fields from {}", dir.display()))
    }

    fn finalized(&self, grid_flag: &Option<PathBuf>, fields_flag: &Option<PathBuf>, f: &FinalizeArgs) -> Result<FieldSet> {
        let grid = self.grid(grid_flag)?;
        let raw = self.fields(fields_flag, grid)?;
        let c = &self.cfg.finalize;
        let opts = FinalizeOptions {
            inertia_floor_ratio: f.inertia_floor.or(c.inertia_floor).unwrap_or(INERTIA_FLOOR_RATIO),
            damping_floor_ratio: f.damping_floor.or(c.damping_floor).unwrap_or(DAMPING_FLOOR_RATIO),
            susceptance_floor_ratio: f.susceptance_floor.or(c.susceptance_floor),
            isotropic: f.isotropic || c.isotropic.unwrap_or(false),
        };
        Ok(finalize(&raw, &opts)?)
    }

    fn execution(&self, sequential: bool) -> Execution {
        if sequential || self.cfg.screen.sequential.unwrap_or(false) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// Config scenarios followed by `--fault` flags.
    fn scenarios(&self, faults: &[String]) -> Result<Vec<NamedScenario>> {
        let mut all = Vec::new();
        for (i, s) in self.cfg.scenarios.iter().enumerate() {
            all.push(s.to_named(i)?);
        }
        let base = all.len();
        for (i, f) in faults.iter().enumerate() {
            all.push(parse_fault(f, base + i)?);
        }
        Ok(all)
    }

    fn sim_params(&self, a: &SimArgs) -> (f64, f64, usize) {
        let s = &self.cfg.simulation;
        (
            a.dt.or(s.dt).unwrap_or(DEFAULT_DT),
            a.t_end.or(s.t_end).unwrap_or(DEFAULT_T_END),
            a.stride.or(s.stride).unwrap_or(1),
        )
    }

    fn solver(&self, a: &SimArgs) -> Result<SolverChoice> {
        match a.solver.as_deref().or(self.cfg.simulation.solver.as_deref()).unwrap_or("auto") {
            "auto" => Ok(SolverChoice::Auto),
            "direct" => Ok(SolverChoice::Direct),
            "iterative" => Ok(SolverChoice::Iterative),
            other => bail!("unknown solver '{other}' (auto, direct, iterative)"),
        }
    }

    fn probe_ids(&self, a: &SimArgs) -> Vec<u64> {
        if a.probes.is_empty() {
            self.cfg.simulation.probes.clone().unwrap_or_default()
        } else {
            a.probes.clone()
        }
    }

    fn probe_cells(&self, a: &SimArgs) -> Vec<usize> {
        if a.probe_cells.is_empty() {
            self.cfg.simulation.probe_cells.clone().unwrap_or_default()
        } else {
            a.probe_cells.clone()
        }
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Fault buses first, then evenly spaced buses, without duplicates.
fn default_bus_probes(net: &PowerNetwork, scenarios: &[NamedScenario]) -> Vec<u64> {
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    let faults = scenarios.iter().filter_map(|s| match s.scenario.target {
        FaultTarget::Bus(b) => Some(b),
        FaultTarget::Cell(_) => None,
    });
    let n = net.len();
    let step = n.div_ceil(DEFAULT_PROBES).max(1);
    let spaced = (0..n).step_by(step).map(|i| net.buses()[i].id);
    for id in faults.chain(spaced) {
        if seen.insert(id) {
            ids.push(id);
        }
    }
    ids
}

fn gen(ctx: &Ctx, a: GenArgs) -> Result<()> {
    let c = &ctx.cfg.generate;
    let lattice = a.lattice.clone().or_else(|| c.lattice.clone());
    let continental = a.continental || c.continental.unwrap_or(false);
    let net = match (lattice, continental) {
        (Some(_), true) => bail!("choose one of --lattice and --continental"),
        (Some(spec), false) => {
            let (nx, ny) = spec
                .split_once(['x', 'X'])
                .and_then(|(x, y)| Some((x.trim().parse::<usize>().ok()?, y.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| anyhow!("lattice size '{spec}' is not NXxNY"))?;
            let defaults = LatticeConfig::default();
            let dipole = a.dipole.or(c.dipole).unwrap_or(1.0);
            generate_lattice_network(&LatticeConfig {
                nx,
                ny,
                b: a.b.or(c.b).unwrap_or(defaults.b),
                m: a.m.or(c.m).unwrap_or(defaults.m),
                d: a.d.or(c.d).unwrap_or(defaults.d),
                spacing: a.spacing.or(c.spacing).unwrap_or(defaults.spacing),
                injection: if dipole == 0.0 { InjectionPattern::Zero } else { InjectionPattern::BalancedDipole },
                dipole_power: dipole,
            })?
        }
        (None, true) => {
            let defaults = ContinentalConfig::default();
            let h = a.heterogeneity.or(c.heterogeneity);
            generate_synthetic_continental(&ContinentalConfig {
                seed: a.seed.or(c.seed).unwrap_or(0),
                n_buses: a.buses.or(c.buses).unwrap_or(defaults.n_buses),
                heterogeneity: h.map(Heterogeneity::uniform).unwrap_or(defaults.heterogeneity),
                ..defaults
            })?
        }
        (None, false) => bail!("gen needs --lattice NXxNY or --continental"),
    };
    let path = a.out.unwrap_or_else(|| ctx.default_path(NETWORK_FILE));
    create_parent(&path)?;
    save_network(&net, &path)?;
    println!("network: {} buses, {} branches -> {}", net.len(), net.branches().len(), path.display());
    Ok(())
}

fn ode_steady(ctx: &Ctx, a: OdeSteadyArgs) -> Result<()> {
    let net = ctx.network(&a.network)?;
    let theta = ode_steady_state(&net)?;
    let mut s = String::from("bus,x,y,theta\n");
    for (b, t) in net.buses().iter().zip(&theta) {
        s.push_str(&format!("{},{},{},{}\n", b.id, sig9(b.x), sig9(b.y), sig9(*t)));
    }
    let path = a.out.unwrap_or_else(|| ctx.default_path("theta_ode.csv"));
    write_text(&path, &s)?;
    println!("ode steady state: {} buses -> {}", net.len(), path.display());
    Ok(())
}

fn read_theta_csv(path: &Path, net: &PowerNetwork) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let (ib, it) = match (cols.iter().position(|&c| c == "bus"), cols.iter().position(|&c| c == "theta")) {
        (Some(b), Some(t)) => (b, t),
        _ => bail!("{}: header must contain `bus` and `theta`", path.display()),
    };
    let mut by_bus = BTreeMap::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = || -> Option<(u64, f64)> { Some((f.get(ib)?.parse().ok()?, f.get(it)?.parse().ok()?)) };
        let (bus, theta) = parse().ok_or_else(|| anyhow!("{}: malformed line {}", path.display(), n + 2))?;
        by_bus.insert(bus, theta);
    }
    net.buses()
        .iter()
        .map(|b| by_bus.get(&b.id).copied().ok_or_else(|| anyhow!("{}: no angle for bus {}", path.display(), b.id)))
        .collect()
}

fn ode_sim(ctx: &Ctx, a: SimArgs) -> Result<()> {
    let net = ctx.network(&a.network)?;
    let named = ctx.scenarios(&a.faults)?;
    if named.is_empty() {
        bail!("no fault scenarios (use --fault or [[scenarios]])");
    }
    let (dt, t_end, stride) = ctx.sim_params(&a);
    let mut probes = ctx.probe_ids(&a);
    if probes.is_empty() {
        probes = default_bus_probes(&net, &named);
    }
    let scenarios: Vec<FaultScenario> = named.iter().map(|s| s.scenario).collect();
    let traj = simulate_swing_events(&net, &scenarios, &SimulationParams::new(dt, t_end).with_stride(stride), &probes)?;
    let path = a.out.unwrap_or_else(|| ctx.default_path("traj_ode.csv"));
    create_parent(&path)?;
    traj.save(&path)?;
    println!(
        "ode trajectory: {} samples, {} probes, terminal global frequency {} -> {}",
        traj.len(),
        traj.probes.len(),
        sig9(traj.terminal_global_omega().unwrap_or(0.0)),
        path.display()
    );
    Ok(())
}

fn grid_build(ctx: &Ctx, a: GridBuildArgs) -> Result<()> {
    let net = ctx.network(&a.network)?;
    let c = &ctx.cfg.grid;
    let delta = a.delta.or(c.delta).unwrap_or(DEFAULT_DELTA_KM);
    let spec = match a.rule.as_deref().or(c.rule.as_deref()).unwrap_or("dilation") {
        "dilation" => GridSpec::dilation(delta, a.dilation.or(c.dilation).unwrap_or(1.5 * delta)),
        "bounding-box" => GridSpec::bounding_box(delta),
        other => bail!("unknown mask rule '{other}' (dilation, bounding-box)"),
    };
    let grid = build_grid(&net, &spec)?;
    let path = a.out.unwrap_or_else(|| ctx.default_path(GRID_FILE));
    create_parent(&path)?;
    save_grid(&grid, &path)?;
    println!("grid: {}x{} cells, {} masked, hash {} -> {}", grid.nx(), grid.ny(), grid.n_cells(), grid.hash(), path.display());
    Ok(())
}

fn deposit(ctx: &Ctx, a: DepositArgs) -> Result<()> {
    let net = ctx.network(&a.network)?;
    let grid = ctx.grid(&a.grid)?;
    let set = deposit_all(&net, &grid)?;
    let dir = a.out.unwrap_or_else(|| ctx.default_path(RAW_DIR));
    save_fieldset(&set, &dir)?;
    println!("deposited {} buses onto {} cells -> {}", net.len(), grid.n_cells(), dir.display());
    Ok(())
}

fn diffuse(ctx: &Ctx, a: DiffuseArgs) -> Result<()> {
    let grid = ctx.grid(&a.grid)?;
    let dir = a.fields.clone().unwrap_or_else(|| ctx.default_path(RAW_DIR));
    let set = load_fieldset(&dir, grid).with_context(|| format!("loading fields from {}", dir.display()))?;
    let c = &ctx.cfg.diffusion;
    let kappa = a.kappa.or(c.kappa).unwrap_or(DEFAULT_KAPPA);
    let mode = match a.mode.as_deref().or(c.mode.as_deref()).unwrap_or("shared") {
        "shared" => DiffusionMode::Shared,
        "per-quantity" => DiffusionMode::PerQuantity,
        other => bail!("unknown diffusion mode '{other}' (shared, per-quantity)"),
    };
    let fixed;
    let relative;
    let stop: &dyn StopCriterion = match a.steps.or(c.steps) {
        Some(n) => {
            fixed = FixedSteps(n);
            &fixed
        }
        None => {
            relative = RelativeChange {
                tol: a.tol.or(c.tol).unwrap_or(DEFAULT_SMOOTHNESS_TOL),
                max_iterations: a.max_iterations.or(c.max_iterations).unwrap_or(DEFAULT_MAX_ITERATIONS),
            };
            &relative
        }
    };
    let (out_set, counts) = diffuse_fieldset(&set, kappa, stop, mode, ctx.execution(a.sequential))?;
    let out = a.out.unwrap_or_else(|| ctx.default_path(SMOOTH_DIR));
    save_fieldset(&out_set, &out)?;
    let tags = ["m", "d", "p", "b_x", "b_y"];
    let steps: Vec<String> = tags.iter().zip(counts).map(|(t, n)| format!("{t}={n}")).collect();
    println!("diffusion steps: {} -> {}", steps.join(" "), out.display());
    Ok(())
}

fn fill_mode(name: &str) -> Result<FillMode> {
    match name {
        "mirror" => Ok(FillMode::Mirror),
        "zero" => Ok(FillMode::Zero),
        other => bail!("unknown fill mode '{other}' (mirror, zero)"),
    }
}

fn filter(ctx: &Ctx, a: FilterArgs) -> Result<()> {
    let grid = ctx.grid(&a.grid)?;
    let c = &ctx.cfg.filter;
    let cutoff = a.cutoff.or(c.cutoff).ok_or_else(|| anyhow!("filter needs --cutoff"))?;
    let fill = fill_mode(a.fill.as_deref().or(c.fill.as_deref()).unwrap_or("mirror"))?;
    let input = a.input.clone().unwrap_or_else(|| ctx.default_path(SMOOTH_DIR));
    if input.is_dir() {
        let set = load_fieldset(&input, grid).with_context(|| format!("loading fields from {}", input.display()))?;
        let out_set = lowpass_fieldset(&set, cutoff, fill, ctx.execution(a.sequential))?;
        let out = a.out.unwrap_or_else(|| ctx.default_path(FILTERED_DIR));
        save_fieldset(&out_set, &out)?;
        println!("filtered field set (cutoff {}) -> {}", sig9(cutoff), out.display());
    } else {
        let field = load_field(&input, grid).with_context(|| format!("loading field {}", input.display()))?;
        let filtered = fourier_lowpass(&field, cutoff, fill)?;
        let out = a.out.unwrap_or_else(|| {
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
            ctx.default_path(&format!("{stem}_filtered.field"))
        });
        create_parent(&out)?;
        save_field(&filtered, &out)?;
        println!("filtered {} (cutoff {}) -> {}", field.quantity().tag(), sig9(cutoff), out.display());
    }
    Ok(())
}

fn region(ctx: &Ctx, a: RegionScaleArgs) -> Result<()> {
    let grid = ctx.grid(&a.grid)?;
    let field = load_field(&a.input, grid).with_context(|| format!("loading field {}", a.input.display()))?;
    let text = if Path::new(&a.region).is_file() {
        fs::read_to_string(&a.region).with_context(|| format!("reading region {}", a.region))?
    } else {
        a.region.clone()
    };
    let polygon = Polygon::parse(text.trim())?;
    let scaled = region_scale(&field, &polygon, a.factor)?;
    let out = a.out.unwrap_or_else(|| {
        let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
        ctx.default_path(&format!("{stem}_scaled.field"))
    });
    create_parent(&out)?;
    save_field(&scaled, &out)?;
    println!("scaled {} by {} inside the region -> {}", field.quantity().tag(), sig9(a.factor), out.display());
    Ok(())
}

fn pde_steady(ctx: &Ctx, a: FieldArgs) -> Result<()> {
    let set = ctx.finalized(&a.grid, &a.fields, &a.finalize)?;
    let theta = pde_steady_state(&set, set.grid())?;
    let out = a.out.unwrap_or_else(|| ctx.default_path("theta_pde.field"));
    create_parent(&out)?;
    save_field(&theta, &out)?;
    println!("pde steady state: {} cells -> {}", theta.len(), out.display());
    Ok(())
}

/// Probes for the continuum model: requested buses (mapped), requested
/// cells, or a default spread when neither is given.
fn continuum_probes(
    ctx: &Ctx,
    a: &SimArgs,
    grid: &RasterGrid,
    net: Option<&PowerNetwork>,
    map: Option<&NodeCellMap>,
    named: &[NamedScenario],
) -> Result<Vec<(u64, usize)>> {
    let ids = ctx.probe_ids(a);
    let cells = ctx.probe_cells(a);
    let mut probes = Vec::new();
    if !ids.is_empty() {
        let map = map.ok_or_else(|| anyhow!("bus probes need a network (--network)"))?;
        probes.extend(bus_probes(map, &ids)?);
    }
    probes.extend(cell_probes(grid, &cells)?);
    if probes.is_empty() {
        match (net, map) {
            (Some(net), Some(map)) => probes = bus_probes(map, &default_bus_probes(net, named))?,
            _ => {
                let n = grid.n_cells();
                let step = n.div_ceil(DEFAULT_PROBES).max(1);
                let ks: Vec<usize> = (0..n).step_by(step).map(|c| grid.k_of(c)).collect();
                probes = cell_probes(grid, &ks)?;
            }
        }
    }
    Ok(probes)
}

fn pde_sim(ctx: &Ctx, a: SimArgs) -> Result<()> {
    let set = ctx.finalized(&a.grid, &a.fields, &a.finalize)?;
    let grid = set.grid().clone();
    let net = ctx.optional_network(&a.network)?;
    let map = net.as_ref().map(|n| NodeCellMap::new(n, &grid));
    let named = ctx.scenarios(&a.faults)?;
    if named.is_empty() {
        bail!("no fault scenarios (use --fault or [[scenarios]])");
    }
    let (dt, t_end, stride) = ctx.sim_params(&a);
    let probes = continuum_probes(ctx, &a, &grid, net.as_ref(), map.as_ref(), &named)?;
    let model = ContinuumModel::new(set, dt, ctx.solver(&a)?)?;
    let scenarios: Vec<FaultScenario> = named.iter().map(|s| s.scenario).collect();
    let traj = model.run(&scenarios, map.as_ref(), t_end, stride, &probes)?;
    let path = a.out.clone().unwrap_or_else(|| ctx.default_path("traj_pde.csv"));
    create_parent(&path)?;
    traj.save(&path)?;
    println!(
        "pde trajectory: {} samples, {} probes, terminal global frequency {} -> {}",
        traj.len(),
        traj.probes.len(),
        sig9(traj.terminal_global_omega().unwrap_or(0.0)),
        path.display()
    );
    let times = if a.snapshots.is_empty() { ctx.cfg.simulation.snapshots.clone().unwrap_or_default() } else { a.snapshots.clone() };
    if !times.is_empty() {
        let dir = ctx.default_path("snapshots");
        for snap in model.snapshots(&scenarios, map.as_ref(), &times)? {
            snap.save(&dir)?;
        }
        println!("{} snapshots -> {}", times.len(), dir.display());
    }
    Ok(())
}

fn speedmap(ctx: &Ctx, a: FieldArgs) -> Result<()> {
    let set = ctx.finalized(&a.grid, &a.fields, &a.finalize)?;
    let c = wave_speed_map(&set)?;
    let out = a.out.unwrap_or_else(|| ctx.default_path("c.field"));
    create_parent(&out)?;
    save_field(&c, &out)?;
    println!(
        "wave speed: min {} max {} mean {} speed-of-means {} -> {}",
        sig9(c.min()),
        sig9(c.max()),
        sig9(average_wave_speed(&set, SpeedAverage::MeanOfSpeed)?),
        sig9(average_wave_speed(&set, SpeedAverage::SpeedOfMeans)?),
        out.display()
    );
    Ok(())
}

fn front(ctx: &Ctx, a: FrontArgs) -> Result<()> {
    let grid = ctx.grid(&a.grid)?;
    let speed_path = a.speed.clone().unwrap_or_else(|| ctx.default_path("c.field"));
    let c = load_field(&speed_path, grid.clone()).with_context(|| format!("loading wave speed {}", speed_path.display()))?;
    let source = match (a.source_cell, a.source_bus) {
        (Some(k), _) => k,
        (None, Some(bus)) => {
            let net = ctx.network(&a.network)?;
            let map = NodeCellMap::new(&net, &grid);
            let cell = map.cell_of_bus(bus).ok_or_else(|| anyhow!("bus {bus} is not in the network"))?;
            grid.k_of(cell)
        }
        (None, None) => bail!("front needs --source-cell or --source-bus"),
    };
    let arrival = front_arrival(&c, source)?;
    let out = a.out.unwrap_or_else(|| ctx.default_path("arrival.field"));
    create_parent(&out)?;
    save_field(&arrival, &out)?;
    println!("front arrival from k = {source}: latest {} s -> {}", sig9(arrival.max()), out.display());
    Ok(())
}

fn compare(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let c = &ctx.cfg.compare;
    let theta_ode = a.theta_ode.clone().unwrap_or_else(|| ctx.default_path("theta_ode.csv"));
    let theta_pde = a.theta_pde.clone().unwrap_or_else(|| ctx.default_path("theta_pde.field"));
    let traj_ode = a.traj_ode.clone().unwrap_or_else(|| ctx.default_path("traj_ode.csv"));
    let traj_pde = a.traj_pde.clone().unwrap_or_else(|| ctx.default_path("traj_pde.csv"));
    let (steady, dynamics) = match a.mode.as_deref().or(c.mode.as_deref()) {
        Some("steady") => (true, false),
        Some("dynamics") => (false, true),
        Some("both") => (true, true),
        Some(other) => bail!("unknown compare mode '{other}' (steady, dynamics, both)"),
        None => {
            let s = theta_ode.exists() && theta_pde.exists();
            let d = traj_ode.exists() && traj_pde.exists();
            if !s && !d {
                bail!("nothing to compare in {}: need theta_ode.csv + theta_pde.field or traj_ode.csv + traj_pde.csv", ctx.out.display());
            }
            (s, d)
        }
    };
    let out_dir = a.out.clone().unwrap_or_else(|| ctx.out.clone());
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    if steady {
        let net = ctx.network(&a.network)?;
        let grid = ctx.grid(&a.grid)?;
        let disc = read_theta_csv(&theta_ode, &net)?;
        let cont = load_field(&theta_pde, grid.clone()).with_context(|| format!("loading {}", theta_pde.display()))?;
        let map = NodeCellMap::new(&net, &grid);
        let factor = a.outlier_factor.or(c.outlier_factor).unwrap_or(DEFAULT_OUTLIER_FACTOR);
        let report = compare_steady(&net, &disc, &cont, &map, factor)?;
        write_text(&out_dir.join("compare_steady.json"), &report.summary_json())?;
        write_text(&out_dir.join("compare_scatter.csv"), &report.scatter_csv())?;
        println!(
            "steady: rmse {} max {} outliers {} -> {}",
            sig9(report.rmse),
            sig9(report.max_abs_error),
            report.outliers.len(),
            out_dir.join("compare_steady.json").display()
        );
    }

    if dynamics {
        let disc = Trajectory::load(&traj_ode).with_context(|| format!("loading {}", traj_ode.display()))?;
        let cont = Trajectory::load(&traj_pde).with_context(|| format!("loading {}", traj_pde.display()))?;
        let terminal = disc.terminal_global_omega().unwrap_or(0.0);
        let mut opts = DynamicsOptions::for_post_fault(terminal);
        if let Some(t) = a.arrival_threshold.or(c.arrival_threshold) {
            opts.arrival_threshold = t;
        }
        if let Some(w) = a.bin_width.or(c.bin_width) {
            opts.bin_width = w;
        }
        if let Some(bus) = a.fault_bus {
            let net = ctx.network(&a.network)?;
            let origin = net.bus(bus).ok_or_else(|| anyhow!("fault bus {bus} is not in the network"))?.position();
            for &p in &disc.probes {
                if let Some(b) = net.bus(p) {
                    opts.distances.insert(p, origin.distance(b.position()));
                }
            }
        }
        info!("arrival threshold {} (default fraction {DEFAULT_ARRIVAL_FRACTION})", opts.arrival_threshold);
        let report = compare_dynamics(&disc, &cont, &opts)?;
        write_text(&out_dir.join("compare_dynamics.json"), &report.to_json())?;
        write_text(&out_dir.join("compare_probes.csv"), &report.probes_csv())?;
        println!(
            "dynamics: {} probes, max relative rmse {}, global terminal difference {} -> {}",
            report.probes.len(),
            sig9(report.max_relative_rmse),
            sig9(report.global_terminal_difference),
            out_dir.join("compare_dynamics.json").display()
        );
    }
    Ok(())
}

fn check_names(named: &[NamedScenario]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for s in named {
        let ok = !s.name.is_empty()
            && s.name != "summary"
            && !s.name.starts_with('.')
            && s.name.chars().all(|ch| ch.is_ascii_alphanumeric() || matches!(ch, '-' | '_' | '.'));
        if !ok {
            bail!("scenario name '{}' must be a plain file name ([A-Za-z0-9._-], not `summary`)", s.name);
        }
        if !seen.insert(s.name.as_str()) {
            bail!("duplicate scenario name '{}'", s.name);
        }
    }
    Ok(())
}

fn scenario_json(r: &swing_continuum::screening::ScenarioResult) -> String {
    let report = serde_json::json!({
        "scenario": r.name,
        "fault": r.scenario,
        "terminal_frequency": r.terminal_frequency,
        "max_deviation": r.max_deviation,
        "samples": r.trajectory.len(),
        "probes": r.trajectory.probes,
    });
    serde_json::to_string_pretty(&report).expect("serializable") + "\n"
}

fn screen_cmd(ctx: &Ctx, a: SimArgs) -> Result<()> {
    let named = ctx.scenarios(&a.faults)?;
    if named.is_empty() {
        bail!("no fault scenarios to screen (use [[scenarios]] or --fault)");
    }
    check_names(&named)?;
    let set = ctx.finalized(&a.grid, &a.fields, &a.finalize)?;
    let grid = set.grid().clone();
    let net = ctx.optional_network(&a.network)?;
    let map = net.as_ref().map(|n| NodeCellMap::new(n, &grid));
    let (dt, t_end, stride) = ctx.sim_params(&a);
    let probes = continuum_probes(ctx, &a, &grid, net.as_ref(), map.as_ref(), &named)?;
    let s = &ctx.cfg.screen;
    let strategy: Strategy = a.strategy.as_deref().or(s.strategy.as_deref()).unwrap_or("auto").parse()?;
    let cfg = ScreeningConfig {
        t_end,
        stride,
        probes,
        strategy,
        execution: ctx.execution(a.sequential),
        workers: a.workers.or(s.workers).unwrap_or(0),
    };
    let started = std::time::Instant::now();
    let model = ContinuumModel::new(set, dt, ctx.solver(&a)?)?;
    let factorization = started.elapsed();
    let outcome = screen(&model, &named, map.as_ref(), &cfg)?;

    let dir = a.out.clone().unwrap_or_else(|| ctx.default_path("screen"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in &outcome.results {
        r.trajectory.save(dir.join(format!("{}.csv", r.name)))?;
        write_text(&dir.join(format!("{}.json", r.name)), &scenario_json(r))?;
    }
    write_text(&dir.join("summary.csv"), &outcome.summary_csv())?;

    println!("strategy: {:?}", outcome.strategy);
    println!("factorization: {:.3} s", factorization.as_secs_f64());
    println!("setup: {:.3} s", outcome.setup.as_secs_f64());
    for (r, t) in outcome.results.iter().zip(&outcome.scenario_times) {
        println!("  {}: {:.3} s, max deviation {}", r.name, t.as_secs_f64(), sig9(r.max_deviation));
    }
    println!("total: {:.3} s; {} reports + summary -> {}", outcome.total.as_secs_f64(), outcome.results.len(), dir.display());
    Ok(())
}

//! `swingpde`: file-based pipeline from a power network to its continuum
//! swing model, with simulators, comparisons and batch screening.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "swingpde", version, about, propagate_version = true)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for default input and output files (also
    /// `SWINGPDE_OUTPUT_DIR`).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a lattice or synthetic continental network.
    Gen(GenArgs),
    /// Steady-state angles of the discrete network.
    OdeSteady(OdeSteadyArgs),
    /// Simulate the discrete swing equations.
    OdeSim(SimArgs),
    /// Rasterize the network footprint into a masked grid.
    GridBuild(GridBuildArgs),
    /// Deposit bus and line parameters onto the grid.
    Deposit(DepositArgs),
    /// Smooth fields by artificial diffusion.
    Diffuse(DiffuseArgs),
    /// Fourier low-pass filter a field or a field directory.
    Filter(FilterArgs),
    /// Multiply a field inside a polygon.
    RegionScale(RegionScaleArgs),
    /// Steady-state angle field of the continuum model.
    PdeSteady(FieldArgs),
    /// Simulate the continuum swing equation.
    PdeSim(SimArgs),
    /// Local wave speed sqrt(b/m).
    Speedmap(FieldArgs),
    /// Front arrival times from a wave speed map.
    Front(FrontArgs),
    /// Compare discrete and continuum steady states or trajectories.
    Compare(CompareArgs),
    /// Run a batch of fault scenarios against one factorized model.
    Screen(SimArgs),
}

#[derive(Args, Debug, Default)]
pub struct GenArgs {
    /// Lattice size `NXxNY`.
    #[arg(long, conflicts_with = "continental")]
    pub lattice: Option<String>,
    /// Synthetic continental network instead of a lattice.
    #[arg(long)]
    pub continental: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bus count of the continental network.
    #[arg(long)]
    pub buses: Option<usize>,
    /// Parameter spread factor in [0, 1).
    #[arg(long)]
    pub heterogeneity: Option<f64>,
    /// Lattice spacing (km).
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// Balanced dipole injection strength on the lattice corners.
    #[arg(long)]
    pub dipole: Option<f64>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct OdeSteadyArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct GridBuildArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Cell size (km).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Mask every cell within this distance (km) of a bus or line.
    #[arg(long)]
    pub dilation: Option<f64>,
    /// `dilation` or `bounding-box`.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct DepositArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct DiffuseArgs {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Input field directory.
    #[arg(long)]
    pub fields: Option<PathBuf>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Stop once the relative change per step drops below this.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Run exactly this many steps instead of the tolerance test.
    #[arg(long)]
    pub steps: Option<usize>,
    /// `shared` or `per-quantity`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub sequential: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct FilterArgs {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// A field file or a field directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Retained fraction of the frequency range, in (0, 1].
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// `mirror` or `zero`.
    #[arg(long)]
    pub fill: Option<String>,
    #[arg(long)]
    pub sequential: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct RegionScaleArgs {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    /// Polygon `x1,y1;x2,y2;...` in km, or a file containing one.
    #[arg(long)]
    pub region: String,
    #[arg(long)]
    pub factor: f64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct FinalizeArgs {
    /// Inertia floor relative to the mean inertia.
    #[arg(long)]
    pub inertia_floor: Option<f64>,
    /// Damping floor relative to the mean damping.
    #[arg(long)]
    pub damping_floor: Option<f64>,
    /// Susceptance floor relative to the mean susceptance.
    #[arg(long)]
    pub susceptance_floor: Option<f64>,
    /// Use the mean of b_x and b_y in both directions.
    #[arg(long)]
    pub isotropic: bool,
}

#[derive(Args, Debug, Default)]
pub struct FieldArgs {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Field directory (default: the most processed stage present).
    #[arg(long)]
    pub fields: Option<PathBuf>,
    #[command(flatten)]
    pub finalize: FinalizeArgs,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SimArgs {
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub fields: Option<PathBuf>,
    #[command(flatten)]
    pub finalize: FinalizeArgs,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Record every n-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// `auto`, `direct` or `iterative`.
    #[arg(long)]
    pub solver: Option<String>,
    /// Probe bus ids.
    #[arg(long, value_delimiter = ',')]
    pub probes: Vec<u64>,
    /// Probe cells (full index k) for the continuum model.
    #[arg(long, value_delimiter = ',')]
    pub probe_cells: Vec<usize>,
    /// Fault `bus:ID:DELTA_P[:T_ON[:T_OFF]]` or `cell:K:...`; repeatable.
    #[arg(long = "fault", allow_hyphen_values = true)]
    pub faults: Vec<String>,
    /// Times (s) of full-field snapshots (pde-sim).
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Vec<f64>,
    /// `auto`, `direct` or `reciprocal` (screen).
    #[arg(long)]
    pub strategy: Option<String>,
    /// Worker threads for screen (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub sequential: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct FrontArgs {
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Wave speed field (default: `c.field` in the output directory).
    #[arg(long)]
    pub speed: Option<PathBuf>,
    #[arg(long, conflicts_with = "source_bus")]
    pub source_cell: Option<usize>,
    /// Source bus, mapped to its nearest cell (needs the network).
    #[arg(long)]
    pub source_bus: Option<u64>,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct CompareArgs {
    /// `steady`, `dynamics` or `both`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub theta_ode: Option<PathBuf>,
    #[arg(long)]
    pub theta_pde: Option<PathBuf>,
    #[arg(long)]
    pub traj_ode: Option<PathBuf>,
    #[arg(long)]
    pub traj_pde: Option<PathBuf>,
    /// Outlier threshold as a multiple of the RMSE.
    #[arg(long)]
    pub outlier_factor: Option<f64>,
    /// |omega| defining first arrival (default 10% of the terminal global frequency).
    #[arg(long)]
    pub arrival_threshold: Option<f64>,
    /// Fault bus used to bin probe errors by distance.
    #[arg(long)]
    pub fault_bus: Option<u64>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Output directory for the reports.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

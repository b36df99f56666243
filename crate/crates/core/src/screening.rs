//! Batch fault screening against one factorized continuum model.
//!
//! Two strategies produce the same trajectories:
//!
//! * `Direct` integrates every scenario with the shared factorization,
//!   scenarios running in parallel.
//! * `Reciprocal` exploits the symmetry of the transfer matrix of the
//!   trapezoidal scheme. One response to a unit step injected at each probe
//!   (and one to the damping-weighted source behind the global frequency)
//!   is recorded at every fault cell; each scenario is then a weighted sum
//!   of time-shifted library samples. It needs strictly positive inertia so
//!   that the initial state carries no forcing-dependent frequency.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::analysis::NodeCellMap;
use crate::exec::Execution;
use crate::format::sig9;
use crate::network::FaultScenario;
use crate::pde::{resolve_target, ContinuumModel};
use crate::stepping::{Forcing, ForcingEvent};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Library size (in stored values) above which `Auto` falls back to `Direct`.
const LIBRARY_LIMIT: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Auto,
    Direct,
    Reciprocal,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "direct" => Ok(Strategy::Direct),
            "reciprocal" => Ok(Strategy::Reciprocal),
            other => Err(Error::invalid(format!("unknown screening strategy '{other}' (auto, direct, reciprocal)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedScenario {
    pub name: String,
    pub scenario: FaultScenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningConfig {
    pub t_end: f64,
    pub stride: usize,
    /// Label and compressed cell index of each probe.
    pub probes: Vec<(u64, usize)>,
    pub strategy: Strategy,
    pub execution: Execution,
    /// Worker threads (0 = default pool).
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub name: String,
    pub scenario: FaultScenario,
    pub trajectory: Trajectory,
    /// Last sample of the global frequency.
    pub terminal_frequency: f64,
    /// Largest `|ω|` over probes and the global frequency.
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct ScreeningOutcome {
    pub strategy: Strategy,
    pub results: Vec<ScenarioResult>,
    /// Time spent before the first scenario could be assembled.
    pub setup: Duration,
    /// Per-scenario wall time, in input order.
    pub scenario_times: Vec<Duration>,
    pub total: Duration,
}

impl ScreeningOutcome {
    /// Results sorted by decreasing maximum deviation (then name).
    pub fn ranked(&self) -> Vec<&ScenarioResult> {
        let mut r: Vec<&ScenarioResult> = self.results.iter().collect();
        r.sort_by(|a, b| b.max_deviation.total_cmp(&a.max_deviation).then_with(|| a.name.cmp(&b.name)));
        r
    }

    /// `rank,scenario,delta_p,t_on,terminal_frequency,max_deviation` rows.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("rank,scenario,delta_p,t_on,terminal_frequency,max_deviation\n");
        for (rank, r) in self.ranked().into_iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                rank + 1,
                r.name,
                sig9(r.scenario.delta_p),
                sig9(r.scenario.t_on),
                sig9(r.terminal_frequency),
                sig9(r.max_deviation)
            )
            .unwrap();
        }
        s
    }
}

fn finish(name: &str, scenario: &FaultScenario, trajectory: Trajectory) -> ScenarioResult {
    let terminal_frequency = trajectory.terminal_global_omega().unwrap_or(0.0);
    let max_deviation = trajectory
        .omega
        .iter()
        .flatten()
        .chain(&trajectory.global_omega)
        .fold(0.0f64, |m, w| m.max(w.abs()));
    ScenarioResult { name: name.to_string(), scenario: scenario.clone(), trajectory, terminal_frequency, max_deviation }
}

/// Runs every scenario against `model`.
pub fn screen(model: &ContinuumModel, scenarios: &[NamedScenario], map: Option<&NodeCellMap>, cfg: &ScreeningConfig) -> Result<ScreeningOutcome> {
    if cfg.stride == 0 {
        return Err(Error::invalid("sampling stride must be >= 1"));
    }
    let n = model.grid().n_cells();
    if let Some(&(label, _)) = cfg.probes.iter().find(|&&(_, c)| c >= n) {
        return Err(Error::UnknownProbe(label as usize));
    }
    for s in scenarios {
        s.scenario.validate()?;
        resolve_target(model.grid(), s.scenario.target, map)?;
    }
    let strategy = match cfg.strategy {
        Strategy::Auto => {
            let steps = model.stepper().steps_for(cfg.t_end)? + 1;
            let targets = scenarios.len().min(n);
            let size = (cfg.probes.len() + 1) * targets * steps * 2;
            if reciprocal_applies(model) && size <= LIBRARY_LIMIT {
                Strategy::Reciprocal
            } else {
                Strategy::Direct
            }
        }
        Strategy::Reciprocal if !reciprocal_applies(model) => {
            return Err(Error::invalid("reciprocal screening needs strictly positive inertia in every cell"));
        }
        s => s,
    };
    cfg.execution.with_workers(cfg.workers, || match strategy {
        Strategy::Reciprocal => screen_reciprocal(model, scenarios, map, cfg),
        _ => screen_direct(model, scenarios, map, cfg),
    })
}

fn reciprocal_applies(model: &ContinuumModel) -> bool {
    model.stepper().system().mass.iter().all(|&m| m > 0.0)
}

fn screen_direct(model: &ContinuumModel, scenarios: &[NamedScenario], map: Option<&NodeCellMap>, cfg: &ScreeningConfig) -> Result<ScreeningOutcome> {
    let start = Instant::now();
    let runs = cfg.execution.map(scenarios, |s| {
        let t0 = Instant::now();
        let traj = model.run(std::slice::from_ref(&s.scenario), map, cfg.t_end, cfg.stride, &cfg.probes);
        traj.map(|t| (finish(&s.name, &s.scenario, t), t0.elapsed()))
    });
    let mut results = Vec::with_capacity(runs.len());
    let mut scenario_times = Vec::with_capacity(runs.len());
    for r in runs {
        let (res, dt) = r?;
        results.push(res);
        scenario_times.push(dt);
    }
    Ok(ScreeningOutcome { strategy: Strategy::Direct, results, setup: Duration::ZERO, scenario_times, total: start.elapsed() })
}

/// Step responses recorded at the fault cells, `[target][sample]`.
struct Response {
    theta: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
}

fn record(model: &ContinuumModel, forcing: &Forcing, targets: &[usize], steps: usize) -> Result<Response> {
    let n = model.grid().n_cells();
    let zero = vec![0.0; n];
    let mut theta = vec![Vec::with_capacity(steps + 1); targets.len()];
    let mut omega = vec![Vec::with_capacity(steps + 1); targets.len()];
    model.stepper().run_from(&zero, &zero, forcing, steps, |_, th, om| {
        for (t, &c) in targets.iter().enumerate() {
            theta[t].push(th[c]);
            omega[t].push(om[c]);
        }
        Ok(())
    })?;
    Ok(Response { theta, omega })
}

/// Decomposes an event's trapezoid input pairs `w(n) + w(n+1)` into unit
/// steps: pairs equal `Σ c·2·[n ≥ shift]`.
fn step_terms(event: &ForcingEvent, steps: usize) -> Vec<(usize, f64)> {
    let pair = |n: isize| if n < 0 { 0.0 } else { event.weight(n as usize) + event.weight(n as usize + 1) };
    let mut points = vec![0isize];
    for s in std::iter::once(event.on_step).chain(event.off_step) {
        let s = s as isize;
        points.extend([s - 1, s, s + 1]);
    }
    points.sort_unstable();
    points.dedup();
    points
        .into_iter()
        .filter(|&n| n >= 0 && (n as usize) < steps)
        .filter_map(|n| {
            let jump = pair(n) - pair(n - 1);
            (jump != 0.0).then(|| (n as usize, 0.5 * jump))
        })
        .collect()
}

fn screen_reciprocal(model: &ContinuumModel, scenarios: &[NamedScenario], map: Option<&NodeCellMap>, cfg: &ScreeningConfig) -> Result<ScreeningOutcome> {
    let start = Instant::now();
    let steps = model.stepper().steps_for(cfg.t_end)?;
    let dt = model.stepper().dt();
    let n = model.grid().n_cells();

    let mut targets: Vec<usize> = scenarios.iter().map(|s| resolve_target(model.grid(), s.scenario.target, map)).collect::<Result<_>>()?;
    targets.sort_unstable();
    targets.dedup();

    // One adjoint run per probe plus one for the global frequency.
    let damping = &model.stepper().system().damping;
    let total_d: f64 = damping.iter().sum();
    let mut sources: Vec<Option<usize>> = cfg.probes.iter().map(|&(_, c)| Some(c)).collect();
    sources.push(None);
    let library = cfg.execution.map(&sources, |src| {
        let forcing = match *src {
            Some(c) => Forcing { base: vec![0.0; n], events: vec![ForcingEvent { index: c, delta: 1.0, on_step: 0, off_step: None }] },
            None => Forcing::constant(damping.iter().map(|d| d / total_d).collect()),
        };
        record(model, &forcing, &targets, steps)
    });
    let library = library.into_iter().collect::<Result<Vec<_>>>()?;
    let (global, probes) = library.split_last().expect("global response");
    let setup = start.elapsed();

    let theta0 = model.steady_state();
    let samples: Vec<usize> = (0..=steps).step_by(cfg.stride).collect();
    let assembled = cfg.execution.map(scenarios, |s| -> Result<(ScenarioResult, Duration)> {
        let t0 = Instant::now();
        let cell = resolve_target(model.grid(), s.scenario.target, map)?;
        let t = targets.binary_search(&cell).expect("target recorded");
        let event = ForcingEvent::from_times(cell, s.scenario.delta_p, s.scenario.t_on, s.scenario.t_off, dt)?;
        let terms = step_terms(&event, steps);
        let combine = |series: &[f64], n: usize| -> f64 {
            terms.iter().filter(|&&(shift, _)| n >= shift).map(|&(shift, c)| c * series[n - shift]).sum::<f64>() * event.delta
        };
        let mut traj = Trajectory::with_probes(cfg.probes.iter().map(|&(l, _)| l).collect());
        for &step in &samples {
            traj.times.push(step as f64 * dt);
            for (p, &(_, c)) in cfg.probes.iter().enumerate() {
                traj.theta[p].push(theta0[c] + combine(&probes[p].theta[t], step));
                traj.omega[p].push(combine(&probes[p].omega[t], step));
            }
            traj.global_omega.push(combine(&global.omega[t], step));
        }
        Ok((finish(&s.name, &s.scenario, traj), t0.elapsed()))
    });
    let mut results = Vec::with_capacity(assembled.len());
    let mut scenario_times = Vec::with_capacity(assembled.len());
    for r in assembled {
        let (res, d) = r?;
        results.push(res);
        scenario_times.push(d);
    }
    Ok(ScreeningOutcome { strategy: Strategy::Reciprocal, results, setup, scenario_times, total: start.elapsed() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fields::{Field, FieldSet, Quantity};
    use crate::geometry::Point;
    use crate::grid::RasterGrid;
    use crate::linalg::SolverChoice;
    use crate::network::FaultTarget;

    fn model() -> ContinuumModel {
        let g = Arc::new(RasterGrid::rectangle(6, 5, 10.0, Point::new(0.0, 0.0)).unwrap());
        let n = g.n_cells();
        let var = |base: f64, amp: f64| (0..n).map(|c| base + amp * ((c * 7 % 5) as f64)).collect::<Vec<f64>>();
        let mut p = vec![0.0; n];
        p[2] = 0.4;
        p[20] = -0.4;
        let set = FieldSet::new(
            Field::new(g.clone(), Quantity::M, var(1.0, 0.2)).unwrap(),
            Field::new(g.clone(), Quantity::D, var(0.3, 0.05)).unwrap(),
            Field::new(g.clone(), Quantity::P, p).unwrap(),
            Field::new(g.clone(), Quantity::Bx, var(200.0, 30.0)).unwrap(),
            Field::new(g.clone(), Quantity::By, var(150.0, 20.0)).unwrap(),
        )
        .unwrap();
        ContinuumModel::new(set, 0.01, SolverChoice::Direct).unwrap()
    }

    fn scenarios() -> Vec<NamedScenario> {
        vec![
            NamedScenario { name: "a".into(), scenario: FaultScenario::permanent(FaultTarget::Cell(7), -0.2, 0.0) },
            NamedScenario { name: "b".into(), scenario: FaultScenario::permanent(FaultTarget::Cell(23), 0.1, 0.333) },
            NamedScenario {
                name: "c".into(),
                scenario: FaultScenario { target: FaultTarget::Cell(7), delta_p: -0.3, t_on: 0.5, t_off: Some(1.25) },
            },
        ]
    }

    #[test]
    fn strategies_agree() {
        let m = model();
        let cfg = |strategy, execution| ScreeningConfig {
            t_end: 3.0,
            stride: 3,
            probes: vec![(0, 0), (14, 14), (29, 29)],
            strategy,
            execution,
            workers: 2,
        };
        let direct = screen(&m, &scenarios(), None, &cfg(Strategy::Direct, Execution::Sequential)).unwrap();
        let recip = screen(&m, &scenarios(), None, &cfg(Strategy::Reciprocal, Execution::Parallel)).unwrap();
        assert_eq!(recip.strategy, Strategy::Reciprocal);
        for (a, b) in direct.results.iter().zip(&recip.results) {
            assert_eq!(a.trajectory.times.len(), b.trajectory.times.len());
            let scale = a.max_deviation.max(1e-12);
            for p in 0..3 {
                for (x, y) in a.trajectory.omega[p].iter().zip(&b.trajectory.omega[p]) {
                    assert!((x - y).abs() < 1e-9 * scale.max(1.0), "{x} vs {y}");
                }
                for (x, y) in a.trajectory.theta[p].iter().zip(&b.trajectory.theta[p]) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
            for (x, y) in a.trajectory.global_omega.iter().zip(&b.trajectory.global_omega) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn summary_is_ranked_and_deterministic() {
        let m = model();
        let cfg = ScreeningConfig { t_end: 1.0, stride: 1, probes: vec![(3, 3)], strategy: Strategy::Auto, execution: Execution::Parallel, workers: 0 };
        let a = screen(&m, &scenarios(), None, &cfg).unwrap();
        let b = screen(&m, &scenarios(), None, &ScreeningConfig { execution: Execution::Sequential, ..cfg.clone() }).unwrap();
        assert_eq!(a.summary_csv(), b.summary_csv());
        let ranked = a.ranked();
        assert!(ranked.windows(2).all(|w| w[0].max_deviation >= w[1].max_deviation));
        assert!(a.summary_csv().starts_with("rank,scenario"));
    }

    #[test]
    fn step_decomposition_reproduces_pairs() {
        for (on, off) in [(0, None), (1, None), (4, Some(9)), (0, Some(1))] {
            let e = ForcingEvent { index: 0, delta: 1.0, on_step: on, off_step: off };
            let terms = step_terms(&e, 20);
            for n in 0..20usize {
                let pair = e.weight(n) + e.weight(n + 1);
                let rebuilt: f64 = terms.iter().filter(|t| n >= t.0).map(|t| 2.0 * t.1).sum();
                assert!((pair - rebuilt).abs() < 1e-15, "on {on} off {off:?} n {n}");
            }
        }
    }
}

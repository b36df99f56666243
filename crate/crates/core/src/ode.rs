//! Discrete ground truth: the linearized lossless swing equations
//! `m_i θ̈_i + d_i θ̇_i = p_i − Σ_j b'_ij (θ_i − θ_j)` on a [`PowerNetwork`].

use crate::linalg::{laplacian, solve_pinned, SolverChoice, SparseMatrix};
use crate::network::{BusId, FaultScenario, FaultTarget, PowerNetwork};
use crate::stepping::{CrankNicolson, Forcing, ForcingEvent, SwingSystem};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationParams {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
    pub solver: SolverChoice,
}

impl SimulationParams {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimulationParams { dt, t_end, stride: 1, solver: SolverChoice::Auto }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }
}

/// Weighted Laplacian of the folded couplings `b'_ij`.
pub fn network_laplacian(net: &PowerNetwork) -> SparseMatrix {
    laplacian(net.len(), net.coupling_edges())
}

pub fn injections(net: &PowerNetwork) -> Vec<f64> {
    net.buses().iter().map(|b| b.p).collect()
}

/// Steady angles solving `L θ = p`, with `θ = 0` at the lowest bus id.
/// Returned in bus order.
pub fn ode_steady_state(net: &PowerNetwork) -> Result<Vec<f64>> {
    solve_pinned(&network_laplacian(net), &injections(net), net.reference_index(), SolverChoice::Auto)
}

pub fn swing_system(net: &PowerNetwork) -> Result<SwingSystem> {
    SwingSystem::new(
        net.buses().iter().map(|b| b.m).collect(),
        net.buses().iter().map(|b| b.d).collect(),
        network_laplacian(net),
    )
}

/// `ω_pf = (Σ p + Δp) / Σ d` for a permanent fault.
pub fn post_fault_frequency(net: &PowerNetwork, scenario: &FaultScenario) -> Result<f64> {
    scenario.validate()?;
    if scenario.t_off.is_some() {
        return Err(Error::invalid("post-fault frequency needs a permanent fault (no clearing time)"));
    }
    Ok((net.total_injection() + scenario.delta_p) / net.total_damping())
}

/// A network with its factorized stepper and pre-fault equilibrium; reusable
/// across scenarios.
#[derive(Debug)]
pub struct OdeSimulator<'a> {
    net: &'a PowerNetwork,
    stepper: CrankNicolson,
    theta0: Vec<f64>,
}

impl<'a> OdeSimulator<'a> {
    pub fn new(net: &'a PowerNetwork, dt: f64, solver: SolverChoice) -> Result<Self> {
        let theta0 = ode_steady_state(net)?;
        let stepper = CrankNicolson::new(swing_system(net)?, dt, solver)?;
        Ok(OdeSimulator { net, stepper, theta0 })
    }

    pub fn steady_state(&self) -> &[f64] {
        &self.theta0
    }

    pub fn stepper(&self) -> &CrankNicolson {
        &self.stepper
    }

    pub fn forcing(&self, scenarios: &[FaultScenario]) -> Result<Forcing> {
        let mut events = Vec::with_capacity(scenarios.len());
        for s in scenarios {
            s.validate()?;
            let FaultTarget::Bus(id) = s.target else {
                return Err(Error::invalid("discrete simulation needs a bus fault target"));
            };
            let index = self.net.position_of(id).ok_or(Error::UnknownProbe(id as usize))?;
            events.push(ForcingEvent::from_times(index, s.delta_p, s.t_on, s.t_off, self.stepper.dt())?);
        }
        Ok(Forcing { base: injections(self.net), events })
    }

    pub fn run(&self, scenarios: &[FaultScenario], t_end: f64, stride: usize, probes: &[BusId]) -> Result<Trajectory> {
        let forcing = self.forcing(scenarios)?;
        let probe_rows = probes
            .iter()
            .map(|&id| self.net.position_of(id).map(|i| (id, i)).ok_or(Error::UnknownProbe(id as usize)))
            .collect::<Result<Vec<_>>>()?;
        let steps = self.stepper.steps_for(t_end)?;
        self.stepper.simulate(&self.theta0, &forcing, steps, stride, &probe_rows)
    }
}

/// Integrates the swing ODEs from the pre-fault steady state under one fault.
pub fn simulate_swing(net: &PowerNetwork, scenario: &FaultScenario, params: &SimulationParams, probes: &[BusId]) -> Result<Trajectory> {
    simulate_swing_events(net, std::slice::from_ref(scenario), params, probes)
}

/// As [`simulate_swing`] with several simultaneous fault events.
pub fn simulate_swing_events(net: &PowerNetwork, scenarios: &[FaultScenario], params: &SimulationParams, probes: &[BusId]) -> Result<Trajectory> {
    OdeSimulator::new(net, params.dt, params.solver)?.run(scenarios, params.t_end, params.stride, probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Bus, Meta};

    fn two_bus(b: f64) -> PowerNetwork {
        let buses = vec![
            Bus { id: 1, x: 0.0, y: 0.0, m: 1.0, d: 0.1, p: 1.0, v: 1.0 },
            Bus { id: 2, x: 10.0, y: 0.0, m: 1.0, d: 0.1, p: -1.0, v: 1.0 },
        ];
        PowerNetwork::new(Meta::default(), buses, vec![(1, 2, b)]).unwrap()
    }

    #[test]
    fn two_bus_steady_state() {
        let theta = ode_steady_state(&two_bus(2.0)).unwrap();
        assert_eq!(theta[0], 0.0);
        assert!((theta[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_injection_gives_zero_angles() {
        let buses = (1..=3).map(|id| Bus { id, x: id as f64, y: 0.0, m: 1.0, d: 0.1, p: 0.0, v: 1.0 }).collect();
        let net = PowerNetwork::new(Meta::default(), buses, vec![(1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(ode_steady_state(&net).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn post_fault_frequency_formula() {
        let net = two_bus(1.0);
        let fault = FaultScenario::permanent(FaultTarget::Bus(1), -0.09, 1.0);
        // Σd = 0.2 here; -0.09 / 0.2.
        assert!((post_fault_frequency(&net, &fault).unwrap() + 0.45).abs() < 1e-15);
        assert_eq!(post_fault_frequency(&net, &FaultScenario::none(FaultTarget::Bus(1))).unwrap(), 0.0);
        let cleared = FaultScenario { t_off: Some(2.0), ..fault };
        assert!(post_fault_frequency(&net, &cleared).is_err());
    }

    #[test]
    fn simulation_error_paths() {
        let net = two_bus(1.0);
        let fault = FaultScenario::permanent(FaultTarget::Bus(1), -0.1, 0.0);
        assert!(simulate_swing(&net, &fault, &SimulationParams::new(0.0, 1.0), &[1]).is_err());
        assert!(matches!(simulate_swing(&net, &fault, &SimulationParams::new(0.01, 1.0), &[9]), Err(Error::UnknownProbe(9))));
        let cell = FaultScenario::permanent(FaultTarget::Cell(0), -0.1, 0.0);
        assert!(simulate_swing(&net, &cell, &SimulationParams::new(0.01, 1.0), &[1]).is_err());
    }

    #[test]
    fn no_fault_preserves_equilibrium() {
        let net = two_bus(2.0);
        let traj = simulate_swing(&net, &FaultScenario::none(FaultTarget::Bus(1)), &SimulationParams::new(0.01, 5.0), &[1, 2]).unwrap();
        for p in 0..2 {
            assert!(traj.omega[p].iter().all(|w| w.abs() < 1e-14));
        }
        assert!(traj.theta[1].iter().all(|t| (t + 0.5).abs() < 1e-13));
    }
}

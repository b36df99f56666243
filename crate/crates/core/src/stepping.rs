//! Crank–Nicolson kernel shared by the discrete and continuum engines.
//!
//! Both models are instances of the linear second-order system
//!
//! ```text
//! θ̇ = ω,    M ω̇ + D ω + K θ = p(t)
//! ```
//!
//! with diagonal `M` (inertia), `D` (damping) and a symmetric positive
//! semidefinite stiffness `K` (graph Laplacian for the network, `−Ξ/Δ²` for
//! the raster). One trapezoidal step is the block system
//!
//! ```text
//! θ' − θ = h/2 (ω' + ω)
//! M (ω' − ω) = h/2 [ −D (ω' + ω) − K (θ' + θ) + p(t+h) + p(t) ]
//! ```
//!
//! which is the `A x' = B x + C` system of the continuum scheme multiplied
//! through by `M` in its second block row. Eliminating `θ'` leaves
//!
//! ```text
//! (M + h/2 D + h²/4 K) ω' = (M − h/2 D) ω − h/2 K (2θ + h/2 ω) + h/2 (p' + p)
//! ```
//!
//! whose matrix is SPD and time independent, so it is factorized once. Rows
//! with `m = 0` reduce to the trapezoidal rule for `d θ̇ = p − K θ`.
//!
//! Forcing steps are snapped to the step grid. At an interior jump the
//! sample `p(t_n)` is the mean of the left and right limits; a jump at
//! `t = 0` uses the right limit and zero-inertia rows are initialized
//! consistently with it.

use crate::linalg::{matvec, LinearSolver, SolverChoice, SparseMatrix};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SwingSystem {
    pub mass: Vec<f64>,
    pub damping: Vec<f64>,
    pub stiffness: SparseMatrix,
}

impl SwingSystem {
    pub fn new(mass: Vec<f64>, damping: Vec<f64>, stiffness: SparseMatrix) -> Result<Self> {
        let n = mass.len();
        if damping.len() != n || stiffness.rows() != n || stiffness.cols() != n {
            return Err(Error::invalid("swing system dimensions do not match"));
        }
        for i in 0..n {
            let (m, d) = (mass[i], damping[i]);
            if !(m.is_finite() && d.is_finite() && m >= 0.0 && d >= 0.0 && m + d > 0.0) {
                return Err(Error::invalid(format!("row {i}: need m >= 0, d >= 0, m + d > 0 (m = {m}, d = {d})")));
            }
        }
        Ok(SwingSystem { mass, damping, stiffness })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_damping(&self) -> f64 {
        self.damping.iter().sum()
    }

    /// `Σ d ω / Σ d`.
    pub fn global_frequency(&self, omega: &[f64]) -> f64 {
        let total = self.total_damping();
        if total == 0.0 {
            return 0.0;
        }
        self.damping.iter().zip(omega).map(|(d, w)| d * w).sum::<f64>() / total
    }
}

/// A step change of injection at row `index`, active from step `on_step`
/// (and reverted at `off_step`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingEvent {
    pub index: usize,
    pub delta: f64,
    pub on_step: usize,
    pub off_step: Option<usize>,
}

impl ForcingEvent {
    /// Snaps continuous switching times to the step grid of width `dt`.
    pub fn from_times(index: usize, delta: f64, t_on: f64, t_off: Option<f64>, dt: f64) -> Result<Self> {
        let on_step = (t_on / dt).round() as usize;
        let off_step = t_off.map(|t| (t / dt).round() as usize);
        if let Some(off) = off_step {
            if off <= on_step {
                return Err(Error::invalid(format!("fault duration shorter than one step (dt = {dt})")));
            }
        }
        Ok(ForcingEvent { index, delta, on_step, off_step })
    }

    /// Multiplier of `delta` in the sample `p(t_step)`.
    pub fn weight(&self, step: usize) -> f64 {
        let jump = |at: usize| {
            if step < at {
                0.0
            } else if step == at && at > 0 {
                0.5
            } else {
                1.0
            }
        };
        jump(self.on_step) - self.off_step.map_or(0.0, jump)
    }
}

/// Piecewise-constant injections: a base vector plus step events.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub base: Vec<f64>,
    pub events: Vec<ForcingEvent>,
}

impl Forcing {
    pub fn constant(base: Vec<f64>) -> Self {
        Forcing { base, events: Vec::new() }
    }

    pub fn sample_into(&self, step: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        for e in &self.events {
            out[e.index] += e.weight(step) * e.delta;
        }
    }

    fn add_pair_into(&self, step: usize, out: &mut [f64]) {
        for e in &self.events {
            out[e.index] += (e.weight(step) + e.weight(step + 1)) * e.delta;
        }
    }
}

/// A factorized Crank–Nicolson stepper for one `(system, dt)` pair.
/// Immutable and shareable; each run owns its state vectors.
#[derive(Debug)]
pub struct CrankNicolson {
    system: SwingSystem,
    dt: f64,
    solver: LinearSolver,
}

impl CrankNicolson {
    pub fn new(system: SwingSystem, dt: f64, choice: SolverChoice) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step dt = {dt} must be positive")));
        }
        let n = system.len();
        let q = dt * dt / 4.0;
        let mut tri = sprs::TriMat::new((n, n));
        for (row, vec) in system.stiffness.outer_iterator().enumerate() {
            for (col, &v) in vec.iter() {
                tri.add_triplet(row, col, q * v);
            }
        }
        for i in 0..n {
            tri.add_triplet(i, i, system.mass[i] + 0.5 * dt * system.damping[i]);
        }
        let solver = LinearSolver::new(tri.to_csr(), choice)?;
        Ok(CrankNicolson { system, dt, solver })
    }

    pub fn system(&self) -> &SwingSystem {
        &self.system
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps needed to reach `t_end`.
    pub fn steps_for(&self, t_end: f64) -> Result<usize> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::invalid(format!("t_end = {t_end} must be >= 0")));
        }
        Ok((t_end / self.dt - 1e-9).ceil().max(0.0) as usize)
    }

    /// Initial frequency: zero on inertial rows, and on zero-inertia rows the
    /// value consistent with `d ω = p(0) − K θ`.
    pub fn initial_omega(&self, theta0: &[f64], forcing: &Forcing) -> Vec<f64> {
        let n = self.system.len();
        let mut omega = vec![0.0; n];
        if self.system.mass.iter().any(|&m| m == 0.0) {
            let mut p0 = vec![0.0; n];
            forcing.sample_into(0, &mut p0);
            let mut k_theta = vec![0.0; n];
            matvec(&self.system.stiffness, theta0, &mut k_theta);
            for i in 0..n {
                if self.system.mass[i] == 0.0 {
                    omega[i] = (p0[i] - k_theta[i]) / self.system.damping[i];
                }
            }
        }
        omega
    }

    /// Integrates `n_steps` steps from `(theta0, omega0)`, calling
    /// `observe(step, θ, ω)` for step 0 and after every step.
    pub fn run_from<F>(&self, theta0: &[f64], omega0: &[f64], forcing: &Forcing, n_steps: usize, mut observe: F) -> Result<()>
    where
        F: FnMut(usize, &[f64], &[f64]) -> Result<()>,
    {
        let n = self.system.len();
        if theta0.len() != n || omega0.len() != n || forcing.base.len() != n || forcing.events.iter().any(|e| e.index >= n) {
            return Err(Error::invalid("state or forcing dimension does not match the system"));
        }
        let h = self.dt;
        let SwingSystem { mass, damping, stiffness } = &self.system;
        let mut theta = theta0.to_vec();
        let mut omega = omega0.to_vec();
        let twice_base: Vec<f64> = forcing.base.iter().map(|p| 2.0 * p).collect();
        let mut combo = vec![0.0; n];
        let mut k_combo = vec![0.0; n];
        let mut p_pair = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        observe(0, &theta, &omega)?;
        for step in 0..n_steps {
            p_pair.copy_from_slice(&twice_base);
            forcing.add_pair_into(step, &mut p_pair);
            for i in 0..n {
                combo[i] = 2.0 * theta[i] + 0.5 * h * omega[i];
            }
            matvec(stiffness, &combo, &mut k_combo);
            for i in 0..n {
                rhs[i] = (mass[i] - 0.5 * h * damping[i]) * omega[i] - 0.5 * h * k_combo[i] + 0.5 * h * p_pair[i];
            }
            let next = self.solver.solve(&rhs)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: (step + 1) as f64 * h });
            }
            for i in 0..n {
                theta[i] += 0.5 * h * (omega[i] + next[i]);
            }
            omega = next;
            observe(step + 1, &theta, &omega)?;
        }
        Ok(())
    }

    /// Runs from `theta0` with consistent initial frequencies and records a
    /// [`Trajectory`] every `stride` steps. `probes` pairs an output label
    /// with a row index.
    pub fn simulate(&self, theta0: &[f64], forcing: &Forcing, n_steps: usize, stride: usize, probes: &[(u64, usize)]) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::invalid("sampling stride must be >= 1"));
        }
        let n = self.system.len();
        if let Some(&(label, _)) = probes.iter().find(|&&(_, idx)| idx >= n) {
            return Err(Error::UnknownProbe(label as usize));
        }
        let omega0 = self.initial_omega(theta0, forcing);
        let mut traj = Trajectory::with_probes(probes.iter().map(|&(l, _)| l).collect());
        self.run_from(theta0, &omega0, forcing, n_steps, |step, theta, omega| {
            if step % stride == 0 {
                traj.times.push(step as f64 * self.dt);
                for (p, &(_, idx)) in probes.iter().enumerate() {
                    traj.theta[p].push(theta[idx]);
                    traj.omega[p].push(omega[idx]);
                }
                traj.global_omega.push(self.system.global_frequency(omega));
            }
            Ok(())
        })?;
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::laplacian;

    fn scalar(m: f64, d: f64, k: f64) -> SwingSystem {
        let mut tri = sprs::TriMat::new((1, 1));
        tri.add_triplet(0, 0, k);
        SwingSystem::new(vec![m], vec![d], tri.to_csr()).unwrap()
    }

    #[test]
    fn event_weights_follow_midpoint_convention() {
        let e = ForcingEvent { index: 0, delta: 1.0, on_step: 3, off_step: Some(6) };
        let w: Vec<f64> = (0..8).map(|s| e.weight(s)).collect();
        assert_eq!(w, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 0.5, 0.0]);
        let at_zero = ForcingEvent { index: 0, delta: 1.0, on_step: 0, off_step: None };
        assert_eq!(at_zero.weight(0), 1.0);
        assert!(ForcingEvent::from_times(0, 1.0, 1.0, Some(1.001), 0.01).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let sys = scalar(1.0, 0.1, 0.0);
        assert!(CrankNicolson::new(sys.clone(), 0.0, SolverChoice::Auto).is_err());
        assert!(CrankNicolson::new(sys, -1.0, SolverChoice::Auto).is_err());
        let l = laplacian(1, []);
        assert!(SwingSystem::new(vec![0.0], vec![0.0], l).is_err());
    }

    #[test]
    fn first_order_relaxation_matches_closed_form() {
        // m ω̇ + d ω = P with Ξ = 0: ω = P/d (1 − e^{−d t/m}).
        let (m, d, p) = (2.0, 0.5, 1.0);
        let cn = CrankNicolson::new(scalar(m, d, 0.0), 1e-3, SolverChoice::Auto).unwrap();
        let forcing = Forcing { base: vec![0.0], events: vec![ForcingEvent { index: 0, delta: p, on_step: 0, off_step: None }] };
        let traj = cn.simulate(&[0.0], &forcing, 5000, 100, &[(0, 0)]).unwrap();
        for (s, &t) in traj.times.iter().enumerate() {
            let exact = p / d * (1.0 - (-d * t / m).exp());
            assert!((traj.omega[0][s] - exact).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn zero_inertia_row_is_first_order() {
        // d θ̇ = P − k θ.
        let (d, k, p) = (0.5, 2.0, 1.0);
        let cn = CrankNicolson::new(scalar(0.0, d, k), 1e-3, SolverChoice::Auto).unwrap();
        let forcing = Forcing { base: vec![0.0], events: vec![ForcingEvent { index: 0, delta: p, on_step: 0, off_step: None }] };
        let traj = cn.simulate(&[0.0], &forcing, 2000, 50, &[(0, 0)]).unwrap();
        for (s, &t) in traj.times.iter().enumerate() {
            let exact = p / k * (1.0 - (-k * t / d).exp());
            assert!((traj.theta[0][s] - exact).abs() < 1e-6, "t = {t}");
            let omega_exact = p / d * (-k * t / d).exp();
            assert!((traj.omega[0][s] - omega_exact).abs() < 1e-5, "t = {t}");
        }
    }

    #[test]
    fn unknown_probe_is_rejected() {
        let cn = CrankNicolson::new(scalar(1.0, 1.0, 0.0), 0.1, SolverChoice::Auto).unwrap();
        let f = Forcing::constant(vec![0.0]);
        assert!(matches!(cn.simulate(&[0.0], &f, 3, 1, &[(42, 5)]), Err(Error::UnknownProbe(42))));
    }
}

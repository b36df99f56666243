//! Sampled time series at probe locations.
//!
//! Export format: comma-separated text with header
//! `t,probe_<id>_theta,probe_<id>_omega,...,global_omega`, 9 significant
//! digits per value.

use std::path::Path;

use crate::format::sig9;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// Sample instants (s), strictly increasing.
    pub times: Vec<f64>,
    /// Probe identifiers: bus ids for the discrete model, cell ids `k` for
    /// the continuum model.
    pub probes: Vec<u64>,
    /// `theta[p][s]`: angle of probe `p` at sample `s` (rad).
    pub theta: Vec<Vec<f64>>,
    /// `omega[p][s]`: frequency deviation (rad/s).
    pub omega: Vec<Vec<f64>>,
    /// Damping-weighted mean frequency `Σ d ω / Σ d` per sample.
    pub global_omega: Vec<f64>,
}

impl Trajectory {
    pub fn with_probes(probes: Vec<u64>) -> Self {
        let n = probes.len();
        Trajectory { probes, theta: vec![Vec::new(); n], omega: vec![Vec::new(); n], ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn probe_index(&self, id: u64) -> Option<usize> {
        self.probes.iter().position(|&p| p == id)
    }

    pub fn terminal_global_omega(&self) -> Option<f64> {
        self.global_omega.last().copied()
    }

    /// Checks the container invariants.
    pub fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Inconsistent("trajectory times not strictly increasing".into()));
        }
        let n = self.times.len();
        let ok = self.theta.len() == self.probes.len()
            && self.omega.len() == self.probes.len()
            && self.global_omega.len() == n
            && self.theta.iter().chain(&self.omega).all(|s| s.len() == n);
        if !ok {
            return Err(Error::Inconsistent("trajectory series lengths do not match".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for id in &self.probes {
            out.push_str(&format!(",probe_{id}_theta,probe_{id}_omega"));
        }
        out.push_str(",global_omega\n");
        for s in 0..self.times.len() {
            out.push_str(&sig9(self.times[s]));
            for p in 0..self.probes.len() {
                out.push(',');
                out.push_str(&sig9(self.theta[p][s]));
                out.push(',');
                out.push_str(&sig9(self.omega[p][s]));
            }
            out.push(',');
            out.push_str(&sig9(self.global_omega[s]));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse("trajectory", e))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 2 || cols[0] != "t" || *cols.last().unwrap() != "global_omega" || (cols.len() - 2) % 2 != 0 {
            return Err(Error::parse("trajectory", "header must be t,probe_<id>_theta,probe_<id>_omega,...,global_omega"));
        }
        let mut probes = Vec::new();
        for pair in cols[1..cols.len() - 1].chunks(2) {
            let id = pair[0]
                .strip_prefix("probe_")
                .and_then(|s| s.strip_suffix("_theta"))
                .ok_or_else(|| Error::parse("trajectory", format!("bad column {}", pair[0])))?;
            if pair[1] != format!("probe_{id}_omega") {
                return Err(Error::parse("trajectory", format!("bad column {}", pair[1])));
            }
            probes.push(id.parse::<u64>().map_err(|e| Error::parse("trajectory", e))?);
        }
        let mut traj = Trajectory::with_probes(probes);
        for record in reader.records() {
            let record = record.map_err(|e| Error::parse("trajectory", e))?;
            let vals: Vec<f64> = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::parse("trajectory", e)))
                .collect::<Result<_>>()?;
            if vals.len() != cols.len() {
                return Err(Error::parse("trajectory", "row length mismatch"));
            }
            traj.times.push(vals[0]);
            for p in 0..traj.probes.len() {
                traj.theta[p].push(vals[1 + 2 * p]);
                traj.omega[p].push(vals[2 + 2 * p]);
            }
            traj.global_omega.push(vals[vals.len() - 1]);
        }
        traj.validate()?;
        Ok(traj)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Trajectory::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_round_trip() {
        let mut t = Trajectory::with_probes(vec![3, 17]);
        for s in 0..4 {
            t.times.push(s as f64 * 0.1);
            t.theta[0].push(0.1 * s as f64);
            t.omega[0].push(-0.01 * s as f64);
            t.theta[1].push(1.0 / 3.0);
            t.omega[1].push(0.0);
            t.global_omega.push(-0.005 * s as f64);
        }
        let csv = t.to_csv();
        assert!(csv.starts_with("t,probe_3_theta,probe_3_omega,probe_17_theta,probe_17_omega,global_omega\n"));
        assert!(csv.contains("0.333333333"));
        let back = Trajectory::from_csv(&csv).unwrap();
        assert_eq!(back.probes, t.probes);
        for (a, b) in back.theta[1].iter().zip(&t.theta[1]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Trajectory::from_csv("x,global_omega\n0,0\n").is_err());
        assert!(Trajectory::from_csv("t,global_omega\n0,0\n0,0\n").is_err());
    }
}

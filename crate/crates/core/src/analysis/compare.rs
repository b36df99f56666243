use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::NodeCellMap;
use crate::fields::Field;
use crate::format::sig9;
use crate::network::{BusId, PowerNetwork};
use crate::trajectory::Trajectory;
use crate::{Error, Result};

pub const DEFAULT_OUTLIER_FACTOR: f64 = 3.0;
/// Arrival threshold as a fraction of `|ω_pf|`.
pub const DEFAULT_ARRIVAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outlier {
    pub bus: BusId,
    pub x: f64,
    pub y: f64,
    pub error: f64,
}

/// Steady-state angle comparison after removing each side's mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyReport {
    pub buses: Vec<BusId>,
    pub theta_disc: Vec<f64>,
    pub theta_cont: Vec<f64>,
    pub rmse: f64,
    pub max_abs_error: f64,
    pub outlier_threshold: f64,
    /// Sorted by decreasing absolute error.
    pub outliers: Vec<Outlier>,
}

fn centred(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter().map(|x| x - mean).collect()
}

/// Pairs each bus angle with the continuum angle of its cell.
/// `outlier_factor` multiplies the RMSE to give the outlier threshold.
pub fn compare_steady(
    net: &PowerNetwork,
    theta_disc: &[f64],
    theta_field: &Field,
    map: &NodeCellMap,
    outlier_factor: f64,
) -> Result<SteadyReport> {
    map.check_grid(theta_field.grid())?;
    if theta_disc.len() != net.len() || map.len() != net.len() {
        return Err(Error::Inconsistent(format!(
            "{} buses, {} discrete angles, {} mapped buses",
            net.len(),
            theta_disc.len(),
            map.len()
        )));
    }
    let cont: Vec<f64> = map.cells().iter().map(|&c| theta_field.values()[c]).collect();
    let disc = centred(theta_disc);
    let cont = centred(&cont);
    let errors: Vec<f64> = cont.iter().zip(&disc).map(|(c, d)| c - d).collect();
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    let max_abs_error = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let outlier_threshold = outlier_factor * rmse;
    let mut outliers: Vec<Outlier> = if rmse > 0.0 {
        net.buses()
            .iter()
            .zip(&errors)
            .filter(|(_, e)| e.abs() > outlier_threshold)
            .map(|(b, &e)| Outlier { bus: b.id, x: b.x, y: b.y, error: e })
            .collect()
    } else {
        Vec::new()
    };
    outliers.sort_by(|a, b| b.error.abs().total_cmp(&a.error.abs()).then(a.bus.cmp(&b.bus)));
    Ok(SteadyReport {
        buses: net.buses().iter().map(|b| b.id).collect(),
        theta_disc: disc,
        theta_cont: cont,
        rmse,
        max_abs_error,
        outlier_threshold,
        outliers,
    })
}

impl SteadyReport {
    /// `bus,theta_disc,theta_cont,error` rows.
    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("bus,theta_disc,theta_cont,error\n");
        for ((b, d), c) in self.buses.iter().zip(&self.theta_disc).zip(&self.theta_cont) {
            writeln!(s, "{b},{},{},{}", sig9(*d), sig9(*c), sig9(c - d)).unwrap();
        }
        s
    }

    /// Summary without the per-bus vectors.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "kind": "steady",
            "buses": self.buses.len(),
            "rmse": self.rmse,
            "max_abs_error": self.max_abs_error,
            "outlier_threshold": self.outlier_threshold,
            "outliers": self.outliers,
        }))
        .expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOptions {
    /// `|ω|` level defining the first arrival (rad/s).
    pub arrival_threshold: f64,
    /// Discrete-to-continuum probe label pairs; empty matches equal labels.
    pub pairs: Vec<(u64, u64)>,
    /// Distance to the fault per discrete probe label (km), for binning.
    pub distances: BTreeMap<u64, f64>,
    pub bin_width: f64,
}

impl DynamicsOptions {
    /// Arrival threshold at 10% of `|ω_pf|`.
    pub fn for_post_fault(omega_pf: f64) -> Self {
        DynamicsOptions { arrival_threshold: DEFAULT_ARRIVAL_FRACTION * omega_pf.abs(), pairs: Vec::new(), distances: BTreeMap::new(), bin_width: 250.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeMetrics {
    pub probe: u64,
    pub cont_probe: u64,
    pub distance: Option<f64>,
    pub rmse: f64,
    /// Range `max ω − min ω` of the discrete trace.
    pub deviation_range: f64,
    /// `rmse / deviation_range` (0 when the range is 0).
    pub relative_rmse: f64,
    pub terminal_difference: f64,
    pub arrival_disc: Option<f64>,
    pub arrival_cont: Option<f64>,
    pub arrival_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceBin {
    pub from: f64,
    pub to: f64,
    pub probes: usize,
    pub mean_relative_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsReport {
    pub samples: usize,
    pub probes: Vec<ProbeMetrics>,
    pub global_terminal_difference: f64,
    pub max_relative_rmse: f64,
    pub bins: Vec<DistanceBin>,
}

impl DynamicsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// One row per probe.
    pub fn probes_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(sig9).unwrap_or_default();
        let mut s = String::from("probe,cont_probe,distance,rmse,deviation_range,relative_rmse,terminal_difference,arrival_disc,arrival_cont,arrival_difference\n");
        for p in &self.probes {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                p.probe,
                p.cont_probe,
                opt(p.distance),
                sig9(p.rmse),
                sig9(p.deviation_range),
                sig9(p.relative_rmse),
                sig9(p.terminal_difference),
                opt(p.arrival_disc),
                opt(p.arrival_cont),
                opt(p.arrival_difference)
            )
            .unwrap();
        }
        s
    }
}

fn nearest_sample(times: &[f64], t: f64) -> usize {
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i == times.len() => i - 1,
        Err(i) => {
            if t - times[i - 1] <= times[i] - t {
                i - 1
            } else {
                i
            }
        }
    }
}

fn first_arrival(times: &[f64], omega: &[f64], threshold: f64) -> Option<f64> {
    times.iter().zip(omega).find(|(_, w)| w.abs() > threshold).map(|(t, _)| *t)
}

/// Per-probe frequency comparison on the discrete model's samples inside
/// the common time range; continuum values are taken at the nearest sample.
pub fn compare_dynamics(disc: &Trajectory, cont: &Trajectory, opts: &DynamicsOptions) -> Result<DynamicsReport> {
    disc.validate()?;
    cont.validate()?;
    if disc.is_empty() || cont.is_empty() {
        return Err(Error::invalid("cannot compare empty trajectories"));
    }
    let lo = disc.times[0].max(cont.times[0]);
    let hi = disc.times[disc.len() - 1].min(cont.times[cont.len() - 1]);
    if lo > hi {
        return Err(Error::invalid(format!("trajectories have disjoint time ranges ([{}, {}] vs [{}, {}])", disc.times[0], disc.times[disc.len() - 1], cont.times[0], cont.times[cont.len() - 1])));
    }
    let samples: Vec<usize> = (0..disc.len()).filter(|&s| disc.times[s] >= lo && disc.times[s] <= hi).collect();
    let matched: Vec<usize> = samples.iter().map(|&s| nearest_sample(&cont.times, disc.times[s])).collect();
    let times: Vec<f64> = samples.iter().map(|&s| disc.times[s]).collect();

    let pairs: Vec<(u64, u64)> = if opts.pairs.is_empty() { disc.probes.iter().map(|&p| (p, p)).collect() } else { opts.pairs.clone() };
    let mut probes = Vec::with_capacity(pairs.len());
    for (dp, cp) in pairs {
        let di = disc.probe_index(dp).ok_or_else(|| Error::invalid(format!("probe {dp} missing from the discrete trajectory")))?;
        let ci = cont.probe_index(cp).ok_or_else(|| Error::invalid(format!("probe {dp} is unmapped: {cp} missing from the continuum trajectory")))?;
        let wd: Vec<f64> = samples.iter().map(|&s| disc.omega[di][s]).collect();
        let wc: Vec<f64> = matched.iter().map(|&s| cont.omega[ci][s]).collect();
        let rmse = (wd.iter().zip(&wc).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / wd.len() as f64).sqrt();
        let (min, max) = wd.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        let deviation_range = max - min;
        let arrival_disc = first_arrival(&times, &wd, opts.arrival_threshold);
        let arrival_cont = first_arrival(&times, &wc, opts.arrival_threshold);
        probes.push(ProbeMetrics {
            probe: dp,
            cont_probe: cp,
            distance: opts.distances.get(&dp).copied(),
            rmse,
            deviation_range,
            relative_rmse: if deviation_range > 0.0 { rmse / deviation_range } else { 0.0 },
            terminal_difference: (wd[wd.len() - 1] - wc[wc.len() - 1]).abs(),
            arrival_disc,
            arrival_cont,
            arrival_difference: arrival_disc.zip(arrival_cont).map(|(a, b)| b - a),
        });
    }
    let last = samples[samples.len() - 1];
    let global_terminal_difference = (disc.global_omega[last] - cont.global_omega[matched[matched.len() - 1]]).abs();
    let max_relative_rmse = probes.iter().map(|p| p.relative_rmse).fold(0.0, f64::max);

    let mut bins: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    if opts.bin_width > 0.0 {
        for p in &probes {
            if let Some(d) = p.distance {
                let e = bins.entry((d / opts.bin_width).floor() as i64).or_default();
                e.0 += 1;
                e.1 += p.relative_rmse;
            }
        }
    }
    let bins = bins
        .into_iter()
        .map(|(b, (n, sum))| DistanceBin {
            from: b as f64 * opts.bin_width,
            to: (b + 1) as f64 * opts.bin_width,
            probes: n,
            mean_relative_rmse: sum / n as f64,
        })
        .collect();
    Ok(DynamicsReport { samples: samples.len(), probes, global_terminal_difference, max_relative_rmse, bins })
}

//! Validation tools: bus-to-cell mapping, wave-speed map, front arrival
//! times and discrete-versus-continuum comparisons.

mod compare;
mod mapping;
mod speed;

pub use compare::{
    compare_dynamics, compare_steady, DistanceBin, DynamicsOptions, DynamicsReport, Outlier, ProbeMetrics, SteadyReport,
    DEFAULT_ARRIVAL_FRACTION, DEFAULT_OUTLIER_FACTOR,
};
pub use mapping::NodeCellMap;
pub use speed::{average_wave_speed, front_arrival, wave_speed_map, SpeedAverage};

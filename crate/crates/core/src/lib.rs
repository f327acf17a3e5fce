//! Shared-level self-awareness toolkit: an unmotivated Kalman filter, SOM
//! clustering into superstates, a Markov jump particle filter producing an
//! anomaly signal, synthetic trajectory scenarios and cross-layer fusion.

pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod mjpf;
pub mod pipeline;
pub mod scenario;
pub mod seeds;
pub mod som;
pub mod types;
pub mod unmotivated;
pub mod vocabulary;

pub use error::{Error, Result};
pub use types::{
    weighted_distance, AnomalyEntry, AnomalySeries, GeneralizedState, Observation,
    SuperstateLabel, Trajectory, WeightedMetric,
};

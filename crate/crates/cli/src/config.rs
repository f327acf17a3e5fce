//! Optional TOML configuration. Keys mirror the long flag names with
//! underscores; a flag given on the command line always wins.

use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,

    // Scenario.
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub speed: Option<f64>,
    pub dt: Option<f64>,
    pub laps: Option<usize>,
    pub corner_radius: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub trigger: Option<f64>,
    pub stop_fraction: Option<f64>,
    pub stop_duration: Option<f64>,

    // Filter noise, shared by training and the particle filter.
    pub q_position: Option<f64>,
    pub q_velocity: Option<f64>,
    pub r: Option<f64>,

    // SOM and vocabulary.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub sigma0: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub smoothing: Option<f64>,

    // Particle filter.
    pub particles: Option<usize>,
    pub resample_threshold: Option<f64>,

    // Fusion.
    pub sl_threshold: Option<f64>,
    pub pl_threshold: Option<f64>,
    pub rule: Option<String>,
    pub max_lag: Option<usize>,
    pub window: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

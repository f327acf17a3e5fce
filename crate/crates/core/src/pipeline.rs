//! End-to-end shared-level training: unmotivated filtering, SOM clustering,
//! superstate extraction and transition estimation.

use crate::error::{Error, Result};
use crate::som::{self, SomConfig};
use crate::types::{GeneralizedState, Trajectory};
use crate::unmotivated::{self, NoiseConfig};
use crate::vocabulary::{build_vocabulary, label_states, learn_transitions, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub som: SomConfig,
    pub noise: NoiseConfig,
    pub smoothing: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            som: SomConfig::default(),
            noise: NoiseConfig::default(),
            smoothing: crate::vocabulary::DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub vocabulary: Vocabulary,
    pub quantization_error: f64,
    pub states: Vec<Vec<GeneralizedState>>,
}

/// Trains a vocabulary from one or more normal trajectories sharing a sampling period.
pub fn train_shared_level(trajectories: &[Trajectory], cfg: &TrainConfig) -> Result<TrainedModel> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::invalid("no training trajectories"))?;
    let dt = first.dt();
    let mut states = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        if (t.dt() - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::invalid(format!(
                "training trajectories disagree on dt: {} vs {}",
                t.dt(),
                dt
            )));
        }
        states.push(unmotivated::track(t, &cfg.noise, unmotivated::default_init(t))?);
    }
    let flat: Vec<Vec<f64>> = states
        .iter()
        .flatten()
        .map(|s| s.to_array().to_vec())
        .collect();
    let model = som::train(&flat, &cfg.som)?;
    let all: Vec<GeneralizedState> = states.iter().flatten().copied().collect();
    let vocab = build_vocabulary(&all, &model, dt)?;
    let sequences: Vec<_> = states.iter().map(|s| label_states(&vocab, s)).collect();
    let transitions = learn_transitions(&sequences, vocab.len(), cfg.smoothing)?;
    Ok(TrainedModel {
        vocabulary: vocab.with_transitions(transitions)?,
        quantization_error: model.training_error(),
        states,
    })
}

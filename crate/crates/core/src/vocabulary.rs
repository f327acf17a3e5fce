//! Superstate vocabulary built from a trained SOM: per-region control
//! velocities, acceptance regions, the dummy rule and temporal transitions.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::nearest_rank;
use crate::som::{self, SomMetric, SomModel};
use crate::types::{GeneralizedState, SuperstateLabel, WeightedMetric};

/// Percentile of member distances that bounds a superstate's acceptance region.
pub const ACCEPTANCE_PERCENTILE: f64 = 0.99;
/// Safety factor applied to the largest acceptance radius to get the dummy threshold.
pub const DUMMY_SAFETY_FACTOR: f64 = 1.5;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Superstate {
    pub id: usize,
    pub centroid: GeneralizedState,
    pub control_velocity: Vector2<f64>,
    pub acceptance_radius: f64,
    pub member_count: usize,
}

/// Row-stochastic matrix `p(S_k = j | S_{k-1} = i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    probabilities: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn new(probabilities: Vec<Vec<f64>>) -> Result<Self> {
        let m = probabilities.len();
        if m == 0 {
            return Err(Error::invalid("transition matrix is empty"));
        }
        for (i, row) in probabilities.iter().enumerate() {
            if row.len() != m {
                return Err(Error::invalid(format!(
                    "transition row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(format!("transition row {i} has invalid entries")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(format!("transition row {i} sums to {sum}")));
            }
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("transition matrix needs at least one state"));
        }
        Ok(Self {
            probabilities: vec![vec![1.0 / m as f64; m]; m],
        })
    }

    pub fn size(&self) -> usize {
        self.probabilities.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probabilities[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probabilities
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    superstates: Vec<Superstate>,
    transitions: Option<TransitionMatrix>,
    metric: WeightedMetric,
    dt: f64,
    dummy_threshold: f64,
}

impl Vocabulary {
    pub fn new(
        superstates: Vec<Superstate>,
        transitions: Option<TransitionMatrix>,
        metric: WeightedMetric,
        dt: f64,
        dummy_threshold: f64,
    ) -> Result<Self> {
        if superstates.is_empty() {
            return Err(Error::invalid("vocabulary has no superstates"));
        }
        metric.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if !(dummy_threshold.is_finite() && dummy_threshold >= 0.0) {
            return Err(Error::invalid(format!(
                "dummy threshold must be finite and nonnegative, got {dummy_threshold}"
            )));
        }
        for (i, s) in superstates.iter().enumerate() {
            if s.id != i {
                return Err(Error::invalid(format!(
                    "superstate ids must be 0..M-1 in order; position {i} holds id {}",
                    s.id
                )));
            }
            let finite = s.centroid.is_finite()
                && s.control_velocity.iter().all(|v| v.is_finite())
                && s.acceptance_radius.is_finite()
                && s.acceptance_radius >= 0.0;
            if !finite {
                return Err(Error::invalid(format!("superstate {i} has invalid values")));
            }
        }
        if let Some(t) = &transitions {
            if t.size() != superstates.len() {
                return Err(Error::invalid(format!(
                    "transition matrix is {0}x{0} but vocabulary has {1} superstates",
                    t.size(),
                    superstates.len()
                )));
            }
        }
        Ok(Self {
            superstates,
            transitions,
            metric,
            dt,
            dummy_threshold,
        })
    }

    pub fn superstates(&self) -> &[Superstate] {
        &self.superstates
    }

    pub fn len(&self) -> usize {
        self.superstates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superstates.is_empty()
    }

    pub fn transitions(&self) -> Option<&TransitionMatrix> {
        self.transitions.as_ref()
    }

    pub fn metric(&self) -> WeightedMetric {
        self.metric
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dummy_threshold(&self) -> f64 {
        self.dummy_threshold
    }

    pub fn with_transitions(mut self, t: TransitionMatrix) -> Result<Self> {
        if t.size() != self.len() {
            return Err(Error::invalid(format!(
                "transition matrix is {0}x{0} but vocabulary has {1} superstates",
                t.size(),
                self.len()
            )));
        }
        self.transitions = Some(t);
        Ok(self)
    }

    /// Control velocity for a label; the dummy superstate has none.
    pub fn control_velocity(&self, label: SuperstateLabel) -> Result<Vector2<f64>> {
        match label {
            SuperstateLabel::Dummy => Ok(Vector2::zeros()),
            SuperstateLabel::Id(i) => self
                .superstates
                .get(i)
                .map(|s| s.control_velocity)
                .ok_or_else(|| Error::invalid(format!("unknown superstate id {i}"))),
        }
    }

    /// Nearest superstate and its distance under the vocabulary metric.
    pub fn nearest(&self, s: &GeneralizedState) -> (usize, f64) {
        let x = s.to_array();
        let mut best = (0, f64::INFINITY);
        for (i, st) in self.superstates.iter().enumerate() {
            let d = self.metric.distance_sq_raw(&st.centroid.to_array(), &x).sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Weighted distance from a state to a given superstate's centroid.
    pub fn distance_to(&self, id: usize, s: &GeneralizedState) -> f64 {
        self.metric
            .distance_sq_raw(&self.superstates[id].centroid.to_array(), &s.to_array())
            .sqrt()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&VocabularyFile::from(self))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&VocabularyFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabularyFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct SuperstateRecord {
    id: usize,
    centroid: [f64; 4],
    control_velocity: [f64; 2],
    acceptance_radius: f64,
    member_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    metric: WeightedMetric,
    dt: f64,
    dummy_threshold: f64,
    superstates: Vec<SuperstateRecord>,
    transitions: Vec<Vec<f64>>,
}

impl From<&Vocabulary> for VocabularyFile {
    fn from(v: &Vocabulary) -> Self {
        Self {
            metric: v.metric,
            dt: v.dt,
            dummy_threshold: v.dummy_threshold,
            superstates: v
                .superstates
                .iter()
                .map(|s| SuperstateRecord {
                    id: s.id,
                    centroid: s.centroid.to_array(),
                    control_velocity: [s.control_velocity.x, s.control_velocity.y],
                    acceptance_radius: s.acceptance_radius,
                    member_count: s.member_count,
                })
                .collect(),
            transitions: v
                .transitions
                .as_ref()
                .map(|t| t.rows().to_vec())
                .unwrap_or_default(),
        }
    }
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = Error;

    fn try_from(f: VocabularyFile) -> Result<Self> {
        let superstates = f
            .superstates
            .into_iter()
            .map(|r| {
                Ok(Superstate {
                    id: r.id,
                    centroid: GeneralizedState::from_slice(&r.centroid)?,
                    control_velocity: Vector2::new(r.control_velocity[0], r.control_velocity[1]),
                    acceptance_radius: r.acceptance_radius,
                    member_count: r.member_count,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let transitions = if f.transitions.is_empty() {
            None
        } else {
            Some(TransitionMatrix::new(f.transitions)?)
        };
        Vocabulary::new(superstates, transitions, f.metric, f.dt, f.dummy_threshold)
    }
}

/// Builds superstates from the SOM prototypes that attract at least one state.
///
/// Empty prototypes are dropped and ids re-packed in prototype order. The
/// returned vocabulary carries no transitions yet.
pub fn build_vocabulary(states: &[GeneralizedState], som: &SomModel, dt: f64) -> Result<Vocabulary> {
    if states.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from no states"));
    }
    if som.dim() != 4 {
        return Err(Error::invalid(format!(
            "SOM must be trained on 4-dimensional states, got {}",
            som.dim()
        )));
    }
    let metric = match som.metric() {
        SomMetric::Weighted(m) => m,
        SomMetric::Euclidean => WeightedMetric {
            alpha: 1.0,
            beta: 1.0,
        },
    };

    let mut members: Vec<Vec<(GeneralizedState, f64)>> = vec![Vec::new(); som.prototypes().len()];
    for s in states {
        let (j, d) = som::best_matching_unit(som, &s.to_array())?;
        members[j].push((*s, d));
    }

    let mut superstates = Vec::new();
    for (proto, group) in som.prototypes().iter().zip(&members) {
        if group.is_empty() {
            continue;
        }
        let n = group.len() as f64;
        let control_velocity = group.iter().map(|(s, _)| s.velocity()).sum::<Vector2<f64>>() / n;
        let mut dists: Vec<f64> = group.iter().map(|(_, d)| *d).collect();
        dists.sort_by(f64::total_cmp);
        superstates.push(Superstate {
            id: superstates.len(),
            centroid: GeneralizedState::from_slice(proto)?,
            control_velocity,
            acceptance_radius: nearest_rank(&dists, ACCEPTANCE_PERCENTILE),
            member_count: group.len(),
        });
    }
    let dummy_threshold = superstates
        .iter()
        .map(|s| s.acceptance_radius)
        .fold(0.0, f64::max)
        * DUMMY_SAFETY_FACTOR;
    Vocabulary::new(superstates, None, metric, dt, dummy_threshold)
}

/// Nearest superstate, or dummy when the distance strictly exceeds the threshold.
pub fn assign_superstate(v: &Vocabulary, s: &GeneralizedState) -> SuperstateLabel {
    let (i, d) = v.nearest(s);
    if d > v.dummy_threshold || !d.is_finite() {
        SuperstateLabel::Dummy
    } else {
        SuperstateLabel::Id(i)
    }
}

pub fn label_states(v: &Vocabulary, states: &[GeneralizedState]) -> Vec<SuperstateLabel> {
    states.iter().map(|s| assign_superstate(v, s)).collect()
}

/// First-order transition estimate with additive smoothing.
///
/// Dummy labels break the chain: no transition is counted into or out of them.
pub fn learn_transitions(
    label_sequences: &[Vec<SuperstateLabel>],
    m: usize,
    smoothing: f64,
) -> Result<TransitionMatrix> {
    if m == 0 {
        return Err(Error::invalid("transition matrix size must be positive"));
    }
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::invalid(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    let mut counts = vec![vec![0u64; m]; m];
    for seq in label_sequences {
        for label in seq {
            if let SuperstateLabel::Id(i) = label {
                if *i >= m {
                    return Err(Error::invalid(format!("label {i} out of range 0..{m}")));
                }
            }
        }
        for pair in seq.windows(2) {
            if let (SuperstateLabel::Id(i), SuperstateLabel::Id(j)) = (pair[0], pair[1]) {
                counts[i][j] += 1;
            }
        }
    }
    let probabilities = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = total as f64 + m as f64 * smoothing;
            if denom == 0.0 {
                vec![1.0 / m as f64; m]
            } else {
                row.iter().map(|&c| (c as f64 + smoothing) / denom).collect()
            }
        })
        .collect();
    TransitionMatrix::new(probabilities)
}

/// One step of the quasi-constant velocity model: `X' = F X + B U`.
pub fn predict_state(
    v: &Vocabulary,
    s: &GeneralizedState,
    label: SuperstateLabel,
) -> Result<GeneralizedState> {
    let u = v.control_velocity(label)?;
    GeneralizedState::from_parts(s.position() + u * v.dt, u)
}

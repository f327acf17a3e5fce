//! Domain types shared by every stage: generalized states, observations,
//! trajectories, the weighted state metric and anomaly series.

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the spacing of sample times.
pub const DT_REL_TOLERANCE: f64 = 1e-9;

/// Agent position and velocity, ordered `[x, y, vx, vy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl GeneralizedState {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Result<Self> {
        let s = Self { x, y, vx, vy };
        if !s.is_finite() {
            return Err(Error::invalid(format!("non-finite state {s:?}")));
        }
        Ok(s)
    }

    pub fn from_parts(position: Vector2<f64>, velocity: Vector2<f64>) -> Result<Self> {
        Self::new(position.x, position.y, velocity.x, velocity.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.vx, self.vy)
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.vx, self.vy)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn from_vector(v: &Vector4<f64>) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Builds a state from a slice that must hold exactly four finite values.
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [x, y, vx, vy] => Self::new(*x, *y, *vx, *vy),
            _ => Err(Error::invalid(format!(
                "state vector must have length 4, got {}",
                v.len()
            ))),
        }
    }
}

/// A measured position at sample index `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub k: u64,
    pub t: f64,
    pub position: Vector2<f64>,
}

impl Observation {
    pub fn new(k: u64, t: f64, x: f64, y: f64) -> Self {
        Self {
            k,
            t,
            position: Vector2::new(x, y),
        }
    }
}

/// Uniformly sampled sequence of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Observation>,
    dt: f64,
}

impl Trajectory {
    /// Validates the samples and infers the sampling time from the first pair.
    pub fn new(samples: Vec<Observation>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let dt = samples[1].t - samples[0].t;
        Self::with_dt(samples, dt)
    }

    pub fn with_dt(samples: Vec<Observation>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("sampling time must be positive, got {dt}")));
        }
        for (i, pair) in samples.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if b.k <= a.k {
                return Err(Error::invalid(format!(
                    "sample index not strictly increasing at row {} (k={} after k={})",
                    i + 1,
                    b.k,
                    a.k
                )));
            }
            let step = b.t - a.t;
            if !(step > 0.0) || ((step - dt).abs() > DT_REL_TOLERANCE * dt.max(1.0)) {
                return Err(Error::invalid(format!(
                    "non-uniform sampling at row {}: step {step} differs from dt {dt}",
                    i + 1
                )));
            }
        }
        if let Some(bad) = samples
            .iter()
            .position(|o| !(o.t.is_finite() && o.position.iter().all(|c| c.is_finite())))
        {
            return Err(Error::invalid(format!("non-finite value at row {bad}")));
        }
        Ok(Self { samples, dt })
    }

    pub fn samples(&self) -> &[Observation] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Diagonal metric `D = diag(beta, beta, alpha, alpha)` on generalized states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetric {
    pub alpha: f64,
    pub beta: f64,
}

impl WeightedMetric {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        let m = Self { alpha, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha.is_finite()
            && self.beta.is_finite()
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "metric weights must be finite, nonnegative and not both zero (alpha={}, beta={})",
                self.alpha, self.beta
            )))
        }
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.beta, self.beta, self.alpha, self.alpha]
    }

    /// Squared distance on raw 4-vectors; callers guarantee the length.
    pub(crate) fn distance_sq_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        let w = self.weights();
        a.iter()
            .zip(b)
            .zip(w)
            .map(|((p, q), w)| w * (p - q) * (p - q))
            .sum()
    }
}

impl Default for WeightedMetric {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.05,
        }
    }
}

/// `sqrt((a-b)^T D (a-b))` under the weighted metric.
pub fn weighted_distance(
    a: &GeneralizedState,
    b: &GeneralizedState,
    m: &WeightedMetric,
) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("non-finite state component"));
    }
    m.validate()?;
    Ok(m.distance_sq_raw(&a.to_array(), &b.to_array()).sqrt())
}

/// A superstate id, or the sentinel used when no learned regime applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SuperstateLabel {
    Id(usize),
    Dummy,
}

impl SuperstateLabel {
    /// Integer used in every series file; `-1` stands for the dummy superstate.
    pub fn to_wire(self) -> i64 {
        match self {
            SuperstateLabel::Id(i) => i as i64,
            SuperstateLabel::Dummy => -1,
        }
    }

    pub fn from_wire(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(SuperstateLabel::Dummy),
            v if v >= 0 => Ok(SuperstateLabel::Id(v as usize)),
            v => Err(Error::invalid(format!("invalid superstate label {v}"))),
        }
    }

    pub fn is_dummy(self) -> bool {
        matches!(self, SuperstateLabel::Dummy)
    }

    pub fn id(self) -> Option<usize> {
        match self {
            SuperstateLabel::Id(i) => Some(i),
            SuperstateLabel::Dummy => None,
        }
    }
}

impl std::fmt::Display for SuperstateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_wire())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyEntry {
    pub k: u64,
    pub superstate: SuperstateLabel,
    pub score: f64,
}

/// Per-sample abnormality signal with the superstate active at that sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnomalySeries {
    entries: Vec<AnomalyEntry>,
}

impl AnomalySeries {
    pub fn new(entries: Vec<AnomalyEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.score.is_finite() && e.score >= 0.0) {
                return Err(Error::invalid(format!(
                    "score at entry {i} must be finite and nonnegative, got {}",
                    e.score
                )));
            }
            if i > 0 && e.k <= entries[i - 1].k {
                return Err(Error::invalid(format!(
                    "series index not strictly increasing at entry {i}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[AnomalyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn labels(&self) -> Vec<SuperstateLabel> {
        self.entries.iter().map(|e| e.superstate).collect()
    }
}

//! Markov Jump Particle Filter.
//!
//! A particle filter over superstates in which every particle carries its
//! own Kalman filter driven by the quasi-constant velocity model of its
//! current superstate. The abnormality signal is the median, over
//! particles, of the position innovation norm.

use nalgebra::{Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{AnomalyEntry, AnomalySeries, GeneralizedState, Observation, SuperstateLabel, Trajectory};
use crate::unmotivated::{self, KalmanBelief, NoiseConfig};
use crate::vocabulary::{assign_superstate, Vocabulary};

/// Lower bound applied to every per-particle likelihood.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct MjpfConfig {
    pub n_particles: usize,
    pub noise: NoiseConfig,
    /// Resample when ESS falls below this fraction of the particle count.
    pub resample_threshold: f64,
    pub seed: u64,
}

impl Default for MjpfConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            noise: NoiseConfig::default(),
            resample_threshold: 0.5,
            seed: 0,
        }
    }
}

impl MjpfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 particles, got {}",
                self.n_particles
            )));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "resample threshold must lie in (0, 1], got {}",
                self.resample_threshold
            )));
        }
        self.noise.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub superstate: SuperstateLabel,
    pub belief: KalmanBelief,
    pub weight: f64,
}

/// Diagnostics for one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub k: u64,
    /// Median of `per_particle_innovation_norms`.
    pub anomaly: f64,
    pub map_superstate: SuperstateLabel,
    pub posterior_mean: GeneralizedState,
    pub dummy_fraction: f64,
    pub per_particle_innovation_norms: Vec<f64>,
    /// Effective sample size after the weight update, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    /// All weights underflowed and were reset to uniform.
    pub degenerate: bool,
}

/// Filter state: the vocabulary it runs on, particles and the random stream.
#[derive(Debug, Clone)]
pub struct MjpfState {
    vocab: Vocabulary,
    cfg: MjpfConfig,
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq > 0.0 {
        1.0 / sq
    } else {
        0.0
    }
}

/// Systematic resampling with offset `u0 ∈ [0, 1)`; weights must be normalized.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut indices = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for j in 0..n {
        let u = (u0 + j as f64) * step;
        while u > cumulative && i < n - 1 {
            i += 1;
            cumulative += weights[i];
        }
        indices.push(i);
    }
    indices
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn control_vector(u: Vector2<f64>, dt: f64) -> Vector4<f64> {
    Vector4::new(u.x * dt, u.y * dt, u.x, u.y)
}

/// Per-step random values, drawn up front in a fixed order.
struct StepDraws {
    transition: Vec<f64>,
    reentry: Vec<f64>,
    resample: f64,
}

impl MjpfState {
    /// Spreads particles uniformly over the superstates at the first observation.
    pub fn init(v: &Vocabulary, cfg: &MjpfConfig, z0: &Observation) -> Result<Self> {
        cfg.validate()?;
        if v.is_empty() {
            return Err(Error::invalid("vocabulary is empty"));
        }
        if v.transitions().is_none() {
            return Err(Error::invalid("vocabulary has no transition matrix"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let m = v.len();
        let weight = 1.0 / cfg.n_particles as f64;
        let particles = (0..cfg.n_particles)
            .map(|_| {
                let id = rng.random_range(0..m);
                let u = v.superstates()[id].control_velocity;
                Particle {
                    superstate: SuperstateLabel::Id(id),
                    belief: KalmanBelief::at_observation(z0, u),
                    weight,
                }
            })
            .collect();
        Ok(Self {
            vocab: v.clone(),
            cfg: cfg.clone(),
            particles,
            rng,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    /// Direct particle access, e.g. to force particles into a given superstate.
    pub fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    /// Weight-plurality label; ties go to the smallest label (dummy last).
    pub fn map_superstate(&self) -> SuperstateLabel {
        let m = self.vocab.len();
        let mut mass = vec![0.0; m + 1];
        for p in &self.particles {
            match p.superstate {
                SuperstateLabel::Id(i) => mass[i] += p.weight,
                SuperstateLabel::Dummy => mass[m] += p.weight,
            }
        }
        let mut best = 0;
        for (i, w) in mass.iter().enumerate() {
            if *w > mass[best] {
                best = i;
            }
        }
        if best == m {
            SuperstateLabel::Dummy
        } else {
            SuperstateLabel::Id(best)
        }
    }

    pub fn posterior_mean(&self) -> GeneralizedState {
        let mean: Vector4<f64> = self
            .particles
            .iter()
            .map(|p| p.belief.mean * p.weight)
            .sum();
        GeneralizedState {
            x: mean[0],
            y: mean[1],
            vx: mean[2],
            vy: mean[3],
        }
    }

    fn draw(&mut self) -> StepDraws {
        let n = self.particles.len();
        let transition = (0..n).map(|_| self.rng.random::<f64>()).collect();
        let reentry = (0..n).map(|_| self.rng.random::<f64>()).collect();
        let resample = self.rng.random::<f64>();
        StepDraws {
            transition,
            reentry,
            resample,
        }
    }

    /// Advances the filter by one observation.
    pub fn step(&mut self, z: &Observation) -> Result<StepResult> {
        let draws = self.draw();
        let vocab = &self.vocab;
        let transitions = vocab
            .transitions()
            .ok_or_else(|| Error::invalid("vocabulary has no transition matrix"))?;
        let dt = vocab.dt();
        let noise = self.cfg.noise;
        let transition = unmotivated::position_hold_matrix();
        let n = self.particles.len();
        let m = vocab.len();

        // Discrete prediction. Dummy particles stay dummy for this step's
        // prediction and re-enter after the update.
        for (p, &u) in self.particles.iter_mut().zip(&draws.transition) {
            if let SuperstateLabel::Id(i) = p.superstate {
                p.superstate = SuperstateLabel::Id(sample_categorical(transitions.row(i), u));
            }
        }

        // Continuous prediction and update.
        let mut norms = Vec::with_capacity(n);
        for p in self.particles.iter_mut() {
            let u = vocab.control_velocity(p.superstate)?;
            let prior = unmotivated::predict_linear(&p.belief, &transition, &control_vector(u, dt), &noise.q);
            let c = unmotivated::correct(&prior, &z.position, &noise.r)?;
            norms.push(c.innovation.norm());
            let likelihood = c.log_likelihood().exp().max(LIKELIHOOD_FLOOR);
            p.weight *= likelihood;
            p.belief = c.belief;
        }
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let degenerate = !(total.is_finite() && total > 0.0);
        if degenerate {
            log::warn!("all particle weights underflowed at k={}; resetting to uniform", z.k);
            for p in self.particles.iter_mut() {
                p.weight = 1.0 / n as f64;
            }
        } else {
            for p in self.particles.iter_mut() {
                p.weight /= total;
            }
        }

        let anomaly = median(&norms);
        let map_superstate = self.map_superstate();
        let posterior_mean = self.posterior_mean();
        let dummy_fraction = self
            .particles
            .iter()
            .filter(|p| p.superstate.is_dummy())
            .fold(0.0, |acc, p| acc + p.weight)
            .clamp(0.0, 1.0);

        // Labels for the next step: dummy re-entry and acceptance checks.
        for (p, &u) in self.particles.iter_mut().zip(&draws.reentry) {
            let state = p.belief.state();
            match p.superstate {
                SuperstateLabel::Dummy => {
                    p.superstate = match assign_superstate(vocab, &state) {
                        SuperstateLabel::Dummy => {
                            SuperstateLabel::Id(((u * m as f64) as usize).min(m - 1))
                        }
                        label => label,
                    };
                }
                SuperstateLabel::Id(i) => {
                    if vocab.distance_to(i, &state) > vocab.superstates()[i].acceptance_radius {
                        p.superstate = SuperstateLabel::Dummy;
                    }
                }
            }
        }

        let weights = self.weights();
        let ess = effective_sample_size(&weights);
        let resampled = ess < self.cfg.resample_threshold * n as f64;
        if resampled {
            let picks = systematic_resample(&weights, draws.resample);
            let w = 1.0 / n as f64;
            self.particles = picks
                .into_iter()
                .map(|i| Particle {
                    weight: w,
                    ..self.particles[i].clone()
                })
                .collect();
        }

        Ok(StepResult {
            k: z.k,
            anomaly,
            map_superstate,
            posterior_mean,
            dummy_fraction,
            per_particle_innovation_norms: norms,
            ess,
            resampled,
            degenerate,
        })
    }
}

/// Full filter output for a trajectory.
#[derive(Debug, Clone)]
pub struct MjpfRun {
    pub series: AnomalySeries,
    /// One entry per sample after the first.
    pub steps: Vec<StepResult>,
}

/// Runs the filter over a trajectory.
///
/// The first sample initializes the filter and is reported with score 0 and
/// the initial plurality superstate.
pub fn run(v: &Vocabulary, cfg: &MjpfConfig, traj: &Trajectory) -> Result<MjpfRun> {
    let samples = traj.samples();
    if samples.len() < 2 {
        return Err(Error::invalid("trajectory needs at least 2 samples"));
    }
    if (traj.dt() - v.dt()).abs() > 1e-9 * v.dt().max(1.0) {
        log::warn!(
            "trajectory dt {} differs from vocabulary dt {}",
            traj.dt(),
            v.dt()
        );
    }
    let mut state = MjpfState::init(v, cfg, &samples[0])?;
    let mut entries = Vec::with_capacity(samples.len());
    entries.push(AnomalyEntry {
        k: samples[0].k,
        superstate: state.map_superstate(),
        score: 0.0,
    });
    let mut steps = Vec::with_capacity(samples.len() - 1);
    for (i, z) in samples.iter().enumerate().skip(1) {
        let r = state.step(z).map_err(|e| e.at_sample(i))?;
        entries.push(AnomalyEntry {
            k: z.k,
            superstate: r.map_superstate,
            score: r.anomaly,
        });
        steps.push(r);
    }
    Ok(MjpfRun {
        series: AnomalySeries::new(entries)?,
        steps,
    })
}

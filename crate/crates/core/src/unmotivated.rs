//! Kalman filtering under the "unmotivated" random-walk model.
//!
//! The dynamic model keeps positions and annihilates velocities, so the
//! agent is assumed static and every displacement shows up in the
//! correction step. [`track`] turns those corrections into velocity
//! estimates and emits the generalized states used to train the SOM.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, SymmetricEigen, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::types::{GeneralizedState, Observation, Trajectory};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Process (`q`, 4x4) and observation (`r`, 2x2) noise covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
}

impl NoiseConfig {
    pub fn new(q: Matrix4<f64>, r: Matrix2<f64>) -> Result<Self> {
        let n = Self { q, r };
        n.validate()?;
        Ok(n)
    }

    /// Diagonal process noise `(pos, pos, vel, vel)` and isotropic observation noise.
    pub fn diagonal(q_position: f64, q_velocity: f64, r: f64) -> Result<Self> {
        Self::new(
            Matrix4::from_diagonal(&Vector4::new(q_position, q_position, q_velocity, q_velocity)),
            Matrix2::identity() * r,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.q.iter().chain(self.r.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("noise covariances must be finite"));
        }
        if (self.q - self.q.transpose()).amax() > SYMMETRY_TOLERANCE {
            return Err(Error::invalid("process noise Q is not symmetric"));
        }
        if (self.r - self.r.transpose()).amax() > SYMMETRY_TOLERANCE {
            return Err(Error::invalid("observation noise R is not symmetric"));
        }
        let q_min = SymmetricEigen::new(self.q).eigenvalues.min();
        if q_min < -SYMMETRY_TOLERANCE {
            return Err(Error::invalid(format!(
                "process noise Q is not positive semidefinite (min eigenvalue {q_min})"
            )));
        }
        let r_min = SymmetricEigen::new(self.r).eigenvalues.min();
        if r_min <= 0.0 {
            return Err(Error::invalid(format!(
                "observation noise R is not positive definite (min eigenvalue {r_min})"
            )));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            q: Matrix4::from_diagonal(&Vector4::new(0.01, 0.01, 0.04, 0.04)),
            r: Matrix2::identity() * 0.01,
        }
    }
}

/// Gaussian belief over a generalized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanBelief {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl KalmanBelief {
    pub fn new(mean: GeneralizedState, covariance: Matrix4<f64>) -> Self {
        Self {
            mean: mean.to_vector(),
            covariance,
        }
    }

    /// Belief centred on an observation with the given velocity and unit covariance.
    pub fn at_observation(z: &Observation, velocity: Vector2<f64>) -> Self {
        Self {
            mean: Vector4::new(z.position.x, z.position.y, velocity.x, velocity.y),
            covariance: Matrix4::identity(),
        }
    }

    pub fn state(&self) -> GeneralizedState {
        GeneralizedState {
            x: self.mean[0],
            y: self.mean[1],
            vx: self.mean[2],
            vy: self.mean[3],
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }
}

/// Result of a position correction.
#[derive(Debug, Clone, Copy)]
pub struct Correction {
    pub belief: KalmanBelief,
    /// `z - H * prior_mean`
    pub innovation: Vector2<f64>,
    /// `H P H^T + R`
    pub innovation_covariance: Matrix2<f64>,
}

impl Correction {
    /// Log-density of the innovation under `N(0, S)`.
    pub fn log_likelihood(&self) -> f64 {
        let s = self.innovation_covariance;
        let det = s.determinant();
        let quad = match s.try_inverse() {
            Some(inv) => (self.innovation.transpose() * inv * self.innovation)[(0, 0)],
            None => f64::INFINITY,
        };
        -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
    }
}

/// Observation model: state to position.
pub fn observation_matrix() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// Transition that keeps positions and zeroes velocities.
pub fn position_hold_matrix() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 0.0, 0.0))
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Linear prediction `m' = F m + c`, `P' = F P F^T + Q`.
pub fn predict_linear(
    b: &KalmanBelief,
    transition: &Matrix4<f64>,
    control: &Vector4<f64>,
    q: &Matrix4<f64>,
) -> KalmanBelief {
    KalmanBelief {
        mean: transition * b.mean + control,
        covariance: symmetrize(&(transition * b.covariance * transition.transpose() + q)),
    }
}

pub fn predict_unmotivated(b: &KalmanBelief, noise: &NoiseConfig) -> KalmanBelief {
    predict_linear(b, &position_hold_matrix(), &Vector4::zeros(), &noise.q)
}

/// Joseph-form position update.
pub fn correct(b: &KalmanBelief, z: &Vector2<f64>, r: &Matrix2<f64>) -> Result<Correction> {
    let h = observation_matrix();
    let innovation = z - h * b.mean;
    let s = h * b.covariance * h.transpose() + r;
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Degenerate("innovation covariance is singular".into()))?;
    let gain = b.covariance * h.transpose() * s_inv;
    let i_kh = Matrix4::identity() - gain * h;
    let covariance = symmetrize(&(i_kh * b.covariance * i_kh.transpose() + gain * r * gain.transpose()));
    let mean = b.mean + gain * innovation;
    if !mean.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate("non-finite posterior mean".into()));
    }
    Ok(Correction {
        belief: KalmanBelief { mean, covariance },
        innovation,
        innovation_covariance: s,
    })
}

pub fn update_position(
    b: &KalmanBelief,
    z: &Observation,
    noise: &NoiseConfig,
) -> Result<(KalmanBelief, Vector2<f64>)> {
    let c = correct(b, &z.position, &noise.r)?;
    Ok((c.belief, c.innovation))
}

/// Default starting belief: first observation, zero velocity, identity covariance.
pub fn default_init(traj: &Trajectory) -> KalmanBelief {
    KalmanBelief::at_observation(&traj.samples()[0], Vector2::zeros())
}

/// Runs the unmotivated filter over a trajectory.
///
/// Positions are the filtered positions. The raw velocity at sample `k` is
/// the position correction `K * innovation` divided by the sampling time
/// (the displacement the filter had to absorb), then smoothed by a centred
/// three-sample moving average. The first sample has no correction history
/// and borrows the raw velocity of the second.
pub fn track(
    traj: &Trajectory,
    noise: &NoiseConfig,
    init: KalmanBelief,
) -> Result<Vec<GeneralizedState>> {
    noise.validate()?;
    let dt = traj.dt();
    let mut belief = init;
    let mut positions = Vec::with_capacity(traj.len());
    let mut raw_velocity = Vec::with_capacity(traj.len());

    for (i, z) in traj.samples().iter().enumerate() {
        let prior = if i == 0 {
            belief
        } else {
            predict_unmotivated(&belief, noise)
        };
        let (posterior, _) = update_position(&prior, z, noise).map_err(|e| e.at_sample(i))?;
        let correction = posterior.position() - prior.position();
        positions.push(posterior.position());
        raw_velocity.push(correction / dt);
        belief = posterior;
    }
    if raw_velocity.len() > 1 {
        raw_velocity[0] = raw_velocity[1];
    }

    let n = raw_velocity.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let window = &raw_velocity[lo..=hi];
            let v = window.iter().sum::<Vector2<f64>>() / window.len() as f64;
            GeneralizedState::from_parts(positions[i], v).map_err(|e| e.at_sample(i))
        })
        .collect()
}

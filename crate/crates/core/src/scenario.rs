//! Synthetic perimeter-monitoring scenarios with ground-truth labels.
//!
//! The vehicle drives counterclockwise around a rounded rectangle
//! `[0, width] x [0, height]`, starting at the middle of the bottom edge.
//! Two abnormal variants are derived from the same path: a U-turn and an
//! emergency stop.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{Observation, Trajectory};

pub use crate::io::{load_labeled, load_trajectory, save_labeled};

/// Arc length driven between first sight of the obstacle and the U-turn.
pub const UTURN_LEAD_IN: f64 = 2.0;
/// Arc length driven in the reverse direction after the U-turn completes.
pub const UTURN_RETRACE: f64 = 2.0;
/// Duration of each speed ramp around an emergency stop.
pub const STOP_RAMP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub width: f64,
    pub height: f64,
    pub speed: f64,
    pub dt: f64,
    pub laps: usize,
    pub corner_radius: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            width: 40.0,
            height: 20.0,
            speed: 2.0,
            dt: 0.1,
            laps: 4,
            corner_radius: 3.0,
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.width,
            self.height,
            self.speed,
            self.dt,
            self.corner_radius,
            self.noise_sigma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("scenario parameters must be finite"));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(Error::invalid("width and height must be positive"));
        }
        if self.speed <= 0.0 || self.dt <= 0.0 {
            return Err(Error::invalid("speed and dt must be positive"));
        }
        if self.laps == 0 {
            return Err(Error::invalid("laps must be at least 1"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::invalid("noise_sigma must be nonnegative"));
        }
        if !(self.corner_radius > 0.0 && self.corner_radius < self.width.min(self.height) / 2.0) {
            return Err(Error::invalid(format!(
                "corner_radius {} must satisfy 0 < r < min(width, height)/2 = {}",
                self.corner_radius,
                self.width.min(self.height) / 2.0
            )));
        }
        if self.speed * self.dt >= self.corner_radius {
            return Err(Error::invalid(format!(
                "speed*dt = {} must be below corner_radius {} to sample curves",
                self.speed * self.dt,
                self.corner_radius
            )));
        }
        Ok(())
    }

    /// Arc length of one lap.
    pub fn lap_length(&self) -> f64 {
        let r = self.corner_radius;
        2.0 * (self.width - 2.0 * r) + 2.0 * (self.height - 2.0 * r) + 2.0 * PI * r
    }

    /// Samples per lap when the lap length is a whole number of sample steps.
    pub fn samples_per_lap(&self) -> Option<usize> {
        let n = self.lap_length() / (self.speed * self.dt);
        let rounded = n.round();
        ((n - rounded).abs() < 1e-9 && rounded >= 1.0).then_some(rounded as usize)
    }

    /// Time to complete one lap.
    pub fn lap_duration(&self) -> f64 {
        self.lap_length() / self.speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleLabel {
    Straight,
    Curve,
    Abnormal,
}

impl SampleLabel {
    pub fn code(self) -> char {
        match self {
            SampleLabel::Straight => 'S',
            SampleLabel::Curve => 'C',
            SampleLabel::Abnormal => 'A',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "S" => Some(SampleLabel::Straight),
            "C" => Some(SampleLabel::Curve),
            "A" => Some(SampleLabel::Abnormal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrajectory {
    pub trajectory: Trajectory,
    pub labels: Vec<SampleLabel>,
}

impl LabeledTrajectory {
    pub fn new(trajectory: Trajectory, labels: Vec<SampleLabel>) -> Result<Self> {
        if labels.len() != trajectory.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} samples",
                labels.len(),
                trajectory.len()
            )));
        }
        Ok(Self { trajectory, labels })
    }

    /// Boolean ground truth: true on abnormal samples.
    pub fn abnormal_mask(&self) -> Vec<bool> {
        self.labels.iter().map(|l| *l == SampleLabel::Abnormal).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Line {
        start: Vector2<f64>,
        dir: Vector2<f64>,
        len: f64,
    },
    Arc {
        center: Vector2<f64>,
        radius: f64,
        start_angle: f64,
        len: f64,
    },
}

impl Segment {
    fn len(&self) -> f64 {
        match self {
            Segment::Line { len, .. } | Segment::Arc { len, .. } => *len,
        }
    }
}

/// Position, unit heading and segment kind at some arc length.
#[derive(Debug, Clone, Copy)]
struct Pose {
    position: Vector2<f64>,
    heading: Vector2<f64>,
    curve: bool,
}

/// The counterclockwise rounded-rectangle loop.
#[derive(Debug, Clone)]
struct Perimeter {
    segments: Vec<Segment>,
    length: f64,
}

impl Perimeter {
    fn new(p: &ScenarioParams) -> Self {
        let (w, h, r) = (p.width, p.height, p.corner_radius);
        let line = |sx: f64, sy: f64, dx: f64, dy: f64, len: f64| Segment::Line {
            start: Vector2::new(sx, sy),
            dir: Vector2::new(dx, dy),
            len,
        };
        let arc = |cx: f64, cy: f64, a0: f64| Segment::Arc {
            center: Vector2::new(cx, cy),
            radius: r,
            start_angle: a0,
            len: FRAC_PI_2 * r,
        };
        let segments = vec![
            line(w / 2.0, 0.0, 1.0, 0.0, w / 2.0 - r),
            arc(w - r, r, -FRAC_PI_2),
            line(w, r, 0.0, 1.0, h - 2.0 * r),
            arc(w - r, h - r, 0.0),
            line(w - r, h, -1.0, 0.0, w - 2.0 * r),
            arc(r, h - r, FRAC_PI_2),
            line(0.0, h - r, 0.0, -1.0, h - 2.0 * r),
            arc(r, r, PI),
            line(r, 0.0, 1.0, 0.0, w / 2.0 - r),
        ];
        Self {
            segments,
            length: p.lap_length(),
        }
    }

    fn pose(&self, s: f64) -> Pose {
        let mut local = s.rem_euclid(self.length);
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if local < seg.len() || i == last {
                let u = local.min(seg.len());
                return match *seg {
                    Segment::Line { start, dir, .. } => Pose {
                        position: start + dir * u,
                        heading: dir,
                        curve: false,
                    },
                    Segment::Arc {
                        center,
                        radius,
                        start_angle,
                        ..
                    } => {
                        let a = start_angle + u / radius;
                        Pose {
                            position: center + Vector2::new(a.cos(), a.sin()) * radius,
                            heading: Vector2::new(-a.sin(), a.cos()),
                            curve: true,
                        }
                    }
                };
            }
            local -= seg.len();
        }
        unreachable!("perimeter has segments")
    }

    /// Straight length left ahead of arc length `s`, or `None` on a curve.
    /// The bottom edge is split at the lap seam but counts as one straight.
    fn straight_remaining(&self, s: f64) -> Option<f64> {
        let mut local = s.rem_euclid(self.length);
        let last = self.segments.len() - 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if local < seg.len() || i == last {
                return match seg {
                    Segment::Arc { .. } => None,
                    Segment::Line { len, .. } => {
                        let rem = len - local.min(*len);
                        Some(if i == last { rem + self.segments[0].len() } else { rem })
                    }
                };
            }
            local -= seg.len();
        }
        None
    }

    /// True when `[s0, s1]` lies inside one straight.
    fn on_one_straight(&self, s0: f64, s1: f64) -> bool {
        self.straight_remaining(s0).is_some_and(|rem| s1 - s0 <= rem)
    }
}

fn noisy_trajectory(
    p: &ScenarioParams,
    clean: Vec<(Vector2<f64>, SampleLabel)>,
) -> Result<LabeledTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut samples = Vec::with_capacity(clean.len());
    let mut labels = Vec::with_capacity(clean.len());
    for (k, (pos, label)) in clean.into_iter().enumerate() {
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        let t = k as f64 * p.dt;
        samples.push(Observation::new(
            k as u64,
            t,
            pos.x + p.noise_sigma * nx,
            pos.y + p.noise_sigma * ny,
        ));
        labels.push(label);
    }
    LabeledTrajectory::new(Trajectory::with_dt(samples, p.dt)?, labels)
}

fn path_label(pose: &Pose) -> SampleLabel {
    if pose.curve {
        SampleLabel::Curve
    } else {
        SampleLabel::Straight
    }
}

/// Distance driven at constant speed by sample `k`.
fn cruise_distance(p: &ScenarioParams, k: usize) -> f64 {
    p.speed * (k as f64 * p.dt)
}

/// `laps` counterclockwise laps at constant speed with i.i.d. position noise.
pub fn generate_perimeter(p: &ScenarioParams) -> Result<LabeledTrajectory> {
    p.validate()?;
    let path = Perimeter::new(p);
    let total = p.laps as f64 * path.length;
    let n = (total / (p.speed * p.dt) + 1e-9).floor() as usize + 1;
    let clean = (0..n)
        .map(|k| {
            let pose = path.pose(cruise_distance(p, k));
            (pose.position, path_label(&pose))
        })
        .collect();
    noisy_trajectory(p, clean)
}

/// Local offsets `(forward, left)` of the U-turn manoeuvre at arc length `u`
/// from first sight, and whether the sample is still inside the manoeuvre.
///
/// The vehicle keeps driving straight over the lead-in, follows a semicircle
/// of radius `turn_radius` to the left, then drives straight back.
fn uturn_offset(u: f64, turn_radius: f64) -> (f64, f64, bool) {
    let semi = PI * turn_radius;
    if u < UTURN_LEAD_IN {
        (u, 0.0, true)
    } else if u < UTURN_LEAD_IN + semi {
        let th = (u - UTURN_LEAD_IN) / turn_radius;
        (
            UTURN_LEAD_IN + turn_radius * th.sin(),
            turn_radius * (1.0 - th.cos()),
            true,
        )
    } else {
        let tau = u - UTURN_LEAD_IN - semi;
        (UTURN_LEAD_IN - tau, 2.0 * turn_radius, false)
    }
}

/// Perimeter driving interrupted by a U-turn on the last lap.
///
/// `trigger_fraction` locates the U-turn start within the last lap. The
/// samples from first sight (a lead-in of [`UTURN_LEAD_IN`] metres before the
/// trigger) to the end of the semicircle are labelled abnormal; the vehicle
/// then drives [`UTURN_RETRACE`] metres in the reverse direction.
pub fn generate_uturn(p: &ScenarioParams, trigger_fraction: f64) -> Result<LabeledTrajectory> {
    p.validate()?;
    if !(trigger_fraction > 0.0 && trigger_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "trigger fraction must lie in (0, 1), got {trigger_fraction}"
        )));
    }
    let path = Perimeter::new(p);
    let s_trigger = (p.laps - 1) as f64 * path.length + trigger_fraction * path.length;
    let s_sight = s_trigger - UTURN_LEAD_IN;
    if s_sight < 0.0 || !path.on_one_straight(s_sight, s_trigger) {
        return Err(Error::invalid(format!(
            "U-turn trigger at fraction {trigger_fraction} (with its {UTURN_LEAD_IN} m lead-in) is not on a straight segment"
        )));
    }
    let turn_radius = p.corner_radius / 2.0;
    let anchor = path.pose(s_sight);
    let forward = anchor.heading;
    let left = Vector2::new(-forward.y, forward.x);
    let end = s_sight + UTURN_LEAD_IN + PI * turn_radius + UTURN_RETRACE;

    let mut clean = Vec::new();
    let mut k = 0;
    loop {
        let d = cruise_distance(p, k);
        if d > end + 1e-9 {
            break;
        }
        if d < s_sight {
            let pose = path.pose(d);
            clean.push((pose.position, path_label(&pose)));
        } else {
            let (f, l, abnormal) = uturn_offset(d - s_sight, turn_radius);
            let label = if abnormal {
                SampleLabel::Abnormal
            } else {
                SampleLabel::Straight
            };
            clean.push((anchor.position + forward * f + left * l, label));
        }
        k += 1;
    }
    noisy_trajectory(p, clean)
}

/// Emergency stop with the default one-second ramps.
pub fn generate_stop(
    p: &ScenarioParams,
    stop_fraction: f64,
    stop_duration: f64,
) -> Result<LabeledTrajectory> {
    generate_stop_with_ramp(p, stop_fraction, stop_duration, STOP_RAMP_SECONDS)
}

/// Perimeter driving with a stop on the last lap.
///
/// The vehicle decelerates at a constant rate for `ramp` seconds, coming to
/// rest at `stop_fraction` of the last lap, holds for `stop_duration`
/// seconds, then accelerates back to cruise speed over `ramp` seconds. All
/// three phases are labelled abnormal.
pub fn generate_stop_with_ramp(
    p: &ScenarioParams,
    stop_fraction: f64,
    stop_duration: f64,
    ramp: f64,
) -> Result<LabeledTrajectory> {
    p.validate()?;
    if !(stop_fraction > 0.0 && stop_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "stop fraction must lie in (0, 1), got {stop_fraction}"
        )));
    }
    if !(stop_duration.is_finite() && stop_duration >= 0.0 && ramp.is_finite() && ramp >= 0.0) {
        return Err(Error::invalid("stop duration and ramp must be finite and nonnegative"));
    }
    let path = Perimeter::new(p);
    let v = p.speed;
    let s_stop = (p.laps - 1) as f64 * path.length + stop_fraction * path.length;
    let ramp_dist = v * ramp / 2.0;
    let s_brake = s_stop - ramp_dist;
    if s_brake < 0.0 || !path.on_one_straight(s_brake, s_stop + ramp_dist) {
        return Err(Error::invalid(format!(
            "stop at fraction {stop_fraction} (with its ramps) is not on a straight segment"
        )));
    }
    let t_brake = s_brake / v;
    let t_hold = t_brake + ramp;
    let t_go = t_hold + stop_duration;
    let t_cruise = t_go + ramp;
    let total = p.laps as f64 * path.length;
    let t_end = t_cruise + (total - s_stop - ramp_dist) / v;

    let mut clean = Vec::new();
    let mut k = 0;
    loop {
        let t = k as f64 * p.dt;
        if t > t_end + 1e-9 {
            break;
        }
        let (d, abnormal) = if t < t_brake {
            (cruise_distance(p, k), false)
        } else if t < t_hold {
            let tau = t - t_brake;
            (s_brake + v * tau - v * tau * tau / (2.0 * ramp), true)
        } else if t < t_go {
            (s_stop, true)
        } else if t < t_cruise {
            let tau = t - t_go;
            (s_stop + v * tau * tau / (2.0 * ramp), true)
        } else {
            (s_stop + ramp_dist + v * (t - t_cruise), false)
        };
        let pose = path.pose(d);
        let label = if abnormal {
            SampleLabel::Abnormal
        } else {
            path_label(&pose)
        };
        clean.push((pose.position, label));
        k += 1;
    }
    noisy_trajectory(p, clean)
}

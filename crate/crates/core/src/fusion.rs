//! Joins shared-level and private-layer anomaly series and derives joint verdicts.
//!
//! A lag `L` means the private-layer entry at `k + L` describes the same
//! instant as the shared-level entry at `k`. Joined entries keep the
//! shared-level `k`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AnomalySeries, SuperstateLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    And,
    Or,
}

impl std::str::FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(FusionRule::And),
            "or" => Ok(FusionRule::Or),
            other => Err(Error::invalid(format!("unknown fusion rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub sl_threshold: f64,
    pub pl_threshold: f64,
    pub rule: FusionRule,
    pub max_lag: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            sl_threshold: 0.0,
            pl_threshold: 0.0,
            rule: FusionRule::Or,
            max_lag: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sl_threshold", self.sl_threshold), ("pl_threshold", self.pl_threshold)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.max_lag > i64::MAX as usize {
            return Err(Error::invalid("max_lag out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointEntry {
    pub k: u64,
    pub sl_superstate: SuperstateLabel,
    pub sl_score: f64,
    pub pl_superstate: SuperstateLabel,
    pub pl_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointSeries {
    entries: Vec<JointEntry>,
}

impl JointSeries {
    pub fn new(entries: Vec<JointEntry>) -> Result<Self> {
        if entries.windows(2).any(|w| w[1].k <= w[0].k) {
            return Err(Error::invalid("joint series index not strictly increasing"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[JointEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// 1 where the label differs from the previous entry's label, else 0.
pub fn changepoints(labels: &[SuperstateLabel]) -> Vec<bool> {
    let mut out = vec![false; labels.len()];
    for i in 1..labels.len() {
        out[i] = labels[i] != labels[i - 1];
    }
    out
}

fn shifted(k: u64, lag: i64) -> Option<u64> {
    if lag >= 0 {
        k.checked_add(lag as u64)
    } else {
        k.checked_sub(lag.unsigned_abs())
    }
}

/// Cosine similarity of the change-point indicators over the k-overlap at `lag`.
pub fn lag_score(sl: &AnomalySeries, pl: &AnomalySeries, lag: i64) -> f64 {
    let pl_cp = changepoints(&pl.labels());
    let pl_at: HashMap<u64, bool> = pl.entries().iter().zip(pl_cp).map(|(e, c)| (e.k, c)).collect();
    let sl_cp = changepoints(&sl.labels());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (e, a) in sl.entries().iter().zip(sl_cp) {
        let Some(&b) = shifted(e.k, lag).and_then(|k| pl_at.get(&k)) else {
            continue;
        };
        let (a, b) = (f64::from(u8::from(a)), f64::from(u8::from(b)));
        dot += a * b;
        na += a * a;
        nb += b * b;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb).sqrt()
    }
}

fn join(sl: &AnomalySeries, pl: &AnomalySeries, lag: i64) -> Vec<JointEntry> {
    let pl_at: HashMap<u64, (SuperstateLabel, f64)> = pl
        .entries()
        .iter()
        .map(|e| (e.k, (e.superstate, e.score)))
        .collect();
    sl.entries()
        .iter()
        .filter_map(|e| {
            let &(pl_superstate, pl_score) = shifted(e.k, lag).and_then(|k| pl_at.get(&k))?;
            Some(JointEntry {
                k: e.k,
                sl_superstate: e.superstate,
                sl_score: e.score,
                pl_superstate,
                pl_score,
            })
        })
        .collect()
}

/// Aligns the two series and inner-joins them.
///
/// With `max_lag > 0` the lag with the highest change-point similarity wins;
/// ties prefer the smallest magnitude, then the negative side.
pub fn align(sl: &AnomalySeries, pl: &AnomalySeries, cfg: &FusionConfig) -> Result<(JointSeries, i64)> {
    cfg.validate()?;
    if sl.is_empty() || pl.is_empty() {
        return Err(Error::Alignment("both series must be nonempty".into()));
    }
    let max = cfg.max_lag as i64;
    let mut best = (0i64, f64::NEG_INFINITY);
    let mut candidates: Vec<i64> = (-max..=max).collect();
    candidates.sort_by_key(|l| (l.abs(), *l));
    for lag in candidates {
        if join(sl, pl, lag).is_empty() {
            continue;
        }
        let s = lag_score(sl, pl, lag);
        if s > best.1 {
            best = (lag, s);
        }
    }
    let entries = join(sl, pl, best.0);
    if entries.is_empty() {
        return Err(Error::Alignment(format!(
            "no overlapping samples within lag range ±{}",
            cfg.max_lag
        )));
    }
    Ok((JointSeries::new(entries)?, best.0))
}

fn matched_fraction(from: &[usize], to: &[usize], window: usize) -> f64 {
    if from.is_empty() {
        return 0.0;
    }
    let hits = from
        .iter()
        .filter(|&&i| to.iter().any(|&j| i.abs_diff(j) <= window))
        .count();
    hits as f64 / from.len() as f64
}

/// Symmetrized fraction of change-points on one side matched within `window`
/// samples on the other. A side without change-points contributes 0.
pub fn changepoint_correlation(j: &JointSeries, window: usize) -> Result<f64> {
    if window == 0 || window >= j.len() {
        return Err(Error::invalid(format!(
            "window must lie in [1, {}), got {window}",
            j.len()
        )));
    }
    let positions = |labels: Vec<SuperstateLabel>| -> Vec<usize> {
        changepoints(&labels)
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    };
    let sl = positions(j.entries.iter().map(|e| e.sl_superstate).collect());
    let pl = positions(j.entries.iter().map(|e| e.pl_superstate).collect());
    Ok(0.5 * (matched_fraction(&sl, &pl, window) + matched_fraction(&pl, &sl, window)))
}

/// Per-entry anomaly flags.
///
/// The private-layer side fires only when its score exceeds the threshold and
/// it reports the dummy superstate.
pub fn joint_verdict(j: &JointSeries, cfg: &FusionConfig) -> Vec<bool> {
    j.entries
        .iter()
        .map(|e| {
            let sl = e.sl_score > cfg.sl_threshold;
            let pl = e.pl_score > cfg.pl_threshold && e.pl_superstate.is_dummy();
            match cfg.rule {
                FusionRule::Or => sl || pl,
                FusionRule::And => sl && pl,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_flags(flags: &[bool], truth: &[bool]) -> Result<Self> {
        if flags.len() != truth.len() {
            return Err(Error::invalid(format!(
                "{} flags but {} labels",
                flags.len(),
                truth.len()
            )));
        }
        let mut c = Confusion {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for (&f, &t) in flags.iter().zip(truth) {
            match (f, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// 0 when nothing was flagged.
    pub fn precision(&self) -> f64 {
        let d = self.tp + self.fp;
        if d == 0 {
            0.0
        } else {
            self.tp as f64 / d as f64
        }
    }

    /// 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        let d = self.tp + self.fn_;
        if d == 0 {
            0.0
        } else {
            self.tp as f64 / d as f64
        }
    }
}

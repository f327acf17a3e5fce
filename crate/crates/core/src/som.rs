//! Self-organizing map over fixed-dimension vectors with a pluggable metric.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::WeightedMetric;

/// Distance used for best-matching-unit search and quantization error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SomMetric {
    /// Position/velocity weighting on 4-dimensional generalized states.
    Weighted(WeightedMetric),
    Euclidean,
}

impl SomMetric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            SomMetric::Weighted(m) => m.distance_sq_raw(a, b).sqrt(),
            SomMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt(),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            SomMetric::Weighted(m) => {
                m.validate()?;
                if dim != 4 {
                    return Err(Error::invalid(format!(
                        "weighted metric needs 4-dimensional samples, got {dim}"
                    )));
                }
                Ok(())
            }
            SomMetric::Euclidean => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub sigma0: f64,
    pub seed: u64,
    pub metric: SomMetric,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            epochs: 200,
            lr0: 0.5,
            sigma0: 0.8,
            seed: 0,
            metric: SomMetric::Weighted(WeightedMetric::default()),
        }
    }
}

impl SomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 2 {
            return Err(Error::invalid(format!(
                "SOM grid {}x{} must have at least 2 units",
                self.rows, self.cols
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("SOM epochs must be at least 1"));
        }
        if !(self.lr0 > 0.0 && self.lr0 <= 1.0) {
            return Err(Error::invalid(format!("lr0 must lie in (0, 1], got {}", self.lr0)));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::invalid(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        Ok(())
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }
}

/// A trained map: one prototype per grid unit, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SomModel {
    prototypes: Vec<Vec<f64>>,
    grid: Vec<(usize, usize)>,
    metric: SomMetric,
    quantization_error: f64,
}

impl SomModel {
    /// Wraps existing prototypes, e.g. when rebuilding a model from disk.
    pub fn from_prototypes(
        prototypes: Vec<Vec<f64>>,
        grid: Vec<(usize, usize)>,
        metric: SomMetric,
    ) -> Result<Self> {
        if prototypes.is_empty() {
            return Err(Error::invalid("SOM needs at least one prototype"));
        }
        if grid.len() != prototypes.len() {
            return Err(Error::invalid("grid coordinates do not match prototype count"));
        }
        let dim = prototypes[0].len();
        metric.check_dim(dim)?;
        if prototypes
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid("prototypes must share a dimension and be finite"));
        }
        Ok(Self {
            prototypes,
            grid,
            metric,
            quantization_error: 0.0,
        })
    }

    pub fn prototypes(&self) -> &[Vec<f64>] {
        &self.prototypes
    }

    pub fn grid(&self) -> &[(usize, usize)] {
        &self.grid
    }

    pub fn metric(&self) -> SomMetric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    /// Quantization error recorded at the end of training.
    pub fn training_error(&self) -> f64 {
        self.quantization_error
    }
}

fn check_samples(samples: &[Vec<f64>]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("no samples"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::invalid("samples must have positive dimension"));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(Error::invalid(format!(
                "sample {i} has dimension {}, expected {dim}",
                s.len()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
    }
    Ok(dim)
}

fn bmu_in(prototypes: &[Vec<f64>], metric: &SomMetric, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, p) in prototypes.iter().enumerate() {
        let d = metric.distance(p, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn draw_prototypes(rng: &mut ChaCha8Rng, samples: &[Vec<f64>], units: usize) -> Vec<Vec<f64>> {
    rand::seq::index::sample(rng, samples.len(), units)
        .into_iter()
        .map(|i| samples[i].clone())
        .collect()
}

/// The untrained map `train` starts from: distinct random samples as prototypes.
pub fn initial_model(samples: &[Vec<f64>], cfg: &SomConfig) -> Result<SomModel> {
    cfg.validate()?;
    let dim = check_samples(samples)?;
    cfg.metric.check_dim(dim)?;
    if samples.len() < cfg.units() {
        return Err(Error::invalid("fewer samples than map units"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prototypes = draw_prototypes(&mut rng, samples, cfg.units());
    let grid = (0..cfg.units()).map(|u| (u / cfg.cols, u % cfg.cols)).collect();
    SomModel::from_prototypes(prototypes, grid, cfg.metric)
}

/// Online SOM training with a Gaussian neighbourhood and exponential decay.
pub fn train(samples: &[Vec<f64>], cfg: &SomConfig) -> Result<SomModel> {
    cfg.validate()?;
    let dim = check_samples(samples)?;
    cfg.metric.check_dim(dim)?;
    let units = cfg.units();
    if samples.len() < units {
        return Err(Error::invalid(format!(
            "need at least {units} samples for a {}x{} map, got {}",
            cfg.rows,
            cfg.cols,
            samples.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut prototypes = draw_prototypes(&mut rng, samples, units);
    let grid: Vec<(usize, usize)> = (0..units).map(|u| (u / cfg.cols, u % cfg.cols)).collect();
    let grid_sq: Vec<Vec<f64>> = grid
        .iter()
        .map(|a| {
            grid.iter()
                .map(|b| {
                    let dr = a.0 as f64 - b.0 as f64;
                    let dc = a.1 as f64 - b.1 as f64;
                    dr * dr + dc * dc
                })
                .collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut influence = vec![vec![0.0; units]; units];
    for epoch in 0..cfg.epochs {
        let decay = (-(epoch as f64) / cfg.epochs as f64).exp();
        let lr = cfg.lr0 * decay;
        let sigma = cfg.sigma0 * decay;
        for (row, g_row) in influence.iter_mut().zip(&grid_sq) {
            for (h, g2) in row.iter_mut().zip(g_row) {
                *h = lr * (-g2 / (2.0 * sigma * sigma)).exp();
            }
        }
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &samples[i];
            let (bmu, _) = bmu_in(&prototypes, &cfg.metric, x);
            for (w, &rate) in prototypes.iter_mut().zip(&influence[bmu]) {
                if rate == 0.0 {
                    continue;
                }
                for (wc, xc) in w.iter_mut().zip(x) {
                    *wc += rate * (xc - *wc);
                }
            }
        }
    }

    let mut model = SomModel {
        prototypes,
        grid,
        metric: cfg.metric,
        quantization_error: 0.0,
    };
    model.quantization_error = quantization_error(&model, samples)?;
    Ok(model)
}

/// Index and distance of the nearest prototype; ties go to the lowest index.
pub fn best_matching_unit(m: &SomModel, x: &[f64]) -> Result<(usize, f64)> {
    if x.len() != m.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, model expects {}",
            x.len(),
            m.dim()
        )));
    }
    Ok(bmu_in(&m.prototypes, &m.metric, x))
}

/// Mean best-matching-unit distance over `samples`.
pub fn quantization_error(m: &SomModel, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("quantization error of an empty sample set"));
    }
    let mut total = 0.0;
    for s in samples {
        total += best_matching_unit(m, s)?.1;
    }
    Ok(total / samples.len() as f64)
}

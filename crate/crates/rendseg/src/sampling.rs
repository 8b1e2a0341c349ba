//! Uncertainty scoring and point selection.
//!
//! Inference uses deterministic top-N selection over a per-cell uncertainty
//! map; training uses biased random sampling that oversamples candidates and
//! keeps the most uncertain fraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, PointSet};

/// Single-channel map where higher value means more uncertain.
#[derive(Debug, Clone)]
pub struct UncertaintyMap {
    grid: Grid2D,
}

impl UncertaintyMap {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
}

/// Configuration for the biased training sampler.
#[derive(Debug, Clone)]
pub struct TrainSamplerConfig {
    /// Number of points to return.
    pub num_points: usize,
    /// Candidate oversampling factor, >= 1.
    pub oversample_factor: f64,
    /// Fraction of points taken from the most uncertain candidates, in [0, 1].
    pub importance_ratio: f64,
    pub rng_seed: u64,
}

impl TrainSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.oversample_factor < 1.0 {
            return Err(Error::invalid("oversample_factor must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.importance_ratio) {
            return Err(Error::invalid("importance_ratio must be in [0, 1]"));
        }
        let keep = (self.importance_ratio * self.num_points as f64).floor();
        if keep > (self.oversample_factor * self.num_points as f64).ceil() {
            return Err(Error::invalid("floor(beta*N) exceeds candidate count"));
        }
        Ok(())
    }
}

impl Default for TrainSamplerConfig {
    fn default() -> Self {
        Self {
            num_points: 1024,
            oversample_factor: 3.0,
            importance_ratio: 0.75,
            rng_seed: 0,
        }
    }
}

/// Per-cell uncertainty from a logit grid.
///
/// Binary (C = 1): `u = -|logit|`, maximal at the decision boundary.
/// Multi-class (C >= 2): negated top-1 minus top-2 score margin.
pub fn uncertainty_from_logits(logits: &Grid2D) -> UncertaintyMap {
    let (h, w, c) = (logits.height(), logits.width(), logits.channels());
    let mut values = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let u = if c == 1 {
                -logits.get(i, j, 0).abs()
            } else {
                let (mut top1, mut top2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for ch in 0..c {
                    let v = logits.get(i, j, ch);
                    if v > top1 {
                        top2 = top1;
                        top1 = v;
                    } else if v > top2 {
                        top2 = v;
                    }
                }
                -(top1 - top2)
            };
            values.push(u);
        }
    }
    UncertaintyMap {
        grid: Grid2D::new(h, w, 1, values).expect("uncertainty values are finite"),
    }
}

/// Cell centers of the N most uncertain cells, ties broken by smaller
/// (row, col) lexicographic index.
pub fn select_top_uncertain(u: &UncertaintyMap, n: usize) -> Result<PointSet> {
    let grid = &u.grid;
    let cells = grid.height() * grid.width();
    if n > cells {
        return Err(Error::invalid(format!(
            "cannot select {n} points from {cells} cells"
        )));
    }
    let mut idx: Vec<usize> = (0..cells).collect();
    // Descending uncertainty; equal values keep row-major order (stable).
    idx.sort_by(|&a, &b| {
        grid.values()[b]
            .partial_cmp(&grid.values()[a])
            .expect("uncertainties are finite")
            .then(a.cmp(&b))
    });
    let points = idx[..n]
        .iter()
        .map(|&k| grid.cell_center(k / grid.width(), k % grid.width()))
        .collect();
    PointSet::new(points)
}

/// Biased random point sampling for training.
///
/// Draws `ceil(k*N)` uniform candidates, keeps the `floor(beta*N)` most
/// uncertain under `u_eval`, and fills the remainder with fresh uniform
/// points. Deterministic given the seed.
pub fn sample_training_points<F>(u_eval: F, cfg: &TrainSamplerConfig) -> Result<PointSet>
where
    F: Fn(f64, f64) -> f64,
{
    cfg.validate()?;
    let n = cfg.num_points;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let num_candidates = (cfg.oversample_factor * n as f64).ceil() as usize;
    let candidates: Vec<(f64, f64)> = (0..num_candidates)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();

    let num_keep = ((cfg.importance_ratio * n as f64).floor() as usize).min(n);
    let mut points = Vec::with_capacity(n);
    if num_keep > 0 {
        let mut order: Vec<usize> = (0..num_candidates).collect();
        let scores: Vec<f64> = candidates.iter().map(|&(x, y)| u_eval(x, y)).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        points.extend(order[..num_keep].iter().map(|&i| candidates[i]));
    }
    while points.len() < n {
        points.push((rng.gen::<f64>(), rng.gen::<f64>()));
    }
    PointSet::new(points)
}

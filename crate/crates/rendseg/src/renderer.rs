//! Adaptive-subdivision mask refinement: iteratively upsample the coarse
//! logit grid, select the most uncertain cells, and re-label them with the
//! point head.

use crate::error::{Error, Result};
use crate::grid::{bilinear_sample_one, scatter_points, upsample2x, Grid2D};
use crate::mask::DenseMask;
use crate::point_head::{forward, PointFeature, PointHeadParams};
use crate::sampling::{select_top_uncertain, uncertainty_from_logits};

#[derive(Debug, Clone)]
pub struct RenderConfig {
    /// Number of 2x subdivision steps.
    pub subdivision_steps: usize,
    /// Points re-labeled per step; 0 disables refinement entirely.
    pub points_per_step: usize,
    /// Foreground threshold on the probability scale.
    pub binarize_threshold: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            subdivision_steps: 5,
            points_per_step: 0,
            binarize_threshold: 0.5,
        }
    }
}

impl RenderConfig {
    /// Default point budget for a target output width: `width^2 / 16`.
    pub fn default_points_for_width(output_width: usize) -> usize {
        output_width * output_width / 16
    }
}

/// Bookkeeping counters from a refinement run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefineStats {
    pub head_evaluations: usize,
}

/// Refines a coarse single-channel logit grid to `coarse * 2^S` resolution.
///
/// Per step: upsample 2x, score uncertainty, pick the top-N cells, build each
/// point's feature from the current grid (coarse part) and the fine feature
/// grid, run the head, and scatter the new logits back.
pub fn refine(
    coarse_logits: &Grid2D,
    features: &Grid2D,
    head: &PointHeadParams,
    cfg: &RenderConfig,
) -> Result<Grid2D> {
    refine_with_stats(coarse_logits, features, head, cfg).map(|(g, _)| g)
}

pub fn refine_with_stats(
    coarse_logits: &Grid2D,
    features: &Grid2D,
    head: &PointHeadParams,
    cfg: &RenderConfig,
) -> Result<(Grid2D, RefineStats)> {
    if coarse_logits.channels() != 1 {
        return Err(Error::invalid("coarse logits must be single-channel"));
    }
    if cfg.points_per_step > 0 {
        if head.coarse_dim != 1 || head.fine_dim != features.channels() {
            return Err(Error::invalid(format!(
                "head expects coarse/fine dims ({}, {}), grids provide (1, {})",
                head.coarse_dim,
                head.fine_dim,
                features.channels()
            )));
        }
        let h1 = coarse_logits.height() * 2;
        let w1 = coarse_logits.width() * 2;
        if cfg.subdivision_steps > 0 && cfg.points_per_step > h1 * w1 {
            return Err(Error::invalid(format!(
                "points_per_step {} exceeds the {}x{} cell count of the first subdivision",
                cfg.points_per_step, h1, w1
            )));
        }
    }

    let mut current = coarse_logits.clone();
    let mut stats = RefineStats::default();
    for _ in 0..cfg.subdivision_steps {
        current = upsample2x(&current);
        if cfg.points_per_step == 0 {
            continue;
        }
        let uncertainty = uncertainty_from_logits(&current);
        let points = select_top_uncertain(&uncertainty, cfg.points_per_step)?;
        let mut new_logits = Vec::with_capacity(points.len());
        for (x, y) in points.iter() {
            let coarse = bilinear_sample_one(&current, x, y)?;
            let fine = bilinear_sample_one(features, x, y)?;
            let logit = forward(head, &PointFeature { coarse, fine })?;
            stats.head_evaluations += 1;
            new_logits.push(vec![logit]);
        }
        current = scatter_points(&current, &points, &new_logits)?;
    }
    Ok((current, stats))
}

/// Applies S-fold bilinear upsampling with no point refinement.
pub fn upsample_baseline(coarse_logits: &Grid2D, steps: usize) -> Grid2D {
    let mut current = coarse_logits.clone();
    for _ in 0..steps {
        current = upsample2x(&current);
    }
    current
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Thresholds a logit grid into a binary mask: foreground iff
/// `sigmoid(logit) >= threshold` (boundary inclusive).
pub fn binarize(logits: &Grid2D, threshold: f64) -> Result<DenseMask> {
    if logits.channels() != 1 {
        return Err(Error::invalid("binarize expects a single-channel grid"));
    }
    let mut mask = DenseMask::zeros(logits.height(), logits.width());
    for r in 0..logits.height() {
        for c in 0..logits.width() {
            mask.set(r, c, sigmoid(logits.get(r, c, 0)) >= threshold);
        }
    }
    Ok(mask)
}

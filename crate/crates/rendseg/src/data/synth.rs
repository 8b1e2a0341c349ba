//! Synthetic line-space defect dataset generator.
//!
//! Images are vertical bright lines on a dark background at a fixed pitch;
//! each image carries exactly one defect drawn from the five classes, with
//! an exact polygon ground truth. Defect material is rendered slightly
//! brighter than the lines so intensity is informative at mask borders.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::via::{AnnotationSet, ImageInfo, PolygonRegion};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::mask::{instance_from_dense, polygon_to_mask, rle_decode, DefectClass, MaskInstance};

const BG_LEVEL: f64 = 40.0;
const LINE_LEVEL: f64 = 190.0;
const DEFECT_LEVEL: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Reference dataset distribution: per class (train, val, test) image counts.
const DISTRIBUTION: [(DefectClass, [usize; 3]); 5] = [
    (DefectClass::ThinBridge, [240, 30, 30]),
    (DefectClass::SingleBridge, [240, 30, 30]),
    (DefectClass::MultiBridgeHorizontal, [160, 20, 20]),
    (DefectClass::MultiBridgeNonHorizontal, [80, 10, 10]),
    (DefectClass::LineCollapse, [200, 30, 30]),
];

const DISTRIBUTION_TOTAL: usize = 1160;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub image_size: usize,
    pub line_pitch: usize,
    pub line_width: usize,
    /// Gaussian pixel noise in gray levels.
    pub noise_sigma: f64,
    /// Total image count; per-class split counts follow the reference
    /// distribution proportions unless `class_counts` overrides them.
    pub total_images: usize,
    /// Optional per-class total override; each class still splits by its
    /// reference train/val/test row proportions.
    pub class_counts: Option<BTreeMap<DefectClass, usize>>,
    pub rng_seed: u64,
    /// Coarse logits are the ground truth downsampled by `2^coarse_steps`.
    pub coarse_steps: usize,
    pub label_smoothing: f64,
    /// Gaussian corruption added to the coarse logits.
    pub logit_noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_size: 480,
            line_pitch: 32,
            line_width: 16,
            noise_sigma: 8.0,
            total_images: 116,
            class_counts: None,
            rng_seed: 0,
            coarse_steps: 3,
            label_smoothing: 0.05,
            logit_noise_sigma: 0.25,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.line_width >= self.line_pitch {
            return Err(Error::Config("line_width must be < line_pitch".into()));
        }
        if self.line_width == 0 || self.line_pitch == 0 || self.image_size == 0 {
            return Err(Error::Config("geometry parameters must be positive".into()));
        }
        let factor = 1usize << self.coarse_steps;
        if self.image_size % factor != 0 {
            return Err(Error::Config(format!(
                "image_size {} not divisible by 2^coarse_steps = {}",
                self.image_size, factor
            )));
        }
        if self.num_lines() < 4 {
            return Err(Error::Config(
                "image too narrow: need at least 4 lines for multi-bridge defects".into(),
            ));
        }
        if self.image_size < 32 {
            return Err(Error::Config("image_size must be at least 32".into()));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return Err(Error::Config("label_smoothing must be in [0, 0.5)".into()));
        }
        Ok(())
    }

    fn num_lines(&self) -> usize {
        if self.image_size < self.line_width {
            return 0;
        }
        (self.image_size - self.line_width) / self.line_pitch + 1
    }

    /// Gaps bounded by a line on both sides.
    fn num_gaps(&self) -> usize {
        self.num_lines().saturating_sub(1)
    }

    fn gap_cols(&self, gap: usize) -> (usize, usize) {
        (
            gap * self.line_pitch + self.line_width,
            (gap + 1) * self.line_pitch,
        )
    }

    /// Per-class, per-split image counts.
    pub fn split_counts(&self) -> BTreeMap<DefectClass, [usize; 3]> {
        let mut out = BTreeMap::new();
        for (class, row) in DISTRIBUTION {
            let counts = match &self.class_counts {
                Some(overrides) => {
                    let n = *overrides.get(&class).unwrap_or(&0);
                    let row_total: usize = row.iter().sum();
                    let train =
                        (n as f64 * row[0] as f64 / row_total as f64).round() as usize;
                    let val = (n as f64 * row[1] as f64 / row_total as f64).round() as usize;
                    [train, val, n.saturating_sub(train + val)]
                }
                None => {
                    let scale = self.total_images as f64 / DISTRIBUTION_TOTAL as f64;
                    [
                        (row[0] as f64 * scale).round() as usize,
                        (row[1] as f64 * scale).round() as usize,
                        (row[2] as f64 * scale).round() as usize,
                    ]
                }
            };
            out.insert(class, counts);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub image_id: String,
    pub split: Split,
    /// Grayscale image, one channel of integer gray levels.
    pub image: Grid2D,
    pub instance: MaskInstance,
    pub polygon: PolygonRegion,
    /// Intensity + horizontal/vertical gradient channels, each in [-1, 1].
    pub features: Grid2D,
    /// Ground truth downsampled to coarse resolution and logit-mapped.
    pub coarse_logits: Grid2D,
}

#[derive(Debug, Clone, Default)]
pub struct SynthDataset {
    pub samples: Vec<SynthSample>,
    pub annotations: AnnotationSet,
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Samples one defect polygon for the given class.
fn sample_polygon(
    cfg: &SynthConfig,
    class: DefectClass,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = cfg.image_size as i64;
    let margin = 2i64;
    let gaps = cfg.num_gaps();
    let rect = |c0: i64, r0: i64, c1: i64, r1: i64| {
        (
            vec![c0 as f64, c1 as f64, c1 as f64, c0 as f64],
            vec![r0 as f64, r0 as f64, r1 as f64, r1 as f64],
        )
    };
    let row_start = |rng: &mut ChaCha8Rng, span: i64| -> Result<i64> {
        let hi = h - span - margin;
        if hi <= margin {
            return Err(Error::Config(format!(
                "defect span {span} does not fit image height {h}"
            )));
        }
        Ok(rng.gen_range(margin..hi))
    };

    match class {
        DefectClass::ThinBridge | DefectClass::SingleBridge => {
            let w = if class == DefectClass::ThinBridge {
                rng.gen_range(1..=2i64)
            } else {
                rng.gen_range(3..=5i64)
            };
            let gap = rng.gen_range(0..gaps);
            let (c0, c1) = cfg.gap_cols(gap);
            let r0 = row_start(rng, w)?;
            Ok(rect(c0 as i64, r0, c1 as i64, r0 + w))
        }
        DefectClass::LineCollapse => {
            let span = rng.gen_range((h / 4).max(8)..=(h / 2).max(9));
            let line = rng.gen_range(0..cfg.num_lines() - 1);
            let c0 = line * cfg.line_pitch;
            let c1 = (line + 1) * cfg.line_pitch + cfg.line_width;
            let r0 = row_start(rng, span)?;
            Ok(rect(c0 as i64, r0, c1 as i64, r0 + span))
        }
        DefectClass::MultiBridgeHorizontal => {
            let w = rng.gen_range(3..=6i64);
            let span_gaps = rng.gen_range(2..=gaps.min(3));
            let gap = rng.gen_range(0..=gaps - span_gaps);
            let (c0, _) = cfg.gap_cols(gap);
            let (_, c1) = cfg.gap_cols(gap + span_gaps - 1);
            let r0 = row_start(rng, w)?;
            Ok(rect(c0 as i64, r0, c1 as i64, r0 + w))
        }
        DefectClass::MultiBridgeNonHorizontal => {
            let w = rng.gen_range(3..=6i64);
            let span_gaps = rng.gen_range(2..=gaps.min(3));
            let gap = rng.gen_range(0..=gaps - span_gaps);
            let (c0, _) = cfg.gap_cols(gap);
            let (_, c1) = cfg.gap_cols(gap + span_gaps - 1);
            let max_shift = (h / 8).clamp(4, 24);
            let mut shift = rng.gen_range(4..=max_shift);
            if rng.gen::<bool>() {
                shift = -shift;
            }
            let lo = margin + (-shift).max(0);
            let hi = h - w - margin - shift.max(0);
            if hi <= lo {
                return Err(Error::Config(
                    "diagonal bridge does not fit image height".into(),
                ));
            }
            let r0 = rng.gen_range(lo..hi);
            Ok((
                vec![c0 as f64, c1 as f64, c1 as f64, c0 as f64],
                vec![
                    r0 as f64,
                    (r0 + shift) as f64,
                    (r0 + shift + w) as f64,
                    (r0 + w) as f64,
                ],
            ))
        }
    }
}

fn render_image(
    cfg: &SynthConfig,
    mask: &crate::mask::DenseMask,
    rng: &mut ChaCha8Rng,
) -> Grid2D {
    let n = cfg.image_size;
    let mut values = Vec::with_capacity(n * n);
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    for r in 0..n {
        for c in 0..n {
            let base = if mask.get(r, c) {
                DEFECT_LEVEL
            } else if c % cfg.line_pitch < cfg.line_width {
                LINE_LEVEL
            } else {
                BG_LEVEL
            };
            let noisy = if cfg.noise_sigma > 0.0 {
                base + noise.sample(rng)
            } else {
                base
            };
            values.push(noisy.clamp(0.0, 255.0).round());
        }
    }
    Grid2D::new(n, n, 1, values).expect("rendered image is finite")
}

/// Intensity plus central-difference gradients, all scaled to roughly [-1, 1].
fn feature_grid(image: &Grid2D) -> Grid2D {
    let (h, w) = (image.height(), image.width());
    let at = |r: usize, c: usize| image.get(r, c, 0) / 255.0;
    let mut values = Vec::with_capacity(h * w * 3);
    for r in 0..h {
        for c in 0..w {
            let intensity = at(r, c);
            let dx = (at(r, (c + 1).min(w - 1)) - at(r, c.saturating_sub(1))) / 2.0;
            let dy = (at((r + 1).min(h - 1), c) - at(r.saturating_sub(1), c)) / 2.0;
            values.push(intensity);
            values.push(dx);
            values.push(dy);
        }
    }
    Grid2D::new(h, w, 3, values).expect("features are finite")
}

fn coarse_logits(
    cfg: &SynthConfig,
    mask: &crate::mask::DenseMask,
    rng: &mut ChaCha8Rng,
) -> Grid2D {
    let factor = 1usize << cfg.coarse_steps;
    let (ch, cw) = (mask.height / factor, mask.width / factor);
    let eps = cfg.label_smoothing;
    let noise = Normal::new(0.0, cfg.logit_noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut values = Vec::with_capacity(ch * cw);
    for bi in 0..ch {
        for bj in 0..cw {
            let mut fg = 0usize;
            for r in bi * factor..(bi + 1) * factor {
                for c in bj * factor..(bj + 1) * factor {
                    fg += mask.get(r, c) as usize;
                }
            }
            let p = fg as f64 / (factor * factor) as f64;
            let smoothed = p * (1.0 - 2.0 * eps) + eps;
            let mut logit = (smoothed / (1.0 - smoothed)).ln();
            if cfg.logit_noise_sigma > 0.0 {
                logit += noise.sample(rng);
            }
            values.push(logit);
        }
    }
    Grid2D::new(ch, cw, 1, values).expect("coarse logits are finite")
}

/// Generates the full dataset: images, exact annotations, feature grids, and
/// coarse logit grids. Deterministic per seed; each image uses a seed derived
/// from the dataset seed and the image index.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let counts = cfg.split_counts();

    let mut dataset = SynthDataset::default();
    let mut index = 0usize;
    for (si, split) in Split::ALL.iter().enumerate() {
        for class in DefectClass::ALL {
            let n = counts.get(&class).map_or(0, |row| row[si]);
            for _ in 0..n {
                let image_id = format!("{}_{:05}.pgm", split.name(), index);
                let mut rng =
                    ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ splitmix(index as u64));
                let (xs, ys) = sample_polygon(cfg, class, &mut rng)?;
                let mask_rle = polygon_to_mask(&xs, &ys, cfg.image_size, cfg.image_size)?;
                let dense = rle_decode(&mask_rle)?;
                if dense.count_foreground() == 0 {
                    return Err(Error::Config(format!(
                        "generated {class} defect rasterized to an empty mask"
                    )));
                }
                let instance = instance_from_dense(&image_id, class, 1.0, &dense)?;
                let image = render_image(cfg, &dense, &mut rng);
                let features = feature_grid(&image);
                let coarse = coarse_logits(cfg, &dense, &mut rng);

                dataset.annotations.images.insert(
                    image_id.clone(),
                    ImageInfo {
                        height: cfg.image_size,
                        width: cfg.image_size,
                        source_path: image_id.clone(),
                    },
                );
                dataset.annotations.instances.push(instance.clone());
                dataset.samples.push(SynthSample {
                    image_id: image_id.clone(),
                    split: *split,
                    image,
                    instance,
                    polygon: PolygonRegion {
                        image_id,
                        class_id: class,
                        xs,
                        ys,
                    },
                    features,
                    coarse_logits: coarse,
                });
                index += 1;
            }
        }
    }
    dataset.annotations.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{mask_area, mask_to_bbox};

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            image_size: 128,
            total_images: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn noiseless_thin_bridge_area_is_analytic() {
        let cfg = SynthConfig {
            image_size: 128,
            noise_sigma: 0.0,
            class_counts: Some(
                [(DefectClass::ThinBridge, 10usize)].into_iter().collect(),
            ),
            ..SynthConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(!ds.samples.is_empty());
        let gap_width = (cfg.line_pitch - cfg.line_width) as usize;
        for s in &ds.samples {
            let area = mask_area(&s.instance.mask);
            assert!(
                area == gap_width || area == 2 * gap_width,
                "thin bridge area {area}, expected width * (pitch - line_width)"
            );
        }
    }

    #[test]
    fn determinism_per_seed() {
        let cfg = small_cfg();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.instance, y.instance);
            assert_eq!(x.coarse_logits, y.coarse_logits);
        }
    }

    #[test]
    fn table_proportions_at_total_116() {
        let cfg = SynthConfig {
            total_images: 116,
            ..SynthConfig::default()
        };
        let counts = cfg.split_counts();
        assert_eq!(counts[&DefectClass::ThinBridge], [24, 3, 3]);
        assert_eq!(counts[&DefectClass::SingleBridge], [24, 3, 3]);
        assert_eq!(counts[&DefectClass::MultiBridgeHorizontal], [16, 2, 2]);
        assert_eq!(counts[&DefectClass::MultiBridgeNonHorizontal], [8, 1, 1]);
        assert_eq!(counts[&DefectClass::LineCollapse], [20, 3, 3]);
        let total: usize = counts.values().flat_map(|r| r.iter()).sum();
        assert_eq!(total, 116);
    }

    #[test]
    fn instances_are_internally_consistent() {
        let ds = generate_synthetic(&small_cfg()).unwrap();
        for s in &ds.samples {
            let bbox = mask_to_bbox(&s.instance.mask).unwrap();
            assert_eq!(bbox, s.instance.bbox, "{}", s.image_id);
            assert!(mask_area(&s.instance.mask) > 0);
            let dense = rle_decode(&s.instance.mask).unwrap();
            assert_eq!(mask_area(&s.instance.mask), dense.count_foreground());
        }
    }

    #[test]
    fn infeasible_geometry_rejected() {
        let cfg = SynthConfig {
            image_size: 64,
            line_pitch: 40,
            line_width: 16,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn coarse_grid_has_expected_shape() {
        let ds = generate_synthetic(&small_cfg()).unwrap();
        let s = &ds.samples[0];
        assert_eq!(s.coarse_logits.height(), 128 >> 3);
        assert_eq!(s.coarse_logits.width(), 128 >> 3);
        assert_eq!(s.features.channels(), 3);
    }
}

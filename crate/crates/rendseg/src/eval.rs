//! COCO-style average precision: greedy matching, 101-point interpolated
//! precision-recall integration, per-class AP, and mAP across IoU thresholds
//! and object-area regimes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{bbox_iou, mask_area, mask_iou, DefectClass, MaskInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Bbox,
    Segmentation,
}

/// Named pixel-area interval; instances with area outside it are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl AreaRange {
    pub fn new(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            min,
            max,
        }
    }

    pub fn all() -> Self {
        Self::new("all", 0.0, f64::INFINITY)
    }

    fn contains(&self, area: f64) -> bool {
        area > self.min && area <= self.max || (self.min == 0.0 && area == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Strictly increasing IoU thresholds in (0, 1].
    pub iou_thresholds: Vec<f64>,
    pub area_ranges: Vec<AreaRange>,
    pub mode: EvalMode,
    /// Error on predictions whose class has no ground truth, instead of
    /// skipping them.
    pub strict_classes: bool,
    /// Optional per-image detection cap (COCO parity); unlimited if None.
    pub max_detections: Option<usize>,
}

impl EvalConfig {
    pub fn default_thresholds() -> Vec<f64> {
        (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
    }

    pub fn default_area_ranges() -> Vec<AreaRange> {
        vec![
            AreaRange::all(),
            AreaRange::new("medium", 32.0 * 32.0, 96.0 * 96.0),
            AreaRange::new("large", 96.0 * 96.0, f64::INFINITY),
        ]
    }

    pub fn new(mode: EvalMode) -> Self {
        Self {
            iou_thresholds: Self::default_thresholds(),
            area_ranges: Self::default_area_ranges(),
            mode,
            strict_classes: false,
            max_detections: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::invalid("no IoU thresholds"));
        }
        for w in self.iou_thresholds.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("IoU thresholds must be strictly increasing"));
            }
        }
        if self
            .iou_thresholds
            .iter()
            .any(|&t| !(0.0 < t && t <= 1.0))
        {
            return Err(Error::invalid("IoU thresholds must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Per-prediction match outcome at one IoU threshold and area range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    TruePositive,
    FalsePositive,
    /// Matched an out-of-range GT, or unmatched with out-of-range area;
    /// dropped from scoring.
    Ignored,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    /// One label per prediction, in descending-score visit order.
    pub pred_labels: Vec<MatchLabel>,
    /// Scores in the same order as `pred_labels`.
    pub pred_scores: Vec<f64>,
    /// Whether each GT (input order) was matched.
    pub gt_matched: Vec<bool>,
    /// Number of GTs inside the area range.
    pub num_counted_gt: usize,
}

fn instance_iou(a: &MaskInstance, b: &MaskInstance, mode: EvalMode) -> Result<f64> {
    match mode {
        EvalMode::Bbox => Ok(bbox_iou(&a.bbox, &b.bbox)),
        EvalMode::Segmentation => mask_iou(&a.mask, &b.mask),
    }
}

fn instance_area(inst: &MaskInstance, mode: EvalMode) -> f64 {
    match mode {
        EvalMode::Bbox => inst.bbox.area(),
        EvalMode::Segmentation => mask_area(&inst.mask) as f64,
    }
}

/// Greedy single-consumption matching of predictions to ground truths.
///
/// Predictions are visited in descending score (ties by input order); each
/// takes the unmatched in-range GT with highest IoU >= `iou_thr`. GTs outside
/// `area_range` are ignored-not-penalized: a prediction may still match one,
/// but is then dropped from scoring, as is an unmatched prediction whose own
/// area falls outside the range.
pub fn match_detections(
    preds: &[&MaskInstance],
    gts: &[&MaskInstance],
    iou_thr: f64,
    mode: EvalMode,
    area_range: &AreaRange,
) -> Result<MatchResult> {
    let gt_ignore: Vec<bool> = gts
        .iter()
        .map(|g| !area_range.contains(instance_area(g, mode)))
        .collect();

    // Visit order: predictions by descending score; GTs with in-range ones first.
    let mut pred_order: Vec<usize> = (0..preds.len()).collect();
    pred_order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut gt_order: Vec<usize> = (0..gts.len()).collect();
    gt_order.sort_by_key(|&g| gt_ignore[g]);

    let mut gt_matched = vec![false; gts.len()];
    let mut pred_labels = Vec::with_capacity(preds.len());
    let mut pred_scores = Vec::with_capacity(preds.len());

    for &p in &pred_order {
        let mut best: Option<usize> = None;
        let mut best_iou = iou_thr.min(1.0 - 1e-10);
        for &g in &gt_order {
            if gt_matched[g] && !gt_ignore[g] {
                continue;
            }
            // In-range GTs come first; once a real match exists, do not
            // trade it for an ignored GT.
            if let Some(b) = best {
                if !gt_ignore[b] && gt_ignore[g] {
                    break;
                }
            }
            let iou = instance_iou(preds[p], gts[g], mode)?;
            if iou >= best_iou && iou > 0.0 {
                best = Some(g);
                best_iou = iou;
            }
        }
        let label = match best {
            Some(g) if !gt_ignore[g] => {
                gt_matched[g] = true;
                MatchLabel::TruePositive
            }
            Some(g) => {
                gt_matched[g] = true;
                MatchLabel::Ignored
            }
            None => {
                if area_range.contains(instance_area(preds[p], mode)) {
                    MatchLabel::FalsePositive
                } else {
                    MatchLabel::Ignored
                }
            }
        };
        pred_labels.push(label);
        pred_scores.push(preds[p].score);
    }

    Ok(MatchResult {
        pred_labels,
        pred_scores,
        gt_matched,
        num_counted_gt: gt_ignore.iter().filter(|&&ig| !ig).count(),
    })
}

/// 101-point interpolated average precision.
///
/// `labels` must be ordered by descending score; ignored predictions must
/// already be dropped. Returns None when there is nothing to score
/// (`num_gt == 0`), which excludes the class from the mean.
pub fn average_precision(labels: &[bool], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut precisions = Vec::with_capacity(labels.len());
    let mut recalls = Vec::with_capacity(labels.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for &is_tp in labels {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / num_gt as f64);
    }
    // Make precision monotonically non-increasing from the right.
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        if precisions[i] < precisions[i + 1] {
            precisions[i] = precisions[i + 1];
        }
    }
    let mut total = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        // First index with recall >= r.
        let idx = recalls.partition_point(|&rc| rc < r);
        if idx < precisions.len() {
            total += precisions[idx];
        }
    }
    Some(total / 101.0)
}

/// Per-class and mean AP across IoU thresholds and area regimes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct APReport {
    pub mode: EvalMode,
    /// Per-class AP averaged over all IoU thresholds, all-area range.
    pub per_class: BTreeMap<String, f64>,
    /// Mean of `per_class`.
    pub map: f64,
    /// mAP at IoU 0.50 / 0.75 (all-area), when those thresholds are present.
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    /// mAP (mean over classes and thresholds) per named area range.
    pub area_map: BTreeMap<String, f64>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// AP for one class at one threshold and area range, pooling detections
/// across images.
fn class_ap(
    preds: &[&MaskInstance],
    gts: &[&MaskInstance],
    iou_thr: f64,
    cfg: &EvalConfig,
    range: &AreaRange,
) -> Result<Option<f64>> {
    // Group per image; matching is per-image, scoring is pooled.
    let mut image_ids: Vec<&str> = preds
        .iter()
        .chain(gts.iter())
        .map(|i| i.image_id.as_str())
        .collect();
    image_ids.sort_unstable();
    image_ids.dedup();

    let mut scored: Vec<(f64, bool)> = Vec::new();
    let mut num_gt = 0usize;
    for image_id in image_ids {
        let mut img_preds: Vec<&MaskInstance> = preds
            .iter()
            .copied()
            .filter(|p| p.image_id == image_id)
            .collect();
        img_preds.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(cap) = cfg.max_detections {
            img_preds.truncate(cap);
        }
        let img_gts: Vec<&MaskInstance> = gts
            .iter()
            .copied()
            .filter(|g| g.image_id == image_id)
            .collect();
        let result = match_detections(&img_preds, &img_gts, iou_thr, cfg.mode, range)?;
        num_gt += result.num_counted_gt;
        for (label, score) in result.pred_labels.iter().zip(&result.pred_scores) {
            match label {
                MatchLabel::TruePositive => scored.push((*score, true)),
                MatchLabel::FalsePositive => scored.push((*score, false)),
                MatchLabel::Ignored => {}
            }
        }
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let labels: Vec<bool> = scored.iter().map(|&(_, tp)| tp).collect();
    Ok(average_precision(&labels, num_gt))
}

/// Full evaluation over all classes, thresholds, and area ranges.
pub fn evaluate(
    preds: &[MaskInstance],
    gts: &[MaskInstance],
    cfg: &EvalConfig,
) -> Result<APReport> {
    cfg.validate()?;

    let gt_classes: Vec<DefectClass> = {
        let mut cs: Vec<DefectClass> = gts.iter().map(|g| g.class_id).collect();
        cs.sort_unstable();
        cs.dedup();
        cs
    };
    if cfg.strict_classes {
        for p in preds {
            if !gt_classes.contains(&p.class_id) {
                return Err(Error::invalid(format!(
                    "prediction class {} has no ground truth (strict mode)",
                    p.class_id
                )));
            }
        }
    }

    // ap[class][range][threshold]
    let mut per_class = BTreeMap::new();
    let mut area_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut ap50_values = Vec::new();
    let mut ap75_values = Vec::new();
    let mut map_values = Vec::new();

    for &class in &gt_classes {
        let class_preds: Vec<&MaskInstance> =
            preds.iter().filter(|p| p.class_id == class).collect();
        let class_gts: Vec<&MaskInstance> = gts.iter().filter(|g| g.class_id == class).collect();

        for range in &cfg.area_ranges {
            let mut threshold_aps = Vec::new();
            for &thr in &cfg.iou_thresholds {
                let ap = class_ap(&class_preds, &class_gts, thr, cfg, range)?;
                if let Some(ap) = ap {
                    threshold_aps.push(ap);
                    if range.name == "all" {
                        if (thr - 0.5).abs() < 1e-9 {
                            ap50_values.push(ap);
                        }
                        if (thr - 0.75).abs() < 1e-9 {
                            ap75_values.push(ap);
                        }
                    }
                }
            }
            if threshold_aps.is_empty() {
                continue;
            }
            let class_range_ap = mean(&threshold_aps);
            if range.name == "all" {
                per_class.insert(class.name().to_string(), class_range_ap);
                map_values.push(class_range_ap);
            }
            area_values
                .entry(range.name.clone())
                .or_default()
                .push(class_range_ap);
        }
    }

    let area_map = area_values
        .into_iter()
        .map(|(name, vals)| (name, mean(&vals)))
        .collect();
    Ok(APReport {
        mode: cfg.mode,
        per_class,
        map: mean(&map_values),
        ap50: (!ap50_values.is_empty()).then(|| mean(&ap50_values)),
        ap75: (!ap75_values.is_empty()).then(|| mean(&ap75_values)),
        area_map,
    })
}

/// Relative improvement in percent: `100 * (improved - baseline) / baseline`.
pub fn relative_improvement(baseline: f64, improved: f64) -> Result<f64> {
    if baseline <= 0.0 {
        return Err(Error::invalid("baseline must be positive"));
    }
    Ok(100.0 * (improved - baseline) / baseline)
}

/// Renders a report pair (or a single report) as an aligned text table with
/// per-class rows and a Total (mAP) row.
pub fn format_report_table(bbox: Option<&APReport>, segm: Option<&APReport>) -> String {
    let mut classes: Vec<String> = Vec::new();
    for report in [bbox, segm].into_iter().flatten() {
        for c in report.per_class.keys() {
            if !classes.contains(c) {
                classes.push(c.clone());
            }
        }
    }
    classes.sort();

    let mut out = String::new();
    let name_w = classes
        .iter()
        .map(|c| c.len())
        .chain(["Total (mAP)".len()])
        .max()
        .unwrap_or(12)
        + 2;
    out.push_str(&format!("{:<name_w$}{:>12}{:>18}\n", "Class Name", "BBox AP", "Segmentation AP"));
    let cell = |r: Option<&APReport>, c: &str| -> String {
        match r.and_then(|r| r.per_class.get(c)) {
            Some(v) => format!("{v:.3}"),
            None => "-".to_string(),
        }
    };
    for c in &classes {
        out.push_str(&format!(
            "{:<name_w$}{:>12}{:>18}\n",
            c,
            cell(bbox, c),
            cell(segm, c)
        ));
    }
    let total = |r: Option<&APReport>| -> String {
        match r {
            Some(r) => format!("{:.3}", r.map),
            None => "-".to_string(),
        }
    };
    out.push_str(&format!(
        "{:<name_w$}{:>12}{:>18}\n",
        "Total (mAP)",
        total(bbox),
        total(segm)
    ));
    out
}

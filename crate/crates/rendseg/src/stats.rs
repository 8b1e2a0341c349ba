//! Per-class descriptive statistics of predicted mask areas and box-plot
//! series emission.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mask::{mask_area, DefectClass, MaskInstance};

/// Count / mean / std / min / quartiles / max for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaStats {
    pub class_id: DefectClass,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 by convention when
    /// `count == 1`, flagged via `single_sample`.
    pub std: f64,
    pub single_sample: bool,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile over a sorted sample: position `q * (n-1)`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn stats_for(class_id: DefectClass, mut areas: Vec<f64>) -> AreaStats {
    areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = areas.len();
    let mean = areas.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (areas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    AreaStats {
        class_id,
        count: n,
        mean,
        std,
        single_sample: n == 1,
        min: areas[0],
        q25: quantile(&areas, 0.25),
        q50: quantile(&areas, 0.50),
        q75: quantile(&areas, 0.75),
        max: areas[n - 1],
    }
}

/// Per-class area statistics over all instances, one row per class present.
pub fn area_statistics(instances: &[MaskInstance]) -> Vec<AreaStats> {
    let mut by_class: BTreeMap<DefectClass, Vec<f64>> = BTreeMap::new();
    for inst in instances {
        by_class
            .entry(inst.class_id)
            .or_default()
            .push(mask_area(&inst.mask) as f64);
    }
    by_class
        .into_iter()
        .map(|(class, areas)| stats_for(class, areas))
        .collect()
}

/// Box-plot coordinates for one class: box at the quartiles, whiskers at
/// 1.5 IQR clipped to the data extremes, points beyond listed as outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSeries {
    pub class_id: DefectClass,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Box-plot series per class, recomputed from the raw instance areas.
pub fn boxplot_series(instances: &[MaskInstance]) -> Vec<BoxplotSeries> {
    let mut by_class: BTreeMap<DefectClass, Vec<f64>> = BTreeMap::new();
    for inst in instances {
        by_class
            .entry(inst.class_id)
            .or_default()
            .push(mask_area(&inst.mask) as f64);
    }
    by_class
        .into_iter()
        .map(|(class_id, mut areas)| {
            areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q25 = quantile(&areas, 0.25);
            let q50 = quantile(&areas, 0.50);
            let q75 = quantile(&areas, 0.75);
            let iqr = q75 - q25;
            let low_fence = q25 - 1.5 * iqr;
            let high_fence = q75 + 1.5 * iqr;
            let inliers: Vec<f64> = areas
                .iter()
                .copied()
                .filter(|&a| a >= low_fence && a <= high_fence)
                .collect();
            let whisker_low = inliers.first().copied().unwrap_or(q25);
            let whisker_high = inliers.last().copied().unwrap_or(q75);
            let outliers = areas
                .iter()
                .copied()
                .filter(|&a| a < low_fence || a > high_fence)
                .collect();
            BoxplotSeries {
                class_id,
                q25,
                q50,
                q75,
                whisker_low,
                whisker_high,
                outliers,
            }
        })
        .collect()
}

/// Aligned text table with the Count/Mean/Std/Min/25%/50%/75%/Max columns.
pub fn format_stats_table(stats: &[AreaStats]) -> String {
    let name_w = stats
        .iter()
        .map(|s| s.class_id.name().len())
        .chain(["Defect Class".len()])
        .max()
        .unwrap_or(12)
        + 2;
    let mut out = format!(
        "{:<name_w$}{:>7}{:>10}{:>10}{:>9}{:>9}{:>9}{:>9}{:>9}\n",
        "Defect Class", "Count", "Mean", "Std", "Min", "25%", "50%", "75%", "Max"
    );
    for s in stats {
        out.push_str(&format!(
            "{:<name_w$}{:>7}{:>10.1}{:>10.1}{:>9.1}{:>9.1}{:>9.1}{:>9.1}{:>9.1}\n",
            s.class_id.name(),
            s.count,
            s.mean,
            s.std,
            s.min,
            s.q25,
            s.q50,
            s.q75,
            s.max
        ));
    }
    out
}

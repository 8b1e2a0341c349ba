//! Binary mask representation (column-major RLE), geometric derivations, and
//! even-odd polygon rasterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five defect classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectClass {
    ThinBridge,
    SingleBridge,
    LineCollapse,
    MultiBridgeHorizontal,
    MultiBridgeNonHorizontal,
}

impl DefectClass {
    pub const ALL: [DefectClass; 5] = [
        DefectClass::ThinBridge,
        DefectClass::SingleBridge,
        DefectClass::LineCollapse,
        DefectClass::MultiBridgeHorizontal,
        DefectClass::MultiBridgeNonHorizontal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DefectClass::ThinBridge => "thin_bridge",
            DefectClass::SingleBridge => "single_bridge",
            DefectClass::LineCollapse => "line_collapse",
            DefectClass::MultiBridgeHorizontal => "multi_bridge_horizontal",
            DefectClass::MultiBridgeNonHorizontal => "multi_bridge_non_horizontal",
        }
    }

    /// Human-readable label as used in annotation tools ("thin bridge", ...).
    pub fn display_name(&self) -> &'static str {
        match self {
            DefectClass::ThinBridge => "thin bridge",
            DefectClass::SingleBridge => "single bridge",
            DefectClass::LineCollapse => "line collapse",
            DefectClass::MultiBridgeHorizontal => "multi bridge horizontal",
            DefectClass::MultiBridgeNonHorizontal => "multi bridge non-horizontal",
        }
    }

    /// Parses either the snake_case identifier or the annotation-tool label,
    /// case-insensitively.
    pub fn parse(name: &str) -> Option<DefectClass> {
        let canon: String = name
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        DefectClass::ALL.iter().copied().find(|c| c.name() == canon)
    }
}

impl std::fmt::Display for DefectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense binary mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl DenseMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Run-length encoded binary mask: column-major scan order, runs alternate
/// background/foreground starting with a background run (possibly zero).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    /// `[height, width]`, matching the serialized `size` field.
    pub size: [usize; 2],
    pub counts: Vec<usize>,
}

impl BinaryMask {
    pub fn height(&self) -> usize {
        self.size[0]
    }

    pub fn width(&self) -> usize {
        self.size[1]
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.counts.iter().sum();
        if total != self.height() * self.width() {
            return Err(Error::CorruptMask(format!(
                "run sum {} != {}x{}",
                total,
                self.height(),
                self.width()
            )));
        }
        if self.counts.iter().skip(1).any(|&c| c == 0) {
            return Err(Error::CorruptMask("interior zero-length run".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box: top-left `(x, y)` in pixel coordinates plus extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// One defect prediction or annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskInstance {
    pub image_id: String,
    pub class_id: DefectClass,
    pub score: f64,
    pub bbox: BBox,
    pub mask: BinaryMask,
}

pub fn rle_encode(dense: &DenseMask) -> BinaryMask {
    let mut counts = Vec::new();
    let mut current = false; // RLE starts with a background run
    let mut run = 0usize;
    for col in 0..dense.width {
        for row in 0..dense.height {
            let v = dense.get(row, col);
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push(run);
    BinaryMask {
        size: [dense.height, dense.width],
        counts,
    }
}

pub fn rle_decode(mask: &BinaryMask) -> Result<DenseMask> {
    mask.validate()?;
    let (h, w) = (mask.height(), mask.width());
    let mut dense = DenseMask::zeros(h, w);
    let mut pos = 0usize;
    let mut value = false;
    for &run in &mask.counts {
        if value {
            for k in pos..pos + run {
                // Column-major scan: index k is column k/h, row k%h.
                dense.set(k % h, k / h, true);
            }
        }
        pos += run;
        value = !value;
    }
    Ok(dense)
}

/// Foreground pixel count, straight from the odd (foreground) runs.
pub fn mask_area(mask: &BinaryMask) -> usize {
    mask.counts.iter().skip(1).step_by(2).sum()
}

pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.size != b.size {
        return Err(Error::invalid(format!(
            "mask size mismatch: {:?} vs {:?}",
            a.size, b.size
        )));
    }
    let da = rle_decode(a)?;
    let db = rle_decode(b)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in da.data.iter().zip(&db.data) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Tight bounding box of the foreground; a mask with no foreground yields a
/// zero-extent box at the origin.
pub fn mask_to_bbox(mask: &BinaryMask) -> Result<BBox> {
    let dense = rle_decode(mask)?;
    let mut min_r = usize::MAX;
    let mut min_c = usize::MAX;
    let mut max_r = 0usize;
    let mut max_c = 0usize;
    let mut any = false;
    for r in 0..dense.height {
        for c in 0..dense.width {
            if dense.get(r, c) {
                any = true;
                min_r = min_r.min(r);
                min_c = min_c.min(c);
                max_r = max_r.max(r);
                max_c = max_c.max(c);
            }
        }
    }
    if !any {
        return Ok(BBox {
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 0.0,
        });
    }
    Ok(BBox {
        x: min_c as f64,
        y: min_r as f64,
        w: (max_c - min_c + 1) as f64,
        h: (max_r - min_r + 1) as f64,
    })
}

fn point_on_segment(px: f64, py: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> bool {
    let cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
    let scale = (x2 - x1).abs().max((y2 - y1).abs()).max(1.0);
    if cross.abs() > 1e-9 * scale {
        return false;
    }
    let dot = (px - x1) * (x2 - x1) + (py - y1) * (y2 - y1);
    let len2 = (x2 - x1) * (x2 - x1) + (y2 - y1) * (y2 - y1);
    dot >= -1e-9 && dot <= len2 + 1e-9
}

/// Even-odd scanline rasterization at pixel centers `(c + 0.5, r + 0.5)`.
/// Pixel centers lying exactly on a polygon edge count as inside.
pub fn polygon_to_mask(xs: &[f64], ys: &[f64], height: usize, width: usize) -> Result<BinaryMask> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("polygon coordinate lists differ in length"));
    }
    if xs.len() < 3 {
        return Err(Error::invalid("degenerate polygon: fewer than 3 vertices"));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite polygon vertex"));
    }
    let n = xs.len();
    let mut dense = DenseMask::zeros(height, width);

    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let row_lo = (y_min - 1.0).max(0.0) as usize;
    let row_hi = ((y_max + 1.0).min(height as f64) as usize).min(height);

    let mut xings: Vec<f64> = Vec::new();
    for row in row_lo..row_hi {
        let y = row as f64 + 0.5;
        xings.clear();
        for i in 0..n {
            let (x1, y1) = (xs[i], ys[i]);
            let (x2, y2) = (xs[(i + 1) % n], ys[(i + 1) % n]);
            // Half-open rule so shared vertices count once.
            if (y1 <= y && y < y2) || (y2 <= y && y < y1) {
                xings.push(x1 + (y - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        xings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xings.chunks_exact(2) {
            let (x_enter, x_exit) = (pair[0], pair[1]);
            // Centers x = c + 0.5 with x_enter <= x < x_exit.
            let c_lo = (x_enter - 0.5).ceil().max(0.0) as usize;
            let c_hi = ((x_exit - 0.5).ceil().max(0.0) as usize).min(width);
            for c in c_lo..c_hi.min(width) {
                dense.set(row, c, true);
            }
        }
    }

    // On-edge pixels count as inside regardless of parity.
    for i in 0..n {
        let (x1, y1) = (xs[i], ys[i]);
        let (x2, y2) = (xs[(i + 1) % n], ys[(i + 1) % n]);
        let c_lo = (x1.min(x2) - 1.0).max(0.0) as usize;
        let c_hi = ((x1.max(x2) + 1.0).min(width as f64) as usize).min(width);
        let r_lo = (y1.min(y2) - 1.0).max(0.0) as usize;
        let r_hi = ((y1.max(y2) + 1.0).min(height as f64) as usize).min(height);
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                if !dense.get(r, c)
                    && point_on_segment(c as f64 + 0.5, r as f64 + 0.5, x1, y1, x2, y2)
                {
                    dense.set(r, c, true);
                }
            }
        }
    }
    Ok(rle_encode(&dense))
}

/// Builds a full MaskInstance from a dense mask, deriving the tight bbox.
pub fn instance_from_dense(
    image_id: &str,
    class_id: DefectClass,
    score: f64,
    dense: &DenseMask,
) -> Result<MaskInstance> {
    let mask = rle_encode(dense);
    let bbox = mask_to_bbox(&mask)?;
    Ok(MaskInstance {
        image_id: image_id.to_string(),
        class_id,
        score,
        bbox,
        mask,
    })
}

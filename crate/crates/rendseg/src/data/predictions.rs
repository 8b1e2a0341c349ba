//! Prediction JSON: an array of
//! `{image_id, class, score, bbox: [x, y, w, h], mask: {size, counts}}`.
//! Saving is canonical (fixed key order, standard float formatting) so that
//! save-load-save is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask, DefectClass, MaskInstance};

#[derive(Debug, Serialize, Deserialize)]
struct PredRecord {
    image_id: String,
    class: DefectClass,
    score: f64,
    bbox: [f64; 4],
    mask: BinaryMask,
}

impl From<&MaskInstance> for PredRecord {
    fn from(inst: &MaskInstance) -> Self {
        Self {
            image_id: inst.image_id.clone(),
            class: inst.class_id,
            score: inst.score,
            bbox: [inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h],
            mask: inst.mask.clone(),
        }
    }
}

impl TryFrom<PredRecord> for MaskInstance {
    type Error = Error;

    fn try_from(rec: PredRecord) -> Result<MaskInstance> {
        rec.mask.validate()?;
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(Error::invalid(format!(
                "field score: {} outside [0, 1]",
                rec.score
            )));
        }
        Ok(MaskInstance {
            image_id: rec.image_id,
            class_id: rec.class,
            score: rec.score,
            bbox: BBox {
                x: rec.bbox[0],
                y: rec.bbox[1],
                w: rec.bbox[2],
                h: rec.bbox[3],
            },
            mask: rec.mask,
        })
    }
}

pub fn predictions_to_json(instances: &[MaskInstance]) -> String {
    let records: Vec<PredRecord> = instances.iter().map(PredRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("prediction records always serialize")
}

pub fn predictions_from_json(json: &str, path: &str) -> Result<Vec<MaskInstance>> {
    let records: Vec<PredRecord> = serde_json::from_str(json).map_err(|e| Error::Parse {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    records.into_iter().map(MaskInstance::try_from).collect()
}

pub fn save_predictions(instances: &[MaskInstance], path: &Path) -> Result<()> {
    std::fs::write(path, predictions_to_json(instances)).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<Vec<MaskInstance>> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    predictions_from_json(&json, &path.display().to_string())
}

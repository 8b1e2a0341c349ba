//! VGG Image Annotator (VIA) project JSON ingestion and export.
//!
//! Accepts either a full project export (regions under `_via_img_metadata`)
//! or the bare image-metadata map. Polygon regions are rasterized with the
//! even-odd fill; the region attribute holding the class name is
//! configurable and defaults to `"class"`.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mask::{instance_from_dense, polygon_to_mask, rle_decode, DefectClass, MaskInstance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInfo {
    pub height: usize,
    pub width: usize,
    pub source_path: String,
}

/// Ground-truth annotations: image registry plus instances with score 1.0.
#[derive(Debug, Clone, Default)]
pub struct AnnotationSet {
    pub images: BTreeMap<String, ImageInfo>,
    pub instances: Vec<MaskInstance>,
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<()> {
        for inst in &self.instances {
            let info = self.images.get(&inst.image_id).ok_or_else(|| {
                Error::invalid(format!("instance references unknown image {}", inst.image_id))
            })?;
            if inst.mask.size != [info.height, info.width] {
                return Err(Error::invalid(format!(
                    "mask size {:?} does not fit image {} ({}x{})",
                    inst.mask.size, inst.image_id, info.height, info.width
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ViaConfig {
    /// Region attribute key holding the class name.
    pub class_key: String,
    /// Fallback image dimensions when the project carries none.
    pub default_size: (usize, usize),
    /// Error on unknown class names instead of skipping the region.
    pub strict: bool,
}

impl Default for ViaConfig {
    fn default() -> Self {
        Self {
            class_key: "class".to_string(),
            default_size: (480, 480),
            strict: true,
        }
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
}

fn coord_list(v: &Value, path: &str) -> Result<Vec<f64>> {
    v.as_array()
        .map(|arr| arr.iter().filter_map(|x| x.as_f64()).collect())
        .ok_or_else(|| Error::Parse {
            path: path.to_string(),
            message: "polygon coordinate list is not an array".to_string(),
        })
}

/// Parses a VIA project document into an AnnotationSet.
pub fn parse_via(doc: &Value, cfg: &ViaConfig) -> Result<AnnotationSet> {
    let metadata = doc
        .get("_via_img_metadata")
        .unwrap_or(doc)
        .as_object()
        .ok_or_else(|| Error::Parse {
            path: "$".to_string(),
            message: "expected an object of per-file entries".to_string(),
        })?;

    let mut set = AnnotationSet::default();
    for (key, entry) in metadata {
        // Project exports carry bookkeeping keys next to the metadata map.
        if key.starts_with("_via_") {
            continue;
        }
        let at = |suffix: &str| format!("$.{key}{suffix}");
        let filename = entry
            .get("filename")
            .and_then(|f| f.as_str())
            .unwrap_or(key)
            .to_string();
        let attrs = entry.get("file_attributes");
        let height = attrs
            .and_then(|a| a.get("height"))
            .and_then(as_usize)
            .unwrap_or(cfg.default_size.0);
        let width = attrs
            .and_then(|a| a.get("width"))
            .and_then(as_usize)
            .unwrap_or(cfg.default_size.1);
        set.images.insert(
            filename.clone(),
            ImageInfo {
                height,
                width,
                source_path: filename.clone(),
            },
        );

        let regions = match entry.get("regions") {
            Some(Value::Array(rs)) => rs.clone(),
            // Old VIA exports keyed regions by index.
            Some(Value::Object(rs)) => rs.values().cloned().collect(),
            _ => Vec::new(),
        };
        for (ri, region) in regions.iter().enumerate() {
            let rpath = at(&format!(".regions[{ri}]"));
            let shape = region.get("shape_attributes").ok_or_else(|| Error::Parse {
                path: rpath.clone(),
                message: "missing shape_attributes".to_string(),
            })?;
            let shape_name = shape.get("name").and_then(|n| n.as_str()).unwrap_or("");
            if shape_name != "polygon" {
                return Err(Error::UnsupportedShape {
                    shape: shape_name.to_string(),
                    path: rpath,
                });
            }
            let xs = coord_list(
                shape.get("all_points_x").unwrap_or(&Value::Null),
                &rpath,
            )?;
            let ys = coord_list(
                shape.get("all_points_y").unwrap_or(&Value::Null),
                &rpath,
            )?;
            let class_name = region
                .get("region_attributes")
                .and_then(|a| a.get(&cfg.class_key))
                .and_then(|c| c.as_str())
                .unwrap_or("");
            let class = match DefectClass::parse(class_name) {
                Some(c) => c,
                None if cfg.strict => {
                    return Err(Error::UnknownClass {
                        name: class_name.to_string(),
                        path: rpath,
                    })
                }
                None => continue,
            };
            let mask = polygon_to_mask(&xs, &ys, height, width)?;
            let dense = rle_decode(&mask)?;
            set.instances
                .push(instance_from_dense(&filename, class, 1.0, &dense)?);
        }
    }
    set.validate()?;
    Ok(set)
}

pub fn parse_via_file(path: &Path, cfg: &ViaConfig) -> Result<AnnotationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_via(&doc, cfg)
}

/// One polygon region destined for a VIA export.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonRegion {
    pub image_id: String,
    pub class_id: DefectClass,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Builds a VIA project document from polygon regions. Image dimensions are
/// written into `file_attributes` so parsing does not need a fallback size.
pub fn export_via(
    images: &BTreeMap<String, ImageInfo>,
    regions: &[PolygonRegion],
    class_key: &str,
) -> Value {
    let mut metadata = serde_json::Map::new();
    for (image_id, info) in images {
        let image_regions: Vec<Value> = regions
            .iter()
            .filter(|r| &r.image_id == image_id)
            .map(|r| {
                json!({
                    "shape_attributes": {
                        "name": "polygon",
                        "all_points_x": r.xs,
                        "all_points_y": r.ys,
                    },
                    "region_attributes": { class_key: r.class_id.display_name() },
                })
            })
            .collect();
        metadata.insert(
            image_id.clone(),
            json!({
                "filename": info.source_path,
                "size": 0,
                "regions": image_regions,
                "file_attributes": { "height": info.height, "width": info.width },
            }),
        );
    }
    json!({ "_via_img_metadata": metadata })
}

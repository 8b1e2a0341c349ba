//! Grayscale image I/O: 8-bit and 16-bit PGM and PNG, lossless round-trip.
//!
//! Images are carried as single-channel grids holding integer gray levels
//! (0..=255 for 8-bit, 0..=65535 for 16-bit) as f64.

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

fn format_from_magic(bytes: &[u8], path: &Path) -> Result<ImageFormat> {
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        Ok(ImageFormat::Png)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        Ok(ImageFormat::Pnm)
    } else {
        Err(Error::UnsupportedImageFormat {
            magic: bytes.iter().take(4).copied().collect(),
            path: path.to_path_buf(),
        })
    }
}

pub fn read_image(path: &Path) -> Result<Grid2D> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = format_from_magic(&bytes, path)?;
    let img = image::load_from_memory_with_format(&bytes, format).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as f64).collect(),
        other => other.to_luma8().pixels().map(|p| p.0[0] as f64).collect(),
    };
    Grid2D::new(h, w, 1, values)
}

/// Writes a single-channel grid of integer gray levels. The format follows
/// the extension (`.pgm` or `.png`); bit depth is 16 when any value exceeds
/// 255, otherwise 8.
pub fn write_image(grid: &Grid2D, path: &Path) -> Result<()> {
    if grid.channels() != 1 {
        return Err(Error::invalid("write_image expects a single-channel grid"));
    }
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => ImageFormat::Pnm,
        Some("png") => ImageFormat::Png,
        other => {
            return Err(Error::invalid(format!(
                "unsupported image extension {other:?}, use .pgm or .png"
            )))
        }
    };
    let (h, w) = (grid.height() as u32, grid.width() as u32);
    let max = grid.values().iter().cloned().fold(0.0f64, f64::max);
    let min = grid.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 || max > 65535.0 {
        return Err(Error::invalid("gray levels must lie in [0, 65535]"));
    }
    let img = if max > 255.0 {
        let buf: Vec<u16> = grid.values().iter().map(|&v| v.round() as u16).collect();
        DynamicImage::ImageLuma16(image::ImageBuffer::from_raw(w, h, buf).unwrap())
    } else {
        let buf: Vec<u8> = grid.values().iter().map(|&v| v.round() as u8).collect();
        DynamicImage::ImageLuma8(image::ImageBuffer::from_raw(w, h, buf).unwrap())
    };
    match format {
        // The default PNM writer picks PAM ("P7"); force a P5 graymap.
        ImageFormat::Pnm => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let encoder = PnmEncoder::new(file)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
            let result = match &img {
                DynamicImage::ImageLuma16(buf) => {
                    // 16-bit samples go to the encoder big-endian.
                    let bytes: Vec<u8> = buf
                        .as_raw()
                        .iter()
                        .flat_map(|v| v.to_be_bytes())
                        .collect();
                    encoder.write_image(&bytes, w, h, ExtendedColorType::L16)
                }
                other => encoder.write_image(other.as_bytes(), w, h, ExtendedColorType::L8),
            };
            result.map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        }
        _ => img.save_with_format(path, format).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
    }
}

//! Flat binary serialization for Grid2D: magic `RSGD`, version u32,
//! height/width/channels u32, then row-major little-endian f64 values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

const GRID_MAGIC: &[u8; 4] = b"RSGD";
const GRID_VERSION: u32 = 1;

pub fn save_grid(grid: &Grid2D, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + grid.values().len() * 8);
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.channels() as u32).to_le_bytes());
    for v in grid.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: &Path) -> Result<Grid2D> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let parse_err = |message: &str| Error::Parse {
        path: path.display().to_string(),
        message: message.to_string(),
    };
    if bytes.len() < 20 {
        return Err(parse_err("truncated grid file"));
    }
    if &bytes[0..4] != GRID_MAGIC {
        return Err(parse_err("bad magic, not a grid file"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    if u32_at(4) != GRID_VERSION {
        return Err(parse_err("unsupported grid file version"));
    }
    let (h, w, c) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let expected = 20 + h * w * c * 8;
    if bytes.len() != expected {
        return Err(parse_err("grid file length does not match header"));
    }
    let values = bytes[20..]
        .chunks_exact(8)
        .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
        .collect();
    Grid2D::new(h, w, c, values)
}

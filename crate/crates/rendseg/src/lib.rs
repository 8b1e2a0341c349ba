//! Point-based rendering refinement for instance segmentation masks.
//!
//! The pipeline stages are:
//!
//! 1. **grid** – dense 2D grids with bilinear sampling, 2x upsampling, and
//!    point scatter.
//! 2. **sampling** – uncertainty scoring, deterministic top-N point selection
//!    at inference, biased random sampling at training.
//! 3. **point_head** – the small MLP labeling individual points, with an
//!    SGD trainer and exact analytic gradients.
//! 4. **renderer** – the adaptive-subdivision refinement loop.
//! 5. **mask** – RLE binary masks, IoU, bounding boxes, polygon
//!    rasterization.
//! 6. **eval** – COCO-style average precision over IoU thresholds and
//!    object-area regimes.
//! 7. **stats** – per-class mask-area descriptive statistics and box-plot
//!    series.
//! 8. **data** – VIA annotation ingestion, prediction JSON, image/grid I/O,
//!    and a synthetic line-space defect generator with exact ground truth.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod grid;
pub mod mask;
pub mod point_head;
pub mod renderer;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};

//! Annotation and prediction file ingestion, grid and image I/O, and the
//! synthetic defect dataset generator.

pub mod grid_io;
pub mod image_io;
pub mod predictions;
pub mod synth;
pub mod via;

pub use grid_io::{load_grid, save_grid};
pub use image_io::{read_image, write_image};
pub use predictions::{load_predictions, save_predictions};
pub use synth::{generate_synthetic, Split, SynthConfig, SynthDataset, SynthSample};
pub use via::{parse_via, parse_via_file, AnnotationSet, ImageInfo, PolygonRegion, ViaConfig};

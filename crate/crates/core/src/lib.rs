//! Building blocks for evaluating histopathology super-resolution:
//! degradation synthesis, blur-scored IQA dataset curation, full- and
//! no-reference quality metrics, spaced diffusion sampling math, inference
//! geometry with whole-slide tiling, and ranked benchmark reports.

pub mod degrade;
pub mod diffusion;
pub mod error;
pub mod fullref;
pub mod iqa_dataset;
pub mod noref;
pub mod raster;
pub mod report;
pub mod synthetic;
pub mod tiler;

pub use error::{Error, Result};
pub use raster::Raster;

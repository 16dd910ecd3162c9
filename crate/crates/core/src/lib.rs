pub mod alignment;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod fixture;
pub mod homography;
pub mod imagestore;
pub mod lanes;
pub mod locator;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use homography::Homography;
pub use raster::{Plane, Raster};

//! Lane marker extraction and transfer onto the current view.

mod canny;
mod project;
mod segment;

use serde::{Deserialize, Serialize};

pub use canny::{canny, edge_filter};
pub use project::project_markers;
pub use segment::{default_ranges, segment_markers, ChannelOrder, ColorRange, MarkerKind};

use crate::alignment::PixelMask;
use crate::error::Result;
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneParams {
    pub ranges: Vec<ColorRange>,
    pub channel_order: ChannelOrder,
    pub canny_low: f64,
    pub canny_high: f64,
    pub edge_radius: usize,
    pub vicinity: usize,
}

impl Default for LaneParams {
    fn default() -> Self {
        Self {
            ranges: default_ranges(),
            channel_order: ChannelOrder::Bgr,
            canny_low: 50.0,
            canny_high: 150.0,
            edge_radius: 3,
            vicinity: 2,
        }
    }
}

/// Color segmentation followed by the edge-proximity filter.
pub fn detect_markers(img: &Raster, params: &LaneParams) -> Result<PixelMask> {
    let raw = segment_markers(img, &params.ranges, params.channel_order)?;
    edge_filter(&raw, img, params.canny_low, params.canny_high, params.edge_radius)
}

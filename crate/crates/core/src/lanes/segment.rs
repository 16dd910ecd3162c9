use serde::{Deserialize, Serialize};

use crate::alignment::PixelMask;
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerKind {
    White,
    Yellow,
}

/// Order in which a [`ColorRange`]'s triples list the channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    /// Blue, green, red.
    #[default]
    Bgr,
    Rgb,
}

/// Inclusive per-channel color box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorRange {
    pub low: [u8; 3],
    pub high: [u8; 3],
    pub label: MarkerKind,
}

impl ColorRange {
    pub fn new(low: [u8; 3], high: [u8; 3], label: MarkerKind) -> Result<Self> {
        if (0..3).any(|c| low[c] > high[c]) {
            return Err(Error::InvalidArgument(format!(
                "color range low {low:?} exceeds high {high:?}"
            )));
        }
        Ok(Self { low, high, label })
    }

    pub fn white() -> Self {
        Self {
            low: [180, 180, 190],
            high: [255, 255, 255],
            label: MarkerKind::White,
        }
    }

    /// In blue-green-red order this is low blue with high green and red.
    pub fn yellow() -> Self {
        Self {
            low: [0, 150, 170],
            high: [150, 255, 255],
            label: MarkerKind::Yellow,
        }
    }

    #[inline]
    pub fn contains(&self, triple: [u8; 3]) -> bool {
        (0..3).all(|c| self.low[c] <= triple[c] && triple[c] <= self.high[c])
    }
}

pub fn default_ranges() -> Vec<ColorRange> {
    vec![ColorRange::white(), ColorRange::yellow()]
}

/// Pixels of the RGB image `img` whose channels fall inside any range.
pub fn segment_markers(img: &Raster, ranges: &[ColorRange], order: ChannelOrder) -> Result<PixelMask> {
    if img.channels() != 3 {
        return Err(Error::InvalidArgument(
            "marker segmentation needs a 3-channel image".into(),
        ));
    }
    Ok(PixelMask::from_fn(img.width(), img.height(), |x, y| {
        let p = img.pixel(x, y);
        let triple = match order {
            ChannelOrder::Bgr => [p[2], p[1], p[0]],
            ChannelOrder::Rgb => [p[0], p[1], p[2]],
        };
        ranges.iter().any(|r| r.contains(triple))
    }))
}

//! Alignment quality: difference images and mean squared difference.

use serde::{Deserialize, Serialize};

use crate::alignment::PixelMask;
use crate::error::{Error, Result};
use crate::imagestore::GeoPose;
use crate::raster::Raster;

/// Version of the JSON report layout.
pub const REPORT_SCHEMA: u32 = 1;

fn check_dims(projected: &Raster, current: &Raster, validity: &PixelMask) -> Result<()> {
    if !projected.same_size(current)
        || validity.width() != current.width()
        || validity.height() != current.height()
    {
        return Err(Error::DimensionMismatch(format!(
            "projected {}x{}, current {}x{}, validity {}x{}",
            projected.width(),
            projected.height(),
            current.width(),
            current.height(),
            validity.width(),
            validity.height()
        )));
    }
    Ok(())
}

/// Gray where the images agree: `round((p - c) / 2 + 128)` on valid pixels,
/// 0 elsewhere. Color inputs are reduced to luma first.
pub fn diff_image(projected: &Raster, current: &Raster, validity: &PixelMask) -> Result<Raster> {
    check_dims(projected, current, validity)?;
    let (p, c) = (projected.to_gray(), current.to_gray());
    let out = Raster::gray_from_fn(current.width(), current.height(), |x, y| {
        if !validity.get(x, y) {
            return 0;
        }
        let d = p.get(x, y, 0) as f64 - c.get(x, y, 0) as f64;
        (d / 2.0 + 128.0).round().clamp(0.0, 255.0) as u8
    });
    Ok(out)
}

/// Mean of `(p - c)^2` over valid pixels, with the number of valid pixels.
pub fn ssd(projected: &Raster, current: &Raster, validity: &PixelMask) -> Result<(f64, usize)> {
    check_dims(projected, current, validity)?;
    let count = validity.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let (p, c) = (projected.to_gray(), current.to_gray());
    let sum: u64 = validity
        .set_points()
        .map(|(x, y)| {
            let d = p.get(x, y, 0) as i64 - c.get(x, y, 0) as i64;
            (d * d) as u64
        })
        .sum();
    Ok((sum as f64 / count as f64, count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub ssd: f64,
    pub valid_count: usize,
    pub diff_image: Raster,
}

impl AlignmentReport {
    pub fn compute(projected: &Raster, current: &Raster, validity: &PixelMask) -> Result<Self> {
        let (ssd, valid_count) = ssd(projected, current, validity)?;
        Ok(Self {
            ssd,
            valid_count,
            diff_image: diff_image(projected, current, validity)?,
        })
    }
}

/// Metrics written next to an overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub schema: u32,
    pub ssd: Option<f64>,
    pub valid_count: usize,
    pub rho: Option<f64>,
    pub inliers: usize,
    pub pose: GeoPose,
}

impl ReportJson {
    pub fn new(ssd: Option<f64>, valid_count: usize, rho: Option<f64>, inliers: usize, pose: GeoPose) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            ssd,
            valid_count,
            rho,
            inliers,
            pose,
        }
    }

    /// Pretty JSON terminated by a single LF.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

//! Pipeline configuration, loadable from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{EccParams, MotionModel};
use crate::error::{Error, Result};
use crate::features::{HarrisParams, RansacParams};
use crate::lanes::{default_ranges, ChannelOrder, ColorRange, LaneParams};
use crate::locator::{LocatorParams, ScoreParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub confidence: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        let d = RansacParams::default();
        Self {
            threshold: d.threshold,
            max_iters: d.max_iters,
            seed: d.seed,
            confidence: d.confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccConfig {
    pub max_iters: usize,
    pub eps: f64,
    /// Side of the square window around each matched point (odd).
    pub window: usize,
    pub model: MotionModel,
    pub min_pixels: usize,
}

impl Default for EccConfig {
    fn default() -> Self {
        let d = EccParams::default();
        Self {
            max_iters: d.max_iters,
            eps: d.eps,
            window: 41,
            model: d.model,
            min_pixels: d.min_pixels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub grid_step: f64,
    pub grid_size: usize,
    pub half_range: f64,
    pub heading_iters: usize,
    pub pitch_iters: usize,
    pub ratio: f64,
    pub max_points: usize,
    pub min_distance: f64,
    pub ransac: RansacConfig,
    pub ecc: EccConfig,
    pub lane_ranges: Vec<ColorRange>,
    pub channel_order: ChannelOrder,
    pub canny_low: f64,
    pub canny_high: f64,
    pub edge_radius: usize,
    pub vicinity: usize,
    /// Optional colour blended 50% into projected marker pixels.
    pub tint: Option<[u8; 3]>,
    pub min_inliers: usize,
    pub fov: f64,
    /// Worker threads for candidate scoring; 0 picks automatically.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let loc = LocatorParams::default();
        let harris = HarrisParams::default();
        let lanes = LaneParams::default();
        Self {
            grid_step: loc.grid_step,
            grid_size: loc.grid_size,
            half_range: loc.half_range,
            heading_iters: loc.heading_iters,
            pitch_iters: loc.pitch_iters,
            ratio: loc.score.ratio,
            max_points: harris.max_points,
            min_distance: harris.min_distance,
            ransac: RansacConfig::default(),
            ecc: EccConfig::default(),
            lane_ranges: default_ranges(),
            channel_order: lanes.channel_order,
            canny_low: lanes.canny_low,
            canny_high: lanes.canny_high,
            edge_radius: lanes.edge_radius,
            vicinity: lanes.vicinity,
            tint: None,
            min_inliers: loc.min_inliers,
            fov: loc.fov,
            threads: loc.threads,
        }
    }
}

fn check(ok: bool, field: &'static str, msg: String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidField { field, message: msg })
    }
}

impl PipelineConfig {
    /// Reads a JSON config; absent keys keep their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.grid_step > 0.0 && self.grid_step.is_finite(), "grid_step", format!("{} must be positive", self.grid_step))?;
        check(self.grid_size % 2 == 1, "grid_size", format!("{} must be odd", self.grid_size))?;
        check(self.half_range > 0.0 && self.half_range <= 180.0, "half_range", format!("{} must be in (0, 180]", self.half_range))?;
        check(self.heading_iters >= 1, "heading_iters", "must be at least 1".into())?;
        check(self.pitch_iters >= 1, "pitch_iters", "must be at least 1".into())?;
        check(self.ratio > 0.0 && self.ratio < 1.0, "ratio", format!("{} must be in (0, 1)", self.ratio))?;
        check(self.max_points >= 4, "max_points", format!("{} must be at least 4", self.max_points))?;
        check(self.min_distance >= 0.0, "min_distance", format!("{} must be non-negative", self.min_distance))?;
        check(self.ransac.threshold > 0.0, "ransac.threshold", format!("{} must be positive", self.ransac.threshold))?;
        check(self.ransac.max_iters >= 1, "ransac.max_iters", "must be at least 1".into())?;
        check(
            self.ransac.confidence > 0.0 && self.ransac.confidence < 1.0,
            "ransac.confidence",
            format!("{} must be in (0, 1)", self.ransac.confidence),
        )?;
        check(self.ecc.max_iters >= 1, "ecc.max_iters", "must be at least 1".into())?;
        check(self.ecc.eps > 0.0, "ecc.eps", format!("{} must be positive", self.ecc.eps))?;
        check(self.ecc.window % 2 == 1, "ecc.window", format!("{} must be odd", self.ecc.window))?;
        for r in &self.lane_ranges {
            check((0..3).all(|c| r.low[c] <= r.high[c]), "lane_ranges", format!("low {:?} exceeds high {:?}", r.low, r.high))?;
        }
        check(
            self.canny_low > 0.0 && self.canny_low < self.canny_high,
            "canny_low",
            format!("need 0 < canny_low < canny_high, got {}/{}", self.canny_low, self.canny_high),
        )?;
        check(self.fov > 0.0 && self.fov < 180.0, "fov", format!("{} must be in (0, 180)", self.fov))?;
        Ok(())
    }

    pub fn score_params(&self) -> ScoreParams {
        ScoreParams {
            harris: HarrisParams {
                max_points: self.max_points,
                min_distance: self.min_distance,
                ..HarrisParams::default()
            },
            ratio: self.ratio,
            ransac: RansacParams {
                threshold: self.ransac.threshold,
                max_iters: self.ransac.max_iters,
                confidence: self.ransac.confidence,
                seed: self.ransac.seed,
            },
        }
    }

    pub fn locator_params(&self) -> LocatorParams {
        LocatorParams {
            grid_step: self.grid_step,
            grid_size: self.grid_size,
            half_range: self.half_range,
            heading_iters: self.heading_iters,
            pitch_iters: self.pitch_iters,
            score: self.score_params(),
            min_inliers: self.min_inliers,
            fov: self.fov,
            threads: self.threads,
        }
    }

    pub fn ecc_params(&self) -> EccParams {
        EccParams {
            max_iters: self.ecc.max_iters,
            eps: self.ecc.eps,
            model: self.ecc.model,
            min_pixels: self.ecc.min_pixels,
        }
    }

    pub fn lane_params(&self) -> LaneParams {
        LaneParams {
            ranges: self.lane_ranges.clone(),
            channel_order: self.channel_order,
            canny_low: self.canny_low,
            canny_high: self.canny_high,
            edge_radius: self.edge_radius,
            vicinity: self.vicinity,
        }
    }
}

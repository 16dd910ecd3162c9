//! Feature detection, description, matching, and robust homography fitting.

mod harris;
mod matching;
mod orb;
mod ransac;

pub use harris::{harris_corners, harris_response, HarrisParams};
pub use matching::{cross_check, match_descriptors, Match, MatchSet, DEFAULT_RATIO};
pub use orb::{orb_describe, Descriptor, ORB_BORDER, ORB_PATCH_RADIUS};
pub use ransac::{ransac_homography, symmetric_error, RansacParams, RansacResult};

/// Corner location with its detector response and (once described) its
/// intensity-centroid orientation in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    pub orientation: f64,
}

impl FeaturePoint {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

//! Pixel-based refinement of a feature homography over common content.

mod ecc;
mod mask;
mod warp;

pub use ecc::{correlation, ecc_refine, EccParams, EccResult, MotionModel};
pub use mask::{build_common_mask, PixelMask};
pub use warp::{warp_mask, warp_perspective};

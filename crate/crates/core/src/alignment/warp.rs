use super::PixelMask;
use crate::error::Result;
use crate::homography::Homography;
use crate::raster::Raster;

/// Slack for source coordinates that land a rounding error outside the image.
const EDGE_EPS: f64 = 1e-9;

/// Bilinear sample of channel `c`. Coordinates must be inside the image.
#[inline]
fn bilinear_u8(img: &Raster, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let p00 = img.get(x0, y0, c) as f64;
    let p10 = img.get(x1, y0, c) as f64;
    let p01 = img.get(x0, y1, c) as f64;
    let p11 = img.get(x1, y1, c) as f64;
    let top = p00 + fx * (p10 - p00);
    let bottom = p01 + fx * (p11 - p01);
    top + fy * (bottom - top)
}

/// Source location in `[0, w-1] x [0, h-1]` for output pixel `(x, y)`.
#[inline]
pub(crate) fn source_location(inv: &Homography, x: usize, y: usize, w: usize, h: usize) -> Option<(f64, f64)> {
    let (sx, sy) = inv.apply((x as f64, y as f64))?;
    let inside = sx >= -EDGE_EPS
        && sy >= -EDGE_EPS
        && sx <= (w - 1) as f64 + EDGE_EPS
        && sy <= (h - 1) as f64 + EDGE_EPS;
    inside.then_some((sx, sy))
}

/// Resamples `img` into an `out_width x out_height` frame where output pixel
/// `p` takes the bilinear sample of `img` at `H^-1 p`. Samples falling
/// outside `img` are written as 0 and cleared in the returned validity mask.
pub fn warp_perspective(
    img: &Raster,
    h: &Homography,
    out_width: usize,
    out_height: usize,
) -> Result<(Raster, PixelMask)> {
    let inv = h.inverse()?;
    let ch = img.channels();
    let mut data = vec![0u8; out_width * out_height * ch];
    let mut valid = PixelMask::new(out_width, out_height);
    for y in 0..out_height {
        for x in 0..out_width {
            let Some((sx, sy)) = source_location(&inv, x, y, img.width(), img.height()) else {
                continue;
            };
            valid.set(x, y, true);
            let base = (y * out_width + x) * ch;
            for c in 0..ch {
                data[base + c] = bilinear_u8(img, sx, sy, c).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok((Raster::new(out_width, out_height, ch, data)?, valid))
}

/// Nearest-neighbour warp of a mask, with out-of-bounds samples unset.
pub fn warp_mask(mask: &PixelMask, h: &Homography, out_width: usize, out_height: usize) -> Result<PixelMask> {
    let inv = h.inverse()?;
    Ok(PixelMask::from_fn(out_width, out_height, |x, y| {
        match source_location(&inv, x, y, mask.width(), mask.height()) {
            Some((sx, sy)) => mask.get(sx.round() as usize, sy.round() as usize),
            None => false,
        }
    }))
}

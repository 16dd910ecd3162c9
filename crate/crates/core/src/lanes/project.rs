use crate::alignment::PixelMask;
use crate::error::{Error, Result};
use crate::homography::Homography;
use crate::raster::{luma, Raster};

/// A target pixel is written once it has collected this much splat weight.
const MIN_SPLAT_WEIGHT: f64 = 0.25;

/// Copies database pixels near the marker mask onto `current`.
///
/// The mask is dilated by a disc of radius `vicinity`; each selected
/// database pixel is mapped through `h` and splatted bilinearly onto its
/// four neighbours. Target pixels receive the weighted mean of the database
/// colours they collected, or a 50% blend with `tint` when given. Pixels
/// mapped outside `current` are skipped. Everything else is untouched.
pub fn project_markers(
    db_img: &Raster,
    mask: &PixelMask,
    h: &Homography,
    current: &Raster,
    vicinity: usize,
    tint: Option<[u8; 3]>,
) -> Result<Raster> {
    if mask.width() != db_img.width() || mask.height() != db_img.height() {
        return Err(Error::DimensionMismatch("marker mask does not match database image".into()));
    }
    let mut out = current.clone();
    if mask.is_empty() {
        return Ok(out);
    }
    // Invertibility is part of the contract even though only `h` is applied.
    h.inverse()?;

    let (w, hgt) = (current.width(), current.height());
    let ch = current.channels();
    let mut acc = vec![0.0f64; w * hgt * ch];
    let mut weight = vec![0.0f64; w * hgt];

    let source_color = |x: usize, y: usize| -> [f64; 3] {
        let p = db_img.pixel(x, y);
        if db_img.channels() == 3 {
            if ch == 3 {
                [p[0] as f64, p[1] as f64, p[2] as f64]
            } else {
                [luma(p[0], p[1], p[2]) as f64, 0.0, 0.0]
            }
        } else {
            [p[0] as f64; 3]
        }
    };

    for (x, y) in mask.dilate_disc(vicinity).set_points() {
        let Some((u, v)) = h.apply((x as f64, y as f64)) else {
            continue;
        };
        if !(u.is_finite() && v.is_finite()) || u <= -1.0 || v <= -1.0 || u >= w as f64 || v >= hgt as f64 {
            continue;
        }
        let (x0, y0) = (u.floor(), v.floor());
        let (fx, fy) = (u - x0, v - y0);
        let color = source_color(x, y);
        for (dx, dy, wt) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            if wt <= 0.0 {
                continue;
            }
            let (tx, ty) = (x0 as isize + dx, y0 as isize + dy);
            if tx < 0 || ty < 0 || tx >= w as isize || ty >= hgt as isize {
                continue;
            }
            let i = ty as usize * w + tx as usize;
            weight[i] += wt;
            for c in 0..ch {
                acc[i * ch + c] += wt * color[c];
            }
        }
    }

    for i in 0..w * hgt {
        let wt = weight[i];
        if wt < MIN_SPLAT_WEIGHT {
            continue;
        }
        for c in 0..ch {
            let mut v = acc[i * ch + c] / wt;
            if let Some(t) = tint {
                let tc = if ch == 3 { t[c] } else { luma(t[0], t[1], t[2]) };
                v = 0.5 * v + 0.5 * tc as f64;
            }
            out.data_mut()[i * ch + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> Raster {
        Raster::rgb_from_fn(30, 20, |x, y| [(x * 8) as u8, (y * 12) as u8, 200])
    }

    fn cur() -> Raster {
        Raster::rgb_from_fn(30, 20, |x, y| [10, (x + y) as u8, 30])
    }

    fn changed(a: &Raster, b: &Raster) -> PixelMask {
        PixelMask::from_fn(a.width(), a.height(), |x, y| a.pixel(x, y) != b.pixel(x, y))
    }

    #[test]
    fn identity_copies_single_pixel() {
        let mut mask = PixelMask::new(30, 20);
        mask.set(7, 5, true);
        let out = project_markers(&db(), &mask, &Homography::identity(), &cur(), 0, None).unwrap();
        assert_eq!(out.pixel(7, 5), db().pixel(7, 5));
        assert_eq!(changed(&out, &cur()).count(), 1);
    }

    #[test]
    fn empty_mask_is_noop() {
        let out = project_markers(&db(), &PixelMask::new(30, 20), &Homography::translation(2.0, 1.0), &cur(), 2, None).unwrap();
        assert_eq!(out, cur());
    }

    #[test]
    fn vicinity_monotone() {
        let mut mask = PixelMask::new(30, 20);
        mask.set(10, 10, true);
        mask.set(20, 4, true);
        let h = Homography::from_rows([[1.02, 0.01, 1.3], [0.0, 0.98, -0.6], [0.0, 0.0, 1.0]]).unwrap();
        let mut prev = PixelMask::new(30, 20);
        for vic in 0..4 {
            let out = project_markers(&db(), &mask, &h, &cur(), vic, None).unwrap();
            let now = changed(&out, &cur());
            assert!(prev.is_subset_of(&now), "vicinity {vic}");
            prev = now;
        }
    }

    #[test]
    fn out_of_bounds_skipped() {
        let mask = PixelMask::full(30, 20);
        let out = project_markers(&db(), &mask, &Homography::translation(100.0, 0.0), &cur(), 0, None).unwrap();
        assert_eq!(out, cur());
    }
}

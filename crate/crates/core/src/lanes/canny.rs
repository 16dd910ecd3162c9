use std::collections::VecDeque;

use crate::alignment::PixelMask;
use crate::error::{Error, Result};
use crate::raster::{Plane, Raster};

/// Canny edges from 3x3 Sobel gradients (L2 magnitude), non-maximum
/// suppression along the quantized gradient direction, and 8-connected
/// hysteresis between `low` and `high`.
pub fn canny(img: &Raster, low: f64, high: f64) -> Result<PixelMask> {
    if !(low > 0.0 && low < high) {
        return Err(Error::InvalidArgument(format!(
            "canny thresholds need 0 < low < high, got {low}/{high}"
        )));
    }
    let gray = Plane::from_raster(img);
    let (w, h) = (gray.width, gray.height);
    let (gx, gy) = gray.sobel();
    let mag: Vec<f64> = gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).collect();
    let m = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // 0 = none, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = mag[i];
            if v <= low {
                continue;
            }
            let (dx, dy) = (gx.data[i], gy.data[i]);
            let angle = dy.atan2(dx).to_degrees().rem_euclid(180.0);
            let (ox, oy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let before = m(xi - ox, yi - oy);
            let after = m(xi + ox, yi + oy);
            if v >= before && v > after {
                class[i] = if v > high { 2 } else { 1 };
            }
        }
    }

    let mut edges = PixelMask::new(w, h);
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| class[i] == 2).collect();
    for &i in &queue {
        edges.set(i % w, i / w, true);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 && !edges.get(nx as usize, ny as usize) {
                    edges.set(nx as usize, ny as usize, true);
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(edges)
}

/// Keeps the masked pixels lying within `edge_radius` pixels (Euclidean) of
/// a Canny edge of `img`. The result is always a subset of `mask`.
pub fn edge_filter(
    mask: &PixelMask,
    img: &Raster,
    canny_low: f64,
    canny_high: f64,
    edge_radius: usize,
) -> Result<PixelMask> {
    if mask.width() != img.width() || mask.height() != img.height() {
        return Err(Error::DimensionMismatch("marker mask does not match image".into()));
    }
    if mask.is_empty() {
        return Ok(mask.clone());
    }
    let edges = canny(img, canny_low, canny_high)?;
    Ok(mask.and(&edges.dilate_disc(edge_radius)))
}

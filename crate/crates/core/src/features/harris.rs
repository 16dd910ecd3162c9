use super::FeaturePoint;
use crate::error::{Error, Result};
use crate::raster::{Plane, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    pub max_points: usize,
    /// Minimum Euclidean separation between returned corners, in pixels.
    pub min_distance: f64,
    pub k: f64,
    /// Standard deviation of the Gaussian window over the gradient products.
    pub sigma: f64,
    /// Corners must exceed this fraction of the strongest response.
    pub rel_threshold: f64,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            max_points: 500,
            min_distance: 10.0,
            k: 0.04,
            sigma: 1.0,
            rel_threshold: 0.01,
        }
    }
}

/// Pixels closer than this to the border never become corners.
const BORDER: usize = 3;

/// Harris response `det(M) - k trace(M)^2` of the Gaussian-weighted
/// structure tensor built from 3x3 Sobel gradients.
pub fn harris_response(gray: &Plane, k: f64, sigma: f64) -> Plane {
    let (gx, gy) = gray.sobel();
    let n = gray.data.len();
    let mut ixx = Plane::zeros(gray.width, gray.height);
    let mut iyy = Plane::zeros(gray.width, gray.height);
    let mut ixy = Plane::zeros(gray.width, gray.height);
    for i in 0..n {
        let (dx, dy) = (gx.data[i], gy.data[i]);
        ixx.data[i] = dx * dx;
        iyy.data[i] = dy * dy;
        ixy.data[i] = dx * dy;
    }
    let (sxx, syy, sxy) = (
        ixx.gaussian_blur(sigma),
        iyy.gaussian_blur(sigma),
        ixy.gaussian_blur(sigma),
    );
    let mut r = Plane::zeros(gray.width, gray.height);
    for i in 0..n {
        let (a, b, c) = (sxx.data[i], syy.data[i], sxy.data[i]);
        let tr = a + b;
        r.data[i] = a * b - c * c - k * tr * tr;
    }
    r
}

/// Harris corners in descending response order, greedily thinned so that no
/// two are closer than `min_distance`, capped at `max_points`.
pub fn harris_corners(img: &Raster, params: &HarrisParams) -> Result<Vec<FeaturePoint>> {
    if img.width() < 32 || img.height() < 32 {
        return Err(Error::InvalidArgument(format!(
            "corner detection needs at least 32x32 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let gray = Plane::from_raster(img);
    let resp = harris_response(&gray, params.k, params.sigma);
    let (w, h) = (resp.width, resp.height);

    let max = resp.data.iter().cloned().fold(f64::MIN, f64::max);
    if max <= 1e-9 {
        return Ok(Vec::new());
    }
    let thresh = params.rel_threshold * max;

    let mut cands = Vec::new();
    for y in BORDER..h - BORDER {
        for x in BORDER..w - BORDER {
            let v = resp.at(x, y);
            if v <= thresh || !is_local_max(&resp, x, y) {
                continue;
            }
            cands.push(FeaturePoint {
                x: x as f64,
                y: y as f64,
                response: v,
                orientation: 0.0,
            });
        }
    }
    cands.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    Ok(spread(cands, params.min_distance, params.max_points, w, h))
}

/// Strict 3x3 maximum, with plateaus resolved towards the first pixel in
/// raster order.
fn is_local_max(r: &Plane, x: usize, y: usize) -> bool {
    let v = r.at(x, y);
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let n = r.at((x as isize + dx) as usize, (y as isize + dy) as usize);
            let earlier = dy < 0 || (dy == 0 && dx < 0);
            if n > v || (earlier && n == v) {
                return false;
            }
        }
    }
    true
}

/// Greedy min-distance suppression over response-sorted candidates, using a
/// bucket grid so each check only visits nearby accepted points.
fn spread(
    sorted: Vec<FeaturePoint>,
    min_distance: f64,
    max_points: usize,
    width: usize,
    height: usize,
) -> Vec<FeaturePoint> {
    if min_distance <= 0.0 {
        return sorted.into_iter().take(max_points).collect();
    }
    let cell = min_distance.max(1.0);
    let gw = (width as f64 / cell).ceil() as usize + 1;
    let gh = (height as f64 / cell).ceil() as usize + 1;
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); gw * gh];
    let min_sq = min_distance * min_distance;
    let mut out = Vec::new();
    for p in sorted {
        if out.len() >= max_points {
            break;
        }
        let cx = (p.x / cell) as usize;
        let cy = (p.y / cell) as usize;
        let mut ok = true;
        'scan: for by in cy.saturating_sub(1)..=(cy + 1).min(gh - 1) {
            for bx in cx.saturating_sub(1)..=(cx + 1).min(gw - 1) {
                for q in &buckets[by * gw + bx] {
                    if (q.0 - p.x).powi(2) + (q.1 - p.y).powi(2) < min_sq {
                        ok = false;
                        break 'scan;
                    }
                }
            }
        }
        if ok {
            buckets[cy * gw + cx].push((p.x, p.y));
            out.push(p);
        }
    }
    out
}

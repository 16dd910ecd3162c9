use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::homography::{dist, fit_dlt, Homography, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Inlier bound on the symmetric reprojection error, in pixels.
    pub threshold: f64,
    pub max_iters: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            max_iters: 2000,
            confidence: 0.995,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    /// Hypotheses drawn before stopping.
    pub iterations: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&f| f).count()
    }
}

/// Larger of the forward (`H src` vs `dst`) and backward (`H^-1 dst` vs
/// `src`) transfer distances.
pub fn symmetric_error(h: &Homography, h_inv: &Homography, src: Point, dst: Point) -> f64 {
    match (h.apply(src), h_inv.apply(dst)) {
        (Some(f), Some(b)) => dist(f, dst).max(dist(b, src)),
        _ => f64::INFINITY,
    }
}

fn flag_inliers(h: &Homography, src: &[Point], dst: &[Point], threshold: f64) -> Option<Vec<bool>> {
    let inv = h.inverse().ok()?;
    Some(
        src.iter()
            .zip(dst)
            .map(|(&s, &d)| symmetric_error(h, &inv, s, d) < threshold)
            .collect(),
    )
}

fn count(flags: &[bool]) -> usize {
    flags.iter().filter(|&&f| f).count()
}

fn collinear(a: Point, b: Point, c: Point) -> bool {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    cross.abs() < 1e-3
}

fn degenerate_sample(pts: &[Point; 4]) -> bool {
    let [a, b, c, d] = *pts;
    collinear(a, b, c) || collinear(a, b, d) || collinear(a, c, d) || collinear(b, c, d)
}

/// Hypothesis count needed to draw an all-inlier minimal sample with
/// probability `confidence` at inlier ratio `w`.
fn required_iterations(w: f64, confidence: f64, cap: usize) -> usize {
    if w >= 1.0 {
        return 1;
    }
    let p_good = w.powi(4);
    if p_good <= f64::EPSILON {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if !n.is_finite() {
        return cap;
    }
    (n.ceil() as usize).clamp(1, cap)
}

/// Robust homography `dst ~ H src` from putative correspondences.
///
/// Minimal samples of four pairs are fitted with the normalized DLT and
/// scored by the number of pairs with symmetric reprojection error below
/// `threshold`. The best model is refit by least squares on its inliers
/// until the inlier set stops changing. Iteration stops early once the
/// adaptive bound for `confidence` is reached. The result is a pure function
/// of the inputs and `seed`, and every flagged inlier satisfies the
/// threshold under the returned homography.
pub fn ransac_homography(src: &[Point], dst: &[Point], params: &RansacParams) -> Result<RansacResult> {
    let n = src.len();
    if dst.len() != n {
        return Err(Error::InvalidArgument(format!(
            "correspondence lists differ in length ({n} vs {})",
            dst.len()
        )));
    }
    if n < 4 {
        return Err(Error::Degenerate(format!("need at least 4 pairs, got {n}")));
    }
    if !(params.threshold > 0.0) {
        return Err(Error::InvalidArgument("RANSAC threshold must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, Vec<bool>, usize)> = None;
    let mut needed = params.max_iters.max(1);
    let mut iterations = 0;
    while iterations < needed {
        iterations += 1;
        let idx = rand::seq::index::sample(&mut rng, n, 4);
        let s = [src[idx.index(0)], src[idx.index(1)], src[idx.index(2)], src[idx.index(3)]];
        let d = [dst[idx.index(0)], dst[idx.index(1)], dst[idx.index(2)], dst[idx.index(3)]];
        if degenerate_sample(&s) || degenerate_sample(&d) {
            continue;
        }
        let Ok(h) = fit_dlt(&s, &d) else { continue };
        let Some(flags) = flag_inliers(&h, src, dst, params.threshold) else {
            continue;
        };
        let k = count(&flags);
        if best.as_ref().is_none_or(|b| k > b.2) {
            needed = needed.min(required_iterations(k as f64 / n as f64, params.confidence, params.max_iters));
            best = Some((h, flags, k));
        }
    }

    let (mut h, mut flags, mut k) = best.ok_or_else(|| {
        Error::EstimationFailed("every sampled minimal set was degenerate".into())
    })?;

    for _ in 0..10 {
        if k < 4 {
            break;
        }
        let (s, d): (Vec<Point>, Vec<Point>) = src
            .iter()
            .zip(dst)
            .zip(&flags)
            .filter_map(|(p, &f)| f.then_some((*p.0, *p.1)))
            .unzip();
        let Ok(refit) = fit_dlt(&s, &d) else { break };
        let Some(new_flags) = flag_inliers(&refit, src, dst, params.threshold) else {
            break;
        };
        let new_k = count(&new_flags);
        if new_k < k {
            break;
        }
        let stable = new_flags == flags;
        h = refit;
        flags = new_flags;
        k = new_k;
        if stable {
            break;
        }
    }

    Ok(RansacResult {
        homography: h,
        inliers: flags,
        iterations,
    })
}

use std::collections::HashMap;

use super::Descriptor;
use crate::error::{Error, Result};
use crate::homography::Homography;

/// Keep a nearest neighbour only if it is at least 30% closer than the
/// second nearest.
pub const DEFAULT_RATIO: f64 = 0.7;

/// `query` indexes the first descriptor list, `train` the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Match {
    pub query: usize,
    pub train: usize,
    pub distance: u32,
}

/// One-to-one correspondences between two images, with RANSAC inlier flags
/// and the fitted homography once estimated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchSet {
    pub pairs: Vec<Match>,
    pub inliers: Vec<bool>,
    pub homography: Option<Homography>,
}

impl MatchSet {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&f| f).count()
    }

    pub fn inlier_pairs(&self) -> impl Iterator<Item = &Match> {
        self.pairs
            .iter()
            .zip(&self.inliers)
            .filter_map(|(m, &f)| f.then_some(m))
    }
}

/// Two-nearest-neighbour search from each descriptor of `a` into `b` with
/// the ratio test `best <= ratio * second`. Ties in distance resolve to the
/// lower index of `b`.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f64) -> Result<Vec<Match>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("ratio must be in (0, 1), got {ratio}")));
    }
    if b.len() < 2 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, da) in a.iter().enumerate() {
        let mut best = (u32::MAX, usize::MAX);
        let mut second = u32::MAX;
        for (j, db) in b.iter().enumerate() {
            let d = da.hamming(db);
            if d < best.0 {
                second = best.0;
                best = (d, j);
            } else if d < second {
                second = d;
            }
        }
        // Closed boundary; the epsilon absorbs representation error in ratio.
        if best.0 as f64 <= ratio * second as f64 + 1e-9 {
            out.push(Match {
                query: i,
                train: best.1,
                distance: best.0,
            });
        }
    }
    Ok(out)
}

/// Keeps `i -> j` from `ab` only when `ba` maps `j -> i`. Pairs are ordered
/// by query index; inlier flags start false and no homography is attached.
pub fn cross_check(ab: &[Match], ba: &[Match]) -> MatchSet {
    let reverse: HashMap<usize, usize> = ba.iter().map(|m| (m.query, m.train)).collect();
    let mut pairs: Vec<Match> = ab
        .iter()
        .filter(|m| reverse.get(&m.train) == Some(&m.query))
        .copied()
        .collect();
    pairs.sort_by_key(|m| (m.query, m.train));
    let n = pairs.len();
    MatchSet {
        pairs,
        inliers: vec![false; n],
        homography: None,
    }
}

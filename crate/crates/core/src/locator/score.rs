use crate::error::{Error, Result};
use crate::features::{
    cross_check, harris_corners, match_descriptors, orb_describe, ransac_homography, Descriptor, FeaturePoint,
    HarrisParams, MatchSet, RansacParams, DEFAULT_RATIO,
};
use crate::homography::Point;
use crate::raster::Raster;

/// RANSAC always explains its own 4-point sample, so a fit needs this many
/// inliers before it counts as evidence of shared content.
pub const MIN_HOMOGRAPHY_SUPPORT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParams {
    pub harris: HarrisParams,
    pub ratio: f64,
    pub ransac: RansacParams,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            harris: HarrisParams::default(),
            ratio: DEFAULT_RATIO,
            ransac: RansacParams::default(),
        }
    }
}

/// Described corners of one image.
#[derive(Debug, Clone)]
pub struct Features {
    pub points: Vec<FeaturePoint>,
    pub descriptors: Vec<Descriptor>,
}

impl Features {
    pub fn extract(img: &Raster, harris: &HarrisParams) -> Result<Self> {
        let corners = harris_corners(img, harris)?;
        let (points, descriptors) = orb_describe(img, &corners);
        Ok(Self { points, descriptors })
    }
}

/// Feature support between a database candidate and the current image.
///
/// In `matchset`, `query` indexes the candidate's features and `train` the
/// current image's; the attached homography maps candidate pixels onto the
/// current image. `points` holds the matched `(candidate, current)`
/// locations, aligned with `matchset.pairs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchScore {
    pub inliers: usize,
    pub matchset: MatchSet,
    pub points: Vec<(Point, Point)>,
}

impl MatchScore {
    /// Candidate-side locations of the RANSAC inliers.
    pub fn inlier_db_points(&self) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.matchset.inliers)
            .filter_map(|(p, &f)| f.then_some(p.0))
            .collect()
    }
}

/// Harris, ORB, two-way ratio matching, cross-check, then RANSAC.
pub fn score_candidate(current: &Raster, candidate: &Raster, params: &ScoreParams) -> Result<MatchScore> {
    let cur = Features::extract(current, &params.harris)?;
    score_against(&cur, candidate, params)
}

/// [`score_candidate`] with the current image's features precomputed.
pub fn score_against(current: &Features, candidate: &Raster, params: &ScoreParams) -> Result<MatchScore> {
    let db = Features::extract(candidate, &params.harris)?;
    let ab = match_descriptors(&db.descriptors, &current.descriptors, params.ratio)?;
    let ba = match_descriptors(&current.descriptors, &db.descriptors, params.ratio)?;
    let mut matchset = cross_check(&ab, &ba);
    let points: Vec<(Point, Point)> = matchset
        .pairs
        .iter()
        .map(|m| (db.points[m.query].position(), current.points[m.train].position()))
        .collect();
    let empty = |matchset: MatchSet, points| MatchScore {
        inliers: 0,
        matchset,
        points,
    };
    if points.len() < 4 {
        return Ok(empty(matchset, points));
    }
    let src: Vec<Point> = points.iter().map(|p| p.0).collect();
    let dst: Vec<Point> = points.iter().map(|p| p.1).collect();
    match ransac_homography(&src, &dst, &params.ransac) {
        Ok(fit) if fit.inlier_count() >= MIN_HOMOGRAPHY_SUPPORT => {
            matchset.inliers = fit.inliers;
            matchset.homography = Some(fit.homography);
            Ok(MatchScore {
                inliers: matchset.inlier_count(),
                matchset,
                points,
            })
        }
        Ok(_) | Err(Error::Degenerate(_)) | Err(Error::EstimationFailed(_)) => Ok(empty(matchset, points)),
        Err(e) => Err(e),
    }
}

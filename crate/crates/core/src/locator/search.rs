use std::cmp::Ordering;

use rayon::prelude::*;

use super::score::{score_against, Features, MatchScore, ScoreParams};
use crate::error::{Error, Result};
use crate::features::MatchSet;
use crate::homography::Point;
use crate::imagestore::{fetch, GeoPose, ImageCache, ImageRecord, Provider, Store, ViewRequest};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub record: ImageRecord,
    pub inliers: usize,
    pub matchset: MatchSet,
    /// Matched `(database, current)` locations aligned with `matchset.pairs`.
    pub points: Vec<(Point, Point)>,
}

impl CandidateScore {
    pub fn new(record: ImageRecord, score: MatchScore) -> Self {
        Self {
            record,
            inliers: score.inliers,
            matchset: score.matchset,
            points: score.points,
        }
    }

    pub fn inlier_db_points(&self) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.matchset.inliers)
            .filter_map(|(p, &f)| f.then_some(p.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleAxis {
    Heading,
    Pitch,
}

/// Where views at arbitrary poses come from, and at what size.
pub struct ViewSource<'a> {
    pub provider: &'a dyn Provider,
    pub cache: Option<ImageCache>,
    pub width: usize,
    pub height: usize,
    pub fov: f64,
}

impl ViewSource<'_> {
    pub fn request(&self, pose: GeoPose) -> ViewRequest {
        ViewRequest {
            pose,
            width: self.width,
            height: self.height,
            fov: self.fov,
        }
    }

    /// `None` when the provider has no imagery for the pose.
    pub fn view(&self, pose: GeoPose) -> Result<Option<Raster>> {
        let req = self.request(pose);
        let got = match &self.cache {
            Some(cache) => fetch(cache, self.provider, &req),
            None => self.provider.fetch(&req),
        };
        match got {
            Ok(img) => Ok(Some(img)),
            Err(Error::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Record describing a provider view.
    pub fn record(&self, pose: GeoPose) -> ImageRecord {
        let req = self.request(pose);
        let file = match &self.cache {
            Some(cache) => cache.path_for(&req),
            None => Default::default(),
        };
        ImageRecord {
            id: format!(
                "view:{:.8}_{:.8}_{:.2}_{:.2}",
                pose.lat, pose.lon, pose.heading, pose.pitch
            ),
            pose,
            captured: String::new(),
            file,
        }
    }
}

/// Winner ordering: more inliers, then nearer to `pose0`, then smaller id.
pub fn compare_candidates(a: &CandidateScore, b: &CandidateScore, pose0: &GeoPose) -> Ordering {
    b.inliers
        .cmp(&a.inliers)
        .then_with(|| {
            pose0
                .planar_distance(&a.record.pose)
                .total_cmp(&pose0.planar_distance(&b.record.pose))
        })
        .then_with(|| a.record.id.cmp(&b.record.id))
}

/// Index of the winning score under [`compare_candidates`].
pub fn best_index(scores: &[CandidateScore], pose0: &GeoPose) -> Option<usize> {
    (0..scores.len()).min_by(|&i, &j| compare_candidates(&scores[i], &scores[j], pose0))
}

/// Images to score for the lattice around `pose0`.
///
/// Each lattice point contributes its nearest stored record together with
/// every record sharing that record's location (all stored headings). When
/// a view source is given and no record lies within half a step of the
/// lattice point, the view at the lattice point (with `pose0`'s angles) is
/// fetched instead; points the provider cannot serve are skipped.
pub fn grid_candidates(
    store: &Store,
    pose0: &GeoPose,
    step: f64,
    n: usize,
    source: Option<&ViewSource>,
) -> Result<Vec<(ImageRecord, Raster)>> {
    let lattice = crate::imagestore::grid_lattice(pose0, step, n)?;
    let hits = store.grid_nearest(pose0, step, n)?;
    let mut out: Vec<(ImageRecord, Raster)> = Vec::new();
    let push = |record: ImageRecord, image: Option<Raster>, out: &mut Vec<(ImageRecord, Raster)>| -> Result<()> {
        if out.iter().any(|(r, _)| r.id == record.id) {
            return Ok(());
        }
        let image = match image {
            Some(img) => img,
            None => store.load_image(&record)?,
        };
        out.push((record, image));
        Ok(())
    };
    for (k, &(lat, lon)) in lattice.iter().enumerate() {
        let hit = hits.get(k);
        let near = hit.is_some_and(|h| h.distance <= 0.5 * step + 1e-12);
        if let (false, Some(src)) = (near, source) {
            let pose = GeoPose::new(lat, lon, pose0.heading, pose0.pitch)?;
            if let Some(img) = src.view(pose)? {
                push(src.record(pose), Some(img), &mut out)?;
            }
            continue;
        }
        let Some(hit) = hit else { continue };
        let (lat0, lon0) = (hit.record.pose.lat, hit.record.pose.lon);
        for r in store.records().iter().filter(|r| r.pose.lat == lat0 && r.pose.lon == lon0) {
            push(r.clone(), None, &mut out)?;
        }
    }
    Ok(out)
}

/// Scores all candidates (in parallel on the current rayon pool) and returns
/// the winner with its image. The result does not depend on evaluation order.
pub fn pick_best(
    current: &Features,
    candidates: Vec<(ImageRecord, Raster)>,
    pose0: &GeoPose,
    params: &ScoreParams,
) -> Result<(CandidateScore, Raster)> {
    if candidates.is_empty() {
        return Err(Error::NotFound(format!("no candidate views near {pose0}")));
    }
    let scores: Vec<CandidateScore> = candidates
        .par_iter()
        .map(|(record, img)| Ok(CandidateScore::new(record.clone(), score_against(current, img, params)?)))
        .collect::<Result<_>>()?;
    let i = best_index(&scores, pose0).expect("non-empty");
    let image = candidates.into_iter().nth(i).expect("index in range").1;
    let best = scores.into_iter().nth(i).expect("index in range");
    Ok((best, image))
}

/// Scores every grid candidate and returns the best one.
pub fn grid_search_location(
    current: &Raster,
    pose0: &GeoPose,
    store: &Store,
    source: Option<&ViewSource>,
    step: f64,
    n: usize,
    params: &ScoreParams,
) -> Result<CandidateScore> {
    let feats = Features::extract(current, &params.harris)?;
    let candidates = grid_candidates(store, pose0, step, n, source)?;
    Ok(pick_best(&feats, candidates, pose0, params)?.0)
}

/// Interval halving over `[center - half_range, center + half_range]`.
///
/// Each round scores the midpoints of both halves and keeps the half with
/// the higher score; on a tie, the half containing `center` (the left one
/// when `center` sits on the split). Returns the final interval's midpoint.
pub fn interval_halving<F>(center: f64, half_range: f64, iters: usize, mut score: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<usize>,
{
    if !(half_range > 0.0 && half_range.is_finite()) {
        return Err(Error::InvalidArgument(format!("half range must be positive, got {half_range}")));
    }
    if iters == 0 {
        return Err(Error::InvalidArgument("angle search needs at least one iteration".into()));
    }
    let (mut lo, mut hi) = (center - half_range, center + half_range);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let left = score(0.5 * (lo + mid))?;
        let right = score(0.5 * (mid + hi))?;
        if left > right || (left == right && center <= mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Refines one angle of `pose` by [`interval_halving`] on the inlier count
/// of provider views. Views the provider cannot serve score zero.
#[allow(clippy::too_many_arguments)]
pub fn refine_angle(
    current: &Features,
    pose: GeoPose,
    axis: AngleAxis,
    half_range: f64,
    iters: usize,
    source: &ViewSource,
    params: &ScoreParams,
) -> Result<GeoPose> {
    let at = |angle: f64| match axis {
        AngleAxis::Heading => pose.with_heading(angle),
        AngleAxis::Pitch => pose.with_pitch(angle),
    };
    let center = match axis {
        AngleAxis::Heading => pose.heading,
        AngleAxis::Pitch => pose.pitch,
    };
    let best = interval_halving(center, half_range, iters, |angle| match source.view(at(angle))? {
        Some(img) => Ok(score_against(current, &img, params)?.inliers),
        None => Ok(0),
    })?;
    Ok(at(best))
}

//! Pose search: which stored view best explains the current image.

mod score;
mod search;

pub use score::{score_against, score_candidate, Features, MatchScore, ScoreParams, MIN_HOMOGRAPHY_SUPPORT};
pub use search::{
    best_index, compare_candidates, grid_candidates, grid_search_location, interval_halving, pick_best,
    refine_angle, AngleAxis, CandidateScore, ViewSource,
};

use crate::error::{Error, Result};
use crate::homography::Homography;
use crate::imagestore::{GeoPose, Provider, Store};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatorParams {
    /// Lattice spacing in degrees.
    pub grid_step: f64,
    /// Lattice side length (odd).
    pub grid_size: usize,
    pub half_range: f64,
    pub heading_iters: usize,
    pub pitch_iters: usize,
    pub score: ScoreParams,
    /// Below this many inliers the result is flagged unreliable.
    pub min_inliers: usize,
    /// Horizontal field of view requested from providers, in degrees.
    pub fov: f64,
    /// Worker threads for candidate scoring; 0 uses rayon's default.
    pub threads: usize,
}

impl Default for LocatorParams {
    fn default() -> Self {
        Self {
            grid_step: 1e-4,
            grid_size: 3,
            half_range: 5.0,
            heading_iters: 5,
            pitch_iters: 5,
            score: ScoreParams::default(),
            min_inliers: 15,
            fov: 90.0,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocateResult {
    pub best: CandidateScore,
    pub pose: GeoPose,
    /// Database to current; absent when no homography had enough support.
    pub h_feature: Option<Homography>,
    pub reliable: bool,
    /// Image of the winning candidate.
    pub db_image: Raster,
}

/// Grid search over location, then heading, then pitch refinement through
/// `provider` (skipped without one), then a final score at the refined pose.
///
/// The refined view replaces the grid winner only when it has strictly more
/// inliers; otherwise the grid winner and its stored pose are returned.
pub fn locate(
    current: &Raster,
    pose0: &GeoPose,
    store: &Store,
    provider: Option<&dyn Provider>,
    params: &LocatorParams,
) -> Result<LocateResult> {
    if params.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| locate_inner(current, pose0, store, provider, params))
    } else {
        locate_inner(current, pose0, store, provider, params)
    }
}

fn locate_inner(
    current: &Raster,
    pose0: &GeoPose,
    store: &Store,
    provider: Option<&dyn Provider>,
    params: &LocatorParams,
) -> Result<LocateResult> {
    let feats = Features::extract(current, &params.score.harris)?;
    let source = provider.map(|provider| ViewSource {
        provider,
        cache: Some(store.cache()),
        width: current.width(),
        height: current.height(),
        fov: params.fov,
    });
    let candidates = grid_candidates(store, pose0, params.grid_step, params.grid_size, source.as_ref())?;
    let (mut best, mut db_image) = pick_best(&feats, candidates, pose0, &params.score)?;
    let mut pose = best.record.pose;

    if let Some(src) = &source {
        let p = refine_angle(&feats, pose, AngleAxis::Heading, params.half_range, params.heading_iters, src, &params.score)?;
        let p = refine_angle(&feats, p, AngleAxis::Pitch, params.half_range, params.pitch_iters, src, &params.score)?;
        if let Some(img) = src.view(p)? {
            let s = score_against(&feats, &img, &params.score)?;
            if s.inliers > best.inliers {
                best = CandidateScore::new(src.record(p), s);
                db_image = img;
                pose = p;
            }
        }
    }

    Ok(LocateResult {
        h_feature: best.matchset.homography,
        reliable: best.inliers >= params.min_inliers,
        best,
        pose,
        db_image,
    })
}

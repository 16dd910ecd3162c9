//! On-disk evaluation fixtures and their scoring.
//!
//! A fixture directory holds a `fixture.json` manifest listing cases plus
//! the images and stores they reference (paths relative to the directory).

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::alignment::{build_common_mask, ecc_refine, warp_perspective};
use crate::config::PipelineConfig;
use crate::diagnostics::ssd;
use crate::error::{Error, Result};
use crate::homography::{image_corners, Homography, Point};
use crate::imagestore::{GeoPose, Store};
use crate::locator::{locate, score_candidate};
use crate::raster::Raster;
use crate::synth;

pub const MANIFEST: &str = "fixture.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureCase {
    /// Locate a corrupted copy of a stored view.
    SelfRetrieval {
        name: String,
        store: PathBuf,
        current: PathBuf,
        pose0: GeoPose,
        expected_pose: GeoPose,
        /// Elementwise bound on `h_feature - identity`.
        h_tolerance: f64,
    },
    /// Refine a perturbed feature homography between two renders.
    EccRefinement {
        name: String,
        db: PathBuf,
        current: PathBuf,
        expected_h: Homography,
        /// Corner displacement applied to the feature homography, pixels.
        perturb_px: f64,
        /// Bound on the mean corner error of the refined homography.
        corner_tolerance: f64,
    },
}

impl FixtureCase {
    pub fn name(&self) -> &str {
        match self {
            FixtureCase::SelfRetrieval { name, .. } | FixtureCase::EccRefinement { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub cases: Vec<FixtureCase>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST);
        if !path.is_file() {
            return Err(Error::NotFound(format!("no {MANIFEST} in {}", dir.as_ref().display())));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.cases.is_empty() {
            return Err(Error::NotFound(format!("{} lists no cases", path.display())));
        }
        Ok(m)
    }
}

/// Writes both synthetic evaluation cases into `dir`.
pub fn write_fixtures(dir: impl AsRef<Path>, seed: u64, size: usize) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let sr = synth::self_retrieval(&dir.join("store"), seed, size, 3)?;
    sr.current.save_png(dir.join("retrieval_current.png"))?;
    let pair = synth::ecc_pair(seed, size)?;
    pair.db.save_png(dir.join("ecc_db.png"))?;
    pair.current.save_png(dir.join("ecc_current.png"))?;

    let manifest = Manifest {
        cases: vec![
            FixtureCase::SelfRetrieval {
                name: "self-retrieval".into(),
                store: "store".into(),
                current: "retrieval_current.png".into(),
                pose0: sr.truth,
                expected_pose: sr.truth,
                h_tolerance: 1e-3,
            },
            FixtureCase::EccRefinement {
                name: "ecc-refinement".into(),
                db: "ecc_db.png".into(),
                current: "ecc_current.png".into(),
                expected_h: pair.truth,
                perturb_px: 2.0,
                corner_tolerance: 0.5,
            },
        ],
    };
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Moves the image corners under `h` by `px` pixels, each in a different
/// direction (right, down, left, up), and refits.
pub fn perturb_corners(h: &Homography, width: usize, height: usize, px: f64) -> Result<Homography> {
    let src = image_corners(width, height);
    let dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let mut dst = [(0.0, 0.0); 4];
    for k in 0..4 {
        let q = h.apply(src[k]).ok_or(Error::NonInvertible)?;
        dst[k] = (q.0 + px * dirs[k].0, q.1 + px * dirs[k].1);
    }
    Homography::from_four_points(src, dst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub name: String,
    /// Planar pose distance in degrees, for retrieval cases.
    pub pose_error: Option<f64>,
    /// Retrieval: max elementwise difference from identity.
    /// Refinement: mean corner error of the refined homography.
    pub h_distance: Option<f64>,
    pub ssd_before: Option<f64>,
    pub ssd_after: Option<f64>,
    pub runtime: Duration,
    pub passed: bool,
    pub detail: String,
}

/// Runs one case against the files under `dir`.
pub fn run_case(dir: &Path, case: &FixtureCase, cfg: &PipelineConfig) -> Result<CaseOutcome> {
    let start = Instant::now();
    match case {
        FixtureCase::SelfRetrieval {
            name,
            store,
            current,
            pose0,
            expected_pose,
            h_tolerance,
        } => {
            let store = Store::open(dir.join(store))?;
            let current = Raster::load(dir.join(current))?;
            let r = locate(&current, pose0, &store, None, &cfg.locator_params())?;
            let h_dist = r.h_feature.map(|h| h.max_abs_diff(&Homography::identity()));
            let exact = r.pose == *expected_pose;
            let passed = exact && h_dist.is_some_and(|d| d <= *h_tolerance);
            Ok(CaseOutcome {
                name: name.clone(),
                pose_error: Some(r.pose.planar_distance(expected_pose)),
                h_distance: h_dist,
                ssd_before: None,
                ssd_after: None,
                runtime: start.elapsed(),
                passed,
                detail: format!("matched {} with {} inliers, pose {}", r.best.record.id, r.best.inliers, r.pose),
            })
        }
        FixtureCase::EccRefinement {
            name,
            db,
            current,
            expected_h,
            perturb_px,
            corner_tolerance,
        } => {
            let db = Raster::load(dir.join(db))?;
            let current = Raster::load(dir.join(current))?;
            let (w, h) = (current.width(), current.height());
            let score = score_candidate(&current, &db, &cfg.score_params())?;
            let h_feature = score
                .matchset
                .homography
                .ok_or_else(|| Error::EstimationFailed("no feature homography".into()))?;
            let h0 = perturb_corners(&h_feature, w, h, *perturb_px)?;
            let points: Vec<Point> = score.inlier_db_points();
            let mask = build_common_mask(&points, cfg.ecc.window, db.width(), db.height())?;
            let refined = ecc_refine(&db, &current, &h0, &mask, &cfg.ecc_params())?;
            let (before, v0) = warp_perspective(&db, &h0, w, h)?;
            let (after, v1) = warp_perspective(&db, &refined.h, w, h)?;
            let valid = v0.and(&v1);
            let ssd_before = ssd(&before, &current, &valid)?.0;
            let ssd_after = ssd(&after, &current, &valid)?.0;
            let corner = refined.h.mean_corner_error(expected_h, w, h);
            let passed = ssd_after < ssd_before
                && refined.iterations <= cfg.ecc.max_iters
                && corner <= *corner_tolerance;
            Ok(CaseOutcome {
                name: name.clone(),
                pose_error: None,
                h_distance: Some(corner),
                ssd_before: Some(ssd_before),
                ssd_after: Some(ssd_after),
                runtime: start.elapsed(),
                passed,
                detail: format!(
                    "{} iterations, rho {:.4} -> {:.4}, {} inliers",
                    refined.iterations, refined.initial_rho, refined.rho, score.inliers
                ),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_moves_corners_by_px() {
        let h = Homography::translation(3.0, -1.0);
        let p = perturb_corners(&h, 100, 80, 2.0).unwrap();
        assert!((p.mean_corner_error(&h, 100, 80) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            cases: vec![FixtureCase::EccRefinement {
                name: "x".into(),
                db: "a.png".into(),
                current: "b.png".into(),
                expected_h: Homography::translation(1.0, 2.0),
                perturb_px: 2.0,
                corner_tolerance: 0.5,
            }],
        };
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"kind\":\"ecc_refinement\""));
        assert_eq!(serde_json::from_str::<Manifest>(&text).unwrap(), m);
    }

    #[test]
    fn missing_manifest_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Manifest::load(dir.path()), Err(Error::NotFound(_))));
    }
}

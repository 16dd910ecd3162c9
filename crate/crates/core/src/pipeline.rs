//! End-to-end overlay: locate, refine, extract markers, project, measure.

use crate::alignment::{build_common_mask, ecc_refine, warp_perspective, EccResult};
use crate::config::PipelineConfig;
use crate::diagnostics::{AlignmentReport, ReportJson};
use crate::error::Result;
use crate::homography::Homography;
use crate::imagestore::{GeoPose, Provider, Store};
use crate::lanes::{detect_markers, project_markers};
use crate::locator::{locate, LocateResult};
use crate::raster::Raster;

#[derive(Debug, Clone)]
pub struct OverlayOutcome {
    pub located: LocateResult,
    /// `None` when the result was unreliable or the images differ in size.
    pub ecc: Option<EccResult>,
    /// Database to current homography used for projection.
    pub homography: Option<Homography>,
    /// Current image with the database markers drawn in; `None` when refused.
    pub overlay: Option<Raster>,
    pub alignment: Option<AlignmentReport>,
    pub report: ReportJson,
}

impl OverlayOutcome {
    pub fn reliable(&self) -> bool {
        self.located.reliable
    }
}

/// Runs the whole chain for one current image. An unreliable location is
/// not an error: the outcome carries the report and no overlay.
pub fn run_overlay(
    current: &Raster,
    pose0: &GeoPose,
    store: &Store,
    provider: Option<&dyn Provider>,
    cfg: &PipelineConfig,
) -> Result<OverlayOutcome> {
    cfg.validate()?;
    let located = locate(current, pose0, store, provider, &cfg.locator_params())?;
    let refused = |located: LocateResult| {
        let report = ReportJson::new(None, 0, None, located.best.inliers, located.pose);
        OverlayOutcome {
            located,
            ecc: None,
            homography: None,
            overlay: None,
            alignment: None,
            report,
        }
    };
    let Some(h_feature) = located.h_feature.filter(|_| located.reliable) else {
        return Ok(refused(located));
    };
    let db = &located.db_image;

    let ecc = if db.same_size(current) {
        let mask = build_common_mask(&located.best.inlier_db_points(), cfg.ecc.window, db.width(), db.height())?;
        Some(ecc_refine(db, current, &h_feature, &mask, &cfg.ecc_params())?)
    } else {
        None
    };
    let h = ecc.map_or(h_feature, |e| e.h);

    let markers = detect_markers(&db.to_rgb(), &cfg.lane_params())?;
    let overlay = project_markers(db, &markers, &h, current, cfg.vicinity, cfg.tint)?;

    let (projected, validity) = warp_perspective(db, &h, current.width(), current.height())?;
    let alignment = if validity.is_empty() {
        None
    } else {
        Some(AlignmentReport::compute(&projected, current, &validity)?)
    };
    let report = ReportJson::new(
        alignment.as_ref().map(|a| a.ssd),
        alignment.as_ref().map_or(0, |a| a.valid_count),
        ecc.map(|e| e.rho),
        located.best.inliers,
        located.pose,
    );
    Ok(OverlayOutcome {
        located,
        ecc,
        homography: Some(h),
        overlay: Some(overlay),
        alignment,
        report,
    })
}

use lanelock::imagestore::{GeoPose, Store};
use lanelock::locator::{grid_candidates, locate, refine_angle, AngleAxis, Features, LocatorParams, ViewSource};
use lanelock::pipeline::run_overlay;
use lanelock::synth::{self_retrieval, RenderOptions, SelfRetrieval, POSE_STEP};
use lanelock::{PipelineConfig, Raster};
use rand::{Rng, SeedableRng};

const SIZE: usize = 320;

fn scene(dir: &std::path::Path) -> SelfRetrieval {
    self_retrieval(dir, 11, SIZE, 3).unwrap()
}

fn single_threaded() -> LocatorParams {
    LocatorParams {
        threads: 1,
        ..LocatorParams::default()
    }
}

#[test]
fn finds_the_stored_view_without_a_provider() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(dir.path());
    let r = locate(&s.current, &s.truth, &s.store, None, &single_threaded()).unwrap();
    assert_eq!(r.pose, s.truth);
    assert_eq!(r.best.record.id, "view04");
    assert!(r.reliable);
    let h = r.h_feature.unwrap();
    assert!(h.max_abs_diff(&lanelock::Homography::identity()) < 1e-3);
}

#[test]
fn single_record_store() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(&dir.path().join("full"));
    let centre = s.store.get("view04").unwrap().clone();
    let img = s.store.load_image(&centre).unwrap();
    let mut one = Store::create(dir.path().join("one")).unwrap();
    one.add_raster("only", centre.pose, "2016-06-01", &img).unwrap();

    // Offset start: the lone record is still the nearest hit for the lattice.
    let pose0 = GeoPose::new(s.truth.lat + 0.3 * POSE_STEP, s.truth.lon, s.truth.heading, 0.0).unwrap();
    let r = locate(&s.current, &pose0, &one, None, &single_threaded()).unwrap();
    assert_eq!(r.best.record.id, "only");
    assert_eq!(r.pose, centre.pose);
    assert!(r.reliable);
}

#[test]
fn provider_fills_empty_lattice_points() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(&dir.path().join("full"));
    let centre = s.store.get("view04").unwrap().clone();
    let mut one = Store::create(dir.path().join("one")).unwrap();
    one.add_raster("only", centre.pose, "2016-06-01", &s.store.load_image(&centre).unwrap())
        .unwrap();
    let source = ViewSource {
        provider: &s.provider,
        cache: None,
        width: SIZE,
        height: SIZE,
        fov: 90.0,
    };
    let cands = grid_candidates(&one, &s.truth, POSE_STEP, 3, Some(&source)).unwrap();
    assert_eq!(cands.len(), 9);
    assert_eq!(s.provider.calls(), 8);
    assert_eq!(cands.iter().filter(|(r, _)| r.id == "only").count(), 1);
    for (rec, img) in &cands {
        if rec.id != "only" {
            assert_eq!(*img, s.provider.world.render_pose(&rec.pose, SIZE, SIZE, &RenderOptions::default()).unwrap());
        }
    }
}

#[test]
fn noise_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(dir.path());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let bytes: Vec<u8> = (0..SIZE * SIZE * 3).map(|_| rng.random()).collect();
    let noise = Raster::new(SIZE, SIZE, 3, bytes).unwrap();
    let r = locate(&noise, &s.truth, &s.store, None, &single_threaded()).unwrap();
    assert!(!r.reliable);
    assert!(r.best.inliers < LocatorParams::default().min_inliers);

    let cfg = PipelineConfig {
        threads: 1,
        ..PipelineConfig::default()
    };
    let out = run_overlay(&noise, &s.truth, &s.store, None, &cfg).unwrap();
    assert!(out.overlay.is_none());
    assert!(out.report.ssd.is_none());
    assert_eq!(out.report.inliers, r.best.inliers);
}

#[test]
fn heading_refinement_on_rendered_views() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(dir.path());
    let true_heading = s.truth.heading + 2.2;
    let truth = s.truth.with_heading(true_heading);
    let current = s
        .provider
        .world
        .render_pose(&truth, SIZE, SIZE, &RenderOptions::default())
        .unwrap();
    let params = single_threaded();
    let feats = Features::extract(&current, &params.score.harris).unwrap();
    let source = ViewSource {
        provider: &s.provider,
        cache: None,
        width: SIZE,
        height: SIZE,
        fov: 90.0,
    };
    let p = refine_angle(&feats, s.truth, AngleAxis::Heading, 5.0, 5, &source, &params.score).unwrap();
    assert!((p.heading - true_heading).abs() <= 10.0 / 32.0, "{}", p.heading);
    assert_eq!(p.pitch, s.truth.pitch);
    assert_eq!(s.provider.calls(), 10);
}

#[test]
fn overlay_restores_hidden_markers() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(dir.path());
    let cfg = PipelineConfig {
        threads: 1,
        ..PipelineConfig::default()
    };
    let out = run_overlay(&s.current, &s.truth, &s.store, None, &cfg).unwrap();
    assert!(out.reliable());
    assert_eq!(out.report.pose, s.truth);
    let overlay = out.overlay.unwrap();
    let cut = 2 * SIZE / 3;
    let restored = (cut..SIZE)
        .flat_map(|y| (0..SIZE).map(move |x| (x, y)))
        .filter(|&(x, y)| overlay.pixel(x, y).iter().any(|&v| v > 150))
        .count();
    assert!(restored > 100, "{restored}");
    let upper_changed = (0..cut)
        .flat_map(|y| (0..SIZE).map(move |x| (x, y)))
        .filter(|&(x, y)| overlay.pixel(x, y) != s.current.pixel(x, y))
        .count();
    assert!(upper_changed < restored, "{upper_changed} vs {restored}");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene(dir.path());
    let pose0 = GeoPose::new(s.truth.lat, s.truth.lon + 0.2 * POSE_STEP, s.truth.heading + 1.0, 0.0).unwrap();
    let run = |threads: usize| {
        let cfg = PipelineConfig {
            threads,
            ..PipelineConfig::default()
        };
        run_overlay(&s.current, &pose0, &s.store, Some(&s.provider), &cfg).unwrap()
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.located.pose, b.located.pose);
    assert_eq!(a.located.best.record, b.located.best.record);
    assert_eq!(a.located.best.matchset, b.located.best.matchset);
    assert_eq!(a.homography, b.homography);
    assert_eq!(a.overlay, b.overlay);
    assert_eq!(a.report.to_json(), b.report.to_json());
}

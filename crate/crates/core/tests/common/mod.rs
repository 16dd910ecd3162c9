//! Oracles and seeded checks shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use lanelock::alignment::{build_common_mask, correlation, ecc_refine, warp_perspective, EccParams, PixelMask};
use lanelock::features::{cross_check, match_descriptors, Descriptor};
use lanelock::homography::{dist, Point};
use lanelock::lanes::{detect_markers, edge_filter, segment_markers, LaneParams};
use lanelock::synth::{scenario_pose, traffic, RenderOptions, SynthWorld};
use lanelock::{Homography, Raster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gray image that bilinear interpolation reproduces exactly.
pub fn ramp(w: usize, h: usize) -> Raster {
    Raster::gray_from_fn(w, h, |x, y| ((x as f64 * 1.1 + y as f64 * 0.9) as usize).min(255) as u8)
}

/// Smooth gray texture: a few random sinusoids.
pub fn texture(w: usize, h: usize, seed: u64) -> Raster {
    let mut r = rng(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                r.random_range(0.03..0.15),
                r.random_range(0.03..0.15),
                r.random_range(0.0..std::f64::consts::TAU),
                r.random_range(10.0..25.0),
            )
        })
        .collect();
    Raster::gray_from_fn(w, h, |x, y| {
        let v: f64 = waves
            .iter()
            .map(|&(fx, fy, ph, a)| a * (fx * x as f64 + fy * y as f64 + ph).sin())
            .sum();
        (128.0 + v).clamp(0.0, 255.0).round() as u8
    })
}

/// Near-identity homography: corners move by at most about `px` pixels.
pub fn mild_homography(r: &mut impl Rng, w: usize, h: usize, px: f64) -> Homography {
    let src = lanelock::homography::image_corners(w, h);
    let mut dst = src;
    for p in &mut dst {
        p.0 += r.random_range(-px..px);
        p.1 += r.random_range(-px..px);
    }
    Homography::from_four_points(src, dst).expect("corners in general position")
}

/// Points in a `w x h` frame mapped by a known homography, some of them
/// replaced by uniform outliers.
pub struct Correspondences {
    pub truth: Homography,
    pub src: Vec<Point>,
    pub dst: Vec<Point>,
    pub inlier: Vec<bool>,
}

pub fn correspondences(seed: u64, n: usize, outlier_ratio: f64, noise: f64) -> Correspondences {
    let (w, h) = (640.0, 480.0);
    let mut r = rng(seed);
    let truth = mild_homography(&mut r, 640, 480, 60.0);
    let normal = Normal::new(0.0, noise).unwrap();
    let outliers = (outlier_ratio * n as f64).round() as usize;
    let mut src = Vec::with_capacity(n);
    let mut dst = Vec::with_capacity(n);
    let mut inlier = Vec::with_capacity(n);
    for i in 0..n {
        let p = (r.random_range(0.0..w), r.random_range(0.0..h));
        src.push(p);
        if i < outliers {
            dst.push((r.random_range(0.0..w), r.random_range(0.0..h)));
            inlier.push(false);
        } else {
            let q = truth.apply(p).unwrap();
            dst.push((q.0 + normal.sample(&mut r), q.1 + normal.sample(&mut r)));
            inlier.push(true);
        }
    }
    Correspondences { truth, src, dst, inlier }
}

/// Largest distance between `h` and the truth over the true inliers.
pub fn inlier_error(c: &Correspondences, h: &Homography) -> f64 {
    c.src
        .iter()
        .zip(&c.inlier)
        .filter(|(_, &f)| f)
        .map(|(&p, _)| match (h.apply(p), c.truth.apply(p)) {
            (Some(a), Some(b)) => dist(a, b),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn random_descriptor(r: &mut impl Rng) -> Descriptor {
    Descriptor([r.random(), r.random(), r.random(), r.random()])
}

fn flip_bits(d: &Descriptor, r: &mut impl Rng, flips: usize) -> Descriptor {
    let mut out = *d;
    for _ in 0..flips {
        let bit = r.random_range(0..256);
        out.0[bit / 64] ^= 1 << (bit % 64);
    }
    out
}

/// Cross-checked matching gives the same pairs in either direction.
pub fn matcher_symmetry(seed: u64) -> Check {
    let mut r = rng(seed);
    let a: Vec<Descriptor> = (0..r.random_range(5..60)).map(|_| random_descriptor(&mut r)).collect();
    let mut b: Vec<Descriptor> = (0..r.random_range(0..30)).map(|_| random_descriptor(&mut r)).collect();
    for d in &a {
        if r.random_bool(0.6) {
            let flips = r.random_range(0..40);
            b.push(flip_bits(d, &mut r, flips));
        }
    }
    let ratio = r.random_range(0.5..0.95);
    let ab = match_descriptors(&a, &b, ratio).map_err(|e| e.to_string())?;
    let ba = match_descriptors(&b, &a, ratio).map_err(|e| e.to_string())?;
    let forward: BTreeSet<(usize, usize)> = cross_check(&ab, &ba).pairs.iter().map(|m| (m.query, m.train)).collect();
    let backward: BTreeSet<(usize, usize)> = cross_check(&ba, &ab).pairs.iter().map(|m| (m.train, m.query)).collect();
    if forward != backward {
        return Err(format!("seed {seed}: {} pairs forward, {} backward", forward.len(), backward.len()));
    }
    Ok(())
}

/// Marker detection and the edge filter never add pixels.
pub fn mask_subset(seed: u64) -> Check {
    let world = SynthWorld::new(seed, scenario_pose());
    let opts = RenderOptions {
        blobs: traffic(seed, 5),
        ..RenderOptions::default()
    };
    let pose = scenario_pose().with_heading(scenario_pose().heading + (seed % 7) as f64 - 3.0);
    let img = world.render_pose(&pose, 160, 120, &opts).map_err(|e| e.to_string())?;
    let params = LaneParams::default();
    let raw = segment_markers(&img, &params.ranges, params.channel_order).map_err(|e| e.to_string())?;
    let detected = detect_markers(&img, &params).map_err(|e| e.to_string())?;
    if !detected.is_subset_of(&raw) {
        return Err(format!("seed {seed}: detected markers outside the colour mask"));
    }
    let mut r = rng(seed);
    let arbitrary = PixelMask::from_fn(160, 120, |x, y| (x * 31 + y * 17 + seed as usize).is_multiple_of(5));
    let filtered = edge_filter(&arbitrary, &img, 50.0, 150.0, r.random_range(0..6)).map_err(|e| e.to_string())?;
    if !filtered.is_subset_of(&arbitrary) {
        return Err(format!("seed {seed}: edge filter added pixels"));
    }
    let points: Vec<Point> = (0..r.random_range(1..6))
        .map(|_| (r.random_range(-10.0..170.0), r.random_range(-10.0..130.0)))
        .collect();
    let window = 2 * r.random_range(0..15) + 1;
    let common = build_common_mask(&points, window, 160, 120).map_err(|e| e.to_string())?;
    let half = (window / 2) as f64;
    for (x, y) in common.set_points() {
        let near = points
            .iter()
            .any(|p| (x as f64 - p.0.round()).abs() <= half && (y as f64 - p.1.round()).abs() <= half);
        if !near {
            return Err(format!("seed {seed}: common mask pixel ({x},{y}) outside every window"));
        }
    }
    Ok(())
}

/// Warping by `a` then `b` agrees with warping once by `b * a`.
pub fn warp_composition(seed: u64) -> Check {
    let mut r = rng(seed);
    let (w, h) = (90, 70);

    let img = texture(w, h, seed);
    let (ta, tb) = (
        (r.random_range(-6..7) as f64, r.random_range(-6..7) as f64),
        (r.random_range(-6..7) as f64, r.random_range(-6..7) as f64),
    );
    let a = Homography::translation(ta.0, ta.1);
    let b = Homography::translation(tb.0, tb.1);
    let (once, v_once) = warp_perspective(&img, &b.after(&a).unwrap(), w, h).unwrap();
    let (first, v_first) = warp_perspective(&img, &a, w, h).unwrap();
    let (twice, v_twice) = warp_perspective(&first, &b, w, h).unwrap();
    for (x, y) in v_twice.set_points() {
        let (sx, sy) = (x as f64 - tb.0, y as f64 - tb.1);
        if !v_first.get(sx as usize, sy as usize) {
            continue;
        }
        if !v_once.get(x, y) {
            return Err(format!("seed {seed}: ({x},{y}) valid in two steps but not in one"));
        }
        if once.get(x, y, 0) != twice.get(x, y, 0) {
            return Err(format!("seed {seed}: integer shifts disagree at ({x},{y})"));
        }
    }

    let img = ramp(w, h);
    let a = mild_homography(&mut r, w, h, 4.0);
    let b = mild_homography(&mut r, w, h, 4.0);
    let (once, v_once) = warp_perspective(&img, &b.after(&a).unwrap(), w, h).unwrap();
    let (first, v_first) = warp_perspective(&img, &a, w, h).unwrap();
    let (twice, v_twice) = warp_perspective(&first, &b, w, h).unwrap();
    let b_inv = b.inverse().unwrap();
    let mut checked = 0;
    for (x, y) in v_once.and(&v_twice).set_points() {
        // The intermediate sample must come from valid first-stage pixels.
        let (sx, sy) = b_inv.apply((x as f64, y as f64)).unwrap();
        let (x0, y0) = (sx.floor().max(0.0) as usize, sy.floor().max(0.0) as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        if ![(x0, y0), (x1, y0), (x0, y1), (x1, y1)].iter().all(|&(u, v)| v_first.get(u, v)) {
            continue;
        }
        let d = (once.get(x, y, 0) as i32 - twice.get(x, y, 0) as i32).abs();
        if d > 2 {
            return Err(format!("seed {seed}: ramp differs by {d} at ({x},{y})"));
        }
        checked += 1;
    }
    if checked < w * h / 2 {
        return Err(format!("seed {seed}: only {checked} pixels compared"));
    }
    Ok(())
}

pub struct EccSetup {
    pub db: Raster,
    pub current: Raster,
    pub truth: Homography,
    pub mask: PixelMask,
}

pub fn ecc_setup(seed: u64) -> EccSetup {
    let (w, h) = (120, 100);
    let db = texture(w, h, seed);
    let mut r = rng(seed ^ 0xecc);
    let truth = mild_homography(&mut r, w, h, 3.0);
    let (current, _) = warp_perspective(&db, &truth, w, h).unwrap();
    let points: Vec<Point> = (0..4)
        .map(|_| (r.random_range(30.0..90.0), r.random_range(25.0..75.0)))
        .collect();
    let mask = build_common_mask(&points, 31, w, h).unwrap();
    EccSetup { db, current, truth, mask }
}

/// The refined correlation never drops below the starting one and matches
/// an independent evaluation at the returned homography.
pub fn rho_guard(seed: u64) -> Check {
    let s = ecc_setup(seed);
    let mut r = rng(seed ^ 0x5eed);
    let reach = [0.5, 2.0, 6.0, 15.0][(seed % 4) as usize];
    let start = mild_homography(&mut r, 120, 100, reach).after(&s.truth).unwrap();
    let params = EccParams::default();
    let res = ecc_refine(&s.db, &s.current, &start, &s.mask, &params).map_err(|e| e.to_string())?;
    if res.rho < res.initial_rho - 1e-9 {
        return Err(format!("seed {seed}: rho fell from {} to {}", res.initial_rho, res.rho));
    }
    let before = correlation(&s.db, &s.current, &start, &s.mask, params.min_pixels).map_err(|e| e.to_string())?;
    let after = correlation(&s.db, &s.current, &res.h, &s.mask, params.min_pixels).map_err(|e| e.to_string())?;
    match (before, after) {
        (Some(b), Some(a)) if (b - res.initial_rho).abs() < 1e-9 && (a - res.rho).abs() < 1e-9 => Ok(()),
        (None, _) if res.h == start => Ok(()),
        other => Err(format!(
            "seed {seed}: independent correlation {other:?} vs reported {} -> {}",
            res.initial_rho, res.rho
        )),
    }
}

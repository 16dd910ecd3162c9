//! Deterministic synthetic street scenes for fixtures and tests.
//!
//! A [`SynthWorld`] is a textured plane (sky, building facades with
//! windows, sidewalk, road with painted markers). A pose selects a view of
//! that plane through a similarity transform: longitude pans sideways,
//! latitude zooms (walking forward), heading pans, and pitch tilts the view
//! up or down. Two views of one world therefore differ by an exact, known
//! homography.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::alignment::PixelMask;
use crate::error::{Error, Result};
use crate::homography::Homography;
use crate::imagestore::{grid_lattice, GeoPose, Provider, Store, ViewRequest};
use crate::lanes::MarkerKind;
use crate::raster::Raster;

/// Grid spacing the pose mapping is tuned for, in degrees.
pub const POSE_STEP: f64 = 1e-4;
/// Sideways pan per [`POSE_STEP`] of longitude, world pixels.
pub const PAN_PER_STEP: f64 = 60.0;
/// Zoom factor per [`POSE_STEP`] of latitude.
pub const ZOOM_PER_STEP: f64 = 1.1;
/// Pan per degree of heading or pitch, world pixels.
pub const PX_PER_DEGREE: f64 = 7.1;
/// Reference view size; other sizes scale the view to keep the same extent.
pub const REFERENCE_WIDTH: f64 = 640.0;

pub const WHITE_PAINT: [u8; 3] = [236, 234, 228];
pub const YELLOW_PAINT: [u8; 3] = [232, 196, 42];

const SIDEWALK_Y: f64 = 400.0;
const ROAD_Y: f64 = 430.0;
const VANISH_Y: f64 = 380.0;
const BUILDING_CELL: f64 = 170.0;

/// Axis-aligned rectangle drawn over the scene, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub color: [u8; 3],
}

impl Blob {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Samples per pixel along each axis; 1 samples pixel centres only.
    pub supersample: usize,
    pub gain: f64,
    pub bias: f64,
    pub blobs: Vec<Blob>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            supersample: 2,
            gain: 1.0,
            bias: 0.0,
            blobs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthWorld {
    pub seed: u64,
    /// Pose whose view is centred on the world origin at unit zoom.
    pub anchor: GeoPose,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn mix3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [lerp(a[0], b[0], t), lerp(a[1], b[1], t), lerp(a[2], b[2], t)]
}

impl SynthWorld {
    pub fn new(seed: u64, anchor: GeoPose) -> Self {
        Self { seed, anchor }
    }

    fn hash(&self, salt: u64, i: i64, j: i64) -> u64 {
        mix64(self.seed ^ mix64(salt ^ mix64((i as u64) ^ mix64(j as u64))))
    }

    fn unit(&self, salt: u64, i: i64, j: i64) -> f64 {
        (self.hash(salt, i, j) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Smooth value noise in `[0, 1)` with feature size `scale`.
    fn noise(&self, salt: u64, x: f64, y: f64, scale: f64) -> f64 {
        let (fx, fy) = (x / scale, y / scale);
        let (ix, iy) = (fx.floor(), fy.floor());
        let (tx, ty) = (smoothstep(fx - ix), smoothstep(fy - iy));
        let (ix, iy) = (ix as i64, iy as i64);
        let top = lerp(self.unit(salt, ix, iy), self.unit(salt, ix + 1, iy), tx);
        let bottom = lerp(self.unit(salt, ix, iy + 1), self.unit(salt, ix + 1, iy + 1), tx);
        lerp(top, bottom, ty)
    }

    fn texture(&self, salt: u64, x: f64, y: f64) -> f64 {
        0.5 * self.noise(salt, x, y, 3.0) + 0.3 * self.noise(salt + 1, x, y, 9.0) + 0.2 * self.noise(salt + 2, x, y, 27.0)
    }

    /// Painted marker covering the world point, if any.
    pub fn marker_at(&self, x: f64, y: f64) -> Option<MarkerKind> {
        if y < ROAD_Y {
            return None;
        }
        let t = y - VANISH_Y;
        // Double yellow centre line, slightly slanted, gap widening downward.
        let centre = 0.15 * t;
        let gap = 3.0 + 0.035 * t;
        let hw = 1.5 + 0.012 * t;
        if (x - (centre - gap)).abs() < hw || (x - (centre + gap)).abs() < hw {
            return Some(MarkerKind::Yellow);
        }
        let ww = 2.0 + 0.02 * t;
        // Dashed lane divider on the left, solid edge line on the right.
        if (x + 0.9 * t).abs() < ww && y.rem_euclid(70.0) < 40.0 {
            return Some(MarkerKind::White);
        }
        if (x - 1.3 * t).abs() < ww {
            return Some(MarkerKind::White);
        }
        // Straight-ahead arrow in the left lane.
        let ax = -0.45 * (575.0 - VANISH_Y);
        if (545.0..610.0).contains(&y) && (x - ax).abs() < 5.0 {
            return Some(MarkerKind::White);
        }
        if (515.0..545.0).contains(&y) && (x - ax).abs() < (y - 515.0) * 0.6 {
            return Some(MarkerKind::White);
        }
        // Block letters painted in the right lane.
        let (lx, ly) = (x - 60.0, y - 470.0);
        let letters: [[f64; 4]; 10] = [
            [0.0, 0.0, 4.0, 30.0],
            [0.0, 0.0, 14.0, 4.0],
            [0.0, 13.0, 14.0, 4.0],
            [0.0, 26.0, 14.0, 4.0],
            [12.0, 0.0, 4.0, 30.0],
            [24.0, 0.0, 4.0, 30.0],
            [24.0, 26.0, 16.0, 4.0],
            [36.0, 0.0, 4.0, 30.0],
            [48.0, 0.0, 16.0, 4.0],
            [48.0, 13.0, 16.0, 4.0],
        ];
        let s_tail = [[48.0, 0.0, 4.0, 17.0], [60.0, 13.0, 4.0, 17.0], [48.0, 26.0, 16.0, 4.0]];
        if letters
            .iter()
            .chain(s_tail.iter())
            .any(|r| lx >= r[0] && lx < r[0] + r[2] && ly >= r[1] && ly < r[1] + r[3])
        {
            return Some(MarkerKind::White);
        }
        None
    }

    /// Static road objects whose colours lie outside the marker ranges.
    fn road_clutter(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        if y < ROAD_Y {
            return None;
        }
        // Manhole cover: light gray, too dark in red to pass as white paint.
        if (x + 120.0).hypot(y - 590.0) < 18.0 {
            let ring = ((x + 120.0).hypot(y - 590.0) / 4.0).floor() as i64 % 2 == 0;
            return Some(if ring { [172.0, 170.0, 168.0] } else { [120.0, 118.0, 115.0] });
        }
        // Traffic cones: saturated orange, green too low for yellow.
        for cx in [190.0, 230.0] {
            let (top, base) = (520.0, 560.0);
            if (top..base).contains(&y) && (x - cx).abs() < (y - top) * 0.35 + 2.0 {
                let band = ((y - top) / 10.0).floor() as i64 == 2;
                return Some(if band { [176.0, 176.0, 176.0] } else { [250.0, 118.0, 28.0] });
            }
        }
        None
    }

    fn sky(&self, x: f64, y: f64) -> [f64; 3] {
        let base = [112.0 + 0.08 * y, 152.0 + 0.05 * y, 214.0];
        let cloud = (self.noise(11, x, y, 60.0) - 0.55).max(0.0) * 2.2;
        mix3(base, [178.0, 182.0, 196.0], cloud.min(1.0))
    }

    fn building(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let cell = (x / BUILDING_CELL).floor() as i64;
        let left = cell as f64 * BUILDING_CELL + 4.0 + 14.0 * self.unit(21, cell, 0);
        let right = (cell + 1) as f64 * BUILDING_CELL - 4.0 - 14.0 * self.unit(22, cell, 0);
        let top = 70.0 + 130.0 * self.unit(23, cell, 0);
        if x < left || x >= right || y < top || y >= SIDEWALK_Y {
            return None;
        }
        let base = [
            110.0 + 55.0 * self.unit(24, cell, 0),
            100.0 + 50.0 * self.unit(25, cell, 0),
            90.0 + 55.0 * self.unit(26, cell, 0),
        ];
        let grain = self.texture(27 + cell as u64 % 5, x, y) - 0.5;
        let mut c = base.map(|v| v + 36.0 * grain);

        let sx = 18.0 + 12.0 * self.unit(28, cell, 0);
        let sy = 20.0 + 12.0 * self.unit(29, cell, 0);
        let (ox, oy) = (x - left - 6.0, y - top - 8.0);
        if ox >= 0.0 && oy >= 0.0 && y < SIDEWALK_Y - 26.0 {
            let (col, row) = ((ox / sx).floor(), (oy / sy).floor());
            let (fx, fy) = (ox - col * sx, oy - row * sy);
            let inside_x = x + (sx - fx) < right - 4.0;
            if inside_x && fx < 0.62 * sx && fy < 0.66 * sy {
                let (ci, ri) = (col as i64 + 1000 * cell, row as i64);
                let lit = self.unit(30, ci, ri);
                let shade = self.unit(31, ci, ri);
                c = if lit > 0.6 {
                    [150.0 + 18.0 * shade, 138.0 + 15.0 * shade, 80.0 + 15.0 * shade]
                } else {
                    [20.0 + 25.0 * shade, 25.0 + 25.0 * shade, 35.0 + 30.0 * shade]
                };
                // Window frames split into panes.
                if (fx - 0.31 * sx).abs() < 1.0 {
                    c = base.map(|v| v * 0.7);
                }
            }
        }
        // Ground-floor door per building.
        let door = left + (right - left) * (0.2 + 0.5 * self.unit(32, cell, 0));
        if (door..door + 16.0).contains(&x) && y >= SIDEWALK_Y - 30.0 {
            c = [48.0, 34.0, 26.0];
        }
        // Facades stay below the red level of either paint colour.
        Some(c.map(|v| v.min(168.0)))
    }

    /// Scene colour at a world point, before photometric adjustments.
    pub fn color_at(&self, x: f64, y: f64) -> [f64; 3] {
        let c = if y >= ROAD_Y {
            match self.marker_at(x, y) {
                Some(MarkerKind::White) => WHITE_PAINT.map(f64::from),
                Some(MarkerKind::Yellow) => YELLOW_PAINT.map(f64::from),
                None => match self.road_clutter(x, y) {
                    Some(c) => c,
                    None => {
                        let v = 66.0 + 16.0 * self.texture(41, x, y);
                        [v, v, v + 4.0]
                    }
                },
            }
        } else if y >= SIDEWALK_Y {
            let joint = x.rem_euclid(37.0) < 2.0 || (y - SIDEWALK_Y).rem_euclid(15.0) < 1.5;
            let v = 128.0 + 30.0 * self.texture(51, x, y);
            if joint {
                [v - 24.0, v - 26.0, v - 28.0]
            } else {
                [v, v - 4.0, v - 10.0]
            }
        } else {
            self.building(x, y).unwrap_or_else(|| self.sky(x, y))
        };
        c.map(|v| v.clamp(0.0, 255.0))
    }

    /// World-to-image homography of the view at `pose` rendered at
    /// `width x height` with horizontal field of view `fov` degrees.
    pub fn view(&self, pose: &GeoPose, width: usize, height: usize, fov: f64) -> Result<Homography> {
        if width == 0 || height == 0 || !(fov > 0.0 && fov < 180.0) {
            return Err(Error::InvalidArgument(format!("bad view {width}x{height} fov {fov}")));
        }
        let dlat = (pose.lat - self.anchor.lat) / POSE_STEP;
        let dlon = (pose.lon - self.anchor.lon) / POSE_STEP;
        let dh = (pose.heading - self.anchor.heading + 540.0).rem_euclid(360.0) - 180.0;
        let dp = pose.pitch - self.anchor.pitch;
        let zoom = ZOOM_PER_STEP.powf(dlat) * (width as f64 / REFERENCE_WIDTH) * (90.0 / fov);
        let cx = dlon * PAN_PER_STEP + dh * PX_PER_DEGREE;
        let cy = REFERENCE_WIDTH / 2.0 - dp * PX_PER_DEGREE;
        let (u0, v0) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        Homography::from_rows([[zoom, 0.0, u0 - zoom * cx], [0.0, zoom, v0 - zoom * cy], [0.0, 0.0, 1.0]])
    }

    /// Renders the world through `world_to_image`.
    pub fn render(&self, world_to_image: &Homography, width: usize, height: usize, opts: &RenderOptions) -> Result<Raster> {
        let inv = world_to_image.inverse()?;
        let ss = opts.supersample.max(1);
        let mut data = Vec::with_capacity(width * height * 3);
        for v in 0..height {
            for u in 0..width {
                let mut acc = [0.0; 3];
                for j in 0..ss {
                    for i in 0..ss {
                        let du = (i as f64 + 0.5) / ss as f64 - 0.5;
                        let dv = (j as f64 + 0.5) / ss as f64 - 0.5;
                        let (x, y) = inv.apply((u as f64 + du, v as f64 + dv)).unwrap_or((f64::NAN, f64::NAN));
                        let c = self.sample(x, y, &opts.blobs);
                        for k in 0..3 {
                            acc[k] += c[k];
                        }
                    }
                }
                let n = (ss * ss) as f64;
                for a in acc {
                    data.push((opts.gain * a / n + opts.bias).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Raster::new(width, height, 3, data)
    }

    fn sample(&self, x: f64, y: f64, blobs: &[Blob]) -> [f64; 3] {
        if !(x.is_finite() && y.is_finite()) {
            return [0.0; 3];
        }
        match blobs.iter().rev().find(|b| b.contains(x, y)) {
            Some(b) => b.color.map(f64::from),
            None => self.color_at(x, y),
        }
    }

    /// Pixels whose centre sees unoccluded paint.
    pub fn marker_mask(&self, world_to_image: &Homography, width: usize, height: usize, blobs: &[Blob]) -> Result<PixelMask> {
        let inv = world_to_image.inverse()?;
        Ok(PixelMask::from_fn(width, height, |u, v| {
            let Some((x, y)) = inv.apply((u as f64, v as f64)) else {
                return false;
            };
            !blobs.iter().any(|b| b.contains(x, y)) && self.marker_at(x, y).is_some()
        }))
    }

    pub fn render_pose(&self, pose: &GeoPose, width: usize, height: usize, opts: &RenderOptions) -> Result<Raster> {
        self.render(&self.view(pose, width, height, 90.0)?, width, height, opts)
    }
}

/// Vehicle-like blobs scattered over the road and sidewalk, in colours
/// outside the marker ranges.
pub fn traffic(seed: u64, count: usize) -> Vec<Blob> {
    let palette = [[150, 30, 36], [28, 60, 140], [60, 64, 70], [165, 160, 150], [20, 110, 60]];
    (0..count)
        .map(|i| {
            let h = |salt: u64| (mix64(seed ^ mix64(salt ^ mix64(i as u64))) >> 11) as f64 / (1u64 << 53) as f64;
            Blob {
                x: -300.0 + 560.0 * h(1),
                y: 395.0 + 120.0 * h(2),
                w: 50.0 + 50.0 * h(3),
                h: 24.0 + 20.0 * h(4),
                color: palette[(h(5) * palette.len() as f64) as usize % palette.len()],
            }
        })
        .collect()
}

/// Renders views of a [`SynthWorld`] on request and counts the calls.
#[derive(Debug)]
pub struct SynthProvider {
    pub world: SynthWorld,
    pub options: RenderOptions,
    calls: AtomicUsize,
}

impl SynthProvider {
    pub fn new(world: SynthWorld, options: RenderOptions) -> Self {
        Self {
            world,
            options,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Provider for SynthProvider {
    fn fetch(&self, req: &ViewRequest) -> Result<Raster> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let h = self.world.view(&req.pose, req.width, req.height, req.fov)?;
        self.world.render(&h, req.width, req.height, &self.options)
    }
}

/// Pose of the centre view in the bundled scenarios.
pub fn scenario_pose() -> GeoPose {
    GeoPose::new(44.9745000, -93.2704977, 218.36, 0.0).expect("valid pose")
}

/// A store of `n x n` views on the [`POSE_STEP`] lattice around
/// [`scenario_pose`], the matching provider, and a query that is the centre
/// view with its lower third blacked out.
pub struct SelfRetrieval {
    pub store: Store,
    pub provider: SynthProvider,
    pub current: Raster,
    pub truth: GeoPose,
}

pub fn self_retrieval(root: &Path, seed: u64, size: usize, n: usize) -> Result<SelfRetrieval> {
    let truth = scenario_pose();
    let world = SynthWorld::new(seed, truth);
    let provider = SynthProvider::new(world, RenderOptions::default());
    let mut store = Store::create(root)?;
    let mut current = None;
    for (k, (lat, lon)) in grid_lattice(&truth, POSE_STEP, n)?.into_iter().enumerate() {
        let pose = GeoPose::new(lat, lon, truth.heading, truth.pitch)?;
        let img = world.render_pose(&pose, size, size, &provider.options)?;
        store.add_raster(&format!("view{k:02}"), pose, "2016-06-01", &img)?;
        if k == n * n / 2 {
            current = Some(img);
        }
    }
    let mut current = current.expect("odd lattice has a centre");
    let (w, h, ch) = (current.width(), current.height(), current.channels());
    let cut = 2 * h / 3;
    current.data_mut()[cut * w * ch..].fill(0);
    Ok(SelfRetrieval {
        store,
        provider,
        current,
        truth,
    })
}

/// Two renders of one scene: `current` sees the plane through `truth`
/// (database to current) after `db`'s view, with moved traffic and a
/// gain/bias change.
pub struct EccPair {
    pub world: SynthWorld,
    pub db: Raster,
    pub current: Raster,
    pub truth: Homography,
}

pub fn ecc_pair(seed: u64, size: usize) -> Result<EccPair> {
    let world = SynthWorld::new(seed, scenario_pose());
    let view = world.view(&world.anchor, size, size, 90.0)?;
    let s = size as f64 / REFERENCE_WIDTH;
    let c = (size as f64 - 1.0) / 2.0;
    // Mild perspective change about the image centre.
    let about = Homography::from_rows([
        [1.03, 0.012, 0.0],
        [-0.008, 0.985, 0.0],
        [2.0e-5 / s, -1.5e-5 / s, 1.0],
    ])?;
    let truth = Homography::translation(c + 7.5 * s, c - 4.25 * s)
        .after(&about)?
        .after(&Homography::translation(-c, -c))?;
    let db = world.render(
        &view,
        size,
        size,
        &RenderOptions {
            blobs: traffic(seed ^ 0xd8, 4),
            ..RenderOptions::default()
        },
    )?;
    let current = world.render(
        &truth.after(&view)?,
        size,
        size,
        &RenderOptions {
            gain: 1.15,
            bias: -12.0,
            blobs: traffic(seed ^ 0xc7, 4),
            ..RenderOptions::default()
        },
    )?;
    Ok(EccPair {
        world,
        db,
        current,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanes::{default_ranges, ColorRange};

    fn world() -> SynthWorld {
        SynthWorld::new(7, GeoPose::new(44.9745, -93.2704977, 218.36, 0.0).unwrap())
    }

    #[test]
    fn paint_inside_ranges_scene_outside() {
        let ranges = default_ranges();
        let inside = |c: [f64; 3]| {
            let c = c.map(|v| v.round() as u8);
            ranges.iter().any(|r: &ColorRange| r.contains([c[2], c[1], c[0]]))
        };
        assert!(inside(WHITE_PAINT.map(f64::from)));
        assert!(inside(YELLOW_PAINT.map(f64::from)));
        let w = world();
        for yi in 0..200 {
            for xi in 0..200 {
                let (x, y) = (-400.0 + xi as f64 * 4.03, yi as f64 * 3.51);
                assert_eq!(inside(w.color_at(x, y)), w.marker_at(x, y).is_some(), "({x}, {y})");
            }
        }
    }

    #[test]
    fn neighbour_views_differ_by_known_homography() {
        let w = world();
        let a = w.anchor;
        let b = GeoPose::new(a.lat, a.lon + POSE_STEP, a.heading, a.pitch).unwrap();
        let (ha, hb) = (w.view(&a, 640, 640, 90.0).unwrap(), w.view(&b, 640, 640, 90.0).unwrap());
        let rel = hb.after(&ha.inverse().unwrap()).unwrap();
        assert!(rel.max_abs_diff(&Homography::translation(-PAN_PER_STEP, 0.0)) < 1e-6);
        let c = a.with_heading(a.heading + 1.0);
        let hc = w.view(&c, 640, 640, 90.0).unwrap();
        let rel = hc.after(&ha.inverse().unwrap()).unwrap();
        assert!(rel.max_abs_diff(&Homography::translation(-PX_PER_DEGREE, 0.0)) < 1e-6);
    }

    #[test]
    fn render_is_deterministic() {
        let w = world();
        let opts = RenderOptions::default();
        let a = w.render_pose(&w.anchor, 64, 48, &opts).unwrap();
        let b = w.render_pose(&w.anchor, 64, 48, &opts).unwrap();
        assert_eq!(a, b);
        let p = SynthProvider::new(w, opts);
        let req = ViewRequest {
            pose: w.anchor,
            width: 64,
            height: 48,
            fov: 90.0,
        };
        assert_eq!(p.fetch(&req).unwrap(), a);
        assert_eq!(p.calls(), 1);
    }
}

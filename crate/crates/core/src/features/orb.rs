//! Oriented, steered binary descriptors (single scale).

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::FeaturePoint;
use crate::raster::{Plane, Raster};

/// Radius of the orientation patch and of the sampling disc.
pub const ORB_PATCH_RADIUS: i32 = 15;
/// Points whose rounded centre is closer than this to any border are dropped.
pub const ORB_BORDER: usize = 16;

const PAIRS: usize = 256;
const PATTERN_SEED: u64 = 0x5afe_d21e;
const SMOOTH_SIGMA: f64 = 2.0;

/// 256-bit binary descriptor compared by Hamming distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    #[inline]
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Test-point pairs drawn once from an isotropic Gaussian (sigma = 31/5)
/// clipped to the sampling disc, so rotated pairs stay inside the border.
fn pattern() -> &'static [[i32; 4]; PAIRS] {
    static PATTERN: OnceLock<[[i32; 4]; PAIRS]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
        let normal = Normal::<f64>::new(0.0, 31.0 / 5.0).expect("valid sigma");
        let r2 = ORB_PATCH_RADIUS * ORB_PATCH_RADIUS;
        let point = |rng: &mut ChaCha8Rng| loop {
            let x = normal.sample(rng).round() as i32;
            let y = normal.sample(rng).round() as i32;
            if x * x + y * y <= r2 {
                return (x, y);
            }
        };
        let mut out = [[0i32; 4]; PAIRS];
        for pair in out.iter_mut() {
            loop {
                let a = point(&mut rng);
                let b = point(&mut rng);
                if a != b {
                    *pair = [a.0, a.1, b.0, b.1];
                    break;
                }
            }
        }
        out
    })
}

fn patch_offsets() -> &'static [(i32, i32)] {
    static OFFSETS: OnceLock<Vec<(i32, i32)>> = OnceLock::new();
    OFFSETS.get_or_init(|| {
        let r = ORB_PATCH_RADIUS;
        let mut v = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    v.push((dx, dy));
                }
            }
        }
        v
    })
}

/// Intensity-centroid orientation of the disc patch around `(cx, cy)`.
fn orientation(gray: &Plane, cx: usize, cy: usize) -> f64 {
    let (mut m10, mut m01) = (0.0, 0.0);
    for &(dx, dy) in patch_offsets() {
        let v = gray.at((cx as i32 + dx) as usize, (cy as i32 + dy) as usize);
        m10 += dx as f64 * v;
        m01 += dy as f64 * v;
    }
    m01.atan2(m10)
}

/// Describes each point that lies at least [`ORB_BORDER`] pixels inside the
/// image. Returns the surviving points (with orientation filled in) and one
/// descriptor per surviving point, index-aligned.
pub fn orb_describe(img: &Raster, points: &[FeaturePoint]) -> (Vec<FeaturePoint>, Vec<Descriptor>) {
    let gray = Plane::from_raster(img);
    let (w, h) = (gray.width, gray.height);
    let inside = |p: &FeaturePoint| {
        let (cx, cy) = (p.x.round(), p.y.round());
        cx >= ORB_BORDER as f64
            && cy >= ORB_BORDER as f64
            && cx + (ORB_BORDER as f64) < w as f64
            && cy + (ORB_BORDER as f64) < h as f64
    };
    let kept: Vec<FeaturePoint> = points.iter().filter(|p| inside(p)).copied().collect();
    if kept.is_empty() {
        return (kept, Vec::new());
    }

    // Quantized so that float noise in the blur cannot flip a comparison
    // between equal intensities.
    let mut smooth = gray.gaussian_blur(SMOOTH_SIGMA);
    smooth.data.iter_mut().for_each(|v| *v = (*v * 1e6).round());

    let pat = pattern();
    let mut out_pts = Vec::with_capacity(kept.len());
    let mut descs = Vec::with_capacity(kept.len());
    for mut p in kept {
        let cx = p.x.round() as usize;
        let cy = p.y.round() as usize;
        let angle = orientation(&gray, cx, cy);
        p.orientation = angle;
        let (s, c) = angle.sin_cos();
        let sample = |x: i32, y: i32| {
            let rx = (x as f64 * c - y as f64 * s).round() as isize;
            let ry = (x as f64 * s + y as f64 * c).round() as isize;
            smooth.at((cx as isize + rx) as usize, (cy as isize + ry) as usize)
        };
        let mut bits = [0u64; 4];
        for (i, t) in pat.iter().enumerate() {
            if sample(t[0], t[1]) < sample(t[2], t[3]) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        out_pts.push(p);
        descs.push(Descriptor(bits));
    }
    (out_pts, descs)
}

//! Enhanced correlation coefficient (ECC) registration with a forward
//! additive Gauss-Newton update.
//!
//! The criterion is the correlation coefficient between the zero-mean current
//! image and the zero-mean database image warped into the current frame,
//! over the masked pixels. It is invariant to gain and bias changes between
//! the two images.
//!
//! The warp being optimized maps current-image coordinates into
//! database-image coordinates, i.e. it is the inverse of the database to
//! current homography that callers pass in and get back. The mask lives in
//! database coordinates and is carried along by the warp.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PixelMask;
use crate::error::{Error, Result};
use crate::homography::Homography;
use crate::raster::{Plane, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionModel {
    Translation,
    Affine,
    Homography,
}

impl MotionModel {
    fn params(self) -> usize {
        match self {
            MotionModel::Translation => 2,
            MotionModel::Affine => 6,
            MotionModel::Homography => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EccParams {
    pub max_iters: usize,
    /// Stop once the parameter update norm falls below this.
    pub eps: f64,
    pub model: MotionModel,
    /// Abort when fewer masked pixels than this map inside the image.
    pub min_pixels: usize,
}

impl Default for EccParams {
    fn default() -> Self {
        Self {
            max_iters: 50,
            eps: 1e-6,
            model: MotionModel::Homography,
            min_pixels: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EccResult {
    /// Refined database to current homography.
    pub h: Homography,
    pub rho: f64,
    /// Correlation coefficient at the initial homography.
    pub initial_rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Images prepared once per registration.
struct Frames {
    db: Plane,
    db_gx: Plane,
    db_gy: Plane,
    cur: Plane,
    /// Database pixels whose bilinear footprint and gradient stencil lie
    /// entirely inside the caller's mask.
    support: PixelMask,
}

impl Frames {
    fn new(db_img: &Raster, cur_img: &Raster, mask: &PixelMask) -> Result<Self> {
        if !db_img.same_size(cur_img) {
            return Err(Error::DimensionMismatch(format!(
                "database image {}x{} vs current image {}x{}",
                db_img.width(),
                db_img.height(),
                cur_img.width(),
                cur_img.height()
            )));
        }
        if mask.width() != db_img.width() || mask.height() != db_img.height() {
            return Err(Error::DimensionMismatch("mask does not match database image".into()));
        }
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        let db = Plane::from_raster(db_img);
        let (db_gx, db_gy) = db.central_gradients();
        Ok(Self {
            db,
            db_gx,
            db_gy,
            cur: Plane::from_raster(cur_img),
            support: mask.erode3(),
        })
    }
}

/// Warp parameters: the current-to-database matrix, row-major without the
/// fixed bottom-right 1.
#[derive(Debug, Clone, Copy)]
struct Warp([f64; 8]);

impl Warp {
    fn from_h(h: &Homography, model: MotionModel) -> Result<Self> {
        let inv = h.inverse()?;
        let r = inv.rows();
        let mut p = [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1]];
        match model {
            MotionModel::Translation => {
                p = [1.0, 0.0, p[2], 0.0, 1.0, p[5], 0.0, 0.0];
            }
            MotionModel::Affine => {
                p[6] = 0.0;
                p[7] = 0.0;
            }
            MotionModel::Homography => {}
        }
        Ok(Warp(p))
    }

    fn to_h(self) -> Result<Homography> {
        let p = self.0;
        Homography::from_rows([[p[0], p[1], p[2]], [p[3], p[4], p[5]], [p[6], p[7], 1.0]])?.inverse()
    }

    fn apply_delta(&mut self, model: MotionModel, d: &DVector<f64>) {
        let idx: &[usize] = match model {
            MotionModel::Translation => &[2, 5],
            MotionModel::Affine => &[0, 1, 2, 3, 4, 5],
            MotionModel::Homography => &[0, 1, 2, 3, 4, 5, 6, 7],
        };
        for (k, &i) in idx.iter().enumerate() {
            self.0[i] += d[k];
        }
    }
}

/// Per-iteration sums over the valid pixels, accumulated in row-major order.
struct Sums {
    n: usize,
    t: f64,
    i: f64,
    tt: f64,
    ii: f64,
    ti: f64,
    hess: DMatrix<f64>,
    jt: DVector<f64>,
    ji: DVector<f64>,
    j1: DVector<f64>,
}

impl Sums {
    fn correlation(&self) -> Option<f64> {
        let n = self.n as f64;
        let (tm, im) = (self.t / n, self.i / n);
        let tn2 = self.tt - n * tm * tm;
        let in2 = self.ii - n * im * im;
        let denom = (tn2 * in2).sqrt();
        (denom > 0.0 && denom.is_finite()).then(|| (self.ti - n * tm * im) / denom)
    }
}

fn accumulate(f: &Frames, warp: &Warp, model: MotionModel, with_jacobian: bool) -> Sums {
    let k = model.params();
    let mut s = Sums {
        n: 0,
        t: 0.0,
        i: 0.0,
        tt: 0.0,
        ii: 0.0,
        ti: 0.0,
        hess: DMatrix::zeros(k, k),
        jt: DVector::zeros(k),
        ji: DVector::zeros(k),
        j1: DVector::zeros(k),
    };
    let p = warp.0;
    let (w, h) = (f.cur.width, f.cur.height);
    let (dw, dh) = (f.db.width as isize, f.db.height as isize);
    let mut jac = [0.0f64; 8];
    for v in 0..h {
        for u in 0..w {
            let (uf, vf) = (u as f64, v as f64);
            let den = p[6] * uf + p[7] * vf + 1.0;
            if den.abs() < 1e-12 {
                continue;
            }
            let sx = (p[0] * uf + p[1] * vf + p[2]) / den;
            let sy = (p[3] * uf + p[4] * vf + p[5]) / den;
            if !(sx.is_finite() && sy.is_finite()) {
                continue;
            }
            let x0 = sx.floor() as isize;
            let y0 = sy.floor() as isize;
            if x0 < 0 || y0 < 0 || x0 + 1 >= dw || y0 + 1 >= dh {
                continue;
            }
            let sup = &f.support;
            if !(sup.get_signed(x0, y0)
                && sup.get_signed(x0 + 1, y0)
                && sup.get_signed(x0, y0 + 1)
                && sup.get_signed(x0 + 1, y0 + 1))
            {
                continue;
            }
            let (x0, y0) = (x0 as usize, y0 as usize);
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let lerp = |pl: &Plane| {
                let a = pl.at(x0, y0);
                let b = pl.at(x0 + 1, y0);
                let c = pl.at(x0, y0 + 1);
                let d = pl.at(x0 + 1, y0 + 1);
                let top = a + fx * (b - a);
                let bot = c + fx * (d - c);
                top + fy * (bot - top)
            };
            let iv = lerp(&f.db);
            let tv = f.cur.at(u, v);
            s.n += 1;
            s.t += tv;
            s.i += iv;
            s.tt += tv * tv;
            s.ii += iv * iv;
            s.ti += tv * iv;
            if !with_jacobian {
                continue;
            }
            let gx = lerp(&f.db_gx);
            let gy = lerp(&f.db_gy);
            match model {
                MotionModel::Translation => {
                    jac[0] = gx;
                    jac[1] = gy;
                }
                MotionModel::Affine => {
                    jac[..6].copy_from_slice(&[gx * uf, gx * vf, gx, gy * uf, gy * vf, gy]);
                }
                MotionModel::Homography => {
                    let r = 1.0 / den;
                    let c = -(gx * sx + gy * sy) * r;
                    jac = [
                        gx * uf * r,
                        gx * vf * r,
                        gx * r,
                        gy * uf * r,
                        gy * vf * r,
                        gy * r,
                        c * uf,
                        c * vf,
                    ];
                }
            }
            for a in 0..k {
                let ja = jac[a];
                s.jt[a] += ja * tv;
                s.ji[a] += ja * iv;
                s.j1[a] += ja;
                for b in a..k {
                    s.hess[(a, b)] += ja * jac[b];
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            s.hess[(a, b)] = s.hess[(b, a)];
        }
    }
    s
}

/// Solves `hess x = rhs` for both right-hand sides with Jacobi scaling.
fn solve_pair(hess: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let k = hess.nrows();
    let mut d = DVector::zeros(k);
    for i in 0..k {
        let v = hess[(i, i)];
        if !(v > 0.0) {
            return None;
        }
        d[i] = 1.0 / v.sqrt();
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| hess[(i, j)] * d[i] * d[j]);
    let chol = scaled.cholesky()?;
    let xa = chol.solve(&a.component_mul(&d)).component_mul(&d);
    let xb = chol.solve(&b.component_mul(&d)).component_mul(&d);
    Some((xa, xb))
}

/// Correlation coefficient between `cur_img` and `db_img` warped by `h`
/// over the masked pixels, or `None` when fewer than `min_pixels` survive.
pub fn correlation(db_img: &Raster, cur_img: &Raster, h: &Homography, mask: &PixelMask, min_pixels: usize) -> Result<Option<f64>> {
    let frames = Frames::new(db_img, cur_img, mask)?;
    let warp = Warp::from_h(h, MotionModel::Homography)?;
    let s = accumulate(&frames, &warp, MotionModel::Homography, false);
    Ok(if s.n < min_pixels.max(2) { None } else { s.correlation() })
}

/// Refines `h0` (database to current) by maximizing the masked enhanced
/// correlation coefficient.
///
/// Never returns a homography whose correlation is lower than that of `h0`:
/// if the iterations end worse, or the normal equations become singular,
/// `h0` comes back unchanged with `converged == false`.
pub fn ecc_refine(
    db_img: &Raster,
    cur_img: &Raster,
    h0: &Homography,
    mask: &PixelMask,
    params: &EccParams,
) -> Result<EccResult> {
    let frames = Frames::new(db_img, cur_img, mask)?;
    let model = params.model;
    let min_pixels = params.min_pixels.max(model.params() + 1);
    let start = Warp::from_h(h0, model)?;
    let fallback = |initial_rho: f64, iterations: usize| EccResult {
        h: *h0,
        rho: initial_rho,
        initial_rho,
        iterations,
        converged: false,
    };

    let mut warp = start;
    let mut initial_rho = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        let s = accumulate(&frames, &warp, model, true);
        if s.n < min_pixels {
            break;
        }
        let Some(rho) = s.correlation() else { break };
        if iterations == 0 {
            initial_rho = rho;
        }
        iterations += 1;

        let n = s.n as f64;
        let (tm, im) = (s.t / n, s.i / n);
        let img_norm2 = s.ii - n * im * im;
        let corr = s.ti - n * tm * im;
        let img_proj = &s.ji - &s.j1 * im;
        let tmp_proj = &s.jt - &s.j1 * tm;
        let Some((img_hess, tmp_hess)) = solve_pair(&s.hess, &img_proj, &tmp_proj) else {
            break;
        };
        let lambda_n = img_norm2 - img_proj.dot(&img_hess);
        let lambda_d = corr - tmp_proj.dot(&img_hess);
        if !(lambda_d > 0.0) {
            break;
        }
        let lambda = lambda_n / lambda_d;
        let delta = &tmp_hess * lambda - &img_hess;
        if !delta.iter().all(|v| v.is_finite()) {
            break;
        }
        warp.apply_delta(model, &delta);
        if delta.norm() < params.eps {
            converged = true;
            break;
        }
    }

    if initial_rho.is_nan() {
        // Could not evaluate even the starting point.
        let s = accumulate(&frames, &start, model, false);
        let rho0 = if s.n >= 2 { s.correlation().unwrap_or(f64::NAN) } else { f64::NAN };
        return Ok(fallback(rho0, 0));
    }

    let Ok(h) = warp.to_h() else {
        return Ok(fallback(initial_rho, iterations));
    };
    let end = accumulate(&frames, &warp, model, false);
    let rho = if end.n >= min_pixels { end.correlation() } else { None };
    match rho {
        Some(rho) if rho >= initial_rho - 1e-9 => Ok(EccResult {
            h,
            rho,
            initial_rho,
            iterations,
            converged,
        }),
        _ => Ok(fallback(initial_rho, iterations)),
    }
}

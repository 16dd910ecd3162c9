//! Planar projective transforms and the normalized direct linear transform.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D point in pixel coordinates.
pub type Point = (f64, f64);

/// 3x3 projective transform, normalized so that `h[2][2] == 1`.
///
/// In the pipeline a homography always maps database-image coordinates to
/// current-image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    /// Normalizes `m` by its bottom-right element and checks invertibility.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonInvertible);
        }
        let s = m[(2, 2)];
        if s.abs() < 1e-12 {
            return Err(Error::NonInvertible);
        }
        let n = m / s;
        let det2 = n[(0, 0)] * n[(1, 1)] - n[(0, 1)] * n[(1, 0)];
        if det2.abs() < 1e-12 || n.determinant().abs() < 1e-12 || n.try_inverse().is_none() {
            return Err(Error::NonInvertible);
        }
        Ok(Homography(n))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    #[inline]
    pub fn apply(&self, p: Point) -> Option<Point> {
        let m = &self.0;
        let w = m[(2, 0)] * p.0 + m[(2, 1)] * p.1 + m[(2, 2)];
        if w.abs() < 1e-12 {
            return None;
        }
        Some((
            (m[(0, 0)] * p.0 + m[(0, 1)] * p.1 + m[(0, 2)]) / w,
            (m[(1, 0)] * p.0 + m[(1, 1)] * p.1 + m[(1, 2)]) / w,
        ))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.0.try_inverse().ok_or(Error::NonInvertible)?;
        Self::from_matrix(inv)
    }

    /// `self` applied after `first`: the matrix product `self * first`.
    pub fn after(&self, first: &Homography) -> Result<Self> {
        Self::from_matrix(self.0 * first.0)
    }

    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).abs().max()
    }

    /// Mean displacement of the four image corners of a `width x height`
    /// image mapped by `self` versus `other`.
    pub fn mean_corner_error(&self, other: &Homography, width: usize, height: usize) -> f64 {
        let corners = image_corners(width, height);
        corners
            .iter()
            .map(|&c| match (self.apply(c), other.apply(c)) {
                (Some(a), Some(b)) => dist(a, b),
                _ => f64::INFINITY,
            })
            .sum::<f64>()
            / 4.0
    }

    /// Exact homography through four correspondences.
    pub fn from_four_points(src: [Point; 4], dst: [Point; 4]) -> Result<Self> {
        fit_dlt(&src, &dst)
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Homography::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

pub fn image_corners(width: usize, height: usize) -> [Point; 4] {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn normalizing_transform(pts: &[Point]) -> Option<Matrix3<f64>> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mean = pts.iter().map(|p| dist(*p, (cx, cy))).sum::<f64>() / n;
    if mean < 1e-12 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Least-squares homography `dst ~ H src` by the normalized DLT.
///
/// With exactly four points this is the exact interpolating homography; with
/// more it minimizes the algebraic error in normalized coordinates.
pub fn fit_dlt(src: &[Point], dst: &[Point]) -> Result<Homography> {
    let n = src.len();
    if n < 4 || dst.len() != n {
        return Err(Error::Degenerate(format!(
            "need at least 4 matched point pairs, got {n}"
        )));
    }
    let ts = normalizing_transform(src)
        .ok_or_else(|| Error::Degenerate("source points coincide".into()))?;
    let td = normalizing_transform(dst)
        .ok_or_else(|| Error::Degenerate("destination points coincide".into()))?;

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let ps = ts * Vector3::new(s.0, s.1, 1.0);
        let pd = td * Vector3::new(d.0, d.1, 1.0);
        let (x, y) = (ps.x, ps.y);
        let (u, v) = (pd.x, pd.y);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::EstimationFailed("SVD did not converge".into()))?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nine singular values");
    let hn = Matrix3::from_fn(|r, c| v_t[(k, 3 * r + c)]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("normalization not invertible".into()))?;
    Homography::from_matrix(td_inv * hn * ts)
        .map_err(|_| Error::EstimationFailed("fitted homography is singular".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_h() -> Homography {
        Homography::from_rows([
            [0.9234, -0.0817, 17.9786],
            [-0.0064, 0.9536, -24.0934],
            [-8.8504e-05, -7.5111e-05, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn dlt_recovers_exact_homography() {
        let h = sample_h();
        let src: Vec<Point> = (0..12)
            .map(|i| ((i * 53 % 640) as f64, (i * 97 % 480) as f64))
            .collect();
        let dst: Vec<Point> = src.iter().map(|&p| h.apply(p).unwrap()).collect();
        let fit = fit_dlt(&src, &dst).unwrap();
        assert!(fit.max_abs_diff(&h) < 1e-9, "{:?}", fit);
    }

    #[test]
    fn four_point_identity() {
        let pts = [(0.0, 0.0), (100.0, 0.0), (100.0, 80.0), (0.0, 80.0)];
        let h = Homography::from_four_points(pts, pts).unwrap();
        assert!(h.max_abs_diff(&Homography::identity()) < 1e-12);
    }

    #[test]
    fn too_few_points_is_degenerate() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        assert!(matches!(fit_dlt(&pts, &pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn inverse_and_composition() {
        let h = sample_h();
        let inv = h.inverse().unwrap();
        let id = h.after(&inv).unwrap();
        assert!(id.max_abs_diff(&Homography::identity()) < 1e-12);
        let p = (123.0, 45.0);
        let q = inv.apply(h.apply(p).unwrap()).unwrap();
        assert!(dist(p, q) < 1e-9);
    }

    #[test]
    fn serde_as_rows() {
        let h = Homography::translation(5.0, -3.0);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, "[[1.0,0.0,5.0],[0.0,1.0,-3.0],[0.0,0.0,1.0]]");
        let back: Homography = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }
}

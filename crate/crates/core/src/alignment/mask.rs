use crate::error::{Error, Result};

/// One boolean per pixel, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for PixelMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PixelMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("set", &self.count())
            .finish()
    }
}

impl PixelMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} mask bits for {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// False outside the mask bounds.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_subset_of(&self, other: &PixelMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &PixelMask) -> PixelMask {
        PixelMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn or(&self, other: &PixelMask) -> PixelMask {
        PixelMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn set_points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some((i % self.width, i / self.width)))
    }

    /// Dilation by a Euclidean disc of `radius` pixels.
    pub fn dilate_disc(&self, radius: usize) -> PixelMask {
        if radius == 0 {
            return self.clone();
        }
        let offsets = disc_offsets(radius);
        let mut out = PixelMask::new(self.width, self.height);
        for (x, y) in self.set_points() {
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                    out.bits[ny as usize * self.width + nx as usize] = true;
                }
            }
        }
        out
    }

    /// Erosion by a 3x3 square; pixels outside the bounds count as unset.
    pub fn erode3(&self) -> PixelMask {
        PixelMask::from_fn(self.width, self.height, |x, y| {
            (-1..=1).all(|dy| (-1..=1).all(|dx| self.get_signed(x as isize + dx, y as isize + dy)))
        })
    }
}

pub(crate) fn disc_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

/// Union of `window x window` squares centred on the rounded points, clipped
/// to the image.
pub fn build_common_mask(
    points: &[(f64, f64)],
    window: usize,
    width: usize,
    height: usize,
) -> Result<PixelMask> {
    if window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("window must be odd, got {window}")));
    }
    let half = (window / 2) as isize;
    let mut mask = PixelMask::new(width, height);
    for &(px, py) in points {
        let (cx, cy) = (px.round() as isize, py.round() as isize);
        let x0 = (cx - half).max(0);
        let x1 = (cx + half).min(width as isize - 1);
        let y0 = (cy - half).max(0);
        let y1 = (cy + half).min(height as isize - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                mask.bits[y as usize * width + x as usize] = true;
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_window() {
        let m = build_common_mask(&[(100.0, 100.0)], 41, 300, 300).unwrap();
        assert_eq!(m.count(), 1681);
        for (x, y) in m.set_points() {
            assert!((x as i64 - 100).abs() <= 20 && (y as i64 - 100).abs() <= 20);
        }
    }

    #[test]
    fn clipped_at_origin() {
        let m = build_common_mask(&[(0.0, 0.0)], 41, 300, 300).unwrap();
        assert_eq!(m.count(), 21 * 21);
        assert!(m.get(20, 20) && !m.get(21, 0));
    }

    #[test]
    fn overlap_counted_once() {
        let m = build_common_mask(&[(100.0, 100.0), (110.0, 100.0)], 41, 300, 300).unwrap();
        assert_eq!(m.count(), 51 * 41);
        assert!(m.count() < 2 * 1681);
    }

    #[test]
    fn empty_points_empty_mask() {
        assert!(build_common_mask(&[], 41, 10, 10).unwrap().is_empty());
        assert!(build_common_mask(&[], 40, 10, 10).is_err());
    }

    #[test]
    fn dilation_and_erosion() {
        let mut m = PixelMask::new(9, 9);
        m.set(4, 4, true);
        assert_eq!(m.dilate_disc(1).count(), 5);
        assert_eq!(m.dilate_disc(2).count(), 13);
        let sq = PixelMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        assert_eq!(sq.erode3().count(), 9);
    }
}

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Axis-aligned rectangle in continuous image coordinates.
///
/// Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`, so its center is `(i+0.5, j+0.5)`
/// and a full `w x h` image spans `[0, w] x [0, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x: T,
    pub y: T,
    pub width: T,
    pub height: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x: T, y: T, width: T, height: T) -> Self {
        Self { x, y, width, height }
    }

    pub fn from_corners(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(T::zero(), T::zero(), T::from_usize_lossy(width), T::from_usize_lossy(height))
    }

    /// Smallest rectangle containing all points (zero-size for a single point).
    pub fn bounding(points: impl IntoIterator<Item = (T, T)>) -> Option<Self> {
        let mut it = points.into_iter();
        let (fx, fy) = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (fx, fy, fx, fy);
        for (x, y) in it {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        Some(Self::from_corners(x0, y0, x1, y1))
    }

    pub fn right(&self) -> T {
        self.x + self.width
    }

    pub fn bottom(&self) -> T {
        self.y + self.height
    }

    pub fn center(&self) -> (T, T) {
        let half = T::lit(0.5);
        (self.x + self.width * half, self.y + self.height * half)
    }

    /// Scales the extents about the center.
    pub fn scaled(&self, factor: T) -> Self {
        let (cx, cy) = self.center();
        let hw = self.width * factor * T::lit(0.5);
        let hh = self.height * factor * T::lit(0.5);
        Self::from_corners(cx - hw, cy - hh, cx + hw, cy + hh)
    }

    /// Grows each side symmetrically so that it is at least `min_side` long.
    pub fn with_min_size(&self, min_side: T) -> Self {
        let (cx, cy) = self.center();
        let hw = self.width.max(min_side) * T::lit(0.5);
        let hh = self.height.max(min_side) * T::lit(0.5);
        Self::from_corners(cx - hw, cy - hh, cx + hw, cy + hh)
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self::new(self.x + dx, self.y + dy, self.width, self.height)
    }

    /// Closed containment test.
    pub fn contains(&self, px: T, py: T) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    /// Area of the overlap with `[0, w] x [0, h]`.
    pub fn overlap_area(&self, width: usize, height: usize) -> T {
        let ix0 = self.x.max(T::zero());
        let iy0 = self.y.max(T::zero());
        let ix1 = self.right().min(T::from_usize_lossy(width));
        let iy1 = self.bottom().min(T::from_usize_lossy(height));
        if ix1 <= ix0 || iy1 <= iy0 {
            T::zero()
        } else {
            (ix1 - ix0) * (iy1 - iy0)
        }
    }

    /// Interiors overlap with positive area.
    pub fn overlaps(&self, other: &Rect<T>) -> bool {
        self.x.max(other.x) < self.right().min(other.right())
            && self.y.max(other.y) < self.bottom().min(other.bottom())
    }

    /// Half-open pixel ranges `(x0, x1, y0, y1)` of pixels whose centers lie in
    /// the closed rectangle, clipped to the image; `None` when empty.
    pub fn covered_pixels(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let half = T::lit(0.5);
        let lo = |a: T| -> usize {
            let v = (a - half).ceil();
            if v <= T::zero() {
                0
            } else {
                v.to_usize().unwrap_or(usize::MAX)
            }
        };
        let hi = |b: T, limit: usize| -> usize {
            let v = (b - half).floor() + T::one();
            if v <= T::zero() {
                0
            } else {
                v.to_usize().unwrap_or(usize::MAX).min(limit)
            }
        };
        let (x0, x1) = (lo(self.x), hi(self.right(), width));
        let (y0, y1) = (lo(self.y), hi(self.bottom(), height));
        if x0 >= x1 || y0 >= y1 {
            None
        } else {
            Some((x0, x1, y0, y1))
        }
    }
}

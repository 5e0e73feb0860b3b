use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::geometry::Rect;
use super::ImageError;

pub const LANDMARK_COUNT: usize = 17;

/// Named subsets of the 17 landmark points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    LeftEye,
    RightEye,
    Nose,
    Mouth,
    FaceOutline,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::LeftEye,
        FeatureGroup::RightEye,
        FeatureGroup::Nose,
        FeatureGroup::Mouth,
        FeatureGroup::FaceOutline,
    ];

    /// Point indices of the group.
    ///
    /// Layout: 0-2 left eye (outer corner, inner corner, lid), 3-5 right eye
    /// (inner corner, outer corner, lid), 6-8 nose (bridge, tip, base),
    /// 9-11 mouth (left corner, right corner, lip center), 12-16 face outline
    /// (left temple, left jaw, chin, right jaw, right temple).
    pub fn indices(self) -> &'static [usize] {
        match self {
            FeatureGroup::LeftEye => &[0, 1, 2],
            FeatureGroup::RightEye => &[3, 4, 5],
            FeatureGroup::Nose => &[6, 7, 8],
            FeatureGroup::Mouth => &[9, 10, 11],
            FeatureGroup::FaceOutline => &[12, 13, 14, 15, 16],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::LeftEye => "left-eye",
            FeatureGroup::RightEye => "right-eye",
            FeatureGroup::Nose => "nose",
            FeatureGroup::Mouth => "mouth",
            FeatureGroup::FaceOutline => "face-outline",
        }
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = ImageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| ImageError::UnknownGroup(s.to_string()))
    }
}

/// Exactly 17 facial points in continuous image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet<T> {
    points: Vec<(T, T)>,
}

impl<T: Real> LandmarkSet<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self, ImageError> {
        if points.len() != LANDMARK_COUNT {
            return Err(ImageError::LandmarkCount(points.len()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(ImageError::NonFiniteLandmark);
        }
        Ok(Self { points })
    }

    /// Interprets 34 numbers as `x0 y0 x1 y1 ...`.
    pub fn from_flat(values: &[T]) -> Result<Self, ImageError> {
        if values.len() != 2 * LANDMARK_COUNT {
            return Err(ImageError::LandmarkCount(values.len() / 2));
        }
        Self::new(values.chunks(2).map(|p| (p[0], p[1])).collect())
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.points.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    pub fn group(&self, group: FeatureGroup) -> Vec<(T, T)> {
        group.indices().iter().map(|&i| self.points[i]).collect()
    }

    pub fn group_bounds(&self, group: FeatureGroup) -> Rect<T> {
        Rect::bounding(self.group(group)).expect("groups are non-empty")
    }

    pub fn bounds(&self) -> Rect<T> {
        Rect::bounding(self.points.iter().copied()).expect("17 points")
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        let (w, h) = (T::from_usize_lossy(width), T::from_usize_lossy(height));
        self.points
            .iter()
            .all(|&(x, y)| x >= T::zero() && x <= w && y >= T::zero() && y <= h)
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self { points: self.points.iter().map(|&(x, y)| (x + dx, y + dy)).collect() }
    }

    /// Landmarks of the horizontally mirrored image of width `width`.
    ///
    /// The subject's left side lands on the image's right, so paired points
    /// (eyes, mouth corners, outline) are swapped to keep the layout valid.
    pub fn mirrored(&self, width: usize) -> Self {
        const MIRROR: [usize; LANDMARK_COUNT] = [4, 3, 5, 1, 0, 2, 6, 7, 8, 10, 9, 11, 16, 15, 14, 13, 12];
        let w = T::from_usize_lossy(width);
        let points = MIRROR
            .iter()
            .map(|&i| {
                let (x, y) = self.points[i];
                (w - x, y)
            })
            .collect();
        Self { points }
    }
}

//! Image representation, pixel operations, landmark geometry, and manifests.

mod geometry;
mod image;
mod io;
mod landmarks;
mod manifest;
mod ops;

pub use self::geometry::Rect;
pub use self::image::{Field, ImageBuffer};
pub use self::io::{from_dynamic, load_image, save_image};
pub use self::landmarks::{FeatureGroup, LandmarkSet, LANDMARK_COUNT};
pub use self::manifest::{parse_manifest, parse_manifest_str, DatasetManifest, Gender, SampleRecord};
pub use self::ops::{crop_resize, horizontal_flip, mean_intensity, mean_squared_difference, resize};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("pixel {index} has value {value} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("images differ in shape")]
    ShapeMismatch,
    #[error("crop rectangle does not intersect the image")]
    EmptyCrop,
    #[error("expected 17 landmark points, got {0}")]
    LandmarkCount(usize),
    #[error("landmark coordinates must be finite")]
    NonFiniteLandmark,
    #[error("unknown landmark group {0:?}")]
    UnknownGroup(String),
    #[error("failed to read image {path}: {source}")]
    Decode { path: String, source: ::image::ImageError },
    #[error("failed to write image {path}: {source}")]
    Encode { path: String, source: ::image::ImageError },
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: invalid gender token {token:?} (expected M or F)")]
    InvalidGender { line: usize, token: String },
    #[error("line {line}: duplicate image path {path}")]
    DuplicatePath { line: usize, path: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

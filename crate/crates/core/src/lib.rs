//! Gender classification by fusing isolated facial features with a foggy face.
//!
//! The pipeline: retinex-enhanced detection fallback ([`illum`]), landmark
//! driven patch extraction ([`facepatch`]), membrane in-fill of the face
//! region ([`foggy`]), per-feature convolutional classifiers ([`convnet`]),
//! boosted score fusion with a linear discriminant ([`fusion`]), data
//! augmentation and degradations ([`datagen`]), and the evaluation protocol
//! ([`harness`]).
//!
//! All numeric code is generic over [`Real`]; the aliases below fix `f64`.

pub mod convnet;
pub mod datagen;
pub mod facepatch;
pub mod foggy;
pub mod fusion;
pub mod harness;
pub mod illum;
pub mod imagecore;
mod linalg;
pub mod scalar;

pub use scalar::Real;

pub type Image = imagecore::ImageBuffer<f64>;
pub type Landmarks = imagecore::LandmarkSet<f64>;
pub type Manifest = imagecore::DatasetManifest<f64>;
pub type Detection = facepatch::FaceDetection<f64>;
pub type Network = convnet::NetworkState<f64>;
pub type Ensemble = fusion::BoostEnsemble<f64>;
pub type Fusion = fusion::FusionModel<f64>;

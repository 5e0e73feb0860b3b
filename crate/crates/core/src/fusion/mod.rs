//! Score-level fusion: signed scores, boosted ensembles over score
//! combinations and a final linear discriminant.

mod adaboost;
mod io;
mod lda;
mod model;
mod scores;

pub use adaboost::{predict_adaboost, round_weight, train_adaboost, BoostEnsemble, Stump, ERROR_CLAMP};
pub use io::{fusion_from_bytes, fusion_to_bytes, load_fusion, save_fusion, FUSION_MAGIC, FUSION_VERSION};
pub use lda::{train_lda, LinearDiscriminant};
pub use model::{predict_fusion, train_fusion, train_fusion_split, FusionConfig, FusionModel, DEFAULT_ROUNDS, DEFAULT_SHRINKAGE};
pub use scores::{enumerate_combinations, signed_score, FeatureLabel, FeatureScore, ScoreCombination, ScoreSet};

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("score {0} outside [0.5, 1]")]
    ScoreRange(f64),
    #[error("label set size {0} outside 1..=16")]
    LabelCount(usize),
    #[error("missing score for {0}")]
    MissingLabel(&'static str),
    #[error("duplicate score for {0}")]
    DuplicateLabel(&'static str),
    #[error("expected length {expected}, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("no training samples")]
    Empty,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("non-finite training value")]
    NonFinite,
    #[error("round count must be positive")]
    Rounds,
    #[error("shrinkage {0} outside [0, 1]")]
    Shrinkage(f64),
    #[error("discriminant covariance is singular")]
    Singular,
    #[error("unsupported fusion file version {0}")]
    Version(u32),
    #[error("corrupt fusion file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Small convolutional classifier with a two-way softmax, trained by SGD.

mod gradcheck;
mod io;
mod network;
mod spec;
mod train;

pub use self::gradcheck::{gradient_check, gradient_check_params, gradient_check_state, relative_error, GradCheckReport, GRADCHECK_MAX_PARAMS};
pub use self::io::{load_network, network_from_bytes, network_to_bytes, save_network, NETWORK_FORMAT_VERSION, NETWORK_MAGIC};
pub use self::network::{forward, kink_margin, predict_score, score_from_probs, NetworkState};
pub use self::spec::{LayerSpec, NetworkSpec, Shape};
pub use self::train::{accuracy, sample_loss, train, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network: {0}")]
    Spec(String),
    #[error("input is {actual:?} (w, h, c), network expects {expected:?}")]
    ShapeMismatch { expected: (usize, usize, usize), actual: (usize, usize, usize) },
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("no training samples")]
    NoSamples,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported network file (magic {magic:?}, version {version})")]
    Version { magic: String, version: u32 },
    #[error("corrupt network file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

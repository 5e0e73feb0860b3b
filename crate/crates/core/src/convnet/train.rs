use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::imagecore::{Gender, ImageBuffer};
use crate::scalar::Real;

use super::network::{forward, loss_and_gradient, score_from_probs, NetworkState};
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    /// Number of minibatch updates.
    pub iterations: usize,
    pub batch_size: usize,
    /// Seeds weight initialization and minibatch order.
    pub seed: u64,
    pub init_scale: T,
    pub momentum: T,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::lit(0.01),
            iterations: 1000,
            batch_size: 8,
            seed: 0,
            init_scale: T::one(),
            momentum: T::lit(0.9),
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<(), NetError> {
        let ok = self.learning_rate >= T::zero()
            && self.learning_rate.is_finite()
            && self.batch_size >= 1
            && self.init_scale > T::zero()
            && self.momentum >= T::zero()
            && self.momentum < T::one();
        if ok {
            Ok(())
        } else {
            Err(NetError::Config(format!("{self:?}")))
        }
    }
}

/// Minibatch SGD with momentum on the softmax cross-entropy loss.
///
/// Samples are visited in seeded shuffled epochs; the result depends only on
/// the inputs and `cfg`.
pub fn train<T: Real>(
    net: &NetworkState<T>,
    samples: &[(ImageBuffer<T>, Gender)],
    cfg: &TrainConfig<T>,
) -> Result<NetworkState<T>, NetError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(NetError::NoSamples);
    }
    for (img, _) in samples {
        check_shape(net, img)?;
    }
    let mut state = net.clone();
    let n_params = state.parameter_count();
    let mut velocity = vec![T::zero(); n_params];
    let mut grad = vec![T::zero(); n_params];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let scale = cfg.learning_rate / T::from_usize_lossy(cfg.batch_size);
    for iteration in 0..cfg.iterations {
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut batch_loss = T::zero();
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (img, label) = &samples[order[cursor]];
            cursor += 1;
            batch_loss += loss_and_gradient(&state, img.data(), label.class_index(), Some(&mut grad))?;
        }
        if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NetError::Diverged { iteration });
        }
        for ((p, v), &g) in state.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = cfg.momentum * *v - scale * g;
            *p += *v;
        }
        if state.params().iter().any(|p| !p.is_finite()) {
            return Err(NetError::Diverged { iteration });
        }
    }
    Ok(state)
}

fn check_shape<T: Real>(net: &NetworkState<T>, img: &ImageBuffer<T>) -> Result<(), NetError> {
    let s = net.spec();
    if (img.width(), img.height(), img.channels()) != (s.input_size, s.input_size, s.input_channels) {
        return Err(NetError::ShapeMismatch {
            expected: (s.input_size, s.input_size, s.input_channels),
            actual: (img.width(), img.height(), img.channels()),
        });
    }
    Ok(())
}

/// Cross-entropy of one labelled sample.
pub fn sample_loss<T: Real>(net: &NetworkState<T>, img: &ImageBuffer<T>, label: Gender) -> Result<T, NetError> {
    check_shape(net, img)?;
    loss_and_gradient(net, img.data(), label.class_index(), None)
}

/// Fraction of samples whose predicted class equals the label.
pub fn accuracy<T: Real>(net: &NetworkState<T>, samples: &[(ImageBuffer<T>, Gender)]) -> Result<f64, NetError> {
    if samples.is_empty() {
        return Err(NetError::NoSamples);
    }
    let mut correct = 0usize;
    for (img, label) in samples {
        if score_from_probs(forward(net, img)?).0 == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

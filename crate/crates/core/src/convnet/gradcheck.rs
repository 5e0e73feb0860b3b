use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imagecore::{Gender, ImageBuffer};
use crate::scalar::Real;

use super::network::{layer_inputs, loss_and_gradient, loss_from_layer, plan, NetworkState};
use super::spec::NetworkSpec;
use super::NetError;

/// Largest network the finite-difference check accepts.
pub const GRADCHECK_MAX_PARAMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport<T> {
    pub max_relative_error: T,
    pub worst_parameter: usize,
    pub parameters: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error<T: Real>(analytic: T, numeric: T) -> T {
    let denom = analytic.abs().max(numeric.abs()).max(T::lit(1e-6));
    (analytic - numeric).abs() / denom
}

/// Checks backprop on a freshly initialized network (fixed seed, small random biases).
pub fn gradient_check<T: Real>(spec: &NetworkSpec, input: &ImageBuffer<T>, label: Gender, eps: T) -> Result<T, NetError> {
    let mut net = NetworkState::random(spec.clone(), T::one(), 0x5eed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1a5);
    let plans = plan(spec)?;
    for p in &plans {
        let start = p.offset + p.weight_len;
        for b in &mut net.params_mut()[start..start + p.bias_len] {
            *b = T::lit(rng.random_range(-0.1..0.1));
        }
    }
    Ok(gradient_check_state(&net, input, label, eps)?.max_relative_error)
}

/// Compares every analytic parameter gradient with a central difference.
pub fn gradient_check_state<T: Real>(
    net: &NetworkState<T>,
    input: &ImageBuffer<T>,
    label: Gender,
    eps: T,
) -> Result<GradCheckReport<T>, NetError> {
    let n = net.parameter_count();
    if n > GRADCHECK_MAX_PARAMS {
        return Err(NetError::Config(format!("{n} parameters exceed the gradient-check limit {GRADCHECK_MAX_PARAMS}")));
    }
    let all: Vec<usize> = (0..n).collect();
    gradient_check_params(net, input, label, eps, &all)
}

/// Like [`gradient_check_state`] but only probes the listed parameters, so
/// networks above the size limit can be spot-checked.
pub fn gradient_check_params<T: Real>(
    net: &NetworkState<T>,
    input: &ImageBuffer<T>,
    label: Gender,
    eps: T,
    params: &[usize],
) -> Result<GradCheckReport<T>, NetError> {
    let n = net.parameter_count();
    if params.len() > GRADCHECK_MAX_PARAMS {
        return Err(NetError::Config(format!("{} probes exceed the gradient-check limit {GRADCHECK_MAX_PARAMS}", params.len())));
    }
    if let Some(&bad) = params.iter().find(|&&i| i >= n) {
        return Err(NetError::Config(format!("parameter {bad} out of range ({n} parameters)")));
    }
    if !(eps >= T::lit(1e-6) && eps <= T::lit(1e-3)) {
        return Err(NetError::Config(format!("finite-difference step {eps} outside [1e-6, 1e-3]")));
    }
    let spec = net.spec();
    if (input.width(), input.height(), input.channels()) != (spec.input_size, spec.input_size, spec.input_channels) {
        return Err(NetError::ShapeMismatch {
            expected: (spec.input_size, spec.input_size, spec.input_channels),
            actual: (input.width(), input.height(), input.channels()),
        });
    }
    let class = label.class_index();
    let mut analytic = vec![T::zero(); n];
    loss_and_gradient(net, input.data(), class, Some(&mut analytic))?;
    // a parameter only affects its own layer and those after it, so each
    // probe resumes the forward pass from the cached input of that layer
    let plans = plan(spec)?;
    let acts = layer_inputs(net, &plans, input.data());
    let layer_of = |i: usize| plans.iter().position(|p| i >= p.offset && i < p.offset + p.weight_len + p.bias_len);
    let mut probe = net.params().to_vec();
    let mut report = GradCheckReport { max_relative_error: T::zero(), worst_parameter: 0, parameters: params.len() };
    for &i in params {
        let li = layer_of(i).expect("every parameter belongs to a layer");
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = loss_from_layer(&probe, &plans, li, &acts[li], class);
        probe[i] = orig - eps;
        let minus = loss_from_layer(&probe, &plans, li, &acts[li], class);
        probe[i] = orig;
        let numeric = (plus - minus) / (eps + eps);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_relative_error || err.is_nan() {
            report.max_relative_error = err;
            report.worst_parameter = i;
        }
    }
    Ok(report)
}

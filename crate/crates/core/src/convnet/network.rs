use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::imagecore::{Gender, ImageBuffer};
use crate::scalar::Real;

use super::spec::{LayerSpec, NetworkSpec, Shape};
use super::NetError;

/// Per-layer geometry and parameter offsets into the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct LayerPlan {
    pub layer: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    /// Offset of the weights; biases follow immediately.
    pub offset: usize,
    pub weight_len: usize,
    pub bias_len: usize,
}

pub(crate) fn plan(spec: &NetworkSpec) -> Result<Vec<LayerPlan>, NetError> {
    let shapes = spec.shapes()?;
    let mut input = spec.input_shape();
    let mut offset = 0;
    let mut out = Vec::with_capacity(shapes.len());
    for (layer, &output) in spec.layers.iter().zip(&shapes) {
        let (weight_len, bias_len) = match *layer {
            LayerSpec::Conv { filters, kernel, .. } => (filters * input.channels * kernel * kernel, filters),
            LayerSpec::FullyConnected { outputs } => (outputs * input.len(), outputs),
            _ => (0, 0),
        };
        out.push(LayerPlan { layer: *layer, input, output, offset, weight_len, bias_len });
        offset += weight_len + bias_len;
        input = output;
    }
    Ok(out)
}

/// Network weights laid out flat, layer by layer (weights then biases).
///
/// Convolution weights are indexed `[filter][in_channel][ky][kx]`,
/// fully-connected weights `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<T> {
    spec: NetworkSpec,
    params: Vec<T>,
}

impl<T: Real> NetworkState<T> {
    /// All weights and biases zero.
    pub fn zeros(spec: NetworkSpec) -> Result<Self, NetError> {
        let n = spec.parameter_count()?;
        Ok(Self { spec, params: vec![T::zero(); n] })
    }

    /// Gaussian weights with standard deviation `scale * sqrt(2 / fan_in)`, zero biases.
    pub fn random(spec: NetworkSpec, scale: T, seed: u64) -> Result<Self, NetError> {
        let mut state = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in plan(&state.spec)? {
            let fan_in = match p.layer {
                LayerSpec::Conv { kernel, .. } => p.input.channels * kernel * kernel,
                LayerSpec::FullyConnected { .. } => p.input.len(),
                _ => continue,
            };
            let std = scale * (T::lit(2.0) / T::from_usize_lossy(fan_in)).sqrt();
            for w in &mut state.params[p.offset..p.offset + p.weight_len] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = T::lit(z) * std;
            }
        }
        Ok(state)
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<T>) -> Result<Self, NetError> {
        let n = spec.parameter_count()?;
        if params.len() != n {
            return Err(NetError::Corrupt(format!("expected {n} parameters, found {}", params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NetError::Corrupt("non-finite parameter".into()));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, input: &ImageBuffer<T>) -> Result<(), NetError> {
        let s = &self.spec;
        if input.width() != s.input_size || input.height() != s.input_size || input.channels() != s.input_channels {
            return Err(NetError::ShapeMismatch {
                expected: (s.input_size, s.input_size, s.input_channels),
                actual: (input.width(), input.height(), input.channels()),
            });
        }
        Ok(())
    }
}

/// Class probabilities `(p_male, p_female)`.
pub fn forward<T: Real>(net: &NetworkState<T>, input: &ImageBuffer<T>) -> Result<[T; 2], NetError> {
    net.check_input(input)?;
    let plans = plan(&net.spec)?;
    let mut act = input.data().to_vec();
    for p in &plans {
        act = layer_forward(p, &net.params, &act).0;
    }
    Ok([act[0], act[1]])
}

/// Distance of the forward pass from the nearest non-differentiable point:
/// the smallest `|x|` entering a ReLU and the smallest gap between the two
/// largest values of any max-pool window. Finite differences are only
/// meaningful when parameter steps move activations by less than this.
pub fn kink_margin<T: Real>(net: &NetworkState<T>, input: &ImageBuffer<T>) -> Result<T, NetError> {
    net.check_input(input)?;
    let mut margin = T::infinity();
    let mut act = input.data().to_vec();
    for p in &plan(&net.spec)? {
        match p.layer {
            LayerSpec::Relu => margin = act.iter().fold(margin, |m, v| m.min(v.abs())),
            LayerSpec::MaxPool { size, stride } => {
                let (inp, out) = (p.input, p.output);
                for c in 0..inp.channels {
                    let base = c * inp.height * inp.width;
                    for oy in 0..out.height {
                        for ox in 0..out.width {
                            let (mut first, mut second) = (T::neg_infinity(), T::neg_infinity());
                            for ky in 0..size {
                                for kx in 0..size {
                                    let v = act[base + (oy * stride + ky) * inp.width + ox * stride + kx];
                                    if v > first {
                                        second = first;
                                        first = v;
                                    } else if v > second {
                                        second = v;
                                    }
                                }
                            }
                            if second.is_finite() {
                                margin = margin.min(first - second);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        act = layer_forward(p, &net.params, &act).0;
    }
    Ok(margin)
}

/// Predicted class and its softmax probability; ties go to MALE.
pub fn predict_score<T: Real>(net: &NetworkState<T>, patch: &ImageBuffer<T>) -> Result<(Gender, T), NetError> {
    Ok(score_from_probs(forward(net, patch)?))
}

pub fn score_from_probs<T: Real>(probs: [T; 2]) -> (Gender, T) {
    if probs[0] >= probs[1] {
        (Gender::Male, probs[0])
    } else {
        (Gender::Female, probs[1])
    }
}

/// Forward pass of one layer; the second value holds max-pool argmax indices.
fn layer_forward<T: Real>(p: &LayerPlan, params: &[T], x: &[T]) -> (Vec<T>, Vec<usize>) {
    let (inp, out) = (p.input, p.output);
    match p.layer {
        LayerSpec::Conv { kernel, stride, .. } => {
            let w = &params[p.offset..p.offset + p.weight_len];
            let b = &params[p.offset + p.weight_len..p.offset + p.weight_len + p.bias_len];
            let k = inp.channels * kernel * kernel;
            let col = im2col(x, inp, out, kernel, stride);
            let plane_out = out.height * out.width;
            let mut y = vec![T::zero(); out.len()];
            for (px, patch) in col.chunks_exact(k).enumerate() {
                for f in 0..out.channels {
                    y[f * plane_out + px] = b[f] + dot(&w[f * k..(f + 1) * k], patch);
                }
            }
            (y, Vec::new())
        }
        LayerSpec::FullyConnected { outputs } => {
            let n = inp.len();
            let w = &params[p.offset..p.offset + p.weight_len];
            let b = &params[p.offset + p.weight_len..p.offset + p.weight_len + p.bias_len];
            let y = (0..outputs)
                .map(|o| {
                    b[o] + dot(&w[o * n..(o + 1) * n], x)
                })
                .collect();
            (y, Vec::new())
        }
        LayerSpec::Relu => (x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(), Vec::new()),
        LayerSpec::MaxPool { size, stride } => {
            let mut y = Vec::with_capacity(out.len());
            let mut arg = Vec::with_capacity(out.len());
            for c in 0..inp.channels {
                let base = c * inp.height * inp.width;
                for oy in 0..out.height {
                    for ox in 0..out.width {
                        let mut best = base + (oy * stride) * inp.width + ox * stride;
                        for ky in 0..size {
                            for kx in 0..size {
                                let i = base + (oy * stride + ky) * inp.width + ox * stride + kx;
                                if x[i] > x[best] {
                                    best = i;
                                }
                            }
                        }
                        y.push(x[best]);
                        arg.push(best);
                    }
                }
            }
            (y, arg)
        }
        LayerSpec::Softmax => (softmax(x), Vec::new()),
    }
}

/// Unrolled dot product; four partial sums let the compiler vectorize.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ac.remainder().iter().zip(bc.remainder()).fold(T::zero(), |s, (&x, &y)| s + x * y);
    let mut acc = [T::zero(); 4];
    for (x, y) in ac.zip(bc) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Rows of `c * kernel * kernel` input values, one row per output pixel,
/// ordered like the weights (`[c][ky][kx]`).
fn im2col<T: Real>(x: &[T], inp: Shape, out: Shape, kernel: usize, stride: usize) -> Vec<T> {
    let k = inp.channels * kernel * kernel;
    let plane_in = inp.height * inp.width;
    let mut col = vec![T::zero(); out.height * out.width * k];
    for (px, row) in col.chunks_exact_mut(k).enumerate() {
        let (oy, ox) = (px / out.width, px % out.width);
        for c in 0..inp.channels {
            for ky in 0..kernel {
                let src = c * plane_in + (oy * stride + ky) * inp.width + ox * stride;
                let dst = (c * kernel + ky) * kernel;
                row[dst..dst + kernel].copy_from_slice(&x[src..src + kernel]);
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters rows back, summing overlaps.
fn col2im<T: Real>(col: &[T], inp: Shape, out: Shape, kernel: usize, stride: usize) -> Vec<T> {
    let k = inp.channels * kernel * kernel;
    let plane_in = inp.height * inp.width;
    let mut dx = vec![T::zero(); inp.len()];
    for (px, row) in col.chunks_exact(k).enumerate() {
        let (oy, ox) = (px / out.width, px % out.width);
        for c in 0..inp.channels {
            for ky in 0..kernel {
                let dst = c * plane_in + (oy * stride + ky) * inp.width + ox * stride;
                let src = (c * kernel + ky) * kernel;
                axpy(&mut dx[dst..dst + kernel], T::one(), &row[src..src + kernel]);
            }
        }
    }
    dx
}

fn softmax<T: Real>(x: &[T]) -> Vec<T> {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Input of every layer plus the final output, for the current parameters.
pub(crate) fn layer_inputs<T: Real>(net: &NetworkState<T>, plans: &[LayerPlan], input: &[T]) -> Vec<Vec<T>> {
    let mut acts = Vec::with_capacity(plans.len() + 1);
    acts.push(input.to_vec());
    for p in plans {
        let y = layer_forward(p, &net.params, acts.last().expect("input")).0;
        acts.push(y);
    }
    acts
}

/// Cross-entropy of the forward pass resumed at layer `start` with input `x`.
pub(crate) fn loss_from_layer<T: Real>(params: &[T], plans: &[LayerPlan], start: usize, x: &[T], class: usize) -> T {
    let mut act = x.to_vec();
    for p in &plans[start..] {
        act = layer_forward(p, params, &act).0;
    }
    -(act[class].max(T::min_positive_value())).ln()
}

/// Cross-entropy loss of one sample; adds its parameter gradient into `grad`.
pub(crate) fn loss_and_gradient<T: Real>(
    net: &NetworkState<T>,
    input: &[T],
    class: usize,
    grad: Option<&mut [T]>,
) -> Result<T, NetError> {
    let plans = plan(&net.spec)?;
    let mut acts: Vec<Vec<T>> = Vec::with_capacity(plans.len() + 1);
    let mut args: Vec<Vec<usize>> = Vec::with_capacity(plans.len());
    acts.push(input.to_vec());
    for p in &plans {
        let (y, a) = layer_forward(p, &net.params, acts.last().expect("input"));
        acts.push(y);
        args.push(a);
    }
    let probs = acts.last().expect("output");
    let tiny = T::min_positive_value();
    let loss = -(probs[class].max(tiny)).ln();
    let Some(grad) = grad else {
        return Ok(loss);
    };

    // softmax + cross-entropy: d loss / d logits = p - onehot
    let mut delta: Vec<T> = probs.clone();
    delta[class] -= T::one();
    for (li, p) in plans.iter().enumerate().rev() {
        if matches!(p.layer, LayerSpec::Softmax) {
            continue;
        }
        let x = &acts[li];
        delta = layer_backward(p, &net.params, x, &acts[li + 1], &args[li], &delta, grad, li > 0);
    }
    Ok(loss)
}

/// Backward pass of one layer: accumulates parameter gradients and returns
/// the gradient with respect to the layer input (empty when not needed).
#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Real>(
    p: &LayerPlan,
    params: &[T],
    x: &[T],
    y: &[T],
    argmax: &[usize],
    dy: &[T],
    grad: &mut [T],
    need_input_grad: bool,
) -> Vec<T> {
    let (inp, out) = (p.input, p.output);
    match p.layer {
        LayerSpec::Conv { kernel, stride, .. } => {
            let (w_off, b_off) = (p.offset, p.offset + p.weight_len);
            let k = inp.channels * kernel * kernel;
            let plane_out = out.height * out.width;
            let col = im2col(x, inp, out, kernel, stride);
            let mut dcol = if need_input_grad { vec![T::zero(); col.len()] } else { Vec::new() };
            for f in 0..out.channels {
                let dyf = &dy[f * plane_out..(f + 1) * plane_out];
                grad[b_off + f] += dyf.iter().copied().sum::<T>();
                let wf = &params[w_off + f * k..w_off + (f + 1) * k];
                for (px, &d) in dyf.iter().enumerate() {
                    if d == T::zero() {
                        continue;
                    }
                    axpy(&mut grad[w_off + f * k..w_off + (f + 1) * k], d, &col[px * k..(px + 1) * k]);
                    if need_input_grad {
                        axpy(&mut dcol[px * k..(px + 1) * k], d, wf);
                    }
                }
            }
            if need_input_grad {
                col2im(&dcol, inp, out, kernel, stride)
            } else {
                Vec::new()
            }
        }
        LayerSpec::FullyConnected { outputs } => {
            let n = inp.len();
            let (w_off, b_off) = (p.offset, p.offset + p.weight_len);
            let mut dx = if need_input_grad { vec![T::zero(); n] } else { Vec::new() };
            for o in 0..outputs {
                let d = dy[o];
                grad[b_off + o] += d;
                if d == T::zero() {
                    continue;
                }
                axpy(&mut grad[w_off + o * n..w_off + (o + 1) * n], d, x);
                if need_input_grad {
                    axpy(&mut dx, d, &params[w_off + o * n..w_off + (o + 1) * n]);
                }
            }
            dx
        }
        LayerSpec::Relu => dy
            .iter()
            .zip(y)
            .map(|(&d, &v)| if v > T::zero() { d } else { T::zero() })
            .collect(),
        LayerSpec::MaxPool { .. } => {
            let mut dx = vec![T::zero(); inp.len()];
            for (&i, &d) in argmax.iter().zip(dy) {
                dx[i] += d;
            }
            dx
        }
        LayerSpec::Softmax => dy.to_vec(),
    }
}

//! Single scale retinex: log image minus log of its Gaussian-surround blur.

use thiserror::Error;

use crate::imagecore::{Field, ImageBuffer};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum IllumError {
    #[error("surround scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("kernel radius {radius} is below ceil(2*G) = {min}")]
    RadiusTooSmall { radius: usize, min: usize },
    #[error("log guard must be positive, got {0}")]
    NonPositiveEps(f64),
}

/// Unit-sum Gaussian surround `K * exp(-(i^2 + j^2) / G^2)` truncated to a square window.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSurround<T> {
    scale: T,
    radius: usize,
    weights: Vec<T>,
    profile: Vec<T>,
}

impl<T: Real> GaussianSurround<T> {
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Side length `2 * radius + 1`.
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    /// Row-major `(2r+1)^2` weights; entry `(i, j)` holds offset `(i - r, j - r)`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, dx: isize, dy: isize) -> T {
        let r = self.radius as isize;
        self.weights[((dy + r) * (2 * r + 1) + dx + r) as usize]
    }

    /// Normalized 1-D factor; the 2-D kernel is its outer product with itself.
    pub fn profile(&self) -> &[T] {
        &self.profile
    }
}

pub fn min_radius(scale: f64) -> usize {
    (2.0 * scale).ceil() as usize
}

pub fn build_surround<T: Real>(scale: T, radius: usize) -> Result<GaussianSurround<T>, IllumError> {
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(IllumError::NonPositiveScale(scale.as_f64()));
    }
    let min = min_radius(scale.as_f64());
    if radius < min {
        return Err(IllumError::RadiusTooSmall { radius, min });
    }
    let g2 = scale * scale;
    let r = radius as isize;
    let raw = |d: isize| -> T {
        let d = T::lit(d as f64);
        (-(d * d) / g2).exp()
    };
    let factor: Vec<T> = (-r..=r).map(raw).collect();
    let mut weights = Vec::with_capacity(factor.len() * factor.len());
    for &fy in &factor {
        for &fx in &factor {
            weights.push(fx * fy);
        }
    }
    let total: T = weights.iter().copied().sum();
    for w in &mut weights {
        *w /= total;
    }
    let line_total: T = factor.iter().copied().sum();
    let profile = factor.iter().map(|&f| f / line_total).collect();
    Ok(GaussianSurround { scale, radius, weights, profile })
}

/// Per-channel convolution with replicate-border padding (unclamped).
pub fn convolve_field<T: Real>(field: &Field<T>, surround: &GaussianSurround<T>) -> Field<T> {
    separable_blur(field, surround.profile())
}

pub fn convolve<T: Real>(img: &ImageBuffer<T>, surround: &GaussianSurround<T>) -> ImageBuffer<T> {
    ImageBuffer::from_field_clamped(convolve_field(img.as_field(), surround))
}

/// Symmetric separable blur with replicate borders; `taps.len()` must be odd.
pub(crate) fn separable_blur<T: Real>(field: &Field<T>, taps: &[T]) -> Field<T> {
    let (w, h) = (field.width(), field.height());
    let r = (taps.len() / 2) as isize;
    let mut out = field.clone();
    let mut tmp = vec![T::zero(); w * h];
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    for c in 0..field.channels() {
        let src = field.plane(c);
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = T::zero();
                for (k, &t) in taps.iter().enumerate() {
                    acc += t * row[clamp(x as isize + k as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = T::zero();
                for (k, &t) in taps.iter().enumerate() {
                    acc += t * tmp[clamp(y as isize + k as isize - r, h) * w + x];
                }
                dst[y * w + x] = acc;
            }
        }
    }
    out
}

/// Surround scale and log guard for retinex enhancement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsrConfig<T> {
    /// `None` selects `max(width, height) / 4`.
    pub scale: Option<T>,
    pub eps: T,
}

impl<T: Real> Default for SsrConfig<T> {
    fn default() -> Self {
        Self { scale: None, eps: T::lit(1.0 / 255.0) }
    }
}

impl<T: Real> SsrConfig<T> {
    pub fn surround_for(&self, width: usize, height: usize) -> Result<GaussianSurround<T>, IllumError> {
        let scale = self
            .scale
            .unwrap_or_else(|| T::from_usize_lossy(width.max(height)) / T::lit(4.0));
        build_surround(scale, min_radius(scale.as_f64()))
    }
}

/// Raw retinex response `log(I + eps) - log(F * I + eps)`, per pixel and channel.
pub fn ssr_response<T: Real>(
    field: &Field<T>,
    surround: &GaussianSurround<T>,
    eps: T,
) -> Result<Field<T>, IllumError> {
    if !(eps > T::zero()) {
        return Err(IllumError::NonPositiveEps(eps.as_f64()));
    }
    let blurred = convolve_field(field, surround);
    let mut out = field.clone();
    for (o, b) in out.data_mut().iter_mut().zip(blurred.data()) {
        *o = (*o + eps).ln() - (*b + eps).ln();
    }
    Ok(out)
}

/// Retinex response rescaled per image so its minimum maps to 0 and maximum to 1;
/// a flat response maps to 0.5 everywhere.
pub fn ssr_enhance<T: Real>(
    img: &ImageBuffer<T>,
    surround: &GaussianSurround<T>,
    eps: T,
) -> Result<ImageBuffer<T>, IllumError> {
    let raw = ssr_response(img.as_field(), surround, eps)?;
    let (lo, hi) = raw
        .data()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let scaled = if span > T::zero() {
        raw.map(|v| (v - lo) / span)
    } else {
        raw.map(|_| T::lit(0.5))
    };
    Ok(ImageBuffer::from_field_clamped(scaled))
}

pub fn ssr_with<T: Real>(img: &ImageBuffer<T>, cfg: &SsrConfig<T>) -> Result<ImageBuffer<T>, IllumError> {
    let surround = cfg.surround_for(img.width(), img.height())?;
    ssr_enhance(img, &surround, cfg.eps)
}

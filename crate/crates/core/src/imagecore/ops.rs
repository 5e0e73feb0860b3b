use crate::scalar::Real;

use super::geometry::Rect;
use super::image::{Field, ImageBuffer};
use super::ImageError;

/// Mirrors left-right: output `(x, y)` is input `(w-1-x, y)`.
pub fn horizontal_flip<T: Real>(img: &ImageBuffer<T>) -> ImageBuffer<T> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut data = Vec::with_capacity(w * h * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        for y in 0..h {
            data.extend(plane[y * w..(y + 1) * w].iter().rev());
        }
    }
    ImageBuffer::new(w, h, ch, data).expect("flip preserves shape and range")
}

/// Bilinear resample of `rect` to `out_w x out_h`.
///
/// Output pixel `i` samples the source at `rect.x + (i + 0.5) * rect.width / out_w - 0.5`
/// (pixel-center alignment); samples outside the image read the nearest border pixel.
pub fn crop_resize<T: Real>(
    img: &ImageBuffer<T>,
    rect: &Rect<T>,
    out_w: usize,
    out_h: usize,
) -> Result<ImageBuffer<T>, ImageError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::ZeroDimension { width: out_w, height: out_h });
    }
    if !(rect.width > T::zero() && rect.height > T::zero())
        || rect.overlap_area(img.width(), img.height()) <= T::zero()
    {
        return Err(ImageError::EmptyCrop);
    }
    let xs = sample_axis(rect.x, rect.width, out_w, img.width());
    let ys = sample_axis(rect.y, rect.height, out_h, img.height());
    let (w, ch) = (img.width(), img.channels());
    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        for &(y0, y1, fy) in &ys {
            let r0 = &plane[y0 * w..(y0 + 1) * w];
            let r1 = &plane[y1 * w..(y1 + 1) * w];
            for &(x0, x1, fx) in &xs {
                let top = lerp(r0[x0], r0[x1], fx);
                let bottom = lerp(r1[x0], r1[x1], fx);
                data.push(lerp(top, bottom, fy));
            }
        }
    }
    Ok(ImageBuffer::from_field_clamped(Field::new(out_w, out_h, ch, data)?))
}

/// Resizes the whole image.
pub fn resize<T: Real>(img: &ImageBuffer<T>, out_w: usize, out_h: usize) -> Result<ImageBuffer<T>, ImageError> {
    crop_resize(img, &Rect::full(img.width(), img.height()), out_w, out_h)
}

#[inline]
fn lerp<T: Real>(a: T, b: T, t: T) -> T {
    if t == T::zero() {
        a
    } else {
        a + (b - a) * t
    }
}

fn sample_axis<T: Real>(start: T, extent: T, out: usize, size: usize) -> Vec<(usize, usize, T)> {
    let half = T::lit(0.5);
    let step = extent / T::from_usize_lossy(out);
    let max = T::from_usize_lossy(size - 1);
    (0..out)
        .map(|i| {
            let s = start + (T::from_usize_lossy(i) + half) * step - half;
            let s = s.max(T::zero()).min(max);
            let i0 = s.floor().to_usize().unwrap_or(0).min(size - 1);
            let i1 = (i0 + 1).min(size - 1);
            (i0, i1, s - T::from_usize_lossy(i0))
        })
        .collect()
}

/// Arithmetic mean of every channel.
pub fn mean_intensity<T: Real>(img: &ImageBuffer<T>) -> Vec<T> {
    let n = T::from_usize_lossy(img.width() * img.height());
    (0..img.channels())
        .map(|c| img.plane(c).iter().copied().sum::<T>() / n)
        .collect()
}

/// Mean squared difference over all pixels and channels.
pub fn mean_squared_difference<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>) -> Result<T, ImageError> {
    if !a.same_shape(b) {
        return Err(ImageError::ShapeMismatch);
    }
    let n = T::from_usize_lossy(a.data().len());
    Ok(a.data().iter().zip(b.data()).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>() / n)
}

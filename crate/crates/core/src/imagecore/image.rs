use crate::scalar::Real;

use super::geometry::Rect;
use super::ImageError;

/// Planar real-valued grid with no range constraint.
///
/// Values are stored one channel plane after another, each plane row-major.
/// Used for intermediate results (log-domain responses, scaled inputs) that
/// may leave the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self, ImageError> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(ImageError::LengthMismatch {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self, ImageError> {
        check_dims(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Field<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// Image with every pixel value finite and in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T> {
    field: Field<T>,
}

impl<T: Real> ImageBuffer<T> {
    /// Builds an image, rejecting values outside `[0, 1]` or non-finite.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self, ImageError> {
        if let Some(bad) = data.iter().position(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one())) {
            return Err(ImageError::OutOfRange { index: bad, value: data[bad].as_f64() });
        }
        Ok(Self { field: Field::new(width, height, channels, data)? })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Clamps into `[0, 1]`; non-finite values become 0.
    pub fn from_field_clamped(field: Field<T>) -> Self {
        let mut field = field;
        for v in field.data_mut() {
            *v = if v.is_finite() { v.clamp01() } else { T::zero() };
        }
        Self { field }
    }

    /// Builds from a per-pixel function `f(x, y, c)`, clamping the result.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> T,
    ) -> Result<Self, ImageError> {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Ok(Self::from_field_clamped(Field::new(width, height, channels, data)?))
    }

    pub fn as_field(&self) -> &Field<T> {
        &self.field
    }

    pub fn into_field(self) -> Field<T> {
        self.field
    }

    pub fn width(&self) -> usize {
        self.field.width
    }

    pub fn height(&self) -> usize {
        self.field.height
    }

    pub fn channels(&self) -> usize {
        self.field.channels
    }

    pub fn data(&self) -> &[T] {
        &self.field.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.field.get(x, y, c)
    }

    /// Writes a pixel, clamping into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        self.field.set(x, y, c, v.clamp01());
    }

    pub fn plane(&self, c: usize) -> &[T] {
        self.field.plane(c)
    }

    pub fn same_shape(&self, other: &ImageBuffer<T>) -> bool {
        self.field.same_shape(&other.field)
    }

    /// Gray images are replicated into three channels; color images are
    /// averaged down to one. Identity when the count already matches.
    pub fn with_channels(&self, channels: usize) -> Result<Self, ImageError> {
        check_dims(self.width(), self.height(), channels)?;
        if channels == self.channels() {
            return Ok(self.clone());
        }
        let (w, h) = (self.width(), self.height());
        if channels == 3 {
            let p = self.plane(0);
            let mut data = Vec::with_capacity(w * h * 3);
            for _ in 0..3 {
                data.extend_from_slice(p);
            }
            return Self::new(w, h, 3, data);
        }
        let third = T::one() / T::lit(3.0);
        let data = (0..w * h)
            .map(|i| (self.plane(0)[i] + self.plane(1)[i] + self.plane(2)[i]) * third)
            .collect();
        Ok(Self::from_field_clamped(Field::new(w, h, 1, data)?))
    }

    /// Fills the pixels whose centers fall inside `rect` with `fill` (one value per channel).
    pub fn fill_rect(&mut self, rect: &Rect<T>, fill: &[T]) {
        let Some((x0, x1, y0, y1)) = rect.covered_pixels(self.width(), self.height()) else {
            return;
        };
        for c in 0..self.channels() {
            let v = fill[c.min(fill.len() - 1)].clamp01();
            for y in y0..y1 {
                for x in x0..x1 {
                    self.field.set(x, y, c, v);
                }
            }
        }
    }
}

pub(crate) fn check_dims(width: usize, height: usize, channels: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroDimension { width, height });
    }
    if channels != 1 && channels != 3 {
        return Err(ImageError::Channels(channels));
    }
    Ok(())
}

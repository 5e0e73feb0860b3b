use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::scalar::Real;

use super::image::ImageBuffer;
use super::ImageError;

/// Reads a raster file into `[0, 1]` values; gray stays one channel, color
/// becomes three (alpha dropped).
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageBuffer<T>, ImageError> {
    let path = path.as_ref();
    let dynimg = image::open(path).map_err(|source| ImageError::Decode {
        path: path.display().to_string(),
        source,
    })?;
    from_dynamic(&dynimg)
}

pub fn from_dynamic<T: Real>(dynimg: &DynamicImage) -> Result<ImageBuffer<T>, ImageError> {
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    if w == 0 || h == 0 {
        return Err(ImageError::ZeroDimension { width: w, height: h });
    }
    let gray = !dynimg.color().has_color();
    let sixteen = dynimg.color().bytes_per_pixel() / dynimg.color().channel_count() >= 2;
    if gray {
        let data: Vec<T> = if sixteen {
            let scale = T::lit(65535.0);
            dynimg.to_luma16().pixels().map(|p| T::lit(f64::from(p.0[0])) / scale).collect()
        } else {
            let scale = T::lit(255.0);
            dynimg.to_luma8().pixels().map(|p| T::lit(f64::from(p.0[0])) / scale).collect()
        };
        return ImageBuffer::new(w, h, 1, data);
    }
    let mut data = vec![T::zero(); w * h * 3];
    let n = w * h;
    if sixteen {
        let scale = T::lit(65535.0);
        for (i, p) in dynimg.to_rgb16().pixels().enumerate() {
            for c in 0..3 {
                data[c * n + i] = T::lit(f64::from(p.0[c])) / scale;
            }
        }
    } else {
        let scale = T::lit(255.0);
        for (i, p) in dynimg.to_rgb8().pixels().enumerate() {
            for c in 0..3 {
                data[c * n + i] = T::lit(f64::from(p.0[c])) / scale;
            }
        }
    }
    ImageBuffer::new(w, h, 3, data)
}

/// Writes 8-bit gray or RGB; the format follows the file extension.
pub fn save_image<T: Real>(img: &ImageBuffer<T>, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let to_u8 = |v: T| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8;
    let dynimg = if img.channels() == 1 {
        DynamicImage::ImageLuma8(
            GrayImage::from_raw(w, h, img.plane(0).iter().map(|&v| to_u8(v)).collect()).expect("buffer size"),
        )
    } else {
        let n = img.width() * img.height();
        let mut raw = Vec::with_capacity(n * 3);
        for i in 0..n {
            for c in 0..3 {
                raw.push(to_u8(img.plane(c)[i]));
            }
        }
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, raw).expect("buffer size"))
    };
    dynimg.save(path).map_err(|source| ImageError::Encode {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn white_and_black_files() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.png");
        GrayImage::from_raw(2, 2, vec![255; 4]).unwrap().save(&white).unwrap();
        let black = dir.path().join("black.png");
        GrayImage::from_raw(2, 2, vec![0; 4]).unwrap().save(&black).unwrap();

        let w: ImageBuffer<f64> = load_image(&white).unwrap();
        assert_eq!(w.channels(), 1);
        assert!(w.data().iter().all(|&v| v == 1.0));
        let b: ImageBuffer<f32> = load_image(&black).unwrap();
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_within_one_level() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dir = tempfile::tempdir().unwrap();
        for ch in [1, 3] {
            let data: Vec<f64> = (0..9 * 7 * ch).map(|_| rng.random::<f64>()).collect();
            let img = ImageBuffer::new(9, 7, ch, data).unwrap();
            let path = dir.path().join(format!("rt{ch}.png"));
            save_image(&img, &path).unwrap();
            let back: ImageBuffer<f64> = load_image(&path).unwrap();
            assert_eq!(back.channels(), ch);
            for (a, b) in back.data().iter().zip(img.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }

    #[test]
    fn missing_and_garbage_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_image::<f64>(dir.path().join("nope.png")).is_err());
        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"not an image").unwrap();
        assert!(load_image::<f64>(&junk).is_err());
    }
}

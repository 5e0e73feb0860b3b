//! Procedural two-class "faces" with known landmarks, for smoke tests and
//! end-to-end checks without real datasets.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imagecore::{save_image, DatasetManifest, FeatureGroup, Gender, ImageBuffer, LandmarkSet, SampleRecord};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub size: usize,
    pub seed: u64,
    /// Render every sample with the other class's pattern.
    pub invert_labels: bool,
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { count: 400, size: 64, seed: 0, invert_labels: false, noise: 0.03 }
    }
}

/// Canonical layout on a unit face: eyes, nose, mouth, outline.
const LAYOUT: [(f64, f64); 17] = [
    (-13.0, -8.0), (-5.0, -8.0), (-9.0, -11.0),
    (5.0, -8.0), (13.0, -8.0), (9.0, -11.0),
    (0.0, -3.0), (-3.5, 4.0), (3.5, 4.0),
    (-8.0, 12.0), (8.0, 12.0), (0.0, 14.0),
    (-20.0, -16.0), (-19.0, 8.0), (0.0, 25.0), (19.0, 8.0), (20.0, -16.0),
];

/// Draws one sample. MALE uses horizontal stripes, FEMALE vertical ones, in
/// the background and inside every feature region.
pub fn render_face(pattern: Gender, size: usize, noise: f64, rng: &mut impl Rng) -> (ImageBuffer<f64>, LandmarkSet<f64>) {
    let unit = size as f64 / 64.0;
    let scale = unit * rng.random_range(0.9..1.1);
    let cx = size as f64 / 2.0 + rng.random_range(-3.0..3.0) * unit;
    let cy = size as f64 / 2.0 + rng.random_range(-2.0..2.0) * unit;
    let points: Vec<(f64, f64)> = LAYOUT
        .iter()
        .map(|&(x, y)| (cx + x * scale + rng.random_range(-0.5..0.5), cy + y * scale + rng.random_range(-0.5..0.5)))
        .collect();
    let lm = LandmarkSet::new(points).expect("17 finite points");

    let horizontal = pattern == Gender::Male;
    let bg: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.3..0.7));
    let skin: [f64; 3] = [rng.random_range(0.55..0.8), rng.random_range(0.45..0.65), rng.random_range(0.35..0.55)];
    let (bg_phase, ft_phase) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    let stripe = |x: f64, y: f64, period: f64, phase: f64| {
        let t = if horizontal { y } else { x };
        (2.0 * PI * t / (period * unit) + phase).sin()
    };
    let face = lm.group_bounds(FeatureGroup::FaceOutline);
    let (fcx, fcy) = face.center();
    let (rx, ry) = (face.width / 2.0, face.height / 2.0);
    let features: Vec<_> = [FeatureGroup::LeftEye, FeatureGroup::RightEye, FeatureGroup::Nose, FeatureGroup::Mouth]
        .iter()
        .map(|&g| lm.group_bounds(g).scaled(1.3).with_min_size(4.0 * unit))
        .collect();
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite sigma");
    let mut data = vec![0.0; size * size * 3];
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let in_face = ((px - fcx) / rx).powi(2) + ((py - fcy) / ry).powi(2) <= 1.0;
            let in_feature = features.iter().any(|r| r.contains(px, py));
            for c in 0..3 {
                let v = if in_feature {
                    0.5 + 0.4 * stripe(px, py, 4.0, ft_phase)
                } else if in_face {
                    skin[c]
                } else {
                    bg[c] + 0.25 * stripe(px, py, 8.0, bg_phase)
                };
                data[(c * size + y) * size + x] = v;
            }
        }
    }
    if noise > 0.0 {
        for v in &mut data {
            *v += normal.sample(rng);
        }
    }
    let img = ImageBuffer::from_field_clamped(crate::imagecore::Field::new(size, size, 3, data).expect("valid dims"));
    (img, lm)
}

/// Writes `count` PNG samples (alternating classes) into `dir` and returns their manifest.
pub fn write_synthetic_dataset(dir: &Path, name: &str, cfg: &SynthConfig) -> Result<DatasetManifest<f64>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let label = if i % 2 == 0 { Gender::Male } else { Gender::Female };
        let pattern = if cfg.invert_labels { label.opposite() } else { label };
        let (img, lm) = render_face(pattern, cfg.size, cfg.noise, &mut rng);
        let file = format!("{name}_{i:05}.png");
        save_image(&img, dir.join(&file))?;
        records.push(SampleRecord {
            image_path: file,
            gender: label,
            subject_id: format!("{name}-{i}"),
            fold: None,
            landmarks: Some(lm),
        });
    }
    Ok(DatasetManifest::new(name, dir, records)?)
}

//! Training-set augmentation and synthetic degradations.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::illum::separable_blur;
use crate::imagecore::{horizontal_flip, FeatureGroup, ImageBuffer, ImageError, LandmarkSet, mean_intensity};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum DegradeError {
    #[error("shift {shift} must be at least 1 and below both image sides ({width}x{height})")]
    Shift { shift: usize, width: usize, height: usize },
    #[error("{0} needs landmarks")]
    MissingLandmarks(DegradeKind),
    #[error("invalid degradation parameter: {0}")]
    Parameter(String),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    pub shift: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { shift: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Up,
    Down,
    Left,
    Right,
}

fn translate<T: Real>(img: &ImageBuffer<T>, dir: Direction, shift: usize, fill: &[T]) -> ImageBuffer<T> {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for c in 0..img.channels() {
        for y in 0..h {
            for x in 0..w {
                let src = match dir {
                    Direction::Up => (y + shift < h).then(|| (x, y + shift)),
                    Direction::Down => (y >= shift).then(|| (x, y - shift)),
                    Direction::Left => (x + shift < w).then(|| (x + shift, y)),
                    Direction::Right => (x >= shift).then(|| (x - shift, y)),
                };
                let v = src.map_or(fill[c], |(sx, sy)| img.get(sx, sy, c));
                out.set(x, y, c, v);
            }
        }
    }
    out
}

/// Original, its four translations (up, down, left, right) and the
/// horizontal flips of those five, in that order. Vacated bands take the
/// per-channel mean of the original.
pub fn augment_10x<T: Real>(img: &ImageBuffer<T>, cfg: &AugmentConfig) -> Result<Vec<ImageBuffer<T>>, DegradeError> {
    let (w, h) = (img.width(), img.height());
    if cfg.shift == 0 || cfg.shift >= w || cfg.shift >= h {
        return Err(DegradeError::Shift { shift: cfg.shift, width: w, height: h });
    }
    let fill = mean_intensity(img);
    let mut out = Vec::with_capacity(10);
    out.push(img.clone());
    for dir in [Direction::Up, Direction::Down, Direction::Left, Direction::Right] {
        out.push(translate(img, dir, cfg.shift, &fill));
    }
    for i in 0..5 {
        let flipped = horizontal_flip(&out[i]);
        out.push(flipped);
    }
    Ok(out)
}

/// Landmarks matching each output of [`augment_10x`].
pub fn augment_landmarks_10x<T: Real>(lm: &LandmarkSet<T>, width: usize, cfg: &AugmentConfig) -> Vec<LandmarkSet<T>> {
    let s = T::from_usize_lossy(cfg.shift);
    let z = T::zero();
    let base = [
        lm.clone(),
        lm.translated(z, -s),
        lm.translated(z, s),
        lm.translated(-s, z),
        lm.translated(s, z),
    ];
    base.iter().cloned().chain(base.iter().map(|l| l.mirrored(width))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DegradeKind {
    GaussianNoise,
    GaussianSmooth,
    Posterize,
    OccludeNose,
    OccludeMouth,
}

impl DegradeKind {
    pub const ALL: [DegradeKind; 5] = [
        DegradeKind::GaussianNoise,
        DegradeKind::GaussianSmooth,
        DegradeKind::Posterize,
        DegradeKind::OccludeNose,
        DegradeKind::OccludeMouth,
    ];

    pub fn token(self) -> &'static str {
        match self {
            DegradeKind::GaussianNoise => "gaussian-noise",
            DegradeKind::GaussianSmooth => "gaussian-smooth",
            DegradeKind::Posterize => "posterize",
            DegradeKind::OccludeNose => "occlude-nose",
            DegradeKind::OccludeMouth => "occlude-mouth",
        }
    }

    pub fn needs_landmarks(self) -> bool {
        matches!(self, DegradeKind::OccludeNose | DegradeKind::OccludeMouth)
    }
}

impl fmt::Display for DegradeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DegradeKind {
    type Err = DegradeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| DegradeError::Unknown { what: "degradation", value: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn token(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Difficulty {
    type Err = DegradeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.token() == s)
            .ok_or_else(|| DegradeError::Unknown { what: "difficulty", value: s.to_string() })
    }
}

/// Parameters for one degradation kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DegradeParams {
    Noise { sigma: f64 },
    Smooth { sigma: f64 },
    Posterize { levels: usize },
    Occlude { fill: f64, margin: f64 },
}

pub const OCCLUSION_FILL: f64 = 0.5;
pub const OCCLUSION_MARGIN: f64 = 1.2;

/// Fixed parameter table. Occlusions do not vary with difficulty.
pub fn difficulty_params(kind: DegradeKind, difficulty: Difficulty) -> DegradeParams {
    let pick = |v: [f64; 3]| v[difficulty as usize];
    match kind {
        DegradeKind::GaussianNoise => DegradeParams::Noise { sigma: pick([0.02, 0.05, 0.10]) },
        DegradeKind::GaussianSmooth => DegradeParams::Smooth { sigma: pick([1.0, 2.0, 4.0]) },
        DegradeKind::Posterize => DegradeParams::Posterize { levels: [16, 8, 4][difficulty as usize] },
        DegradeKind::OccludeNose | DegradeKind::OccludeMouth => {
            DegradeParams::Occlude { fill: OCCLUSION_FILL, margin: OCCLUSION_MARGIN }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradeSpec {
    pub kind: DegradeKind,
    pub params: DegradeParams,
    pub difficulty: Difficulty,
    pub seed: u64,
}

impl DegradeSpec {
    pub fn preset(kind: DegradeKind, difficulty: Difficulty, seed: u64) -> Self {
        Self { kind, params: difficulty_params(kind, difficulty), difficulty, seed }
    }

    fn validate(&self) -> Result<(), DegradeError> {
        let ok = match (self.kind, self.params) {
            (DegradeKind::GaussianNoise, DegradeParams::Noise { sigma })
            | (DegradeKind::GaussianSmooth, DegradeParams::Smooth { sigma }) => sigma >= 0.0 && sigma.is_finite(),
            (DegradeKind::Posterize, DegradeParams::Posterize { levels }) => levels >= 2,
            (k, DegradeParams::Occlude { fill, margin }) if k.needs_landmarks() => {
                (0.0..=1.0).contains(&fill) && margin > 0.0 && margin.is_finite()
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(DegradeError::Parameter(format!("{:?} for {}", self.params, self.kind)))
        }
    }
}

pub fn gaussian_taps<T: Real>(sigma: T) -> Vec<T> {
    let r = (sigma * T::lit(3.0)).ceil().to_usize().unwrap_or(0) as isize;
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (-r..=r).map(|d| (-T::lit((d * d) as f64) / two_s2).exp()).collect();
    let sum: T = raw.iter().copied().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

pub fn add_noise<T: Real>(img: &ImageBuffer<T>, sigma: T, seed: u64) -> ImageBuffer<T> {
    if sigma == T::zero() {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = img.as_field().clone();
    for v in field.data_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * T::lit(n);
    }
    ImageBuffer::from_field_clamped(field)
}

pub fn smooth<T: Real>(img: &ImageBuffer<T>, sigma: T) -> ImageBuffer<T> {
    if sigma == T::zero() {
        return img.clone();
    }
    ImageBuffer::from_field_clamped(separable_blur(img.as_field(), &gaussian_taps(sigma)))
}

/// Uniform quantization to `levels` values per channel, each bin mapped to its midpoint.
pub fn posterize<T: Real>(img: &ImageBuffer<T>, levels: usize) -> ImageBuffer<T> {
    let l = T::from_usize_lossy(levels);
    let top = T::from_usize_lossy(levels - 1);
    let half = T::lit(0.5);
    let mut field = img.as_field().clone();
    for v in field.data_mut() {
        let q = (*v * l).floor().min(top);
        *v = (q + half) / l;
    }
    ImageBuffer::from_field_clamped(field)
}

pub fn occlude<T: Real>(img: &ImageBuffer<T>, lm: &LandmarkSet<T>, group: FeatureGroup, fill: T, margin: T) -> ImageBuffer<T> {
    let mut out = img.clone();
    let rect = lm.group_bounds(group).scaled(margin);
    out.fill_rect(&rect, &[fill]);
    out
}

pub fn degrade<T: Real>(img: &ImageBuffer<T>, spec: &DegradeSpec, landmarks: Option<&LandmarkSet<T>>) -> Result<ImageBuffer<T>, DegradeError> {
    spec.validate()?;
    Ok(match spec.params {
        DegradeParams::Noise { sigma } => add_noise(img, T::lit(sigma), spec.seed),
        DegradeParams::Smooth { sigma } => smooth(img, T::lit(sigma)),
        DegradeParams::Posterize { levels } => posterize(img, levels),
        DegradeParams::Occlude { fill, margin } => {
            let lm = landmarks.ok_or(DegradeError::MissingLandmarks(spec.kind))?;
            let group = if spec.kind == DegradeKind::OccludeNose { FeatureGroup::Nose } else { FeatureGroup::Mouth };
            occlude(img, lm, group, T::lit(fill), T::lit(margin))
        }
    })
}

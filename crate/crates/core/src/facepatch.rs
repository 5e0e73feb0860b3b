//! Face detection orchestration and local patch extraction.

use std::path::PathBuf;
use std::process::Command;

use thiserror::Error;

use crate::illum::{ssr_with, SsrConfig};
use crate::imagecore::{
    crop_resize, mean_intensity, save_image, FeatureGroup, ImageBuffer, ImageError, LandmarkSet, Rect,
    LANDMARK_COUNT,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("face rectangle does not contain every landmark")]
    RectMissesLandmarks,
    #[error("group {0} cannot be cut as a local patch")]
    NotAPatchGroup(&'static str),
    #[error("patch margin must be at least 1, got {0}")]
    Margin(f64),
    #[error("detection record: {0}")]
    Record(String),
    #[error("external detector: {0}")]
    External(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// One detected face: 17 landmarks inside a face rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDetection<T> {
    landmarks: LandmarkSet<T>,
    face_rect: Rect<T>,
    fit_score: T,
}

impl<T: Real> FaceDetection<T> {
    pub fn new(landmarks: LandmarkSet<T>, face_rect: Rect<T>, fit_score: T) -> Result<Self, PatchError> {
        if !landmarks.points().iter().all(|&(x, y)| face_rect.contains(x, y)) {
            return Err(PatchError::RectMissesLandmarks);
        }
        Ok(Self { landmarks, face_rect, fit_score })
    }

    /// Detection whose face rectangle is the landmark bounding box.
    pub fn from_landmarks(landmarks: LandmarkSet<T>) -> Self {
        let face_rect = landmarks.bounds();
        Self { landmarks, face_rect, fit_score: T::one() }
    }

    pub fn landmarks(&self) -> &LandmarkSet<T> {
        &self.landmarks
    }

    pub fn face_rect(&self) -> &Rect<T> {
        &self.face_rect
    }

    pub fn fit_score(&self) -> T {
        self.fit_score
    }

    pub fn mirrored(&self, width: usize) -> Self {
        let r = self.face_rect;
        let w = T::from_usize_lossy(width);
        Self {
            landmarks: self.landmarks.mirrored(width),
            face_rect: Rect::new(w - r.right(), r.y, r.width, r.height),
            fit_score: self.fit_score,
        }
    }

    /// One-line text record: `score x y w h` followed by 17 `x y` pairs.
    pub fn to_record(&self) -> String {
        let r = &self.face_rect;
        let mut parts = vec![self.fit_score, r.x, r.y, r.width, r.height];
        parts.extend(self.landmarks.to_flat());
        parts.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Parses a detector output line; a blank line means "no face".
pub fn parse_detection_record<T: Real>(line: &str) -> Result<Option<FaceDetection<T>>, PatchError> {
    let line = line.trim();
    if line.is_empty() {
        return Ok(None);
    }
    let values = line
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| PatchError::Record(format!("invalid number {s:?}")))
        })
        .collect::<Result<Vec<T>, _>>()?;
    if values.len() != 5 + 2 * LANDMARK_COUNT {
        return Err(PatchError::Record(format!(
            "expected {} numbers, found {}",
            5 + 2 * LANDMARK_COUNT,
            values.len()
        )));
    }
    let rect = Rect::new(values[1], values[2], values[3], values[4]);
    let landmarks = LandmarkSet::from_flat(&values[5..])?;
    FaceDetection::new(landmarks, rect, values[0]).map(Some)
}

/// Single-face detector: returns the best face in the image, or nothing.
pub trait DetectorPort<T> {
    fn detect(&self, img: &ImageBuffer<T>) -> Option<FaceDetection<T>>;
}

impl<T, F> DetectorPort<T> for F
where
    F: Fn(&ImageBuffer<T>) -> Option<FaceDetection<T>>,
{
    fn detect(&self, img: &ImageBuffer<T>) -> Option<FaceDetection<T>> {
        self(img)
    }
}

/// Replays known landmarks (e.g. from a manifest record).
///
/// Fires while its face rectangle still shows image content; once that area
/// has been painted a single color it reports no face.
#[derive(Debug, Clone)]
pub struct OracleDetector<T> {
    detection: FaceDetection<T>,
}

impl<T: Real> OracleDetector<T> {
    pub fn new(detection: FaceDetection<T>) -> Self {
        Self { detection }
    }
}

impl<T: Real> DetectorPort<T> for OracleDetector<T> {
    fn detect(&self, img: &ImageBuffer<T>) -> Option<FaceDetection<T>> {
        if region_is_flat(img, self.detection.face_rect()) {
            None
        } else {
            Some(self.detection.clone())
        }
    }
}

/// True when every pixel center inside `rect` holds one value per channel
/// (or the rect covers no pixel).
pub fn region_is_flat<T: Real>(img: &ImageBuffer<T>, rect: &Rect<T>) -> bool {
    let Some((x0, x1, y0, y1)) = rect.covered_pixels(img.width(), img.height()) else {
        return true;
    };
    (0..img.channels()).all(|c| {
        let first = img.get(x0, y0, c);
        (y0..y1).all(|y| (x0..x1).all(|x| img.get(x, y, c) == first))
    })
}

/// Runs an external program once per image: `<program> <args...> <image.png>`.
/// The program prints one detection record, or an empty line for no face.
#[derive(Debug, Clone)]
pub struct ExternalDetector {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalDetector {
    pub fn run<T: Real>(&self, img: &ImageBuffer<T>) -> Result<Option<FaceDetection<T>>, PatchError> {
        let dir = tempfile::tempdir().map_err(|e| PatchError::External(e.to_string()))?;
        let path = dir.path().join("frame.png");
        save_image(img, &path)?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&path)
            .output()
            .map_err(|e| PatchError::External(format!("{}: {e}", self.program.display())))?;
        if !output.status.success() {
            return Err(PatchError::External(format!("exited with {}", output.status)));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        parse_detection_record(stdout.lines().next().unwrap_or(""))
    }
}

impl<T: Real> DetectorPort<T> for ExternalDetector {
    fn detect(&self, img: &ImageBuffer<T>) -> Option<FaceDetection<T>> {
        // a failing tool counts as "no face"; the caller sees an empty result
        self.run(img).ok().flatten()
    }
}

/// Finds every face by repeated detection, painting each found face rectangle
/// with `mask_fill` on a working copy so it cannot fire again.
///
/// When the first attempt on the original finds nothing, the loop restarts on
/// the retinex-enhanced image. Geometry is shared, so detections need no remapping.
pub fn detect_all_faces<T: Real, D: DetectorPort<T> + ?Sized>(
    img: &ImageBuffer<T>,
    detector: &D,
    mask_fill: &[T],
    max_faces: usize,
) -> Vec<FaceDetection<T>> {
    detect_all_faces_with(img, detector, mask_fill, max_faces, &SsrConfig::default())
}

pub fn detect_all_faces_with<T: Real, D: DetectorPort<T> + ?Sized>(
    img: &ImageBuffer<T>,
    detector: &D,
    mask_fill: &[T],
    max_faces: usize,
    ssr: &SsrConfig<T>,
) -> Vec<FaceDetection<T>> {
    let mut found = Vec::new();
    if max_faces == 0 {
        return found;
    }
    let fill: Vec<T> = if mask_fill.is_empty() { mean_intensity(img) } else { mask_fill.to_vec() };
    let mut work = img.clone();
    let first = match detector.detect(&work) {
        Some(d) => Some(d),
        None => match ssr_with(img, ssr) {
            Ok(enhanced) => {
                work = enhanced;
                detector.detect(&work)
            }
            Err(_) => None,
        },
    };
    let mut next = first;
    while let Some(det) = next {
        work.fill_rect(det.face_rect(), &fill);
        found.push(det);
        if found.len() >= max_faces {
            break;
        }
        next = detector.detect(&work);
    }
    found
}

/// Default patch geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchConfig<T> {
    pub margin: T,
    pub min_box: T,
    pub size: usize,
}

impl<T: Real> Default for PatchConfig<T> {
    fn default() -> Self {
        Self { margin: T::lit(1.5), min_box: T::lit(8.0), size: 227 }
    }
}

/// Crop rectangle for a landmark group: bounding box scaled about its center
/// by `margin`, widened to at least `min_box` per side.
pub fn patch_rect<T: Real>(lm: &LandmarkSet<T>, group: FeatureGroup, margin: T, min_box: T) -> Result<Rect<T>, PatchError> {
    if group == FeatureGroup::FaceOutline {
        return Err(PatchError::NotAPatchGroup(group.name()));
    }
    if !(margin >= T::one()) {
        return Err(PatchError::Margin(margin.as_f64()));
    }
    Ok(lm.group_bounds(group).scaled(margin).with_min_size(min_box))
}

pub fn extract_patch<T: Real>(
    img: &ImageBuffer<T>,
    lm: &LandmarkSet<T>,
    group: FeatureGroup,
    margin: T,
    out: usize,
) -> Result<ImageBuffer<T>, PatchError> {
    extract_patch_with(img, lm, group, &PatchConfig { margin, size: out, ..PatchConfig::default() })
}

pub fn extract_patch_with<T: Real>(
    img: &ImageBuffer<T>,
    lm: &LandmarkSet<T>,
    group: FeatureGroup,
    cfg: &PatchConfig<T>,
) -> Result<ImageBuffer<T>, PatchError> {
    let rect = patch_rect(lm, group, cfg.margin, cfg.min_box)?;
    Ok(crop_resize(img, &rect, cfg.size, cfg.size)?)
}

/// The four local patches of one face, all `size x size`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet<T> {
    pub eye_left: ImageBuffer<T>,
    pub eye_right: ImageBuffer<T>,
    pub nose: ImageBuffer<T>,
    pub mouth: ImageBuffer<T>,
    pub source: FaceDetection<T>,
}

pub fn extract_patch_set<T: Real>(
    img: &ImageBuffer<T>,
    det: &FaceDetection<T>,
    margin: T,
    out: usize,
) -> Result<PatchSet<T>, PatchError> {
    extract_patch_set_with(img, det, &PatchConfig { margin, size: out, ..PatchConfig::default() })
}

pub fn extract_patch_set_with<T: Real>(
    img: &ImageBuffer<T>,
    det: &FaceDetection<T>,
    cfg: &PatchConfig<T>,
) -> Result<PatchSet<T>, PatchError> {
    let lm = det.landmarks();
    Ok(PatchSet {
        eye_left: extract_patch_with(img, lm, FeatureGroup::LeftEye, cfg)?,
        eye_right: extract_patch_with(img, lm, FeatureGroup::RightEye, cfg)?,
        nose: extract_patch_with(img, lm, FeatureGroup::Nose, cfg)?,
        mouth: extract_patch_with(img, lm, FeatureGroup::Mouth, cfg)?,
        source: det.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::horizontal_flip;
    use std::cell::Cell;

    fn lm_with_group(group: FeatureGroup, pts: &[(f64, f64)]) -> LandmarkSet<f64> {
        let mut all = vec![(50.0, 50.0); 17];
        for (slot, &p) in group.indices().iter().zip(pts.iter().cycle()) {
            all[*slot] = p;
        }
        LandmarkSet::new(all).unwrap()
    }

    fn face_landmarks(ox: f64, oy: f64) -> LandmarkSet<f64> {
        let pts = vec![
            (8.0, 12.0), (14.0, 12.0), (11.0, 10.0),
            (20.0, 12.0), (26.0, 12.0), (23.0, 10.0),
            (17.0, 13.0), (17.0, 19.0), (17.0, 21.0),
            (12.0, 26.0), (22.0, 26.0), (17.0, 27.0),
            (4.0, 8.0), (6.0, 24.0), (17.0, 32.0), (28.0, 24.0), (30.0, 8.0),
        ];
        LandmarkSet::new(pts.into_iter().map(|(x, y)| (x + ox, y + oy)).collect()).unwrap()
    }

    fn textured(w: usize, h: usize) -> ImageBuffer<f64> {
        ImageBuffer::from_fn(w, h, 3, |x, y, c| {
            (((x * 31 + y * 17 + c * 7) % 23) as f64 / 22.0 + (x as f64 * 0.13).sin() * 0.1).clamp(0.0, 1.0)
        })
        .unwrap()
    }

    #[test]
    fn margin_expands_about_center() {
        let lm = lm_with_group(FeatureGroup::Nose, &[(10.0, 10.0), (30.0, 20.0)]);
        let r = patch_rect(&lm, FeatureGroup::Nose, 1.5, 8.0).unwrap();
        assert_eq!((r.x, r.y, r.right(), r.bottom()), (5.0, 7.5, 35.0, 22.5));
        let r = patch_rect(&lm, FeatureGroup::Nose, 1.0, 8.0).unwrap();
        assert_eq!((r.x, r.y, r.right(), r.bottom()), (10.0, 10.0, 30.0, 20.0));
    }

    #[test]
    fn single_point_group_gets_minimum_box() {
        let lm = lm_with_group(FeatureGroup::Mouth, &[(20.0, 20.0)]);
        let r = patch_rect(&lm, FeatureGroup::Mouth, 1.5, 8.0).unwrap();
        assert_eq!((r.x, r.y, r.width, r.height), (16.0, 16.0, 8.0, 8.0));
    }

    #[test]
    fn rejects_bad_groups_and_margins() {
        let lm = face_landmarks(0.0, 0.0);
        assert!(matches!(patch_rect(&lm, FeatureGroup::FaceOutline, 1.5, 8.0), Err(PatchError::NotAPatchGroup(_))));
        assert!(matches!(patch_rect(&lm, FeatureGroup::Nose, 0.9, 8.0), Err(PatchError::Margin(_))));
    }

    #[test]
    fn patch_set_has_uniform_size() {
        let img = textured(40, 40);
        let det = FaceDetection::from_landmarks(face_landmarks(2.0, 2.0));
        let set = extract_patch_set(&img, &det, 1.5, 24).unwrap();
        for p in [&set.eye_left, &set.eye_right, &set.nose, &set.mouth] {
            assert_eq!((p.width(), p.height(), p.channels()), (24, 24, 3));
        }
    }

    #[test]
    fn mirrored_input_gives_flipped_patches() {
        let img = textured(40, 38);
        let det = FaceDetection::from_landmarks(face_landmarks(3.0, 1.0));
        let set = extract_patch_set(&img, &det, 1.5, 20).unwrap();
        let mirror = extract_patch_set(&horizontal_flip(&img), &det.mirrored(40), 1.5, 20).unwrap();
        let close = |a: &ImageBuffer<f64>, b: &ImageBuffer<f64>| {
            a.data().iter().zip(b.data()).all(|(p, q)| (p - q).abs() < 1e-6)
        };
        assert!(close(&mirror.eye_left, &horizontal_flip(&set.eye_right)));
        assert!(close(&mirror.eye_right, &horizontal_flip(&set.eye_left)));
        assert!(close(&mirror.nose, &horizontal_flip(&set.nose)));
        assert!(close(&mirror.mouth, &horizontal_flip(&set.mouth)));
    }

    #[test]
    fn border_landmarks_are_clamped() {
        let img = textured(34, 34);
        let det = FaceDetection::from_landmarks(face_landmarks(-4.0, -8.0).translated_to_bounds());
        let set = extract_patch_set(&img, &det, 2.0, 16).unwrap();
        assert_eq!(set.nose.width(), 16);
    }

    trait ClampToBounds {
        fn translated_to_bounds(&self) -> LandmarkSet<f64>;
    }

    impl ClampToBounds for LandmarkSet<f64> {
        fn translated_to_bounds(&self) -> LandmarkSet<f64> {
            LandmarkSet::new(self.points().iter().map(|&(x, y)| (x.max(0.0), y.max(0.0))).collect()).unwrap()
        }
    }

    #[test]
    fn translation_equivariance_away_from_borders() {
        let big = textured(80, 80);
        let lm = face_landmarks(20.0, 20.0);
        let shifted_img = ImageBuffer::from_fn(80, 80, 3, |x, y, c| {
            if x >= 5 && y >= 3 { big.get(x - 5, y - 3, c) } else { 0.0 }
        })
        .unwrap();
        let a = extract_patch(&big, &lm, FeatureGroup::Nose, 1.5, 12).unwrap();
        let b = extract_patch(&shifted_img, &lm.translated(5.0, 3.0), FeatureGroup::Nose, 1.5, 12).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn detection_record_round_trip() {
        let det = FaceDetection::from_landmarks(face_landmarks(1.5, 2.25));
        let parsed = parse_detection_record::<f64>(&det.to_record()).unwrap().unwrap();
        assert_eq!(parsed, det);
        assert!(parse_detection_record::<f64>("   ").unwrap().is_none());
        assert!(parse_detection_record::<f64>("1 2 3").is_err());
    }

    #[test]
    fn rect_must_contain_landmarks() {
        let lm = face_landmarks(0.0, 0.0);
        assert!(FaceDetection::new(lm, Rect::new(0.0, 0.0, 5.0, 5.0), 1.0).is_err());
    }

    #[test]
    fn silent_detector_finds_nothing() {
        let img = textured(20, 20);
        let never = |_: &ImageBuffer<f64>| -> Option<FaceDetection<f64>> { None };
        assert!(detect_all_faces(&img, &never, &[], 5).is_empty());
    }

    fn stub_at(ox: f64, oy: f64) -> FaceDetection<f64> {
        let lm = face_landmarks(ox, oy);
        let rect = lm.bounds();
        FaceDetection::new(lm, rect, 1.0).unwrap()
    }

    #[test]
    fn masking_loop_finds_each_face_once() {
        let img = textured(120, 50);
        let faces = [stub_at(2.0, 2.0), stub_at(42.0, 4.0), stub_at(84.0, 6.0)];
        let calls = Cell::new(0);
        let stub = |im: &ImageBuffer<f64>| {
            calls.set(calls.get() + 1);
            faces.iter().find(|d| !region_is_flat(im, d.face_rect())).cloned()
        };
        let found = detect_all_faces(&img, &stub, &[0.5, 0.5, 0.5], 10);
        assert_eq!(found.len(), 3);
        assert_eq!(calls.get(), 4);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(!found[i].face_rect().overlaps(found[j].face_rect()));
            }
        }
        let capped = detect_all_faces(&img, &stub, &[0.5, 0.5, 0.5], 2);
        assert_eq!(capped.len(), 2);
    }

    #[test]
    fn falls_back_to_retinex_image() {
        // dark image: the stub only fires when the face region is bright on average
        let img = ImageBuffer::from_fn(40, 40, 1, |x, y, _| 0.02 + 0.01 * (((x + y) % 3) as f64)).unwrap();
        let face = stub_at(2.0, 2.0);
        let seen_bright = Cell::new(0);
        let stub = |im: &ImageBuffer<f64>| {
            if region_is_flat(im, face.face_rect()) {
                return None;
            }
            let m = mean_intensity(im)[0];
            if m > 0.2 {
                seen_bright.set(seen_bright.get() + 1);
                Some(face.clone())
            } else {
                None
            }
        };
        let found = detect_all_faces(&img, &stub, &[], 4);
        assert_eq!(found.len(), 1);
        assert_eq!(seen_bright.get(), 1);
        assert_eq!(found[0], face);
    }

    #[test]
    fn oracle_detector_stops_after_masking() {
        let img = textured(40, 40);
        let oracle = OracleDetector::new(FaceDetection::from_landmarks(face_landmarks(2.0, 2.0)));
        assert_eq!(detect_all_faces(&img, &oracle, &[], 5).len(), 1);
    }

    #[test]
    fn external_detector_reads_one_line() {
        let det = FaceDetection::from_landmarks(face_landmarks(1.0, 1.0));
        let ext = ExternalDetector {
            program: "sh".into(),
            args: vec!["-c".into(), format!("echo '{}'", det.to_record()), "detector".into()],
        };
        let img = textured(36, 36);
        assert_eq!(ext.run(&img).unwrap(), Some(det));
        let empty = ExternalDetector { program: "sh".into(), args: vec!["-c".into(), "echo".into(), "d".into()] };
        assert_eq!(empty.run(&img).unwrap(), None);
    }
}

//! Tab-separated dataset manifests.
//!
//! One record per line: `image-path  gender(M|F)  subject-id  fold(int|-)`,
//! optionally followed by 34 numbers (17 landmark `x y` pairs). Lines whose
//! first non-blank character is `#` are comments; blank lines are skipped.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::landmarks::{LandmarkSet, LANDMARK_COUNT};
use super::ManifestError;

/// Class label; the numeric value is the sign used throughout the fusion stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn sign(self) -> i8 {
        match self {
            Gender::Male => 1,
            Gender::Female => -1,
        }
    }

    pub fn from_sign(v: f64) -> Gender {
        if v >= 0.0 {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    /// Softmax output index: MALE is class 0.
    pub fn class_index(self) -> usize {
        match self {
            Gender::Male => 0,
            Gender::Female => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Gender {
        if i == 0 {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    pub fn opposite(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord<T> {
    pub image_path: String,
    pub gender: Gender,
    pub subject_id: String,
    pub fold: Option<usize>,
    pub landmarks: Option<LandmarkSet<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest<T> {
    pub name: String,
    /// Directory relative image paths are resolved against.
    pub base_dir: PathBuf,
    pub records: Vec<SampleRecord<T>>,
}

impl<T: Real> DatasetManifest<T> {
    pub fn new(name: impl Into<String>, base_dir: impl Into<PathBuf>, records: Vec<SampleRecord<T>>) -> Result<Self, ManifestError> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.image_path.as_str()) {
                return Err(ManifestError::DuplicatePath { line: i + 1, path: r.image_path.clone() });
            }
        }
        Ok(Self { name: name.into(), base_dir: base_dir.into(), records })
    }

    pub fn resolve(&self, record: &SampleRecord<T>) -> PathBuf {
        let p = Path::new(&record.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Renders in the line-record format accepted by [`parse_manifest_str`].
    pub fn to_text(&self) -> String {
        let mut out = format!("# dataset: {}\n", self.name);
        for r in &self.records {
            let fold = r.fold.map_or_else(|| "-".to_string(), |f| f.to_string());
            let _ = write!(out, "{}\t{}\t{}\t{}", r.image_path, r.gender.token(), r.subject_id, fold);
            if let Some(lm) = &r.landmarks {
                for v in lm.to_flat() {
                    let _ = write!(out, "\t{}", v);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|source| ManifestError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Reads a manifest file; relative image paths resolve against its directory.
pub fn parse_manifest<T: Real>(path: impl AsRef<Path>) -> Result<DatasetManifest<T>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest_str(&text, name, base)
}

pub fn parse_manifest_str<T: Real>(
    text: &str,
    name: impl Into<String>,
    base_dir: impl Into<PathBuf>,
) -> Result<DatasetManifest<T>, ManifestError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record = parse_line::<T>(raw.trim_end_matches('\r'), line)?;
        if !seen.insert(record.image_path.clone()) {
            return Err(ManifestError::DuplicatePath { line, path: record.image_path });
        }
        records.push(record);
    }
    Ok(DatasetManifest { name: name.into(), base_dir: base_dir.into(), records })
}

fn parse_line<T: Real>(raw: &str, line: usize) -> Result<SampleRecord<T>, ManifestError> {
    let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
    let malformed = |reason: String| ManifestError::Malformed { line, reason };
    if fields.len() != 4 && fields.len() != 4 + 2 * LANDMARK_COUNT {
        return Err(malformed(format!(
            "expected 4 fields or 4 + {} landmark values, found {} fields",
            2 * LANDMARK_COUNT,
            fields.len()
        )));
    }
    if fields[0].is_empty() {
        return Err(malformed("empty image path".into()));
    }
    let gender = match fields[1] {
        "M" => Gender::Male,
        "F" => Gender::Female,
        other => return Err(ManifestError::InvalidGender { line, token: other.to_string() }),
    };
    let fold = match fields[3] {
        "-" => None,
        s => Some(s.parse::<usize>().map_err(|_| malformed(format!("invalid fold id {s:?}")))?),
    };
    let landmarks = if fields.len() > 4 {
        let values = fields[4..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| malformed(format!("invalid landmark coordinate {s:?}")))
            })
            .collect::<Result<Vec<T>, _>>()?;
        Some(LandmarkSet::from_flat(&values).map_err(|e| malformed(e.to_string()))?)
    } else {
        None
    };
    Ok(SampleRecord {
        image_path: fields[0].to_string(),
        gender,
        subject_id: fields[2].to_string(),
        fold,
        landmarks,
    })
}

use serde::{Deserialize, Serialize};

use crate::imagecore::Gender;
use crate::scalar::Real;

use super::FusionError;

/// Source of a classifier score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureLabel {
    Face,
    EyeLeft,
    EyeRight,
    Nose,
    Mouth,
}

impl FeatureLabel {
    pub const ALL: [FeatureLabel; 5] =
        [FeatureLabel::Face, FeatureLabel::EyeLeft, FeatureLabel::EyeRight, FeatureLabel::Nose, FeatureLabel::Mouth];

    /// Canonical order of the local (non-face) labels.
    pub const LOCAL: [FeatureLabel; 4] =
        [FeatureLabel::EyeLeft, FeatureLabel::EyeRight, FeatureLabel::Nose, FeatureLabel::Mouth];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureLabel::Face => "face",
            FeatureLabel::EyeLeft => "eye-left",
            FeatureLabel::EyeRight => "eye-right",
            FeatureLabel::Nose => "nose",
            FeatureLabel::Mouth => "mouth",
        }
    }
}

/// `c * s` for a class `c` in {+1, -1} and softmax probability `s` in `[0.5, 1]`.
pub fn signed_score<T: Real>(class: Gender, s: T) -> Result<T, FusionError> {
    if !(s >= T::lit(0.5) && s <= T::one()) {
        return Err(FusionError::ScoreRange(s.as_f64()));
    }
    Ok(if class == Gender::Male { s } else { -s })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScore<T> {
    pub label: FeatureLabel,
    pub class: Gender,
    pub score: T,
}

impl<T: Real> FeatureScore<T> {
    pub fn new(label: FeatureLabel, class: Gender, score: T) -> Result<Self, FusionError> {
        signed_score(class, score)?;
        Ok(Self { label, class, score })
    }

    pub fn signed(&self) -> T {
        if self.class == Gender::Male {
            self.score
        } else {
            -self.score
        }
    }
}

/// Signed scores of all five labels for one sample, stored in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSet<T> {
    signed: [T; 5],
}

impl<T: Real> ScoreSet<T> {
    /// Accepts the five scores in any order.
    pub fn from_scores(scores: &[FeatureScore<T>]) -> Result<Self, FusionError> {
        let mut slots: [Option<T>; 5] = [None; 5];
        for s in scores {
            let slot = &mut slots[s.label.index()];
            if slot.is_some() {
                return Err(FusionError::DuplicateLabel(s.label.name()));
            }
            *slot = Some(s.signed());
        }
        let mut signed = [T::zero(); 5];
        for label in FeatureLabel::ALL {
            signed[label.index()] = slots[label.index()].ok_or(FusionError::MissingLabel(label.name()))?;
        }
        Ok(Self { signed })
    }

    /// From already-signed values in canonical order (face, eye-left, eye-right, nose, mouth).
    pub fn from_signed(signed: [T; 5]) -> Result<Self, FusionError> {
        for v in signed {
            if !(v.abs() >= T::lit(0.5) && v.abs() <= T::one()) {
                return Err(FusionError::ScoreRange(v.as_f64()));
            }
        }
        Ok(Self { signed })
    }

    pub fn get(&self, label: FeatureLabel) -> T {
        self.signed[label.index()]
    }

    pub fn signed(&self) -> &[T; 5] {
        &self.signed
    }
}

/// A non-empty subset of local labels; its vector is the face score followed
/// by the subset's scores in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreCombination<L> {
    /// 1-based; bit `j` of the index selects the `j`-th local label.
    pub index: usize,
    pub subset: Vec<L>,
}

/// All `2^n - 1` non-empty subsets in binary counting order.
pub fn enumerate_combinations<L: Clone>(local_labels: &[L]) -> Result<Vec<ScoreCombination<L>>, FusionError> {
    let n = local_labels.len();
    if n == 0 || n > 16 {
        return Err(FusionError::LabelCount(n));
    }
    Ok((1..1usize << n)
        .map(|index| ScoreCombination {
            index,
            subset: (0..n).filter(|j| index >> j & 1 == 1).map(|j| local_labels[j].clone()).collect(),
        })
        .collect())
}

impl ScoreCombination<FeatureLabel> {
    pub fn vector<T: Real>(&self, scores: &ScoreSet<T>) -> Vec<T> {
        let mut v = Vec::with_capacity(self.subset.len() + 1);
        v.push(scores.get(FeatureLabel::Face));
        v.extend(self.subset.iter().map(|&l| scores.get(l)));
        v
    }
}

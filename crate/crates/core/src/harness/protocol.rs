use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imagecore::{DatasetManifest, Gender};
use crate::scalar::Real;

use super::HarnessError;

/// Class-balanced assignment of samples to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold of each sample, `None` for discarded samples.
    pub assignments: Vec<Option<usize>>,
    /// Sorted indices of the discarded samples.
    pub discarded: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == Some(fold)).collect()
    }

    /// Retained samples outside `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| matches!(self.assignments[i], Some(f) if f != fold))
            .collect()
    }

    pub fn check_fold(&self, fold: usize) -> Result<(), HarnessError> {
        if fold >= self.k {
            return Err(HarnessError::Protocol(format!("fold {fold} out of range for k = {}", self.k)));
        }
        Ok(())
    }
}

/// Discards random samples of the larger class until both classes have the
/// minority count, then deals each shuffled class round-robin over the folds.
pub fn make_folds_for_labels(labels: &[Gender], k: usize, seed: u64) -> Result<FoldPlan, HarnessError> {
    if k < 2 {
        return Err(HarnessError::Protocol(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = [Gender::Male, Gender::Female]
        .iter()
        .map(|&g| (0..labels.len()).filter(|&i| labels[i] == g).collect())
        .collect();
    let m = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if m < k {
        return Err(HarnessError::Protocol(format!(
            "each class needs at least {k} samples, found {} male and {} female",
            by_class[0].len(),
            by_class[1].len()
        )));
    }
    let mut assignments = vec![None; labels.len()];
    let mut discarded = Vec::new();
    for class in &mut by_class {
        class.shuffle(&mut rng);
        for (pos, &i) in class.iter().enumerate() {
            if pos < m {
                assignments[i] = Some(pos % k);
            } else {
                discarded.push(i);
            }
        }
    }
    discarded.sort_unstable();
    Ok(FoldPlan { k, seed, assignments, discarded })
}

pub fn make_folds<T: Real>(manifest: &DatasetManifest<T>, k: usize, seed: u64) -> Result<FoldPlan, HarnessError> {
    let labels: Vec<Gender> = manifest.records.iter().map(|r| r.gender).collect();
    make_folds_for_labels(&labels, k, seed)
}

/// Plan from the fold ids stored in a manifest, or `None` when no record has
/// one. Records without a fold id count as discarded.
pub fn fold_plan_from_manifest<T: Real>(manifest: &DatasetManifest<T>, k: usize) -> Result<Option<FoldPlan>, HarnessError> {
    if manifest.records.iter().all(|r| r.fold.is_none()) {
        return Ok(None);
    }
    if k < 2 {
        return Err(HarnessError::Protocol(format!("need at least 2 folds, got {k}")));
    }
    if let Some(r) = manifest.records.iter().find(|r| r.fold.is_some_and(|f| f >= k)) {
        return Err(HarnessError::Protocol(format!(
            "sample {} has fold id {} outside [0, {k})",
            r.image_path,
            r.fold.unwrap_or_default()
        )));
    }
    let assignments: Vec<Option<usize>> = manifest.records.iter().map(|r| r.fold).collect();
    let discarded = (0..assignments.len()).filter(|&i| assignments[i].is_none()).collect();
    Ok(Some(FoldPlan { k, seed: 0, assignments, discarded }))
}

impl FoldPlan {
    /// Copy of `manifest` with this plan's fold ids written into the records.
    pub fn apply_to<T: Real>(&self, manifest: &DatasetManifest<T>) -> Result<DatasetManifest<T>, HarnessError> {
        if self.assignments.len() != manifest.len() {
            return Err(HarnessError::Protocol(format!(
                "fold plan covers {} samples, manifest has {}",
                self.assignments.len(),
                manifest.len()
            )));
        }
        let mut out = manifest.clone();
        for (r, &f) in out.records.iter_mut().zip(&self.assignments) {
            r.fold = f;
        }
        Ok(out)
    }
}

/// Partition of a training set into network, boosting and discriminant portions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub cnn: Vec<usize>,
    pub adaboost: Vec<usize>,
    pub fusion: Vec<usize>,
}

pub const MIN_SPLIT_SAMPLES: usize = 8;

/// Portion sizes for `n` samples: `floor(0.75 n)`, `0.6 (n - cnn)` rounded to
/// nearest, remainder. Flooring the middle portion would push the last one
/// more than a sample past 10% of `n` (e.g. `n = 9`).
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let cnn = 3 * n / 4;
    // 6r is even, so 0.6 r never lands on a half
    let ada = (6 * (n - cnn) + 5) / 10;
    (cnn, ada, n - cnn - ada)
}

pub fn make_splits(samples: &[usize], seed: u64) -> Result<SplitPlan, HarnessError> {
    if samples.len() < MIN_SPLIT_SAMPLES {
        return Err(HarnessError::Protocol(format!(
            "need at least {MIN_SPLIT_SAMPLES} training samples, got {}",
            samples.len()
        )));
    }
    let mut order = samples.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (cnn, ada, _) = split_sizes(order.len());
    let fusion = order.split_off(cnn + ada);
    let adaboost = order.split_off(cnn);
    Ok(SplitPlan { seed, cnn: order, adaboost, fusion })
}

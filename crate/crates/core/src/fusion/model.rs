use serde::{Deserialize, Serialize};

use crate::imagecore::Gender;
use crate::scalar::Real;

use super::adaboost::{predict_adaboost, train_adaboost, BoostEnsemble};
use super::lda::{train_lda, LinearDiscriminant};
use super::scores::{enumerate_combinations, FeatureLabel, ScoreCombination, ScoreSet};
use super::FusionError;

pub const DEFAULT_ROUNDS: usize = 50;
pub const DEFAULT_SHRINKAGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig<T> {
    pub rounds: usize,
    pub shrinkage: T,
}

impl<T: Real> Default for FusionConfig<T> {
    fn default() -> Self {
        Self { rounds: DEFAULT_ROUNDS, shrinkage: T::lit(DEFAULT_SHRINKAGE) }
    }
}

/// One boosted ensemble per score combination plus the final discriminant
/// over their decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel<T> {
    pub labels: Vec<FeatureLabel>,
    pub ensembles: Vec<BoostEnsemble<T>>,
    pub discriminant: LinearDiscriminant<T>,
}

fn combinations() -> Vec<ScoreCombination<FeatureLabel>> {
    enumerate_combinations(&FeatureLabel::LOCAL).expect("four local labels")
}

fn combination_vectors<T: Real>(combos: &[ScoreCombination<FeatureLabel>], scores: &[ScoreSet<T>]) -> Vec<Vec<Vec<T>>> {
    combos.iter().map(|c| scores.iter().map(|s| c.vector(s)).collect()).collect()
}

/// Trains the ensembles on one sample set and the discriminant on another.
pub fn train_fusion_split<T: Real>(
    boost_scores: &[ScoreSet<T>],
    boost_labels: &[Gender],
    lda_scores: &[ScoreSet<T>],
    lda_labels: &[Gender],
    cfg: &FusionConfig<T>,
) -> Result<FusionModel<T>, FusionError> {
    if boost_scores.len() != boost_labels.len() {
        return Err(FusionError::Length { expected: boost_scores.len(), actual: boost_labels.len() });
    }
    if lda_scores.len() != lda_labels.len() {
        return Err(FusionError::Length { expected: lda_scores.len(), actual: lda_labels.len() });
    }
    let combos = combinations();
    let ensembles = combination_vectors(&combos, boost_scores)
        .iter()
        .map(|vectors| train_adaboost(vectors, boost_labels, cfg.rounds))
        .collect::<Result<Vec<_>, _>>()?;
    let partial = FusionModel {
        labels: FeatureLabel::LOCAL.to_vec(),
        ensembles,
        discriminant: LinearDiscriminant { weights: Vec::new(), bias: T::zero(), shrinkage: cfg.shrinkage },
    };
    let decisions = lda_scores.iter().map(|s| partial.decisions(s)).collect::<Result<Vec<_>, _>>()?;
    let discriminant = train_lda(&decisions, lda_labels, cfg.shrinkage)?;
    Ok(FusionModel { discriminant, ..partial })
}

/// Trains every stage on the same samples.
pub fn train_fusion<T: Real>(scores: &[ScoreSet<T>], labels: &[Gender], cfg: &FusionConfig<T>) -> Result<FusionModel<T>, FusionError> {
    train_fusion_split(scores, labels, scores, labels, cfg)
}

impl<T: Real> FusionModel<T> {
    /// The 15 ensemble decisions as +-1 values.
    pub fn decisions(&self, scores: &ScoreSet<T>) -> Result<Vec<T>, FusionError> {
        let combos = enumerate_combinations(&self.labels)?;
        if combos.len() != self.ensembles.len() {
            return Err(FusionError::Corrupt("ensemble count does not match label count".into()));
        }
        combos
            .iter()
            .zip(&self.ensembles)
            .map(|(c, e)| Ok(T::lit(f64::from(predict_adaboost(e, &c.vector(scores))?.sign()))))
            .collect()
    }

    pub fn predict(&self, scores: &ScoreSet<T>) -> Result<Gender, FusionError> {
        self.discriminant.predict(&self.decisions(scores)?)
    }

    /// Final stage with its classes swapped.
    pub fn inverted(&self) -> Self {
        Self { discriminant: self.discriminant.inverted(), ..self.clone() }
    }
}

pub fn predict_fusion<T: Real>(model: &FusionModel<T>, scores: &ScoreSet<T>) -> Result<Gender, FusionError> {
    model.predict(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_score(rng: &mut impl Rng) -> f64 {
        let s = rng.random_range(0.5..=1.0);
        if rng.random::<bool>() { s } else { -s }
    }

    fn face_informative(n: usize, seed: u64) -> (Vec<ScoreSet<f64>>, Vec<Gender>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut sets = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { Gender::Male } else { Gender::Female };
            let face = f64::from(label.sign()) * rng.random_range(0.5..=1.0);
            let mut s = [face, 0.0, 0.0, 0.0, 0.0];
            for v in &mut s[1..] {
                *v = random_score(&mut rng);
            }
            sets.push(ScoreSet::from_signed(s).unwrap());
            labels.push(label);
        }
        (sets, labels)
    }

    #[test]
    fn face_only_signal_is_learned() {
        let (sets, labels) = face_informative(60, 4);
        let model = train_fusion(&sets, &labels, &FusionConfig::default()).unwrap();
        assert_eq!(model.ensembles.len(), 15);
        for (s, l) in sets.iter().zip(&labels) {
            assert_eq!(predict_fusion(&model, s).unwrap(), *l);
        }
        let male = ScoreSet::from_signed([0.99, -0.9, -0.9, -0.9, -0.9]).unwrap();
        assert_eq!(predict_fusion(&model, &male).unwrap(), Gender::Male);
        assert_eq!(model.inverted().predict(&male).unwrap(), Gender::Female);
    }

    #[test]
    fn deterministic() {
        let (sets, labels) = face_informative(40, 5);
        let cfg = FusionConfig { rounds: 10, shrinkage: 0.1 };
        assert_eq!(train_fusion(&sets, &labels, &cfg).unwrap(), train_fusion(&sets, &labels, &cfg).unwrap());
    }
}

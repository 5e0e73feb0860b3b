use serde::{Deserialize, Serialize};

use crate::imagecore::Gender;
use crate::scalar::Real;

use super::adaboost::check_training_set;
use super::FusionError;

/// Two-class Fisher discriminant: MALE when `w . x + b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiscriminant<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub shrinkage: T,
}

impl<T: Real> LinearDiscriminant<T> {
    pub fn decision(&self, x: &[T]) -> Result<T, FusionError> {
        if x.len() != self.weights.len() {
            return Err(FusionError::Length { expected: self.weights.len(), actual: x.len() });
        }
        Ok(self.weights.iter().zip(x).fold(self.bias, |acc, (&w, &v)| acc + w * v))
    }

    pub fn predict(&self, x: &[T]) -> Result<Gender, FusionError> {
        Ok(if self.decision(x)? >= T::zero() { Gender::Male } else { Gender::Female })
    }

    /// Same hyperplane with the classes swapped.
    pub fn inverted(&self) -> Self {
        Self { weights: self.weights.iter().map(|&w| -w).collect(), bias: -self.bias, shrinkage: self.shrinkage }
    }
}

/// Fits `w = S^-1 (mu_male - mu_female)` with the pooled within-class
/// covariance shrunk toward the identity, `S = (1 - lambda) S_w + lambda I`,
/// and places the threshold halfway between the projected class means.
pub fn train_lda<T: Real>(vectors: &[Vec<T>], labels: &[Gender], shrinkage: T) -> Result<LinearDiscriminant<T>, FusionError> {
    let d = check_training_set(vectors, labels)?;
    if !(shrinkage >= T::zero() && shrinkage <= T::one()) {
        return Err(FusionError::Shrinkage(shrinkage.as_f64()));
    }
    let mean_of = |class: Gender| -> (Vec<T>, usize) {
        let mut m = vec![T::zero(); d];
        let mut count = 0;
        for (v, _) in vectors.iter().zip(labels).filter(|(_, l)| **l == class) {
            for (mi, &x) in m.iter_mut().zip(v) {
                *mi += x;
            }
            count += 1;
        }
        let c = T::from_usize_lossy(count);
        m.iter_mut().for_each(|x| *x /= c);
        (m, count)
    };
    let (mu_m, _) = mean_of(Gender::Male);
    let (mu_f, _) = mean_of(Gender::Female);
    let n = vectors.len();
    let mut scatter = vec![T::zero(); d * d];
    for (v, l) in vectors.iter().zip(labels) {
        let mu = if *l == Gender::Male { &mu_m } else { &mu_f };
        let diff: Vec<T> = v.iter().zip(mu).map(|(&a, &b)| a - b).collect();
        for i in 0..d {
            for j in 0..d {
                scatter[i * d + j] += diff[i] * diff[j];
            }
        }
    }
    let dof = T::from_usize_lossy(if n > 2 { n - 2 } else { n });
    let keep = T::one() - shrinkage;
    let mut cov: Vec<T> = scatter.iter().map(|&s| keep * s / dof).collect();
    for i in 0..d {
        cov[i * d + i] += shrinkage;
    }
    let diff: Vec<T> = mu_m.iter().zip(&mu_f).map(|(&a, &b)| a - b).collect();
    let weights = crate::linalg::solve_dense(&mut cov, diff, d).ok_or(FusionError::Singular)?;
    let half = T::lit(0.5);
    let bias = -weights
        .iter()
        .zip(mu_m.iter().zip(&mu_f))
        .fold(T::zero(), |acc, (&w, (&a, &b))| acc + w * (a + b) * half);
    Ok(LinearDiscriminant { weights, bias, shrinkage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn pm(rng: &mut impl Rng) -> f64 {
        if rng.random::<bool>() { 1.0 } else { -1.0 }
    }

    #[test]
    fn one_informative_component_is_enough() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            let label = if i % 2 == 0 { Gender::Male } else { Gender::Female };
            let mut v: Vec<f64> = (0..15).map(|_| pm(&mut rng)).collect();
            v[6] = f64::from(label.sign());
            vectors.push(v);
            labels.push(label);
        }
        let lda = train_lda(&vectors, &labels, 0.1).unwrap();
        for (v, l) in vectors.iter().zip(&labels) {
            assert_eq!(lda.predict(v).unwrap(), *l);
        }
    }

    #[test]
    fn identical_classes_stay_near_chance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let vectors: Vec<Vec<f64>> = (0..200).map(|_| (0..15).map(|_| pm(&mut rng)).collect()).collect();
        let labels: Vec<Gender> = (0..200).map(|_| if rng.random::<bool>() { Gender::Male } else { Gender::Female }).collect();
        let lda = train_lda(&vectors, &labels, 0.1).unwrap();
        assert!(lda.weights.iter().all(|w| w.is_finite()));
        let acc = vectors.iter().zip(&labels).filter(|(v, l)| lda.predict(v).unwrap() == **l).count() as f64 / 200.0;
        assert!((0.4..=0.6).contains(&acc), "accuracy {acc}");
    }

    #[test]
    fn full_shrinkage_is_nearest_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vectors: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<Gender> = (0..40).map(|i| if i < 15 { Gender::Male } else { Gender::Female }).collect();
        let lda = train_lda(&vectors, &labels, 1.0).unwrap();
        let mean = |range: std::ops::Range<usize>| -> Vec<f64> {
            let k = range.len() as f64;
            (0..4).map(|j| range.clone().map(|i| vectors[i][j]).sum::<f64>() / k).collect()
        };
        let (mm, mf) = (mean(0..15), mean(15..40));
        for j in 0..4 {
            assert!((lda.weights[j] - (mm[j] - mf[j])).abs() < 1e-12);
        }
        for v in &vectors {
            let dm: f64 = v.iter().zip(&mm).map(|(a, b)| (a - b).powi(2)).sum();
            let df: f64 = v.iter().zip(&mf).map(|(a, b)| (a - b).powi(2)).sum();
            let nearest = if dm <= df { Gender::Male } else { Gender::Female };
            assert_eq!(lda.predict(v).unwrap(), nearest);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(train_lda(&[vec![1.0], vec![-1.0]], &[Gender::Male, Gender::Male], 0.1), Err(FusionError::SingleClass)));
        assert!(train_lda(&[vec![1.0], vec![-1.0]], &[Gender::Male, Gender::Female], 1.5).is_err());
        // no spread and no shrinkage: singular
        assert!(matches!(
            train_lda(&[vec![1.0, 1.0], vec![-1.0, -1.0]], &[Gender::Male, Gender::Female], 0.0),
            Err(FusionError::Singular)
        ));
    }
}

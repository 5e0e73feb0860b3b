use serde::{Deserialize, Serialize};

use crate::imagecore::Gender;
use crate::scalar::Real;

use super::FusionError;

/// Lower and upper clamp applied to a round's weighted error before computing its weight.
pub const ERROR_CLAMP: f64 = 1e-10;

/// Threshold classifier on one vector component: `polarity` above the
/// threshold, `-polarity` at or below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump<T> {
    pub component: usize,
    pub threshold: T,
    pub polarity: i8,
}

impl<T: Real> Stump<T> {
    #[inline]
    pub fn vote(&self, v: &[T]) -> i8 {
        if v[self.component] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

/// Discrete AdaBoost over decision stumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostEnsemble<T> {
    pub dims: usize,
    pub stumps: Vec<Stump<T>>,
    pub alphas: Vec<T>,
    /// Clamped weighted error of each round.
    pub errors: Vec<T>,
}

/// `0.5 * ln((1 - e) / e)` with `e` clamped to `[1e-10, 1 - 1e-10]`.
pub fn round_weight<T: Real>(error: T) -> T {
    let e = clamp_error(error);
    T::lit(0.5) * ((T::one() - e) / e).ln()
}

fn clamp_error<T: Real>(error: T) -> T {
    error.max(T::lit(ERROR_CLAMP)).min(T::one() - T::lit(ERROR_CLAMP))
}

impl<T: Real> BoostEnsemble<T> {
    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    /// Weighted vote `sum(alpha_t * C_t(v))`.
    pub fn margin(&self, v: &[T]) -> Result<T, FusionError> {
        if v.len() != self.dims {
            return Err(FusionError::Length { expected: self.dims, actual: v.len() });
        }
        Ok(self
            .stumps
            .iter()
            .zip(&self.alphas)
            .fold(T::zero(), |acc, (s, &a)| acc + a * T::lit(f64::from(s.vote(v))))
        )
    }

    /// Upper bound on training error: `prod_t 2 sqrt(e_t (1 - e_t))`.
    pub fn error_bound(&self) -> T {
        self.errors
            .iter()
            .fold(T::one(), |acc, &e| acc * T::lit(2.0) * (e * (T::one() - e)).sqrt())
    }
}

/// Sign of the weighted vote; an exact zero counts as MALE.
pub fn predict_adaboost<T: Real>(ens: &BoostEnsemble<T>, v: &[T]) -> Result<Gender, FusionError> {
    Ok(if ens.margin(v)? >= T::zero() { Gender::Male } else { Gender::Female })
}

pub(crate) fn check_training_set<T: Real>(vectors: &[Vec<T>], labels: &[Gender]) -> Result<usize, FusionError> {
    if vectors.is_empty() {
        return Err(FusionError::Empty);
    }
    if vectors.len() != labels.len() {
        return Err(FusionError::Length { expected: vectors.len(), actual: labels.len() });
    }
    let dims = vectors[0].len();
    if dims == 0 {
        return Err(FusionError::Length { expected: 1, actual: 0 });
    }
    if let Some(bad) = vectors.iter().find(|v| v.len() != dims) {
        return Err(FusionError::Length { expected: dims, actual: bad.len() });
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(FusionError::NonFinite);
    }
    if !labels.contains(&Gender::Male) || !labels.contains(&Gender::Female) {
        return Err(FusionError::SingleClass);
    }
    Ok(dims)
}

/// Trains `rounds` rounds of discrete AdaBoost.
///
/// Each round picks the stump (component, midpoint threshold, polarity) with
/// the lowest weighted error; ties go to the lowest component, then the lowest
/// threshold, then polarity +1.
pub fn train_adaboost<T: Real>(vectors: &[Vec<T>], labels: &[Gender], rounds: usize) -> Result<BoostEnsemble<T>, FusionError> {
    let dims = check_training_set(vectors, labels)?;
    if rounds == 0 {
        return Err(FusionError::Rounds);
    }
    let n = vectors.len();
    let y: Vec<T> = labels.iter().map(|l| T::lit(f64::from(l.sign()))).collect();
    let orders: Vec<Vec<usize>> = (0..dims)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| vectors[a][j].partial_cmp(&vectors[b][j]).expect("finite").then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut weights = vec![T::one() / T::from_usize_lossy(n); n];
    let mut ens = BoostEnsemble { dims, stumps: Vec::new(), alphas: Vec::new(), errors: Vec::new() };
    for _ in 0..rounds {
        let (stump, _) = best_stump(vectors, labels, &weights, &orders);
        // recompute the error directly so it is exact for the chosen stump
        let error: T = (0..n)
            .filter(|&i| stump.vote(&vectors[i]) != labels[i].sign())
            .map(|i| weights[i])
            .sum();
        let error = clamp_error(error);
        let alpha = round_weight(error);
        for i in 0..n {
            let h = T::lit(f64::from(stump.vote(&vectors[i])));
            weights[i] *= (-alpha * y[i] * h).exp();
        }
        let total: T = weights.iter().copied().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        ens.stumps.push(stump);
        ens.alphas.push(alpha);
        ens.errors.push(error);
    }
    Ok(ens)
}

fn best_stump<T: Real>(vectors: &[Vec<T>], labels: &[Gender], weights: &[T], orders: &[Vec<usize>]) -> (Stump<T>, T) {
    let total: T = weights.iter().copied().sum();
    let female_weight: T = labels
        .iter()
        .zip(weights)
        .filter(|(l, _)| **l == Gender::Female)
        .map(|(_, &w)| w)
        .sum();
    let half = T::lit(0.5);
    let mut best: Option<(Stump<T>, T)> = None;
    for (j, order) in orders.iter().enumerate() {
        // polarity +1 with every sample above the threshold: females are wrong
        let mut err = female_weight;
        for k in 1..order.len() {
            let prev = order[k - 1];
            err += if labels[prev] == Gender::Male { weights[prev] } else { -weights[prev] };
            let (lo, hi) = (vectors[prev][j], vectors[order[k]][j]);
            if lo == hi {
                continue;
            }
            let threshold = lo + (hi - lo) * half;
            for (polarity, e) in [(1i8, err), (-1i8, total - err)] {
                if best.as_ref().is_none_or(|(_, b)| e < *b) {
                    best = Some((Stump { component: j, threshold, polarity }, e));
                }
            }
        }
    }
    best.unwrap_or_else(|| {
        // every component is constant: fall back to a constant vote
        let threshold = vectors[0][0] - T::one();
        let polarity = if female_weight > total - female_weight { -1 } else { 1 };
        let e = if polarity == 1 { female_weight } else { total - female_weight };
        (Stump { component: 0, threshold, polarity }, e)
    })
}

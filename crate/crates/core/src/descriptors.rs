//! Appearance (bag-of-words) and semantic (class distribution) descriptors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescriptorError {
    #[error("descriptor has zero L1 norm")]
    ZeroNormDescriptor,
    #[error("class distributions over different class sets ({0} vs {1})")]
    ClassSetMismatch(usize, usize),
    #[error("empty descriptor set")]
    EmptyDescriptorSet,
    #[error("invalid class distribution: {0}")]
    InvalidDistribution(&'static str),
    #[error("invalid BoW weight for word {0}")]
    InvalidWeight(u32),
}

/// Sparse bag-of-words histogram, word id -> non-negative weight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct BowVector {
    entries: BTreeMap<u32, f64>,
}

impl TryFrom<Vec<(u32, f64)>> for BowVector {
    type Error = DescriptorError;

    fn try_from(pairs: Vec<(u32, f64)>) -> Result<Self, Self::Error> {
        let mut bow = BowVector::default();
        for (w, x) in pairs {
            if !(x.is_finite() && x >= 0.0) {
                return Err(DescriptorError::InvalidWeight(w));
            }
            bow.add(w, x);
        }
        Ok(bow)
    }
}

impl From<BowVector> for Vec<(u32, f64)> {
    fn from(b: BowVector) -> Self {
        b.entries.into_iter().collect()
    }
}

impl FromIterator<u32> for BowVector {
    /// Histogram of word occurrences.
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut bow = BowVector::default();
        for w in iter {
            bow.add(w, 1.0);
        }
        bow
    }
}

impl BowVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: u32, weight: f64) {
        if weight > 0.0 {
            *self.entries.entry(word).or_insert(0.0) += weight;
        }
    }

    /// Adds every entry of `other` into `self`.
    pub fn accumulate(&mut self, other: &BowVector) {
        for (&w, &x) in &other.entries {
            self.add(w, x);
        }
    }

    pub fn get(&self, word: u32) -> f64 {
        self.entries.get(&word).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(&w, &x)| (w, x))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().sum()
    }
}

/// L1 score `1 - 0.5 * | a/|a| - b/|b| |_1`, in `[0, 1]`.
pub fn l1_similarity(a: &BowVector, b: &BowVector) -> Result<f64, DescriptorError> {
    let (na, nb) = (a.l1_norm(), b.l1_norm());
    if na <= 0.0 || nb <= 0.0 {
        return Err(DescriptorError::ZeroNormDescriptor);
    }
    // |x - y| summed over the union of supports equals
    // |x|_1 + |y|_1 - 2 * sum(min(x, y)) = 2 - 2 * sum(min), so the score is
    // the histogram intersection of the normalized vectors.
    let (small, large, ns, nl) = if a.len() <= b.len() {
        (a, b, na, nb)
    } else {
        (b, a, nb, na)
    };
    let overlap: f64 = small.iter().map(|(w, x)| (x / ns).min(large.get(w) / nl)).sum();
    Ok(overlap.clamp(0.0, 1.0))
}

/// Maximum pairwise L1 score between two descriptor sets.
pub fn best_appearance_score<'a, I, J>(set_i: I, set_j: J) -> Result<f64, DescriptorError>
where
    I: IntoIterator<Item = &'a BowVector>,
    J: IntoIterator<Item = &'a BowVector> + Clone,
{
    let mut best: Option<f64> = None;
    for a in set_i {
        for b in set_j.clone() {
            let s = l1_similarity(a, b)?;
            best = Some(best.map_or(s, |m| m.max(s)));
        }
    }
    best.ok_or(DescriptorError::EmptyDescriptorSet)
}

/// Combined vertex-pair score: product of appearance and class similarity.
pub fn pair_similarity(appearance: f64, class: f64) -> f64 {
    appearance * class
}

/// Probability distribution over a fixed, ordered class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassDistribution {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ClassDistribution {
    type Error = DescriptorError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(probs)
    }
}

impl From<ClassDistribution> for Vec<f64> {
    fn from(d: ClassDistribution) -> Self {
        d.probs
    }
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, DescriptorError> {
        if probs.is_empty() {
            return Err(DescriptorError::InvalidDistribution("empty class set"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DescriptorError::InvalidDistribution("negative or non-finite entry"));
        }
        if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DescriptorError::InvalidDistribution("entries do not sum to 1"));
        }
        Ok(Self { probs })
    }

    /// Normalizes arbitrary non-negative scores into a distribution.
    pub fn from_scores(scores: &[f64]) -> Result<Self, DescriptorError> {
        if scores.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DescriptorError::InvalidDistribution("negative or non-finite score"));
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(DescriptorError::InvalidDistribution("scores sum to zero"));
        }
        Ok(Self {
            probs: scores.iter().map(|s| s / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Multiplicative Bayesian update with per-class detection scores.
    /// A degenerate posterior (all mass vanished) falls back to the scores alone.
    pub fn fuse(&mut self, scores: &[f64]) -> Result<(), DescriptorError> {
        if scores.len() != self.probs.len() {
            return Err(DescriptorError::ClassSetMismatch(self.probs.len(), scores.len()));
        }
        let obs = Self::from_scores(scores)?;
        let mut post: Vec<f64> = self.probs.iter().zip(&obs.probs).map(|(p, q)| p * q).collect();
        let total: f64 = post.iter().sum();
        if total > 0.0 && total.is_finite() {
            post.iter_mut().for_each(|p| *p /= total);
            self.probs = post;
        } else {
            self.probs = obs.probs;
        }
        Ok(())
    }
}

/// Bhattacharyya coefficient `sum_z sqrt(p(z) q(z))`, in `[0, 1]`.
pub fn bhattacharyya(p: &ClassDistribution, q: &ClassDistribution) -> Result<f64, DescriptorError> {
    if p.len() != q.len() {
        return Err(DescriptorError::ClassSetMismatch(p.len(), q.len()));
    }
    let bc: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(bc.min(1.0))
}

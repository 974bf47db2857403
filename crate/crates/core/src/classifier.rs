//! The black-box bag classifier contract.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::bag::Bag;
use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// A probability distribution over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    /// Validates that `probs` lies on the probability simplex.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::contract("class distribution over zero classes"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::contract(format!(
                "class probabilities outside [0, 1]: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::contract(format!(
                "class probabilities sum to {total}, not 1"
            )));
        }
        Ok(ClassDistribution(probs))
    }

    /// Softmax of a logit vector. Always a valid distribution.
    pub fn softmax(logits: &[f64]) -> Self {
        let mut p = logits.to_vec();
        crate::models::nn::softmax_in_place(&mut p);
        ClassDistribution(p)
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.0[class]
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Most probable class; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = c;
            }
        }
        best
    }
}

/// A bag classifier `F` mapping any non-empty bag to a distribution over classes.
///
/// Implementations must be deterministic and must accept every non-empty
/// sub-bag of the bags they are used on.
pub trait BagClassifier: Send + Sync {
    fn num_classes(&self) -> usize;

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution>;
}

impl<T: BagClassifier + ?Sized> BagClassifier for &T {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        (**self).predict(bag)
    }
}

impl<T: BagClassifier + ?Sized> BagClassifier for Box<T> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        (**self).predict(bag)
    }
}

/// Wraps a classifier and counts `predict` calls. Safe to share across threads.
#[derive(Debug)]
pub struct Counted<F> {
    inner: F,
    calls: AtomicU64,
}

impl<F> Counted<F> {
    pub fn new(inner: F) -> Self {
        Counted {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: BagClassifier> BagClassifier for Counted<F> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(bag)
    }
}

/// Classifier defined by a closure over the bag. Mostly useful in tests and examples.
pub struct FnClassifier<G> {
    classes: usize,
    f: G,
}

impl<G> FnClassifier<G>
where
    G: Fn(&Bag) -> Vec<f64> + Send + Sync,
{
    pub fn new(classes: usize, f: G) -> Self {
        FnClassifier { classes, f }
    }
}

impl<G> BagClassifier for FnClassifier<G>
where
    G: Fn(&Bag) -> Vec<f64> + Send + Sync,
{
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        let probs = (self.f)(bag);
        if probs.len() != self.classes {
            return Err(Error::contract(format!(
                "closure classifier returned {} classes, expected {}",
                probs.len(),
                self.classes
            )));
        }
        ClassDistribution::new(probs)
    }
}

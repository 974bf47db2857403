//! Noiseless rule-based classifier built from a dataset's cluster centers.

use crate::bag::{Bag, InstanceTag};
use crate::classifier::{BagClassifier, ClassDistribution};
use crate::datasets::{Center, ClassRule, Dataset};
use crate::error::{Error, Result};

/// Assigns each instance to a concept when it lies within `radius` of that
/// concept's mean and closer to it than to the background mean (nearest concept
/// wins), then applies the dataset's class rule.
/// The output is one-hot smoothed: `1 - ε(C-1)` on the rule's class, `ε` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    concepts: Vec<(usize, Vec<f64>)>,
    radii: Vec<f64>,
    background: Vec<f64>,
    rule: ClassRule,
    epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.01;

impl OracleModel {
    /// Builds the oracle with the default radius for each concept, the typical
    /// distance of a background sample to it (`√(s² + d)` for separation `s`).
    /// Within that radius the background mean competes as a nearer center.
    pub fn from_dataset(dataset: &Dataset, epsilon: f64) -> Result<Self> {
        let background = dataset
            .centers()
            .iter()
            .find(|c| c.tag == InstanceTag::Neutral)
            .ok_or_else(|| Error::Config("dataset has no background center".into()))?;
        let d = dataset.dim() as f64;
        let mut concepts = Vec::new();
        let mut radii = Vec::new();
        for Center { tag, mean } in dataset.centers() {
            if let InstanceTag::Key(c) = *tag {
                let s2: f64 = mean
                    .iter()
                    .zip(&background.mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                radii.push((s2 + d).sqrt());
                concepts.push((c, mean.clone()));
            }
        }
        if concepts.is_empty() {
            return Err(Error::Config("dataset has no concept centers".into()));
        }
        Self::new(concepts, radii, background.mean.clone(), dataset.rule(), epsilon)
    }

    pub fn new(
        concepts: Vec<(usize, Vec<f64>)>,
        radii: Vec<f64>,
        background: Vec<f64>,
        rule: ClassRule,
        epsilon: f64,
    ) -> Result<Self> {
        let classes = rule.num_classes();
        if !(0.0..0.5).contains(&epsilon) || epsilon * classes as f64 > 1.0 {
            return Err(Error::Parameter(format!(
                "smoothing {epsilon} invalid for {classes} classes"
            )));
        }
        if radii.len() != concepts.len() || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Parameter("one positive radius per concept required".into()));
        }
        if concepts.iter().any(|(_, m)| m.len() != background.len()) {
            return Err(Error::Parameter("concept and background means differ in dimension".into()));
        }
        Ok(OracleModel {
            concepts,
            radii,
            background,
            rule,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rule(&self) -> ClassRule {
        self.rule
    }

    /// Concept assigned to one instance, if any.
    pub fn assign(&self, x: &[f64]) -> Option<usize> {
        let dist2 = |m: &[f64]| -> f64 { x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum() };
        let bg = dist2(&self.background);
        let mut best: Option<(usize, f64)> = None;
        for ((c, mean), r) in self.concepts.iter().zip(&self.radii) {
            let d2 = dist2(mean);
            if d2 <= r * r && d2 < bg && best.is_none_or(|(_, bd)| d2 < bd) {
                best = Some((*c, d2));
            }
        }
        best.map(|(c, _)| c)
    }

    /// The class the rule assigns to `bag`.
    pub fn rule_label(&self, bag: &Bag) -> Result<usize> {
        let dim = self.concepts[0].1.len();
        if bag.dim() != dim {
            return Err(Error::contract(format!(
                "bag dimension {} does not match oracle dimension {dim}",
                bag.dim()
            )));
        }
        let mut present = vec![false; self.rule.num_classes()];
        for x in bag.instances() {
            if let Some(c) = self.assign(x) {
                if c < present.len() {
                    present[c] = true;
                }
            }
        }
        Ok(self.rule.label(&present))
    }
}

impl BagClassifier for OracleModel {
    fn num_classes(&self) -> usize {
        self.rule.num_classes()
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        let label = self.rule_label(bag)?;
        let classes = self.num_classes();
        let mut probs = vec![self.epsilon; classes];
        probs[label] = 1.0 - self.epsilon * (classes - 1) as f64;
        ClassDistribution::new(probs)
    }
}

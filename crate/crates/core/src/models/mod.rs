//! Built-in MIL classifiers.
//!
//! [`OracleModel`] applies the generating class rule directly. [`InstanceModel`]
//! and [`AttentionModel`] are small trainable networks with hand-written
//! gradients; see [`train`] and [`gradient_check`].

mod attention;
mod checkpoint;
mod instance;
pub(crate) mod nn;
mod oracle;
mod train;

pub use attention::AttentionModel;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use instance::{InstanceModel, Pooling};
pub use oracle::{OracleModel, DEFAULT_EPSILON};
pub use train::{gradient_check, train, EpochLog, ModelKind, TrainConfig, TrainLog};

use crate::attribution::AttributionMatrix;
use crate::bag::Bag;
use crate::classifier::{BagClassifier, ClassDistribution};
use crate::error::{Error, Result};

/// A differentiable bag classifier with a flat parameter vector.
pub trait Network: BagClassifier {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Cross-entropy of the bag prediction against `label`.
    fn loss(&self, bag: &Bag, label: usize) -> f64;

    /// Returns the loss and adds its gradient into `grad` (same layout as `params`).
    fn loss_and_grad(&self, bag: &Bag, label: usize, grad: &mut [f64]) -> f64;

    /// The attribution the architecture provides by itself.
    fn inherent(&self, bag: &Bag) -> Result<AttributionMatrix>;
}

/// A bag classifier that may expose an inherent attribution method.
pub trait MilModel: BagClassifier {
    fn inherent_attributions(&self, bag: &Bag) -> Result<AttributionMatrix>;
}

/// Any built-in model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Oracle(OracleModel),
    Instance(InstanceModel),
    Attention(AttentionModel),
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Oracle(_) => "oracle",
            Model::Instance(_) => "instance",
            Model::Attention(m) if m.attention_enabled() => "attention",
            Model::Attention(_) => "embedding",
        }
    }

    pub fn as_network(&self) -> Option<&dyn Network> {
        match self {
            Model::Oracle(_) => None,
            Model::Instance(m) => Some(m),
            Model::Attention(m) => Some(m),
        }
    }
}

impl BagClassifier for Model {
    fn num_classes(&self) -> usize {
        match self {
            Model::Oracle(m) => m.num_classes(),
            Model::Instance(m) => m.num_classes(),
            Model::Attention(m) => m.num_classes(),
        }
    }

    fn predict(&self, bag: &Bag) -> Result<ClassDistribution> {
        match self {
            Model::Oracle(m) => m.predict(bag),
            Model::Instance(m) => m.predict(bag),
            Model::Attention(m) => m.predict(bag),
        }
    }
}

impl MilModel for Model {
    fn inherent_attributions(&self, bag: &Bag) -> Result<AttributionMatrix> {
        match self {
            Model::Oracle(m) => m.inherent_attributions(bag),
            Model::Instance(m) => m.inherent(bag),
            Model::Attention(m) => m.inherent(bag),
        }
    }
}

impl MilModel for OracleModel {
    fn inherent_attributions(&self, _bag: &Bag) -> Result<AttributionMatrix> {
        Err(Error::NoInherentMethod("the oracle is a rule, not a network".into()))
    }
}

impl MilModel for InstanceModel {
    fn inherent_attributions(&self, bag: &Bag) -> Result<AttributionMatrix> {
        self.inherent(bag)
    }
}

impl MilModel for AttentionModel {
    fn inherent_attributions(&self, bag: &Bag) -> Result<AttributionMatrix> {
        self.inherent(bag)
    }
}

/// Fraction of bags whose argmax prediction equals the bag label.
pub fn accuracy<F: BagClassifier + ?Sized>(model: &F, bags: &[Bag]) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::MetricUnavailable("accuracy over zero bags".into()));
    }
    let mut correct = 0usize;
    for bag in bags {
        if model.predict(bag)?.argmax() == bag.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / bags.len() as f64)
}

#[cfg(test)]
mod tests;

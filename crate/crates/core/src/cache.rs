//! Per-call memo of classifier outputs keyed by coalition mask.

use std::collections::HashMap;

use crate::bag::{Bag, Coalition};
use crate::classifier::BagClassifier;
use crate::error::{Error, Result};

/// Evaluates `F` on sub-bags of one bag, calling the classifier at most once per
/// distinct coalition.
pub(crate) struct CoalitionCache<'a, F: ?Sized> {
    f: &'a F,
    bag: &'a Bag,
    outputs: HashMap<Coalition, Vec<f64>>,
}

impl<'a, F: BagClassifier + ?Sized> CoalitionCache<'a, F> {
    pub(crate) fn new(f: &'a F, bag: &'a Bag) -> Self {
        CoalitionCache {
            f,
            bag,
            outputs: HashMap::new(),
        }
    }

    pub(crate) fn bag(&self) -> &'a Bag {
        self.bag
    }

    /// Class distribution of the sub-bag selected by `z`.
    pub(crate) fn eval(&mut self, z: &Coalition) -> Result<&[f64]> {
        if !self.outputs.contains_key(z) {
            let sub = self.bag.sub_bag(z)?;
            let p = self.f.predict(&sub)?;
            self.outputs.insert(z.clone(), p.probs().to_vec());
        }
        Ok(&self.outputs[z])
    }

    /// Number of distinct coalitions evaluated so far.
    pub(crate) fn evaluations(&self) -> usize {
        self.outputs.len()
    }
}

/// Checks a requested class list against the classifier's class count.
pub(crate) fn check_classes(classes: &[usize], num_classes: usize) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::contract("no classes requested"));
    }
    if let Some(c) = classes.iter().find(|&&c| c >= num_classes) {
        return Err(Error::contract(format!(
            "class {c} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

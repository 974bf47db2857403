//! Synthetic MIL datasets and the dataset file format.

mod generate;
mod io;
mod rule;

pub use generate::{generate_fourclass, generate_single_positive, generate_smil, GeneratorConfig};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use rule::{ClassRule, Relevance};

use serde::{Deserialize, Serialize};

use crate::bag::{Bag, InstanceTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// A cluster center used to generate instances with the given tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Center {
    pub tag: InstanceTag,
    pub mean: Vec<f64>,
}

/// A set of bags partitioned into contiguous train / val / test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    bags: Vec<Bag>,
    ids: Vec<u64>,
    rule: ClassRule,
    dim: usize,
    split_sizes: [usize; 3],
    centers: Vec<Center>,
}

impl Dataset {
    /// Assembles a dataset, checking labels, tags and dimensions.
    pub fn new(
        bags: Vec<Bag>,
        ids: Vec<u64>,
        rule: ClassRule,
        split_sizes: [usize; 3],
        centers: Vec<Center>,
    ) -> Result<Self> {
        let dim = bags
            .first()
            .map(Bag::dim)
            .or_else(|| centers.first().map(|c| c.mean.len()))
            .unwrap_or(1);
        if ids.len() != bags.len() {
            return Err(Error::Schema(format!(
                "{} ids for {} bags",
                ids.len(),
                bags.len()
            )));
        }
        if split_sizes.iter().sum::<usize>() != bags.len() {
            return Err(Error::Schema(format!(
                "split sizes {split_sizes:?} do not cover {} bags",
                bags.len()
            )));
        }
        let classes = rule.num_classes();
        for (bag, id) in bags.iter().zip(&ids) {
            if bag.dim() != dim {
                return Err(Error::Schema(format!(
                    "bag {id} has dimension {}, dataset dimension is {dim}",
                    bag.dim()
                )));
            }
            if bag.label() >= classes {
                return Err(Error::Schema(format!(
                    "bag {id} has label {} but the dataset has {classes} classes",
                    bag.label()
                )));
            }
            if let Some(tags) = bag.tags() {
                check_tags(tags, classes, *id)?;
            }
        }
        for c in &centers {
            if c.mean.len() != dim {
                return Err(Error::Schema("center dimension mismatch".into()));
            }
            check_tags(&[c.tag], classes, 0)?;
        }
        Ok(Dataset {
            bags,
            ids,
            rule,
            dim,
            split_sizes,
            centers,
        })
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn rule(&self) -> ClassRule {
        self.rule
    }

    pub fn num_classes(&self) -> usize {
        self.rule.num_classes()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &[Center] {
        &self.centers
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        self.split_sizes
    }

    fn split_range(&self, split: Split) -> std::ops::Range<usize> {
        let [tr, va, _] = self.split_sizes;
        match split {
            Split::Train => 0..tr,
            Split::Val => tr..tr + va,
            Split::Test => tr + va..self.bags.len(),
        }
    }

    pub fn split(&self, split: Split) -> &[Bag] {
        &self.bags[self.split_range(split)]
    }

    pub fn split_ids(&self, split: Split) -> &[u64] {
        &self.ids[self.split_range(split)]
    }

    pub fn witness_rate(&self) -> Result<f64> {
        witness_rate(&self.bags)
    }
}

fn check_tags(tags: &[InstanceTag], classes: usize, id: u64) -> Result<()> {
    for t in tags {
        if let InstanceTag::Key(c) = *t {
            if c == 0 || c >= classes {
                return Err(Error::Schema(format!(
                    "bag {id} has a key tag for class {c}, valid key classes are 1..{classes}"
                )));
            }
        }
    }
    Ok(())
}

/// Mean over bags of the fraction of key instances.
pub fn witness_rate(bags: &[Bag]) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::MetricUnavailable("witness rate of zero bags".into()));
    }
    let mut total = 0.0;
    for bag in bags {
        let tags = bag
            .tags()
            .ok_or_else(|| Error::MetricUnavailable("bag without instance tags".into()))?;
        let keys = tags
            .iter()
            .filter(|t| matches!(t, InstanceTag::Key(_)))
            .count();
        total += keys as f64 / bag.len() as f64;
    }
    Ok(total / bags.len() as f64)
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Center, ClassRule, Dataset};
use crate::bag::{Bag, InstanceTag};
use crate::error::{Error, Result};

/// Parameters shared by the synthetic generators.
///
/// Instances are unit-variance isotropic Gaussians. Background instances are
/// centred on the origin and concept `c` is centred `class_separation` away
/// along its own axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub bag_size_mean: f64,
    pub bag_size_std: f64,
    pub dim: usize,
    pub class_separation: f64,
    /// Upper bound of the uniform draw for key instances per concept.
    pub max_key_instances: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            train: 2500,
            val: 1000,
            test: 1000,
            bag_size_mean: 30.0,
            bag_size_std: std::f64::consts::SQRT_2,
            dim: 10,
            class_separation: 7.0,
            max_key_instances: 4,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bag_size_mean >= 2.0) {
            return Err(Error::Config(format!(
                "bag_size_mean must be at least 2, got {}",
                self.bag_size_mean
            )));
        }
        if !(self.bag_size_std >= 0.0) {
            return Err(Error::Config("bag_size_std must be non-negative".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.class_separation > 0.0) {
            return Err(Error::Config("class_separation must be positive".into()));
        }
        if self.max_key_instances == 0 {
            return Err(Error::Config("max_key_instances must be at least 1".into()));
        }
        Ok(())
    }
}

/// Four classes: concept 1 alone gives class 1, concept 2 alone class 2, both
/// together class 3 and neither class 0.
pub fn generate_fourclass(config: &GeneratorConfig) -> Result<Dataset> {
    let max = config.max_key_instances;
    generate(config, ClassRule::FourClass, |label, k, rng| {
        let mut counts = vec![0; 3];
        match label {
            0 => {}
            1 | 2 => counts[label] = uniform_count(rng, max, k)?,
            _ => {
                if k < 2 {
                    return Err(Error::Generation(format!(
                        "bag of size {k} cannot hold both concepts"
                    )));
                }
                counts[1] = uniform_count(rng, max, k - 1)?;
                counts[2] = uniform_count(rng, max, k - counts[1])?;
            }
        }
        Ok(counts)
    })
}

/// Binary standard-MIL dataset. Positive bags carry on average
/// `witness_rate_target * k` positive instances (at least one).
pub fn generate_smil(config: &GeneratorConfig, witness_rate_target: f64) -> Result<Dataset> {
    if !(witness_rate_target > 0.0 && witness_rate_target < 1.0) {
        return Err(Error::Config(format!(
            "witness rate target must lie in (0, 1), got {witness_rate_target}"
        )));
    }
    generate(config, ClassRule::Smil, |label, k, rng| {
        let mut counts = vec![0; 2];
        if label == 1 {
            // one guaranteed witness plus Binomial(k-1, q) more keeps the mean at w*k
            let expected = witness_rate_target * k as f64;
            counts[1] = if expected <= 1.0 || k == 1 {
                1
            } else {
                let q = (expected - 1.0) / (k - 1) as f64;
                let extra = Binomial::new((k - 1) as u64, q)
                    .map_err(|e| Error::Generation(e.to_string()))?
                    .sample(rng);
                1 + extra as usize
            };
        }
        Ok(counts)
    })
}

/// `num_positive_classes` concepts that never share a bag, plus a negative class 0.
pub fn generate_single_positive(
    config: &GeneratorConfig,
    num_positive_classes: usize,
) -> Result<Dataset> {
    if num_positive_classes == 0 {
        return Err(Error::Config("need at least one positive class".into()));
    }
    let max = config.max_key_instances;
    let rule = ClassRule::SinglePositive {
        positive_classes: num_positive_classes,
    };
    generate(config, rule, |label, k, rng| {
        let mut counts = vec![0; num_positive_classes + 1];
        if label > 0 {
            counts[label] = uniform_count(rng, max, k)?;
        }
        Ok(counts)
    })
}

fn uniform_count(rng: &mut ChaCha8Rng, max: usize, room: usize) -> Result<usize> {
    if room == 0 {
        return Err(Error::Generation(
            "bag too small for the required key instances".into(),
        ));
    }
    Ok(rng.random_range(1..=max.min(room)))
}

/// Shared driver. `key_counts(label, k, rng)` returns, per tag class, how many
/// key instances of that concept the bag receives.
fn generate<G>(config: &GeneratorConfig, rule: ClassRule, mut key_counts: G) -> Result<Dataset>
where
    G: FnMut(usize, usize, &mut ChaCha8Rng) -> Result<Vec<usize>>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centers = make_centers(config, rule.num_concepts(), &mut rng);
    let size_dist = Normal::new(config.bag_size_mean, config.bag_size_std)
        .map_err(|e| Error::Config(e.to_string()))?;
    let classes = rule.num_classes();

    let sizes = [config.train, config.val, config.test];
    let mut bags = Vec::with_capacity(sizes.iter().sum());
    for &n in &sizes {
        // balanced labels, shuffled within the split
        let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        labels.shuffle(&mut rng);
        for label in labels {
            let k = (size_dist.sample(&mut rng).round().max(2.0)) as usize;
            let counts = key_counts(label, k, &mut rng)?;
            let keys: usize = counts.iter().sum();
            if keys > k {
                return Err(Error::Generation(format!(
                    "{keys} key instances do not fit in a bag of {k}"
                )));
            }
            let mut tags: Vec<InstanceTag> = Vec::with_capacity(k);
            for (c, &count) in counts.iter().enumerate() {
                tags.extend(std::iter::repeat_n(InstanceTag::Key(c), count));
            }
            tags.resize(k, InstanceTag::Neutral);
            tags.shuffle(&mut rng);

            let present: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
            debug_assert_eq!(rule.label(&present), label);

            let mut data = Vec::with_capacity(k * config.dim);
            for tag in &tags {
                let center = match tag {
                    InstanceTag::Key(c) => &centers[*c].mean,
                    _ => &centers[0].mean,
                };
                data.extend(
                    center
                        .iter()
                        .map(|m| m + Distribution::<f64>::sample(&StandardNormal, &mut rng)),
                );
            }
            bags.push(Bag::from_flat(data, config.dim, label)?.with_tags(tags)?);
        }
    }
    let ids = (0..bags.len() as u64).collect();
    Dataset::new(bags, ids, rule, sizes, centers)
}

/// Background at the origin, concept `c` at `separation * e_{c-1}`. Concepts beyond
/// the dimension get random directions on the sphere of the same radius.
fn make_centers(config: &GeneratorConfig, concepts: usize, rng: &mut ChaCha8Rng) -> Vec<Center> {
    let d = config.dim;
    let mut centers = vec![Center {
        tag: InstanceTag::Neutral,
        mean: vec![0.0; d],
    }];
    for c in 1..=concepts {
        let mut mean = vec![0.0; d];
        if c - 1 < d {
            mean[c - 1] = config.class_separation;
        } else {
            let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for (m, r) in mean.iter_mut().zip(raw) {
                *m = config.class_separation * r / norm;
            }
        }
        centers.push(Center {
            tag: InstanceTag::Key(c),
            mean,
        });
    }
    centers
}

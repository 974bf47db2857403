//! Attribution quality: NDCG@n against ground-truth tags and AOPC-R against
//! the classifier itself.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::argsort_descending;
use crate::bag::{is_permutation, Bag, Coalition};
use crate::classifier::BagClassifier;
use crate::datasets::{ClassRule, Relevance};
use crate::error::{Error, Result};
use crate::methods::{explain, Method, MethodSettings};
use crate::models::MilModel;

/// Relevance of every instance of `bag` for `class`.
pub fn relevance_view(bag: &Bag, rule: &ClassRule, class: usize) -> Result<Vec<Relevance>> {
    let tags = bag
        .tags()
        .ok_or_else(|| Error::MetricUnavailable("bag has no instance tags".into()))?;
    Ok(tags.iter().map(|&t| rule.relevance(t, class)).collect())
}

/// Number of supporting instances, clamped to `[1, labeled]`.
pub fn default_ndcg_n(relevance: &[Relevance]) -> Result<usize> {
    let labeled = relevance.iter().filter(|r| r.gain().is_some()).count();
    if labeled == 0 {
        return Err(Error::MetricUnavailable("no labeled instances".into()));
    }
    let supporting = relevance.iter().filter(|&&r| r == Relevance::Supporting).count();
    Ok(supporting.clamp(1, labeled))
}

/// NDCG@n of the ordering induced by `row` (descending, stable ties) over the
/// labeled instances. `n = None` uses [`default_ndcg_n`].
pub fn ndcg_at_n(row: &[f64], relevance: &[Relevance], n: Option<usize>) -> Result<f64> {
    if row.len() != relevance.len() {
        return Err(Error::contract("attribution row and relevance lengths differ"));
    }
    let labeled: Vec<usize> = (0..row.len()).filter(|&i| relevance[i].gain().is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::MetricUnavailable("no labeled instances".into()));
    }
    let n = match n {
        Some(0) => return Err(Error::MetricUnavailable("NDCG@0 is undefined".into())),
        Some(n) if n > labeled.len() => {
            return Err(Error::MetricUnavailable(format!(
                "NDCG@{n} with only {} labeled instances",
                labeled.len()
            )))
        }
        Some(n) => n,
        None => default_ndcg_n(relevance)?,
    };
    let scores: Vec<f64> = labeled.iter().map(|&i| row[i]).collect();
    let order = argsort_descending(&scores)?;
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = order
        .iter()
        .take(n)
        .enumerate()
        .map(|(pos, &j)| relevance[labeled[j]].gain().unwrap_or(0.0) * discount(pos))
        .sum();
    let idcg: f64 = (0..n).map(discount).sum();
    Ok(dcg / idcg)
}

/// Area over the perturbation curve for most-relevant-first removal:
/// `(1/p) Σ_{i=1..p} [F_c(X) - F_c(X without the first i ordered instances)]`,
/// with `p = k - 1` unless a smaller `depth` is given.
pub fn aopc<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    ordering: &[usize],
    class: usize,
    depth: Option<usize>,
) -> Result<f64> {
    let k = bag.len();
    if k < 2 {
        return Err(Error::MethodInapplicable("AOPC needs at least two instances".into()));
    }
    if !is_permutation(ordering, k) {
        return Err(Error::contract("AOPC ordering is not a permutation"));
    }
    if class >= f.num_classes() {
        return Err(Error::contract(format!("class {class} out of range")));
    }
    let p = depth.unwrap_or(k - 1).clamp(1, k - 1);
    let full = f.predict(bag)?.prob(class);
    let mut keep = Coalition::full(k);
    let mut total = 0.0;
    for &i in &ordering[..p] {
        keep.remove(i);
        total += full - f.predict(&bag.sub_bag(&keep)?)?.prob(class);
    }
    Ok(total / p as f64)
}

/// AOPC of `ordering` minus the mean AOPC of `r` seeded random orderings.
pub fn aopc_r<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    ordering: &[usize],
    class: usize,
    r: usize,
    seed: u64,
) -> Result<f64> {
    aopc_r_depth(f, bag, ordering, class, r, seed, None)
}

fn aopc_r_depth<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    ordering: &[usize],
    class: usize,
    r: usize,
    seed: u64,
    depth: Option<usize>,
) -> Result<f64> {
    if r == 0 {
        return Err(Error::Parameter("AOPC-R needs at least one random ordering".into()));
    }
    let target = aopc(f, bag, ordering, class, depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..bag.len()).collect();
    let mut total = 0.0;
    for _ in 0..r {
        perm.shuffle(&mut rng);
        total += target - aopc(f, bag, &perm, class, depth)?;
    }
    Ok(total / r as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Ndcg,
    AopcR,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ndcg => "ndcg",
            Metric::AopcR => "aopc-r",
        }
    }
}

/// Which classes of a bag are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassPolicy {
    AllClasses,
    /// The negative class 0 and the bag's own label (one class for negative bags).
    TrueAndNegative,
}

impl ClassPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ClassPolicy::AllClasses => "all-classes",
            ClassPolicy::TrueAndNegative => "true-and-negative",
        }
    }

    pub fn classes(self, bag: &Bag, num_classes: usize) -> Vec<usize> {
        match self {
            ClassPolicy::AllClasses => (0..num_classes).collect(),
            ClassPolicy::TrueAndNegative if bag.label() == 0 => vec![0],
            ClassPolicy::TrueAndNegative => vec![0, bag.label()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub metric: Metric,
    pub policy: ClassPolicy,
    pub seed: u64,
    /// Fixed NDCG cut-off; by default the class's supporting-instance count.
    pub ndcg_n: Option<usize>,
    pub aopc_orderings: usize,
    pub aopc_depth: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metric: Metric::Ndcg,
            policy: ClassPolicy::AllClasses,
            seed: 0,
            ndcg_n: None,
            aopc_orderings: 10,
            aopc_depth: None,
        }
    }
}

/// Seed of one bag's random streams; independent of evaluation order.
pub fn bag_seed(seed: u64, bag_id: u64) -> u64 {
    seed ^ bag_id
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub bag_id: u64,
    pub class: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub method: Method,
    pub metric: Metric,
    pub scores: Vec<ClassScore>,
    /// Mean score of each scored bag, in input order.
    pub per_bag: Vec<(u64, f64)>,
    pub mean: f64,
    pub sem: f64,
    /// (bag, class) pairs without a defined score, e.g. no supporting instance.
    pub skipped: usize,
}

/// Mean and standard error of the mean; the error is 0 for a single value.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Scores one attribution matrix for one bag under `cfg`.
fn score_bag<M: MilModel + ?Sized>(
    model: &M,
    bag: &Bag,
    bag_id: u64,
    rule: &ClassRule,
    method: Method,
    settings: &MethodSettings,
    cfg: &EvalConfig,
) -> Result<(Vec<ClassScore>, usize)> {
    let seed = bag_seed(cfg.seed, bag_id);
    let mut classes = cfg.policy.classes(bag, model.num_classes());
    let mut skipped = 0;
    if cfg.metric == Metric::Ndcg && cfg.ndcg_n.is_none() {
        // without a supporting instance the best attainable NDCG is 0
        let before = classes.len();
        classes.retain(|&c| has_support(bag, rule, c));
        skipped = before - classes.len();
        if classes.is_empty() {
            return Ok((Vec::new(), skipped));
        }
    }
    let attributions = explain(method, model, bag, &classes, settings, seed)?;
    let mut scores = Vec::with_capacity(classes.len());
    for &c in &classes {
        let row = attributions
            .row(c)
            .ok_or_else(|| Error::contract(format!("{method} produced no row for class {c}")))?;
        let score = match cfg.metric {
            Metric::Ndcg => match ndcg_at_n(row, &relevance_view(bag, rule, c)?, cfg.ndcg_n) {
                Err(Error::MetricUnavailable(_)) => {
                    skipped += 1;
                    continue;
                }
                other => other?,
            },
            Metric::AopcR => {
                let ordering = argsort_descending(row)?;
                // a stream separate from the method's sampler
                let stream = seed.rotate_left(17) ^ 0xa0c_0a0c;
                aopc_r_depth(model, bag, &ordering, c, cfg.aopc_orderings, stream, cfg.aopc_depth)?
            }
        };
        scores.push(ClassScore { bag_id, class: c, score });
    }
    Ok((scores, skipped))
}

/// NDCG needs a supporting instance; classes without one are skipped.
fn has_support(bag: &Bag, rule: &ClassRule, class: usize) -> bool {
    bag.tags().is_some_and(|t| t.iter().any(|&tag| rule.relevance(tag, class) == Relevance::Supporting))
}

/// Applies `method` to every bag (in parallel) and aggregates scores.
///
/// With the default NDCG cut-off, classes without a supporting instance in a
/// bag are not scored. Bags too large for the sample budget are skipped with a
/// warning. Both are counted in `skipped`.
pub fn evaluate_method<M: MilModel + ?Sized>(
    model: &M,
    bags: &[Bag],
    ids: &[u64],
    rule: &ClassRule,
    method: Method,
    settings: &MethodSettings,
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    if bags.len() != ids.len() {
        return Err(Error::contract("one id per bag required"));
    }
    if bags.is_empty() {
        return Err(Error::MetricUnavailable("no bags to evaluate".into()));
    }
    let per: Vec<(Vec<ClassScore>, usize)> = bags
        .par_iter()
        .zip(ids.par_iter())
        .map(|(bag, &id)| {
            match score_bag(model, bag, id, rule, method, settings, cfg) {
                Err(e @ Error::Budget { .. }) => {
                    warn!("skipping bag {id}: {e}");
                    Ok((Vec::new(), cfg.policy.classes(bag, model.num_classes()).len()))
                }
                other => other,
            }
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::new();
    let mut per_bag = Vec::new();
    let mut skipped = 0;
    for (s, skip) in per {
        skipped += skip;
        if !s.is_empty() {
            let m = s.iter().map(|c| c.score).sum::<f64>() / s.len() as f64;
            per_bag.push((s[0].bag_id, m));
        }
        scores.extend(s);
    }
    if per_bag.is_empty() {
        return Err(Error::MetricUnavailable(format!(
            "no bag has a defined {} score",
            cfg.metric.name()
        )));
    }
    let values: Vec<f64> = per_bag.iter().map(|p| p.1).collect();
    let (mean, sem) = mean_sem(&values);
    Ok(EvalResult {
        method,
        metric: cfg.metric,
        scores,
        per_bag,
        mean,
        sem,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bag::InstanceTag;
    use crate::classifier::FnClassifier;
    use proptest::prelude::*;
    use Relevance::*;

    #[test]
    fn ndcg_fixtures() {
        assert_eq!(ndcg_at_n(&[0.9, 0.8, 0.1], &[Supporting, Supporting, Neutral], Some(2)).unwrap(), 1.0);
        assert_eq!(ndcg_at_n(&[0.9, 0.8], &[Neutral, Supporting], Some(1)).unwrap(), 0.0);
        let v = ndcg_at_n(&[0.9, 0.5, 0.1], &[Refuting, Supporting, Neutral], Some(2)).unwrap();
        let hand = (-1.0 + 1.0 / 3f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((v - hand).abs() < 1e-12);
        assert!((v + 0.2263).abs() < 1e-4);
    }

    #[test]
    fn ndcg_ignores_unlabeled_and_checks_n() {
        // the unlabeled top instance is dropped before ranking
        let rel = [Unlabeled, Supporting, Neutral];
        assert_eq!(ndcg_at_n(&[1.0, 0.5, 0.1], &rel, None).unwrap(), 1.0);
        assert!(matches!(ndcg_at_n(&[1.0, 0.5, 0.1], &rel, Some(0)), Err(Error::MetricUnavailable(_))));
        assert!(matches!(ndcg_at_n(&[1.0, 0.5, 0.1], &rel, Some(3)), Err(Error::MetricUnavailable(_))));
        assert!(ndcg_at_n(&[1.0], &[Unlabeled], None).is_err());
        assert_eq!(default_ndcg_n(&[Neutral, Refuting]).unwrap(), 1);
        assert_eq!(default_ndcg_n(&[Supporting, Supporting, Unlabeled]).unwrap(), 2);
    }

    fn presence() -> FnClassifier<impl Fn(&Bag) -> Vec<f64> + Send + Sync> {
        let eps = 0.01;
        FnClassifier::new(2, move |b: &Bag| {
            if b.instances().any(|x| x[0] > 0.5) {
                vec![eps, 1.0 - eps]
            } else {
                vec![1.0 - eps, eps]
            }
        })
    }

    fn key_bag() -> Bag {
        Bag::new(vec![vec![1.0], vec![0.0], vec![0.0], vec![0.0]], 1)
            .unwrap()
            .with_tags(vec![InstanceTag::Key(1), InstanceTag::Neutral, InstanceTag::Neutral, InstanceTag::Neutral])
            .unwrap()
    }

    #[test]
    fn aopc_examples() {
        let f = presence();
        let b = key_bag();
        let drop = 0.99 - 0.01;
        let ideal = aopc(&f, &b, &[0, 1, 2, 3], 1, None).unwrap();
        assert!((ideal - drop).abs() < 1e-12);
        let reversed = aopc(&f, &b, &[3, 2, 1, 0], 1, None).unwrap();
        assert_eq!(reversed, 0.0);
        assert!(ideal >= reversed);
        assert!(aopc_r(&f, &b, &[0, 1, 2, 3], 1, 10, 3).unwrap() > 0.0);

        let constant = FnClassifier::new(2, |_: &Bag| vec![0.4, 0.6]);
        assert_eq!(aopc(&constant, &b, &[2, 0, 1, 3], 1, None).unwrap(), 0.0);
        assert_eq!(aopc_r(&constant, &b, &[2, 0, 1, 3], 0, 10, 1).unwrap(), 0.0);

        let single = Bag::new(vec![vec![1.0]], 1).unwrap();
        assert!(matches!(aopc(&f, &single, &[0], 1, None), Err(Error::MethodInapplicable(_))));
        assert!(aopc(&f, &b, &[0, 0, 1, 2], 1, None).is_err());
    }

    #[test]
    fn aopc_depth_truncates() {
        let f = presence();
        let b = key_bag();
        assert!((aopc(&f, &b, &[0, 1, 2, 3], 1, Some(1)).unwrap() - 0.98).abs() < 1e-12);
        assert_eq!(aopc(&f, &b, &[1, 0, 2, 3], 1, Some(1)).unwrap(), 0.0);
    }

    #[test]
    fn class_policies() {
        let b = key_bag();
        assert_eq!(ClassPolicy::AllClasses.classes(&b, 3), vec![0, 1, 2]);
        assert_eq!(ClassPolicy::TrueAndNegative.classes(&b, 3), vec![0, 1]);
        let neg = Bag::new(vec![vec![0.0]], 0).unwrap();
        assert_eq!(ClassPolicy::TrueAndNegative.classes(&neg, 3), vec![0]);
    }

    #[test]
    fn mean_sem_conventions() {
        assert_eq!(mean_sem(&[0.7]), (0.7, 0.0));
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ndcg_is_order_only(
            values in prop::collection::vec(-5.0f64..5.0, 1..20),
            gains in prop::collection::vec(0usize..4, 20),
            scale in 0.1f64..10.0,
            shift in -3.0f64..3.0,
        ) {
            let rel: Vec<Relevance> = values
                .iter()
                .zip(&gains)
                .map(|(_, g)| [Supporting, Neutral, Refuting, Unlabeled][*g])
                .collect();
            prop_assume!(rel.iter().any(|r| r.gain().is_some()));
            let a = ndcg_at_n(&values, &rel, None).unwrap();
            let moved: Vec<f64> = values.iter().map(|v| (v * scale + shift).exp()).collect();
            let b = ndcg_at_n(&moved, &rel, None).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }
}

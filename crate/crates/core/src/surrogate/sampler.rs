//! Coalition sampling.
//!
//! Every sample starts with the full coalition. Without repeats the remaining
//! rows are distinct; when the bag has fewer distinct non-empty coalitions than
//! the budget, or random draws stop finding new ones, sampling falls back to
//! repeats and logs a warning.

use std::collections::HashSet;

use itertools::Itertools;
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{coin_probabilities, KernelSpec, Ranking};
use crate::bag::Coalition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Every instance included with probability 1/2.
    EqualRandom,
    /// Enumeration in non-increasing kernel weight. A size class that the
    /// budget covers only in part is filled by a seeded uniform draw.
    Guided,
    /// Instance `i` included with probability `π_r(r_i)`.
    RankedBernoulli { ranking: Ranking, alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub strategy: Strategy,
    pub n: usize,
    pub allow_repeats: bool,
    pub seed: u64,
}

/// Smallest budget that can determine `k + 1` coefficients with one spare row.
pub fn min_budget(k: usize) -> usize {
    k + 2
}

/// Draws `spec.n` non-empty coalitions over `k` instances; row 0 is the full bag.
pub fn sample_coalitions(spec: &SamplerSpec, kernel: &KernelSpec, k: usize) -> Result<Vec<Coalition>> {
    if k == 0 {
        return Err(Error::contract("cannot sample coalitions of an empty bag"));
    }
    if spec.n < min_budget(k) {
        return Err(Error::Budget {
            n: spec.n,
            k,
            min: min_budget(k),
        });
    }
    match &spec.strategy {
        Strategy::Guided => guided(kernel, k, spec.n, spec.seed),
        Strategy::EqualRandom => random(spec, &vec![0.5; k]),
        Strategy::RankedBernoulli { ranking, alpha, beta } => {
            if ranking.len() != k {
                return Err(Error::contract("ranking length differs from bag size"));
            }
            random(spec, &coin_probabilities(ranking, *alpha, *beta)?)
        }
    }
}

fn distinct_pool(k: usize) -> Option<usize> {
    (k < usize::BITS as usize - 1).then(|| (1usize << k) - 1)
}

/// One coin toss per instance; may be empty.
pub fn coin_toss<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> Coalition {
    let mut z = Coalition::empty(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if rng.random::<f64>() < p {
            z.insert(i);
        }
    }
    z
}

fn random(spec: &SamplerSpec, probs: &[f64]) -> Result<Vec<Coalition>> {
    let k = probs.len();
    if probs.iter().all(|&p| p <= 0.0) {
        return Err(Error::Parameter("all inclusion probabilities are zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let full = Coalition::full(k);
    let mut out = vec![full.clone()];
    let mut seen: HashSet<Coalition> = HashSet::from([full]);

    let mut repeats = spec.allow_repeats;
    let pool = distinct_pool(k);
    // consecutive draws without a new coalition before giving up on distinctness
    let patience = 1000 * spec.n.max(k);
    let mut misses = 0;
    while out.len() < spec.n {
        let z = coin_toss(&mut rng, probs);
        if z.size() == 0 {
            continue;
        }
        if !repeats && pool == Some(seen.len()) {
            warn!(
                "all {} distinct coalitions for k = {k} drawn; filling {} rows with repeats",
                seen.len(),
                spec.n
            );
            repeats = true;
        }
        if repeats {
            out.push(z);
        } else if seen.insert(z.clone()) {
            out.push(z);
            misses = 0;
        } else {
            misses += 1;
            if misses >= patience {
                warn!("coalition draws keep repeating after {} distinct; allowing repeats", out.len());
                repeats = true;
            }
        }
    }
    Ok(out)
}

fn binomial(n: usize, r: usize) -> Option<usize> {
    (0..r).try_fold(1usize, |acc, i| acc.checked_mul(n - i).map(|v| v / (i + 1)))
}

/// Every coalition of the given sizes, alternating between sizes, each size in
/// lexicographic order.
fn interleave(out: &mut Vec<Coalition>, sizes: &[usize], k: usize) {
    let mut iters: Vec<_> = sizes.iter().map(|&s| (0..k).combinations(s)).collect();
    loop {
        let mut progressed = false;
        for it in iters.iter_mut() {
            if let Some(idx) = it.next() {
                out.push(Coalition::from_indices(k, idx));
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
}

/// `count` distinct coalitions drawn uniformly from a size class too large to
/// enumerate within the budget, alternating between its sizes.
fn random_of_sizes(out: &mut Vec<Coalition>, sizes: &[usize], k: usize, count: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a1d_ed00);
    let mut seen = HashSet::new();
    let mut turn = 0;
    while seen.len() < count {
        let s = sizes[turn % sizes.len()];
        let idx = rand::seq::index::sample(&mut rng, k, s);
        let z = Coalition::from_indices(k, idx.iter());
        if seen.insert(z.clone()) {
            out.push(z);
            turn += 1;
        }
    }
}

/// Coalition sizes in guided order, excluding the full bag.
fn guided_sizes(kernel: &KernelSpec, k: usize) -> Result<Vec<Vec<usize>>> {
    match kernel {
        // pairs of equal-weight sizes, interleaved one coalition at a time
        KernelSpec::Shap => Ok((1..=k / 2)
            .map(|s| if s == k - s { vec![s] } else { vec![s, k - s] })
            .collect()),
        KernelSpec::Lime { .. } => Ok((1..k).rev().map(|s| vec![s]).collect()),
        KernelSpec::Milli { .. } => Err(Error::Parameter(
            "guided sampling is defined for the lime and shap kernels only".into(),
        )),
    }
}

fn guided(kernel: &KernelSpec, k: usize, n: usize, seed: u64) -> Result<Vec<Coalition>> {
    let groups = guided_sizes(kernel, k)?;
    let mut out = vec![Coalition::full(k)];
    for sizes in &groups {
        let left = n - out.len();
        if left == 0 {
            break;
        }
        let total: Option<usize> = sizes.iter().map(|&s| binomial(k, s)).sum();
        if total.is_some_and(|t| t <= left) {
            interleave(&mut out, sizes, k);
        } else {
            random_of_sizes(&mut out, sizes, k, left, seed);
        }
    }
    if out.len() < n {
        warn!(
            "guided enumeration has only {} coalitions for k = {k}; repeating it to reach {n}",
            out.len()
        );
        let cycle = out.clone();
        out.extend(cycle.into_iter().cycle().take(n - out.len()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(strategy: Strategy, n: usize, seed: u64) -> SamplerSpec {
        SamplerSpec {
            strategy,
            n,
            allow_repeats: false,
            seed,
        }
    }

    #[test]
    fn guided_shap_order() {
        let z = sample_coalitions(&spec(Strategy::Guided, 9, 0), &KernelSpec::Shap, 4).unwrap();
        let sizes: Vec<usize> = z.iter().map(Coalition::size).collect();
        assert_eq!(sizes, [4, 1, 3, 1, 3, 1, 3, 1, 3]);
        assert_eq!(z[1].to_string(), "1000");
        assert_eq!(z[2].to_string(), "1110");
        assert_eq!(z[3].to_string(), "0100");

        let more = sample_coalitions(&spec(Strategy::Guided, 15, 0), &KernelSpec::Shap, 4).unwrap();
        let sizes: Vec<usize> = more.iter().map(Coalition::size).collect();
        assert_eq!(sizes, [4, 1, 3, 1, 3, 1, 3, 1, 3, 2, 2, 2, 2, 2, 2]);
        assert_eq!(more.iter().collect::<HashSet<_>>().len(), 15);
    }

    #[test]
    fn guided_partial_class_is_uniform_not_lexicographic() {
        let s = spec(Strategy::Guided, 201, 4);
        let z = sample_coalitions(&s, &KernelSpec::Shap, 30).unwrap();
        // full bag, 60 singletons and complements, then 140 of the 870 size-2/28 rows
        assert!(z[1..61].iter().all(|c| c.size() == 1 || c.size() == 29));
        assert_eq!(z[1].to_string().find('1'), Some(0));
        let rest = &z[61..];
        assert!(rest.iter().all(|c| c.size() == 2 || c.size() == 28));
        assert_eq!(rest.iter().collect::<HashSet<_>>().len(), 140);
        // lexicographic order would put instance 0 in 29 of the 70 pairs
        let pairs: Vec<&Coalition> = rest.iter().filter(|c| c.size() == 2).collect();
        assert_eq!(pairs.len(), 70);
        let max_share = (0..30).map(|i| pairs.iter().filter(|c| c.contains(i)).count()).max().unwrap();
        assert!(max_share < 15, "instance in {max_share} pairs");
        assert_eq!(z, sample_coalitions(&s, &KernelSpec::Shap, 30).unwrap());
        assert_ne!(z, sample_coalitions(&SamplerSpec { seed: 5, ..s }, &KernelSpec::Shap, 30).unwrap());
    }

    #[test]
    fn guided_lime_order() {
        let z = sample_coalitions(&spec(Strategy::Guided, 8, 0), &KernelSpec::lime(), 4).unwrap();
        let sizes: Vec<usize> = z.iter().map(Coalition::size).collect();
        assert_eq!(sizes, [4, 3, 3, 3, 3, 2, 2, 2]);
        let w = |c: &Coalition| KernelSpec::lime().weight(c, None).unwrap();
        assert!(z.windows(2).all(|p| w(&p[0]) >= w(&p[1])));
    }

    #[test]
    fn guided_milli_is_rejected() {
        let k = KernelSpec::Milli { alpha: 0.1, beta: 0.0 };
        assert!(matches!(
            sample_coalitions(&spec(Strategy::Guided, 9, 0), &k, 4),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let r = sample_coalitions(&spec(Strategy::EqualRandom, 6, 0), &KernelSpec::Shap, 5);
        assert!(matches!(r, Err(Error::Budget { n: 6, k: 5, min: 7 })));
    }

    #[test]
    fn random_rows_are_distinct_and_nonempty() {
        let z = sample_coalitions(&spec(Strategy::EqualRandom, 200, 3), &KernelSpec::Shap, 12).unwrap();
        assert_eq!(z.len(), 200);
        assert_eq!(z[0], Coalition::full(12));
        assert!(z.iter().all(|c| c.size() > 0));
        assert_eq!(z.iter().collect::<HashSet<_>>().len(), 200);
    }

    #[test]
    fn exhausted_pool_falls_back_to_repeats() {
        let z = sample_coalitions(&spec(Strategy::EqualRandom, 20, 3), &KernelSpec::Shap, 3).unwrap();
        assert_eq!(z.len(), 20);
        assert_eq!(z.iter().collect::<HashSet<_>>().len(), 7);
        let g = sample_coalitions(&spec(Strategy::Guided, 10, 0), &KernelSpec::Shap, 3).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[7], Coalition::full(3));
    }

    #[test]
    fn seeded_determinism() {
        let s = spec(Strategy::EqualRandom, 50, 99);
        assert_eq!(
            sample_coalitions(&s, &KernelSpec::Shap, 10).unwrap(),
            sample_coalitions(&s, &KernelSpec::Shap, 10).unwrap()
        );
        let other = SamplerSpec { seed: 100, ..s.clone() };
        assert_ne!(
            sample_coalitions(&s, &KernelSpec::Shap, 10).unwrap(),
            sample_coalitions(&other, &KernelSpec::Shap, 10).unwrap()
        );
    }

    #[test]
    fn equal_random_mean_size() {
        let s = SamplerSpec {
            allow_repeats: true,
            ..spec(Strategy::EqualRandom, 1000, 5)
        };
        let z = sample_coalitions(&s, &KernelSpec::Shap, 20).unwrap();
        let sizes: Vec<f64> = z[1..].iter().map(|c| c.size() as f64).collect();
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let se = (20.0f64 * 0.25 / sizes.len() as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn crc_setting_gives_tiny_coalitions() {
        let k = 264;
        let s = SamplerSpec {
            allow_repeats: true,
            ..spec(
                Strategy::RankedBernoulli {
                    ranking: Ranking::identity(k),
                    alpha: 0.008,
                    beta: -5.0,
                },
                2000,
                1,
            )
        };
        let z = sample_coalitions(&s, &KernelSpec::Shap, k).unwrap();
        let mean = z[1..].iter().map(|c| c.size() as f64).sum::<f64>() / (z.len() - 1) as f64;
        assert!((1.5..3.0).contains(&mean), "{mean}");
    }
}

//! Surrogate explanation pipelines: MILLI, LIME and SHAP.

use serde::{Deserialize, Serialize};

use super::fit::{fit_classes, kernel_weights, SurrogateFit};
use super::kernel::{check_alpha_beta, KernelSpec, Ranking};
use super::sampler::{sample_coalitions, SamplerSpec, Strategy};
use crate::attribution::AttributionMatrix;
use crate::bag::{Bag, Coalition};
use crate::cache::{check_classes, CoalitionCache};
use crate::classifier::{BagClassifier, ClassDistribution};
use crate::error::Result;

/// Output of one surrogate explanation call.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateExplanation {
    pub attributions: AttributionMatrix,
    pub fits: Vec<SurrogateFit>,
    /// Distinct sub-bags the classifier was evaluated on.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MilliParams {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

impl Default for MilliParams {
    fn default() -> Self {
        MilliParams {
            alpha: 0.05,
            beta: 0.01,
            n: 150,
        }
    }
}

impl MilliParams {
    /// Settings for datasets whose instances act independently.
    pub fn independent() -> Self {
        MilliParams {
            alpha: 0.05,
            beta: -0.01,
            n: 200,
        }
    }
}

fn rank_with_cache<F: BagClassifier + ?Sized>(cache: &mut CoalitionCache<'_, F>) -> Result<Ranking> {
    let k = cache.bag().len();
    let full = cache.eval(&Coalition::full(k))?.to_vec();
    let c = ClassDistribution::new(full)?.argmax();
    let mut scores = Vec::with_capacity(k);
    for i in 0..k {
        scores.push(cache.eval(&Coalition::singleton(k, i))?[c]);
    }
    Ranking::from_scores(&scores)
}

/// Ranks instances by their Single attribution for the predicted class of the
/// full bag.
pub fn rank_by_single<F: BagClassifier + ?Sized>(f: &F, bag: &Bag) -> Result<Ranking> {
    rank_with_cache(&mut CoalitionCache::new(f, bag))
}

/// Samples once, evaluates each distinct coalition once and fits one surrogate
/// per requested class.
pub fn explain_surrogate<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    classes: &[usize],
    method: &str,
    kernel: &KernelSpec,
    sampler: &SamplerSpec,
    ranking: Option<&Ranking>,
) -> Result<SurrogateExplanation> {
    let mut cache = CoalitionCache::new(f, bag);
    explain_with_cache(&mut cache, f.num_classes(), classes, method, kernel, sampler, ranking)
}

fn explain_with_cache<F: BagClassifier + ?Sized>(
    cache: &mut CoalitionCache<'_, F>,
    num_classes: usize,
    classes: &[usize],
    method: &str,
    kernel: &KernelSpec,
    sampler: &SamplerSpec,
    ranking: Option<&Ranking>,
) -> Result<SurrogateExplanation> {
    check_classes(classes, num_classes)?;
    let k = cache.bag().len();
    let coalitions = sample_coalitions(sampler, kernel, k)?;
    let weights = kernel_weights(kernel, &coalitions, ranking)?;
    let fits = fit_classes(cache, classes, &coalitions, &weights)?;
    let mut attributions = AttributionMatrix::new(method, num_classes, k);
    for fit in &fits {
        attributions.set_row(fit.class, fit.phis.clone())?;
    }
    Ok(SurrogateExplanation {
        attributions,
        fits,
        evaluations: cache.evaluations(),
    })
}

/// MILLI: ranked coin-toss sampling and the rank-weighted kernel, with the
/// ranking taken from Single.
pub fn milli_explain<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    classes: &[usize],
    params: &MilliParams,
    seed: u64,
) -> Result<SurrogateExplanation> {
    check_alpha_beta(params.alpha, params.beta)?;
    check_classes(classes, f.num_classes())?;
    let mut cache = CoalitionCache::new(f, bag);
    let ranking = rank_with_cache(&mut cache)?;
    let sampler = SamplerSpec {
        strategy: Strategy::RankedBernoulli {
            ranking: ranking.clone(),
            alpha: params.alpha,
            beta: params.beta,
        },
        n: params.n,
        allow_repeats: false,
        seed,
    };
    let kernel = KernelSpec::Milli {
        alpha: params.alpha,
        beta: params.beta,
    };
    explain_with_cache(&mut cache, f.num_classes(), classes, "milli", &kernel, &sampler, Some(&ranking))
}

fn strategy(guided: bool) -> Strategy {
    if guided {
        Strategy::Guided
    } else {
        Strategy::EqualRandom
    }
}

/// LIME with the default half-coalition width.
pub fn lime_explain<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    classes: &[usize],
    guided: bool,
    n: usize,
    seed: u64,
) -> Result<SurrogateExplanation> {
    let sampler = SamplerSpec {
        strategy: strategy(guided),
        n,
        allow_repeats: false,
        seed,
    };
    let name = if guided { "guided-lime" } else { "random-lime" };
    explain_surrogate(f, bag, classes, name, &KernelSpec::lime(), &sampler, None)
}

/// Kernel SHAP with the full coalition pinned by a large weight.
pub fn shap_explain<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    classes: &[usize],
    guided: bool,
    n: usize,
    seed: u64,
) -> Result<SurrogateExplanation> {
    let sampler = SamplerSpec {
        strategy: strategy(guided),
        n,
        allow_repeats: false,
        seed,
    };
    let name = if guided { "guided-shap" } else { "random-shap" };
    explain_surrogate(f, bag, classes, name, &KernelSpec::Shap, &sampler, None)
}

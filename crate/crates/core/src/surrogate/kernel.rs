//! Coalition weight kernels and the MILLI rank curve.

use serde::{Deserialize, Serialize};

use crate::attribution::{argsort_descending, ranks_from_order};
use crate::bag::{is_permutation, Coalition};
use crate::error::{Error, Result};

/// Weight given to the full coalition under the Shapley kernel, whose true
/// value there is infinite.
pub const SHAP_FULL_WEIGHT: f64 = 1e6;

/// Instance ranking: `rank(i)` is the position of instance `i`, 0 being the most
/// important.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if !is_permutation(&ranks, ranks.len()) {
            return Err(Error::contract(format!("ranks {ranks:?} are not a permutation")));
        }
        Ok(Ranking(ranks))
    }

    pub fn identity(k: usize) -> Self {
        Ranking((0..k).collect())
    }

    /// Ranks instances by descending score, ties by index.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        Ok(Ranking(ranks_from_order(&argsort_descending(scores)?)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rank(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }
}

/// Weighting kernel of a surrogate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum KernelSpec {
    /// `exp(-(k - |z|) / σ²)`; `width` is σ, defaulting to [`default_lime_width`].
    Lime { width: Option<f64> },
    Shap,
    Milli { alpha: f64, beta: f64 },
}

impl KernelSpec {
    pub fn lime() -> Self {
        KernelSpec::Lime { width: None }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Lime { width: Some(w) } if !(w > 0.0 && w.is_finite()) => {
                Err(Error::Parameter(format!("lime width {w} must be positive")))
            }
            KernelSpec::Milli { alpha, beta } => check_alpha_beta(alpha, beta),
            _ => Ok(()),
        }
    }

    /// Weight of coalition `z`. The MILLI kernel needs the instance ranking.
    pub fn weight(&self, z: &Coalition, ranking: Option<&Ranking>) -> Result<f64> {
        match *self {
            KernelSpec::Lime { width } => {
                nonempty(z)?;
                Ok(lime_kernel(z, width.unwrap_or_else(|| default_lime_width(z.len()))))
            }
            KernelSpec::Shap => shap_kernel(z),
            KernelSpec::Milli { alpha, beta } => {
                let ranking = ranking
                    .ok_or_else(|| Error::contract("the milli kernel needs an instance ranking"))?;
                milli_kernel(z, ranking, alpha, beta)
            }
        }
    }
}

fn nonempty(z: &Coalition) -> Result<()> {
    if z.size() == 0 {
        Err(Error::EmptyCoalition)
    } else {
        Ok(())
    }
}

pub(crate) fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha {alpha} outside [0, 1]")));
    }
    if !beta.is_finite() {
        return Err(Error::Parameter(format!("beta {beta} is not finite")));
    }
    Ok(())
}

/// `β̂ = β` when `α < 0.5`, otherwise `-β`.
pub fn beta_hat(alpha: f64, beta: f64) -> f64 {
    if alpha < 0.5 {
        beta
    } else {
        -beta
    }
}

/// Rank curve `π_r`: the inclusion probability / weight of an instance at `rank`.
pub fn pi_r(rank: usize, k: usize, alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if k == 0 || rank > k {
        return Err(Error::Parameter(format!("rank {rank} outside [0, {k}]")));
    }
    let (r, kf) = (rank as f64, k as f64);
    let bh = beta_hat(alpha, beta);
    let v = if bh >= 0.0 {
        (2.0 * alpha - 1.0) * (1.0 - r / kf) * (-bh * r).exp() + 1.0 - alpha
    } else {
        (1.0 - 2.0 * alpha) * (1.0 + (r - kf) / kf) * (bh.abs() * (r - kf)).exp() + alpha
    };
    Ok(v)
}

/// Inclusion probability of every instance under the ranked coin toss.
pub fn coin_probabilities(ranking: &Ranking, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    let k = ranking.len();
    ranking.ranks().iter().map(|&r| pi_r(r, k, alpha, beta)).collect()
}

/// MILLI kernel: mean of `π_r(r_i)` over the instances in `z`.
pub fn milli_kernel(z: &Coalition, ranking: &Ranking, alpha: f64, beta: f64) -> Result<f64> {
    nonempty(z)?;
    if z.len() != ranking.len() {
        return Err(Error::contract("coalition and ranking lengths differ"));
    }
    let k = z.len();
    let mut total = 0.0;
    for i in z.ones() {
        total += pi_r(ranking.rank(i), k, alpha, beta)?;
    }
    Ok(total / z.size() as f64)
}

/// Width σ at which a coalition holding half the bag gets weight 0.5:
/// `σ² = (k/2) / ln 2`.
pub fn default_lime_width(k: usize) -> f64 {
    ((k as f64 / 2.0) / std::f64::consts::LN_2).sqrt()
}

/// `exp(-d²/σ²)` with `d² = k - |z|`, the squared l2 distance of the mask from
/// the all-ones mask.
pub fn lime_kernel(z: &Coalition, width: f64) -> f64 {
    let d2 = (z.len() - z.size()) as f64;
    (-d2 / (width * width)).exp()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel `(k-1) / (C(k,s) s (k-s))`; the full coalition gets
/// [`SHAP_FULL_WEIGHT`].
pub fn shap_kernel(z: &Coalition) -> Result<f64> {
    let (k, s) = (z.len(), z.size());
    if s == 0 {
        return Err(Error::EmptyCoalition);
    }
    if s == k {
        return Ok(SHAP_FULL_WEIGHT);
    }
    Ok((k - 1) as f64 / (binomial(k, s) * s as f64 * (k - s) as f64))
}

/// Expected coalition size `∫₀ᵏ π_r(r) dr` under the ranked coin toss.
pub fn expected_coalition_size(k: usize, alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    let kf = k as f64;
    if beta.abs() < 1e-9 {
        return Ok(kf / 2.0);
    }
    let bh = beta_hat(alpha, beta);
    let b = bh.abs();
    let shape = ((-b * kf).exp() + b * kf - 1.0) / (kf * b * b);
    Ok(if bh >= 0.0 {
        (2.0 * alpha - 1.0) * shape + kf * (1.0 - alpha)
    } else {
        (1.0 - 2.0 * alpha) * shape + kf * alpha
    })
}

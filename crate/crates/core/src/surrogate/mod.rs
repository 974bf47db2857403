//! Local linear surrogates over coalitions of instances.
//!
//! A coalition `z ∈ {0,1}^k` selects a sub-bag. The surrogate
//! `g_c(z) = φ₀ + Σ φ_i z_i` is fitted to `F_c` on sampled coalitions by weighted
//! least squares, and the slopes `φ_i` are the attributions. The kernel decides
//! how much each coalition counts; the sampler decides which coalitions are seen.

mod explain;
mod fit;
mod kernel;
mod sampler;

pub use explain::{
    explain_surrogate, lime_explain, milli_explain, rank_by_single, shap_explain, MilliParams,
    SurrogateExplanation,
};
pub use fit::{fit_surrogate, SurrogateFit, RIDGE};
pub use kernel::{
    beta_hat, coin_probabilities, default_lime_width, expected_coalition_size, lime_kernel,
    milli_kernel, pi_r, shap_kernel, KernelSpec, Ranking, SHAP_FULL_WEIGHT,
};
pub use sampler::{coin_toss, min_budget, sample_coalitions, SamplerSpec, Strategy};

#[cfg(test)]
mod tests;

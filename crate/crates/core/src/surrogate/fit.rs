//! Weighted least-squares surrogate `g_c(z) = φ₀ + Σ φ_i z_i`.

use nalgebra::{DMatrix, DVector};

use super::kernel::{KernelSpec, Ranking};
use crate::bag::{Bag, Coalition};
use crate::cache::{check_classes, CoalitionCache};
use crate::classifier::BagClassifier;
use crate::error::{Error, Result};

/// Ridge added to the slope block of the normal equations.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFit {
    pub class: usize,
    pub phi0: f64,
    pub phis: Vec<f64>,
    /// Weighted squared error of the fit over the sample.
    pub residual_loss: f64,
    /// Number of sampled rows (repeats included).
    pub coalition_count: usize,
}

impl SurrogateFit {
    /// Surrogate output on coalition `z`.
    pub fn predict(&self, z: &Coalition) -> f64 {
        self.phi0 + z.ones().map(|i| self.phis[i]).sum::<f64>()
    }
}

/// Fits one surrogate for class `class` of `f` around `bag`.
pub fn fit_surrogate<F: BagClassifier + ?Sized>(
    f: &F,
    bag: &Bag,
    class: usize,
    coalitions: &[Coalition],
    kernel: &KernelSpec,
    ranking: Option<&Ranking>,
) -> Result<SurrogateFit> {
    check_classes(&[class], f.num_classes())?;
    let mut cache = CoalitionCache::new(f, bag);
    let weights = kernel_weights(kernel, coalitions, ranking)?;
    let mut fits = fit_classes(&mut cache, &[class], coalitions, &weights)?;
    Ok(fits.remove(0))
}

pub(crate) fn kernel_weights(
    kernel: &KernelSpec,
    coalitions: &[Coalition],
    ranking: Option<&Ranking>,
) -> Result<Vec<f64>> {
    kernel.validate()?;
    coalitions
        .iter()
        .map(|z| {
            let w = kernel.weight(z, ranking)?;
            if w.is_finite() && w >= 0.0 {
                Ok(w)
            } else {
                Err(Error::DegenerateSample(format!("kernel weight {w} for {z}")))
            }
        })
        .collect()
}

/// Solves the weighted normal equations once and fits every class in
/// `classes` against the same sample.
pub(crate) fn fit_classes<F: BagClassifier + ?Sized>(
    cache: &mut CoalitionCache<'_, F>,
    classes: &[usize],
    coalitions: &[Coalition],
    weights: &[f64],
) -> Result<Vec<SurrogateFit>> {
    let k = cache.bag().len();
    if coalitions.iter().any(|z| z.len() != k) {
        return Err(Error::contract("coalition length differs from bag size"));
    }
    if coalitions.len() < k + 2 {
        return Err(Error::Budget {
            n: coalitions.len(),
            k,
            min: k + 2,
        });
    }
    if coalitions.iter().all(|z| *z == coalitions[0]) {
        return Err(Error::DegenerateSample(
            "every sampled coalition is identical".into(),
        ));
    }

    let p = k + 1;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DMatrix::<f64>::zeros(p, classes.len());
    let mut outputs = Vec::with_capacity(coalitions.len());
    for (z, &w) in coalitions.iter().zip(weights) {
        let probs = cache.eval(z)?;
        let y: Vec<f64> = classes.iter().map(|&c| probs[c]).collect();
        // design row is (1, z_1, .., z_k); only its ones contribute
        let ones: Vec<usize> = std::iter::once(0).chain(z.ones().map(|i| i + 1)).collect();
        for &a in &ones {
            for &b in &ones {
                gram[(a, b)] += w;
            }
            for (j, yc) in y.iter().enumerate() {
                rhs[(a, j)] += w * yc;
            }
        }
        outputs.push(y);
    }
    for i in 1..p {
        gram[(i, i)] += RIDGE;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::DegenerateSample("normal equations are not positive definite".into()))?;
    let coef = chol.solve(&rhs);

    let mut fits = Vec::with_capacity(classes.len());
    for (j, &class) in classes.iter().enumerate() {
        let beta: DVector<f64> = coef.column(j).into_owned();
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite surrogate coefficients".into()));
        }
        let fit = SurrogateFit {
            class,
            phi0: beta[0],
            phis: beta.iter().skip(1).copied().collect(),
            residual_loss: 0.0,
            coalition_count: coalitions.len(),
        };
        let residual_loss = coalitions
            .iter()
            .zip(weights)
            .zip(&outputs)
            .map(|((z, w), y)| {
                let r = y[j] - fit.predict(z);
                w * r * r
            })
            .sum();
        fits.push(SurrogateFit { residual_loss, ..fit });
    }
    Ok(fits)
}

//! The nine attribution method families behind one dispatch.

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionMatrix;
use crate::bag::Bag;
use crate::classifier::BagClassifier;
use crate::error::{Error, Result};
use crate::models::MilModel;
use crate::pointwise::{combined, one_removed, single};
use crate::surrogate::{
    lime_explain, milli_explain, shap_explain, MilliParams, SurrogateExplanation, SurrogateFit,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Inherent,
    Single,
    OneRemoved,
    Combined,
    RandomLime,
    GuidedLime,
    RandomShap,
    GuidedShap,
    Milli,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Inherent,
        Method::Single,
        Method::OneRemoved,
        Method::Combined,
        Method::RandomLime,
        Method::GuidedLime,
        Method::RandomShap,
        Method::GuidedShap,
        Method::Milli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Inherent => "inherent",
            Method::Single => "single",
            Method::OneRemoved => "one-removed",
            Method::Combined => "combined",
            Method::RandomLime => "random-lime",
            Method::GuidedLime => "guided-lime",
            Method::RandomShap => "random-shap",
            Method::GuidedShap => "guided-shap",
            Method::Milli => "milli",
        }
    }

    /// Whether the method fits a surrogate on a sample of coalitions.
    pub fn is_surrogate(self) -> bool {
        matches!(
            self,
            Method::RandomLime | Method::GuidedLime | Method::RandomShap | Method::GuidedShap | Method::Milli
        )
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Sample budgets and MILLI parameters shared by the surrogate methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    /// Coalitions per LIME / SHAP explanation.
    pub sample_size: usize,
    pub milli: MilliParams,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            sample_size: 150,
            milli: MilliParams::default(),
        }
    }
}

impl MethodSettings {
    /// Uses `n` coalitions for every surrogate method.
    pub fn with_budget(mut self, n: usize) -> Self {
        self.sample_size = n;
        self.milli.n = n;
        self
    }

    pub fn with_milli(mut self, milli: MilliParams) -> Self {
        let n = self.milli.n;
        self.milli = MilliParams { n, ..milli };
        self
    }
}

/// Explains `bag` with a model-agnostic method, also returning the surrogate
/// fits of surrogate methods (empty otherwise). `Inherent` needs a model and is
/// refused here; see [`explain_detailed`].
pub fn explain_black_box_detailed<F: BagClassifier + ?Sized>(
    method: Method,
    f: &F,
    bag: &Bag,
    classes: &[usize],
    settings: &MethodSettings,
    seed: u64,
) -> Result<(AttributionMatrix, Vec<SurrogateFit>)> {
    let n = settings.sample_size;
    let plain = |m: Result<AttributionMatrix>| m.map(|m| (m, Vec::new()));
    let fitted = |e: Result<SurrogateExplanation>| e.map(|e| (e.attributions, e.fits));
    match method {
        Method::Inherent => Err(Error::MethodInapplicable(
            "inherent attributions need a model, not a black box".into(),
        )),
        Method::Single => plain(single(f, bag, classes)),
        Method::OneRemoved => plain(one_removed(f, bag, classes)),
        Method::Combined => plain(combined(f, bag, classes)),
        Method::RandomLime => fitted(lime_explain(f, bag, classes, false, n, seed)),
        Method::GuidedLime => fitted(lime_explain(f, bag, classes, true, n, seed)),
        Method::RandomShap => fitted(shap_explain(f, bag, classes, false, n, seed)),
        Method::GuidedShap => fitted(shap_explain(f, bag, classes, true, n, seed)),
        Method::Milli => fitted(milli_explain(f, bag, classes, &settings.milli, seed)),
    }
}

pub fn explain_black_box<F: BagClassifier + ?Sized>(
    method: Method,
    f: &F,
    bag: &Bag,
    classes: &[usize],
    settings: &MethodSettings,
    seed: u64,
) -> Result<AttributionMatrix> {
    Ok(explain_black_box_detailed(method, f, bag, classes, settings, seed)?.0)
}

/// Any method, reading inherent attributions from the model.
pub fn explain_detailed<M: MilModel + ?Sized>(
    method: Method,
    model: &M,
    bag: &Bag,
    classes: &[usize],
    settings: &MethodSettings,
    seed: u64,
) -> Result<(AttributionMatrix, Vec<SurrogateFit>)> {
    match method {
        Method::Inherent => Ok((model.inherent_attributions(bag)?, Vec::new())),
        other => explain_black_box_detailed(other, model, bag, classes, settings, seed),
    }
}

/// Explains `bag` with any method, reading inherent attributions from the model.
pub fn explain<M: MilModel + ?Sized>(
    method: Method,
    model: &M,
    bag: &Bag,
    classes: &[usize],
    settings: &MethodSettings,
    seed: u64,
) -> Result<AttributionMatrix> {
    Ok(explain_detailed(method, model, bag, classes, settings, seed)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lime".parse::<Method>().is_err());
        assert_eq!(Method::ALL.iter().filter(|m| m.is_surrogate()).count(), 5);
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::{
    generate_fourclass, generate_single_positive, generate_smil, Dataset, GeneratorConfig, Split,
};
use crate::error::{Error, Result};
use crate::methods::{Method, MethodSettings};
use crate::metrics::EvalConfig;
use crate::models::{ModelKind, TrainConfig};
use crate::surrogate::MilliParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Two interacting concepts, four classes.
    FourClass,
    /// Binary standard MIL with a target witness rate.
    Smil,
    /// Independent concepts, one per positive class.
    SinglePositive,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::FourClass => "four-class",
            DatasetKind::Smil => "smil",
            DatasetKind::SinglePositive => "single-positive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Target witness rate of the smil generator.
    pub witness_rate: f64,
    /// Positive classes of the single-positive generator.
    pub positive_classes: usize,
    pub generator: GeneratorConfig,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::FourClass,
            witness_rate: 0.15,
            positive_classes: 3,
            generator: GeneratorConfig::default(),
        }
    }
}

impl DatasetSpec {
    /// Generates the dataset with `seed` in place of the generator's own seed.
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        let cfg = GeneratorConfig {
            seed,
            ..self.generator.clone()
        };
        match self.kind {
            DatasetKind::FourClass => generate_fourclass(&cfg),
            DatasetKind::Smil => generate_smil(&cfg, self.witness_rate),
            DatasetKind::SinglePositive => generate_single_positive(&cfg, self.positive_classes),
        }
    }

    /// MILLI defaults: larger coalitions where instances interact, smaller
    /// ones where they act independently.
    pub fn default_settings(&self) -> MethodSettings {
        match self.kind {
            DatasetKind::FourClass => MethodSettings::default(),
            DatasetKind::Smil | DatasetKind::SinglePositive => {
                MethodSettings::default().with_budget(200).with_milli(MilliParams::independent())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub budgets: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            budgets: vec![50, 100, 150, 200, 300],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            alphas: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4],
            betas: vec![-1.0, -0.1, -0.01, 0.0, 0.01, 0.1, 1.0],
        }
    }
}

/// A full study: dataset, models, methods, metric and repeats.
///
/// Seeds inside the `dataset.generator`, `train` and `eval` sections are
/// replaced by per-repeat seeds derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub repeats: usize,
    pub split: Split,
    pub models: Vec<ModelKind>,
    pub methods: Vec<Method>,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Surrogate budgets and MILLI parameters; dataset defaults when absent.
    pub settings: Option<MethodSettings>,
    pub sweep: SweepConfig,
    pub tune: TuneConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 0,
            repeats: 10,
            split: Split::Test,
            models: vec![ModelKind::Oracle, ModelKind::Instance, ModelKind::Attention],
            methods: Method::ALL.to_vec(),
            dataset: DatasetSpec::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            settings: None,
            sweep: SweepConfig::default(),
            tune: TuneConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn method_settings(&self) -> MethodSettings {
        self.settings.unwrap_or_else(|| self.dataset.default_settings())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.models.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("at least one model and one method are required".into()));
        }
        if has_duplicates(&self.models) || has_duplicates(&self.methods) {
            return Err(Error::Config("models and methods must not repeat".into()));
        }
        if self.name.is_empty() || self.name.contains(['\t', '\n']) {
            return Err(Error::Config("name must be a non-empty single line".into()));
        }
        self.dataset.generator.validate()?;
        if self.dataset.kind == DatasetKind::Smil && !(0.0..=1.0).contains(&self.dataset.witness_rate) {
            return Err(Error::Config("witness_rate must lie in [0, 1]".into()));
        }
        if self.dataset.kind == DatasetKind::SinglePositive && self.dataset.positive_classes == 0 {
            return Err(Error::Config("positive_classes must be at least 1".into()));
        }
        self.train.validate()?;
        if self.eval.aopc_orderings == 0 {
            return Err(Error::Config("aopc_orderings must be at least 1".into()));
        }
        let s = self.method_settings();
        crate::surrogate::KernelSpec::Milli {
            alpha: s.milli.alpha,
            beta: s.milli.beta,
        }
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items.iter().enumerate().any(|(i, a)| items[..i].contains(a))
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a (repeat, stream, index) cell.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Seeds used in one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepeatSeeds {
    pub data: u64,
    pub eval: u64,
    train_base: u64,
}

impl RepeatSeeds {
    pub fn new(master: u64, repeat: usize) -> Self {
        RepeatSeeds {
            data: derive_seed(master, &[repeat as u64, 1]),
            eval: derive_seed(master, &[repeat as u64, 3]),
            train_base: derive_seed(master, &[repeat as u64, 2]),
        }
    }

    pub fn train(&self, kind: ModelKind) -> u64 {
        derive_seed(self.train_base, &[kind as u64])
    }
}

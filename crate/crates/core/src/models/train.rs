use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::Adam;
use super::{AttentionModel, InstanceModel, Model, Network, OracleModel, Pooling};
use crate::bag::Bag;
use crate::datasets::{Dataset, Split};
use crate::error::{Error, Result};

/// Which built-in model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Oracle,
    /// Instance-space network (per-instance predictions, pooled).
    Instance,
    /// Embedding network with attention pooling.
    Attention,
    /// Embedding network with uniform (mean) pooling; no inherent method.
    Embedding,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Oracle => "oracle",
            ModelKind::Instance => "instance",
            ModelKind::Attention => "attention",
            ModelKind::Embedding => "embedding",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(ModelKind::Oracle),
            "instance" => Ok(ModelKind::Instance),
            "attention" => Ok(ModelKind::Attention),
            "embedding" => Ok(ModelKind::Embedding),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub hidden: usize,
    pub attention_hidden: usize,
    pub pooling: Pooling,
    pub oracle_epsilon: f64,
    /// Extra attempts from fresh initialisations when a run stalls.
    pub restarts: usize,
    /// Validation accuracy below which a run counts as stalled.
    pub restart_below: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            hidden: 16,
            attention_hidden: 16,
            pooling: Pooling::MeanLogit,
            oracle_epsilon: super::DEFAULT_EPSILON,
            restarts: 2,
            restart_below: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.patience > self.max_epochs && self.max_epochs > 0 {
            return Err(Error::Config("patience must not exceed max_epochs".into()));
        }
        if !(0.0..=1.0).contains(&self.restart_below) {
            return Err(Error::Config("restart_below must lie in [0, 1]".into()));
        }
        if self.hidden == 0 || self.attention_hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (1-based; 0 means the initial parameters).
    pub best_epoch: usize,
    /// Attempt the kept parameters come from, 0 for the first.
    pub attempt: usize,
}

/// Builds and, for networks, trains a model on the dataset's train split with
/// per-bag Adam updates and early stopping on validation loss.
///
/// A run whose kept parameters reach less than `restart_below` validation
/// accuracy is retried from a fresh initialisation, up to `restarts` times.
/// The attempt with the lowest validation loss is returned.
pub fn train(kind: ModelKind, dataset: &Dataset, cfg: &TrainConfig) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    if kind == ModelKind::Oracle {
        let oracle = OracleModel::from_dataset(dataset, cfg.oracle_epsilon)?;
        return Ok((Model::Oracle(oracle), TrainLog::default()));
    }
    // without epochs every attempt is just an initialisation
    let restarts = if cfg.max_epochs == 0 { 0 } else { cfg.restarts };
    let mut best: Option<(f64, Model, TrainLog)> = None;
    for attempt in 0..=restarts {
        let seed = attempt_seed(cfg.seed, attempt);
        let (model, mut log) = train_once(kind, dataset, cfg, seed)?;
        log.attempt = attempt;
        let (val_loss, val_accuracy) = match &model {
            Model::Instance(m) => evaluate(m, dataset.split(Split::Val))?,
            Model::Attention(m) => evaluate(m, dataset.split(Split::Val))?,
            Model::Oracle(_) => unreachable!(),
        };
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, model, log));
        }
        if val_accuracy >= cfg.restart_below {
            break;
        }
        if attempt < restarts {
            warn!("{} training stalled at validation accuracy {val_accuracy:.3}; restarting", kind.name());
        }
    }
    let (_, model, log) = best.expect("at least one attempt");
    Ok((model, log))
}

fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    if attempt == 0 {
        seed
    } else {
        seed ^ (attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

fn train_once(kind: ModelKind, dataset: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<(Model, TrainLog)> {
    let (d, c) = (dataset.dim(), dataset.num_classes());
    let cfg = TrainConfig { seed, ..cfg.clone() };
    match kind {
        ModelKind::Oracle => unreachable!(),
        ModelKind::Instance => {
            let mut m = InstanceModel::new(d, cfg.hidden, c, cfg.pooling, seed);
            let log = fit(&mut m, dataset, &cfg)?;
            Ok((Model::Instance(m), log))
        }
        ModelKind::Attention | ModelKind::Embedding => {
            let attention = kind == ModelKind::Attention;
            let mut m = AttentionModel::new(d, cfg.hidden, cfg.attention_hidden, c, attention, seed);
            let log = fit(&mut m, dataset, &cfg)?;
            Ok((Model::Attention(m), log))
        }
    }
}

pub(super) fn evaluate<N: Network>(model: &N, bags: &[Bag]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for bag in bags {
        loss += model.loss(bag, bag.label());
        if model.predict(bag)?.argmax() == bag.label() {
            correct += 1;
        }
    }
    let n = bags.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

fn fit<N: Network>(model: &mut N, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainLog> {
    let mut log = TrainLog::default();
    if cfg.max_epochs == 0 {
        return Ok(log);
    }
    let train = dataset.split(Split::Train);
    let val = dataset.split(Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(
            "training needs non-empty train and val splits".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut opt = Adam::new(model.params().len(), cfg.learning_rate);
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..train.len()).collect();

    let (mut best_loss, _) = evaluate(model, val)?;
    let mut best_params = model.params().to_vec();
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for &i in &order {
            let bag = &train[i];
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.loss_and_grad(bag, bag.label(), &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    msg: format!("non-finite loss {loss} on training bag {i}"),
                });
            }
            train_loss += loss;
            opt.step(model.params_mut(), &grad);
        }
        let (_, train_accuracy) = evaluate(model, train)?;
        let (val_loss, val_accuracy) = evaluate(model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                msg: "non-finite validation loss".into(),
            });
        }
        let entry = EpochLog {
            epoch,
            train_loss: train_loss / train.len() as f64,
            train_accuracy,
            val_loss,
            val_accuracy,
        };
        debug!("{entry:?}");
        log.epochs.push(entry);

        if val_loss < best_loss {
            best_loss = val_loss;
            best_params.copy_from_slice(model.params());
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best_params);
    Ok(log)
}

/// Compares analytic loss gradients with central finite differences for every
/// parameter and returns the largest relative error
/// `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn gradient_check<N: Network + Clone>(model: &N, bag: &Bag, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Parameter(format!(
            "finite-difference step {epsilon} outside (0, 1e-2]"
        )));
    }
    let label = bag.label();
    let mut analytic = vec![0.0; model.params().len()];
    model.loss_and_grad(bag, label, &mut analytic);

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + epsilon;
        let up = probe.loss(bag, label);
        probe.params_mut()[i] = orig - epsilon;
        let down = probe.loss(bag, label);
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

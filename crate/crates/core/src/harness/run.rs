use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::{ExperimentConfig, RepeatSeeds};
use super::report::{write_reports, ReportTable};
use crate::datasets::{Dataset, Split};
use crate::error::{Error, Result};
use crate::methods::{Method, MethodSettings};
use crate::metrics::{evaluate_method, mean_sem, EvalConfig};
use crate::models::{accuracy, load_checkpoint, save_checkpoint, train, Model, ModelKind, TrainConfig, TrainLog};

/// Outcome of one (repeat, model, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok { mean: f64, sem: f64, bags: usize, skipped: usize },
    /// The method does not apply to the model (e.g. `inherent` on the oracle).
    NotApplicable,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub repeat: usize,
    pub model: ModelKind,
    pub method: Method,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyResult {
    pub repeat: usize,
    pub model: ModelKind,
    /// `None` when the model could not be built.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub accuracies: Vec<AccuracyResult>,
    pub table: ReportTable,
}

impl ExperimentResult {
    pub fn cell(&self, repeat: usize, model: ModelKind, method: Method) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.repeat == repeat && c.model == model && c.method == method)
    }
}

const CONFIG_FILE: &str = "config.toml";

/// Creates `out` and pins the experiment to it: a second run with a different
/// effective configuration is refused rather than mixing results.
fn claim_output(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out.join("models"))?;
    fs::create_dir_all(out.join("cells"))?;
    let effective = cfg.to_toml();
    let path = out.join(CONFIG_FILE);
    match fs::read_to_string(&path) {
        Ok(prev) => {
            let prev: ExperimentConfig = toml::from_str(&prev)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if &prev != cfg {
                return Err(Error::Config(format!(
                    "{} holds results of a different configuration; use a fresh output directory",
                    out.display()
                )));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::write(path, effective)?;
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// Lazily generated per-repeat dataset.
struct RepeatData<'a> {
    cfg: &'a ExperimentConfig,
    seeds: RepeatSeeds,
    dataset: Option<Dataset>,
}

impl RepeatData<'_> {
    fn get(&mut self) -> Result<&Dataset> {
        if self.dataset.is_none() {
            self.dataset = Some(self.cfg.dataset.generate(self.seeds.data)?);
        }
        Ok(self.dataset.as_ref().unwrap())
    }
}

fn model_path(out: &Path, repeat: usize, kind: ModelKind) -> PathBuf {
    out.join("models").join(format!("r{repeat}-{}.ckpt", kind.name()))
}

/// Trains `kind` for one repeat, reusing a checkpoint saved by an earlier run.
fn prepare_model(
    train_cfg: &TrainConfig,
    kind: ModelKind,
    dataset: &Dataset,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<Model> {
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    if kind == ModelKind::Oracle {
        return Ok(train(kind, dataset, &cfg)?.0);
    }
    if let Some(path) = checkpoint {
        if path.exists() {
            let model = load_checkpoint(path)?;
            if model.kind_name() != kind.name() {
                return Err(Error::Schema(format!(
                    "{} holds a {} model, expected {}",
                    path.display(),
                    model.kind_name(),
                    kind.name()
                )));
            }
            return Ok(model);
        }
    }
    info!("training {} model", kind.name());
    let (model, log) = train(kind, dataset, &cfg)?;
    if let Some(path) = checkpoint {
        save_checkpoint(&model, path)?;
        fs::write(path.with_extension("log.tsv"), train_log_tsv(&log))?;
    }
    Ok(model)
}

/// Epoch-by-epoch training log as TSV.
pub fn train_log_tsv(log: &TrainLog) -> String {
    let mut s = format!(
        "# attempt {}\n# best_epoch {}\nepoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\n",
        log.attempt, log.best_epoch
    );
    for e in &log.epochs {
        s += &format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
        );
    }
    s
}

fn cell_path(out: &Path, repeat: usize, model: ModelKind, what: &str) -> PathBuf {
    out.join("cells").join(format!("r{repeat}-{}-{what}.txt", model.name()))
}

fn encode_status(s: &CellStatus) -> String {
    match s {
        CellStatus::Ok { mean, sem, bags, skipped } => {
            format!("ok\t{mean}\t{sem}\t{bags}\t{skipped}\n")
        }
        CellStatus::NotApplicable => "n/a\n".into(),
        CellStatus::Failed(msg) => format!("failed\t{}\n", msg.replace(['\n', '\t'], " ")),
    }
}

fn decode_status(text: &str) -> Option<CellStatus> {
    let line = text.strip_suffix('\n')?;
    let mut f = line.split('\t');
    match f.next()? {
        "ok" => {
            let mean = f.next()?.parse().ok()?;
            let sem = f.next()?.parse().ok()?;
            let bags = f.next()?.parse().ok()?;
            let skipped = f.next()?.parse().ok()?;
            f.next().is_none().then_some(CellStatus::Ok { mean, sem, bags, skipped })
        }
        "n/a" => Some(CellStatus::NotApplicable),
        "failed" => Some(CellStatus::Failed(f.next().unwrap_or("").to_string())),
        _ => None,
    }
}

fn read_cached<T>(path: &Path, decode: impl Fn(&str) -> Option<T>) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    let v = decode(&text);
    if v.is_none() {
        warn!("ignoring unreadable cache file {}", path.display());
    }
    v
}

/// Writes via a temporary file so an interrupted run never leaves a torn cell.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Evaluates one method on one model and classifies the outcome.
pub fn run_cell(
    model: &Model,
    dataset: &Dataset,
    split: Split,
    method: Method,
    settings: &MethodSettings,
    eval: &EvalConfig,
) -> CellStatus {
    let r = evaluate_method(
        model,
        dataset.split(split),
        dataset.split_ids(split),
        &dataset.rule(),
        method,
        settings,
        eval,
    );
    match r {
        Ok(r) if r.per_bag.is_empty() => CellStatus::Failed("no bag could be scored".into()),
        Ok(r) => {
            let (mean, sem) = mean_sem(&r.per_bag.iter().map(|p| p.1).collect::<Vec<_>>());
            CellStatus::Ok {
                mean,
                sem,
                bags: r.per_bag.len(),
                skipped: r.skipped,
            }
        }
        Err(Error::NoInherentMethod(_)) | Err(Error::MethodInapplicable(_)) => CellStatus::NotApplicable,
        Err(e) => {
            warn!("{} on {}: {e}", method, model.kind_name());
            CellStatus::Failed(e.to_string())
        }
    }
}

/// Runs every (repeat, model, method) cell, resuming from cells and model
/// checkpoints already present in `out`, then writes `results.tsv`,
/// `summary.tsv` and `report.txt`.
///
/// Each repeat regenerates the dataset and retrains the models from seeds
/// derived from `cfg.seed`, so repeats measure the whole pipeline's variance.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentResult> {
    cfg.validate()?;
    claim_output(cfg, out)?;
    let settings = cfg.method_settings();
    let mut cells = Vec::new();
    let mut accuracies = Vec::new();

    for repeat in 0..cfg.repeats {
        let seeds = RepeatSeeds::new(cfg.seed, repeat);
        let mut data = RepeatData { cfg, seeds, dataset: None };
        let eval = EvalConfig {
            seed: seeds.eval,
            ..cfg.eval.clone()
        };
        for &kind in &cfg.models {
            let acc_path = cell_path(out, repeat, kind, "accuracy");
            let cached: BTreeMap<Method, CellStatus> = cfg
                .methods
                .iter()
                .filter_map(|&m| {
                    read_cached(&cell_path(out, repeat, kind, m.name()), decode_status).map(|s| (m, s))
                })
                .collect();
            let cached_acc = read_cached(&acc_path, |t| match t.trim() {
                "failed" => Some(None),
                v => v.parse().ok().map(Some),
            });

            let (accuracy, fresh) = match (cached_acc, cached.len() == cfg.methods.len()) {
                (Some(a), true) => (a, BTreeMap::new()),
                (cached_acc, _) => {
                    info!("repeat {repeat}: {}", kind.name());
                    let dataset = data.get()?;
                    let model = prepare_model(
                        &cfg.train,
                        kind,
                        dataset,
                        seeds.train(kind),
                        Some(&model_path(out, repeat, kind)),
                    );
                    let (acc, fresh) = match model {
                        Ok(model) => {
                            let acc = accuracy(&model, dataset.split(cfg.split))?;
                            let fresh: BTreeMap<_, _> = cfg
                                .methods
                                .iter()
                                .filter(|m| !cached.contains_key(m))
                                .map(|&m| {
                                    let s = run_cell(&model, dataset, cfg.split, m, &settings, &eval);
                                    write_atomic(&cell_path(out, repeat, kind, m.name()), &encode_status(&s))
                                        .map(|_| (m, s))
                                })
                                .collect::<Result<_>>()?;
                            (Some(acc), fresh)
                        }
                        Err(e) if !e.is_config_error() => {
                            warn!("repeat {repeat}: {} model failed: {e}", kind.name());
                            let s = CellStatus::Failed(format!("model: {e}"));
                            let fresh = cfg
                                .methods
                                .iter()
                                .filter(|m| !cached.contains_key(m))
                                .map(|&m| (m, s.clone()))
                                .collect();
                            (None, fresh)
                        }
                        Err(e) => return Err(e),
                    };
                    let acc = cached_acc.unwrap_or(acc);
                    let text = acc.map_or("failed".to_string(), |a| a.to_string());
                    write_atomic(&acc_path, &format!("{text}\n"))?;
                    (acc, fresh)
                }
            };
            accuracies.push(AccuracyResult { repeat, model: kind, accuracy });
            let mut all = cached;
            all.extend(fresh);
            for &m in &cfg.methods {
                cells.push(CellResult {
                    repeat,
                    model: kind,
                    method: m,
                    status: all.remove(&m).expect("every method evaluated"),
                });
            }
        }
    }

    let table = ReportTable::build(cfg, &cells, &accuracies);
    write_reports(cfg, out, &cells, &accuracies, &table)?;
    Ok(ExperimentResult { cells, accuracies, table })
}

/// Mean score of one (budget, method) point, first averaged over models within
/// a repeat and then over repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub budget: usize,
    pub method: Method,
    pub mean: f64,
    pub sem: f64,
    /// Per-model (mean, sem) over repeats, in `cfg.models` order.
    pub per_model: Vec<(ModelKind, f64, f64)>,
}

/// Evaluates every surrogate method in `cfg.methods` at each budget and
/// writes `sweep.tsv`. Bags too large for a budget are skipped per bag.
pub fn sweep_sample_size(cfg: &ExperimentConfig, budgets: &[usize], out: &Path) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let methods: Vec<Method> = cfg.methods.iter().copied().filter(|m| m.is_surrogate()).collect();
    if methods.is_empty() {
        return Err(Error::Config("the sweep needs at least one surrogate method".into()));
    }
    if budgets.is_empty() || budgets.contains(&0) {
        return Err(Error::Config("budgets must be a non-empty list of positive sizes".into()));
    }
    fs::create_dir_all(out.join("models"))?;
    let base = cfg.method_settings();
    // scores[budget][method][model][repeat]
    let mut scores = vec![vec![vec![vec![None; cfg.repeats]; cfg.models.len()]; methods.len()]; budgets.len()];

    for repeat in 0..cfg.repeats {
        let seeds = RepeatSeeds::new(cfg.seed, repeat);
        let dataset = cfg.dataset.generate(seeds.data)?;
        let eval = EvalConfig {
            seed: seeds.eval,
            ..cfg.eval.clone()
        };
        for (mi, &kind) in cfg.models.iter().enumerate() {
            let path = model_path(out, repeat, kind);
            let model = prepare_model(&cfg.train, kind, &dataset, seeds.train(kind), Some(&path))?;
            for (bi, &b) in budgets.iter().enumerate() {
                let settings = base.with_budget(b);
                for (si, &m) in methods.iter().enumerate() {
                    if let CellStatus::Ok { mean, .. } = run_cell(&model, &dataset, cfg.split, m, &settings, &eval) {
                        scores[bi][si][mi][repeat] = Some(mean);
                    }
                }
            }
        }
    }

    let mut points = Vec::new();
    for (bi, &budget) in budgets.iter().enumerate() {
        for (si, &method) in methods.iter().enumerate() {
            let per = &scores[bi][si];
            let per_model = cfg
                .models
                .iter()
                .zip(per)
                .map(|(&k, v)| {
                    let (m, s) = mean_sem(&v.iter().flatten().copied().collect::<Vec<_>>());
                    (k, m, s)
                })
                .collect();
            let overall = across_models(per);
            let (mean, sem) = mean_sem(&overall);
            points.push(SweepPoint { budget, method, mean, sem, per_model });
        }
    }
    write_atomic(&out.join("sweep.tsv"), &super::report::sweep_tsv(cfg, &points))?;
    Ok(points)
}

/// Per-repeat averages over models, for the repeats in which every model
/// produced a score.
pub(crate) fn across_models(per_model: &[Vec<Option<f64>>]) -> Vec<f64> {
    let repeats = per_model.iter().map(Vec::len).min().unwrap_or(0);
    (0..repeats)
        .filter_map(|r| {
            let v: Option<Vec<f64>> = per_model.iter().map(|m| m[r]).collect();
            v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: GridPoint,
    pub points: Vec<GridPoint>,
}

/// Highest mean wins; ties go to the smaller `|beta|`, then the smaller alpha.
pub fn select_best(points: &[GridPoint]) -> Option<GridPoint> {
    points
        .iter()
        .filter(|p| p.mean.is_finite())
        .copied()
        .min_by(|a, b| {
            b.mean
                .total_cmp(&a.mean)
                .then(a.beta.abs().total_cmp(&b.beta.abs()))
                .then(a.alpha.total_cmp(&b.alpha))
        })
}

/// Grid search of MILLI's (alpha, beta) on the validation split, averaged over
/// models and repeats. Writes `grid.tsv`.
pub fn grid_search_alpha_beta(
    cfg: &ExperimentConfig,
    alphas: &[f64],
    betas: &[f64],
    out: &Path,
) -> Result<GridResult> {
    cfg.validate()?;
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::Config("the alpha and beta grids must be non-empty".into()));
    }
    let base = cfg.method_settings();
    let mut grid = Vec::new();
    for &alpha in alphas {
        for &beta in betas {
            let mut settings = base;
            settings.milli.alpha = alpha;
            settings.milli.beta = beta;
            crate::surrogate::KernelSpec::Milli { alpha, beta }
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            grid.push(settings);
        }
    }
    fs::create_dir_all(out.join("models"))?;
    let mut scores = vec![vec![vec![None; cfg.repeats]; cfg.models.len()]; grid.len()];
    for repeat in 0..cfg.repeats {
        let seeds = RepeatSeeds::new(cfg.seed, repeat);
        let dataset = cfg.dataset.generate(seeds.data)?;
        let eval = EvalConfig {
            seed: seeds.eval,
            ..cfg.eval.clone()
        };
        for (mi, &kind) in cfg.models.iter().enumerate() {
            let path = model_path(out, repeat, kind);
            let model = prepare_model(&cfg.train, kind, &dataset, seeds.train(kind), Some(&path))?;
            for (gi, settings) in grid.iter().enumerate() {
                if let CellStatus::Ok { mean, .. } = run_cell(&model, &dataset, Split::Val, Method::Milli, settings, &eval) {
                    scores[gi][mi][repeat] = Some(mean);
                }
            }
        }
    }
    let points: Vec<GridPoint> = grid
        .iter()
        .zip(&scores)
        .map(|(s, per)| {
            let (mean, sem) = mean_sem(&across_models(per));
            GridPoint {
                alpha: s.milli.alpha,
                beta: s.milli.beta,
                mean,
                sem,
            }
        })
        .collect();
    let best = select_best(&points)
        .ok_or_else(|| Error::MetricUnavailable("no grid point produced a score".into()))?;
    write_atomic(&out.join("grid.tsv"), &super::report::grid_tsv(cfg, &points, &best))?;
    Ok(GridResult { best, points })
}

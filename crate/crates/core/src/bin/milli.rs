//! Command-line front end. Exit codes: 0 success, 1 configuration error,
//! 2 runtime error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use milli::datasets::{load_dataset, save_dataset, Dataset, Split};
use milli::harness::{
    grid_search_alpha_beta, run_experiment, sweep_sample_size, train_log_tsv, DatasetKind, ExperimentConfig,
};
use milli::methods::explain_detailed;
use milli::metrics::bag_seed;
use milli::models::{accuracy, load_checkpoint, save_checkpoint, train, Model, ModelKind, TrainConfig};
use milli::{BagClassifier, Error, Method, Result};

#[derive(Parser, Debug)]
#[command(name = "milli", version, about = "Instance attributions for MIL classifiers")]
struct Cli {
    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "milli-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset into <out>/dataset.txt.
    Generate {
        /// four-class, smil or single-positive (default: from the config).
        #[arg(long)]
        kind: Option<String>,
    },
    /// Train a model on a dataset file; writes <out>/<model>.ckpt.
    Train {
        #[arg(long)]
        model: String,
        /// Dataset file (default: <out>/dataset.txt).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Explain bags of a dataset; writes <out>/attributions.tsv.
    Explain {
        /// A checkpoint path, or `oracle`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "milli")]
        methods: Vec<String>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Explain only these bag ids.
        #[arg(long, value_delimiter = ',')]
        bags: Vec<u64>,
        /// Explain at most this many bags.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run the full experiment and write the report.
    Evaluate,
    /// Sweep the surrogate sample budget.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<usize>,
    },
    /// Grid-search MILLI's alpha and beta on the validation split.
    Tune {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        betas: Vec<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out)?;
    match &cli.command {
        Command::Generate { kind } => generate(cfg, kind.as_deref(), out),
        Command::Train { model, dataset } => train_model(&cfg, model, dataset.as_deref(), out),
        Command::Explain {
            model,
            dataset,
            methods,
            split,
            bags,
            limit,
        } => {
            let methods = methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
            explain_bags(&cfg, model, dataset.as_deref(), &methods, split.parse()?, bags, *limit, out)
        }
        Command::Evaluate => {
            let result = run_experiment(&cfg, out)?;
            print!("{}", result.table.render());
            Ok(())
        }
        Command::Sweep { budgets } => {
            let budgets = if budgets.is_empty() { &cfg.sweep.budgets } else { budgets };
            for p in sweep_sample_size(&cfg, budgets, out)? {
                println!("{}\t{}\t{:.4}\t{:.4}", p.budget, p.method, p.mean, p.sem);
            }
            Ok(())
        }
        Command::Tune { alphas, betas } => {
            let alphas = if alphas.is_empty() { &cfg.tune.alphas } else { alphas };
            let betas = if betas.is_empty() { &cfg.tune.betas } else { betas };
            let r = grid_search_alpha_beta(&cfg, alphas, betas, out)?;
            println!(
                "best alpha {} beta {} mean {:.4} sem {:.4}",
                r.best.alpha, r.best.beta, r.best.mean, r.best.sem
            );
            Ok(())
        }
    }
}

fn generate(mut cfg: ExperimentConfig, kind: Option<&str>, out: &Path) -> Result<()> {
    if let Some(kind) = kind {
        cfg.dataset.kind = match kind {
            "four-class" => DatasetKind::FourClass,
            "smil" => DatasetKind::Smil,
            "single-positive" => DatasetKind::SinglePositive,
            other => return Err(Error::Config(format!("unknown dataset kind `{other}`"))),
        };
    }
    let ds = cfg.dataset.generate(cfg.seed)?;
    let path = out.join("dataset.txt");
    save_dataset(&ds, &path)?;
    println!(
        "{} bags ({} classes, dim {}) -> {}",
        ds.bags().len(),
        ds.num_classes(),
        ds.dim(),
        path.display()
    );
    Ok(())
}

fn dataset_at(path: Option<&Path>, out: &Path) -> Result<Dataset> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| out.join("dataset.txt"));
    load_dataset(&path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read dataset {}: {io}", path.display())),
        other => other,
    })
}

fn train_model(cfg: &ExperimentConfig, kind: &str, dataset: Option<&Path>, out: &Path) -> Result<()> {
    let kind: ModelKind = kind.parse()?;
    if kind == ModelKind::Oracle {
        return Err(Error::Config("the oracle is built from the dataset and needs no training".into()));
    }
    let ds = dataset_at(dataset, out)?;
    let tcfg = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let (model, log) = train(kind, &ds, &tcfg)?;
    let path = out.join(format!("{}.ckpt", kind.name()));
    save_checkpoint(&model, &path)?;
    std::fs::write(path.with_extension("log.tsv"), train_log_tsv(&log))?;
    let acc = accuracy(&model, ds.split(Split::Test))?;
    println!("test accuracy {acc:.4} (best epoch {}) -> {}", log.best_epoch, path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn explain_bags(
    cfg: &ExperimentConfig,
    model: &str,
    dataset: Option<&Path>,
    methods: &[Method],
    split: Split,
    bags: &[u64],
    limit: Option<usize>,
    out: &Path,
) -> Result<()> {
    let ds = dataset_at(dataset, out)?;
    let model = if model == "oracle" {
        Model::Oracle(milli::models::OracleModel::from_dataset(&ds, cfg.train.oracle_epsilon)?)
    } else {
        load_checkpoint(model).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read checkpoint {model}: {io}")),
            other => other,
        })?
    };
    if model.num_classes() != ds.num_classes() {
        return Err(Error::Config(format!(
            "model has {} classes, dataset {}",
            model.num_classes(),
            ds.num_classes()
        )));
    }
    let settings = cfg.method_settings();
    let classes: Vec<usize> = (0..ds.num_classes()).collect();
    let mut selected: Vec<(u64, &milli::Bag)> = ds
        .split_ids(split)
        .iter()
        .copied()
        .zip(ds.split(split))
        .filter(|(id, _)| bags.is_empty() || bags.contains(id))
        .collect();
    if let Some(n) = limit {
        selected.truncate(n);
    }
    if selected.is_empty() {
        return Err(Error::Config("no bags selected".into()));
    }

    let mut tsv = String::from("# milli-attributions v1\nbag_id\tmethod\tclass\tphi0\tresidual\tvalues\n");
    for (id, bag) in selected {
        for &m in methods {
            info!("bag {id}: {m}");
            let (phi, fits) = match explain_detailed(m, &model, bag, &classes, &settings, bag_seed(cfg.seed, id)) {
                Err(e @ (Error::NoInherentMethod(_) | Error::MethodInapplicable(_) | Error::Budget { .. })) => {
                    log::warn!("bag {id}: {m}: {e}");
                    continue;
                }
                other => other?,
            };
            for &c in &classes {
                let row = phi.row(c).expect("all classes explained");
                let fit = fits.iter().find(|f| f.class == c);
                let values: Vec<String> = row.iter().map(f64::to_string).collect();
                let _ = writeln!(
                    tsv,
                    "{id}\t{m}\t{c}\t{}\t{}\t{}",
                    fit.map_or(String::new(), |f| f.phi0.to_string()),
                    fit.map_or(String::new(), |f| f.residual_loss.to_string()),
                    values.join(",")
                );
            }
        }
    }
    let path = out.join("attributions.tsv");
    std::fs::write(&path, tsv)?;
    println!("-> {}", path.display());
    Ok(())
}

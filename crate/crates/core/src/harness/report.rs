use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{ExperimentConfig, RepeatSeeds};
use super::run::{across_models, AccuracyResult, CellResult, CellStatus, GridPoint, SweepPoint};
use crate::error::Result;
use crate::methods::Method;
use crate::metrics::mean_sem;

pub const RESULTS_HEADER: &str = "# milli-results v1";
pub const REPORT_HEADER: &str = "# milli-report v1";

/// Mean and sem over repeats, or why there is none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entry {
    Value { mean: f64, sem: f64, repeats: usize },
    NotApplicable,
    Failed,
}

impl Entry {
    fn from_scores(scores: &[Option<f64>], any_na: bool) -> Entry {
        let v: Vec<f64> = scores.iter().flatten().copied().collect();
        if v.is_empty() {
            return if any_na { Entry::NotApplicable } else { Entry::Failed };
        }
        let (mean, sem) = mean_sem(&v);
        Entry::Value { mean, sem, repeats: v.len() }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Entry::Value { mean, .. } => Some(*mean),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Entry::Value { mean, sem, .. } => format!("{mean:.3} ± {sem:.3}"),
            Entry::NotApplicable => "n/a".into(),
            Entry::Failed => "failed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    /// One entry per model, in config order.
    pub models: Vec<Entry>,
    /// Mean of the model columns; sem over per-repeat model averages.
    pub overall: Entry,
}

/// Methods × models table of mean ± sem across repeats, plus model accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub models: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub accuracy: ReportRow,
}

impl ReportTable {
    pub fn build(cfg: &ExperimentConfig, cells: &[CellResult], accuracies: &[AccuracyResult]) -> Self {
        let grid = |f: &dyn Fn(usize, crate::models::ModelKind) -> (Option<f64>, bool)| {
            cfg.models
                .iter()
                .map(|&k| {
                    let per: Vec<(Option<f64>, bool)> = (0..cfg.repeats).map(|r| f(r, k)).collect();
                    (per.iter().map(|p| p.0).collect::<Vec<_>>(), per.iter().any(|p| p.1))
                })
                .collect::<Vec<_>>()
        };
        let row = |label: &str, grid: Vec<(Vec<Option<f64>>, bool)>| {
            let models: Vec<Entry> = grid.iter().map(|(s, na)| Entry::from_scores(s, *na)).collect();
            let present: Vec<&Vec<Option<f64>>> = grid
                .iter()
                .zip(&models)
                .filter(|(_, e)| e.mean().is_some())
                .map(|(g, _)| &g.0)
                .collect();
            let overall = if present.is_empty() {
                if models.iter().all(|e| *e == Entry::NotApplicable) {
                    Entry::NotApplicable
                } else {
                    Entry::Failed
                }
            } else {
                let mean = models.iter().filter_map(Entry::mean).sum::<f64>() / present.len() as f64;
                let per: Vec<Vec<Option<f64>>> = present.into_iter().cloned().collect();
                let avgs = across_models(&per);
                Entry::Value {
                    mean,
                    sem: mean_sem(&avgs).1,
                    repeats: avgs.len(),
                }
            };
            ReportRow {
                label: label.to_string(),
                models,
                overall,
            }
        };

        let rows = cfg
            .methods
            .iter()
            .map(|&m| {
                let g = grid(&|r, k| {
                    let c = cells.iter().find(|c| c.repeat == r && c.model == k && c.method == m);
                    match c.map(|c| &c.status) {
                        Some(CellStatus::Ok { mean, .. }) => (Some(*mean), false),
                        Some(CellStatus::NotApplicable) => (None, true),
                        _ => (None, false),
                    }
                });
                row(m.name(), g)
            })
            .collect();
        let g = grid(&|r, k| {
            let a = accuracies.iter().find(|a| a.repeat == r && a.model == k);
            (a.and_then(|a| a.accuracy), false)
        });
        ReportTable {
            models: cfg.models.iter().map(|m| m.name().to_string()).collect(),
            rows,
            accuracy: row("model acc", g),
        }
    }

    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == method.name())
    }

    /// Plain-text table, one row per method.
    pub fn render(&self) -> String {
        let mut header = vec![String::from("method")];
        header.extend(self.models.iter().cloned());
        header.push("overall".into());
        let mut lines = vec![header];
        for r in self.rows.iter().chain(std::iter::once(&self.accuracy)) {
            let mut l = vec![r.label.clone()];
            l.extend(r.models.iter().map(Entry::render));
            l.push(r.overall.render());
            lines.push(l);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            s += cells.join("  ").trim_end();
            s.push('\n');
        }
        s
    }
}

fn preamble(cfg: &ExperimentConfig) -> String {
    let s = cfg.method_settings();
    format!(
        "# experiment {}\n# dataset {} regenerated per repeat\n# metric {} policy {} split {} repeats {}\n# sample_size {} milli alpha {} beta {} n {}\n",
        cfg.name,
        cfg.dataset.kind.name(),
        cfg.eval.metric.name(),
        cfg.eval.policy.name(),
        cfg.split.name(),
        cfg.repeats,
        s.sample_size,
        s.milli.alpha,
        s.milli.beta,
        s.milli.n,
    )
}

fn seed_ledger(cfg: &ExperimentConfig) -> String {
    let mut s = format!("# seed master {}\n", cfg.seed);
    for r in 0..cfg.repeats {
        let seeds = RepeatSeeds::new(cfg.seed, r);
        let _ = write!(s, "# seed repeat {r} data {} eval {}", seeds.data, seeds.eval);
        for &k in &cfg.models {
            let _ = write!(s, " train.{} {}", k.name(), seeds.train(k));
        }
        s.push('\n');
    }
    s
}

/// Every cell and accuracy as one TSV row.
pub fn results_tsv(cfg: &ExperimentConfig, cells: &[CellResult], accuracies: &[AccuracyResult]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n{}{}", preamble(cfg), seed_ledger(cfg));
    s += "repeat\tmodel\tmethod\tstatus\tmean\tsem\tbags\tskipped\n";
    for c in cells {
        let (status, rest) = match &c.status {
            CellStatus::Ok { mean, sem, bags, skipped } => ("ok", format!("{mean}\t{sem}\t{bags}\t{skipped}")),
            CellStatus::NotApplicable => ("n/a", "\t\t\t".into()),
            CellStatus::Failed(_) => ("failed", "\t\t\t".into()),
        };
        let _ = writeln!(s, "{}\t{}\t{}\t{status}\t{rest}", c.repeat, c.model.name(), c.method.name());
    }
    for a in accuracies {
        let (status, v) = match a.accuracy {
            Some(v) => ("ok", v.to_string()),
            None => ("failed", String::new()),
        };
        let _ = writeln!(s, "{}\t{}\taccuracy\t{status}\t{v}\t\t\t", a.repeat, a.model.name());
    }
    s
}

/// Aggregated table as TSV: one row per (row label, column).
pub fn summary_tsv(table: &ReportTable) -> String {
    let mut s = String::from("row\tcolumn\tmean\tsem\trepeats\n");
    for r in table.rows.iter().chain(std::iter::once(&table.accuracy)) {
        let cols = table.models.iter().map(String::as_str).chain(std::iter::once("overall"));
        for (col, e) in cols.zip(r.models.iter().chain(std::iter::once(&r.overall))) {
            let v = match e {
                Entry::Value { mean, sem, repeats } => format!("{mean}\t{sem}\t{repeats}"),
                Entry::NotApplicable => "n/a\t\t0".into(),
                Entry::Failed => "failed\t\t0".into(),
            };
            let _ = writeln!(s, "{}\t{col}\t{v}", r.label);
        }
    }
    s
}

pub(crate) fn write_reports(
    cfg: &ExperimentConfig,
    out: &Path,
    cells: &[CellResult],
    accuracies: &[AccuracyResult],
    table: &ReportTable,
) -> Result<()> {
    fs::write(out.join("results.tsv"), results_tsv(cfg, cells, accuracies))?;
    fs::write(out.join("summary.tsv"), summary_tsv(table))?;
    let report = format!("{REPORT_HEADER}\n{}\n{}", preamble(cfg), table.render());
    fs::write(out.join("report.txt"), report)?;
    Ok(())
}

pub(crate) fn sweep_tsv(cfg: &ExperimentConfig, points: &[SweepPoint]) -> String {
    let mut s = format!("# milli-sweep v1\n{}{}", preamble(cfg), seed_ledger(cfg));
    s += "budget\tmethod\tmodel\tmean\tsem\n";
    for p in points {
        for (k, m, e) in &p.per_model {
            let _ = writeln!(s, "{}\t{}\t{}\t{m}\t{e}", p.budget, p.method.name(), k.name());
        }
        let _ = writeln!(s, "{}\t{}\toverall\t{}\t{}", p.budget, p.method.name(), p.mean, p.sem);
    }
    s
}

pub(crate) fn grid_tsv(cfg: &ExperimentConfig, points: &[GridPoint], best: &GridPoint) -> String {
    let mut s = format!("# milli-grid v1\n{}{}", preamble(cfg), seed_ledger(cfg));
    let _ = writeln!(s, "# best alpha {} beta {}", best.alpha, best.beta);
    s += "alpha\tbeta\tmean\tsem\n";
    for p in points {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", p.alpha, p.beta, p.mean, p.sem);
    }
    s
}

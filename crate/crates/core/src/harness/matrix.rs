use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text::DomainDataset;

use super::protocol::{run_pair, ExperimentSettings, ModelSpec, PairMode, TrainedModel};

/// One (source, target, model) cell, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub source: String,
    pub target: String,
    pub model: String,
    /// Mean target test accuracy in percent, `None` if any seed failed.
    pub accuracy: Option<f64>,
    /// First seed; run `k` used `seed + k`.
    pub seed: u64,
    pub runs: usize,
    pub status: String,
}

/// One (source, target, model, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub source: String,
    pub target: String,
    pub model: ModelSpec,
    pub seed: u64,
    pub accuracy: f64,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
    pub epoch_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossDomainMatrix {
    pub domains: Vec<String>,
    pub rows: Vec<MatrixRow>,
    pub runs: Vec<RunRecord>,
}

fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl CrossDomainMatrix {
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.accuracy.is_none())
    }

    pub fn row(&self, source: &str, target: &str, model: ModelSpec) -> Option<&MatrixRow> {
        self.rows
            .iter()
            .find(|r| r.source == source && r.target == target && r.model == model.name())
    }

    /// `source,target,model,accuracy,seed,runs,status`, one row per cell.
    /// Contains no timing so identical runs give identical bytes.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source", "target", "model", "accuracy", "seed", "runs", "status"])?;
        for r in &self.rows {
            let acc = r.accuracy.map(|a| format!("{a:.2}")).unwrap_or_default();
            w.write_record([
                r.source.as_str(),
                &r.target,
                &r.model,
                &acc,
                &r.seed.to_string(),
                &r.runs.to_string(),
                &r.status,
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Per-seed accuracies and stopping epochs.
    pub fn write_runs_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source", "target", "model", "seed", "accuracy", "best_epoch", "stopped_epoch"])?;
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.runs {
            w.write_record([
                r.source.as_str(),
                &r.target,
                r.model.name(),
                &r.seed.to_string(),
                &percent(r.accuracy),
                &opt(r.best_epoch),
                &opt(r.stopped_epoch),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Epoch timings of every neural run, grouped by model.
    pub fn timing(&self) -> Vec<TimingRow> {
        let mut by_model: BTreeMap<ModelSpec, (usize, Vec<f64>)> = BTreeMap::new();
        for r in &self.runs {
            if r.epoch_seconds.is_empty() {
                continue;
            }
            let e = by_model.entry(r.model).or_default();
            e.0 += 1;
            e.1.extend(&r.epoch_seconds);
        }
        let samples: Vec<(ModelSpec, usize, Vec<f64>)> = by_model.into_iter().map(|(m, (n, s))| (m, n, s)).collect();
        timing_report(&samples)
    }
}

/// Runs every ordered pair of distinct domains for every model and seed.
/// Pairs run in model, source, target, seed order. A failing run marks its
/// cell failed and the remaining cells still run.
pub fn run_matrix(
    datasets: &[DomainDataset],
    models: &[ModelSpec],
    settings: &ExperimentSettings,
    seeds: &[u64],
) -> Result<CrossDomainMatrix> {
    if datasets.len() < 2 {
        return Err(Error::invalid("the domain matrix needs at least two domains"));
    }
    if models.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("the domain matrix needs at least one model and one seed"));
    }
    let domains: Vec<String> = datasets.iter().map(|d| d.domain().to_string()).collect();
    let mut sorted = domains.clone();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("domain names must be distinct"));
    }

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &model in models {
        for source in datasets {
            for target in datasets {
                if std::ptr::eq(source, target) {
                    continue;
                }
                let mut accs = Vec::new();
                let mut failure = None;
                for &seed in seeds {
                    log::info!("{model} {} -> {} seed {seed}", source.domain(), target.domain());
                    match run_pair(source, target, model, settings, seed, PairMode::CrossDomain) {
                        Ok(r) => {
                            let (best_epoch, stopped_epoch) = match &r.trained {
                                TrainedModel::Gcn { report, .. } => {
                                    (Some(report.best_epoch), Some(report.stopped_epoch))
                                }
                                TrainedModel::Baseline(_) => (None, None),
                            };
                            accs.push(r.accuracy);
                            runs.push(RunRecord {
                                source: r.source,
                                target: r.target,
                                model,
                                seed,
                                accuracy: r.accuracy,
                                best_epoch,
                                stopped_epoch,
                                epoch_seconds: r.trained.epoch_seconds(),
                            });
                        }
                        Err(e) => {
                            log::error!("{model} {} -> {} seed {seed}: {e}", source.domain(), target.domain());
                            failure.get_or_insert_with(|| format!("failed (seed {seed}): {e}"));
                        }
                    }
                }
                let accuracy = match failure {
                    None => Some(100.0 * accs.iter().sum::<f64>() / accs.len() as f64),
                    Some(_) => None,
                };
                rows.push(MatrixRow {
                    source: source.domain().to_string(),
                    target: target.domain().to_string(),
                    model: model.name().to_string(),
                    accuracy,
                    seed: seeds[0],
                    runs: seeds.len(),
                    status: failure.unwrap_or_else(|| "ok".to_string()),
                });
            }
        }
    }
    Ok(CrossDomainMatrix { domains, rows, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub model: String,
    pub runs: usize,
    pub epochs: usize,
    pub mean_seconds: f64,
    /// Population standard deviation over epochs.
    pub stddev_seconds: f64,
    /// Mean epoch time relative to the ungated model, when it was run.
    pub ratio_to_none: Option<f64>,
}

/// Mean and spread of seconds per epoch for each `(model, runs, epoch times)`.
pub fn timing_report(samples: &[(ModelSpec, usize, Vec<f64>)]) -> Vec<TimingRow> {
    let mut rows: Vec<TimingRow> = samples
        .iter()
        .filter(|(_, _, s)| !s.is_empty())
        .map(|(m, runs, s)| {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            TimingRow {
                model: m.name().to_string(),
                runs: *runs,
                epochs: s.len(),
                mean_seconds: mean,
                stddev_seconds: var.sqrt(),
                ratio_to_none: None,
            }
        })
        .collect();
    let none = crate::model::GateKind::Ungated.name();
    if let Some(base) = rows.iter().find(|r| r.model == none).map(|r| r.mean_seconds) {
        if base > 0.0 {
            for r in &mut rows {
                r.ratio_to_none = Some(r.mean_seconds / base);
            }
        }
    }
    rows
}

pub fn write_timing_csv(rows: &[TimingRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn format_timing_table(rows: &[TimingRow]) -> String {
    let mut out = format!(
        "{:<8} {:>5} {:>7} {:>12} {:>12} {:>9}\n",
        "model", "runs", "epochs", "mean s/ep", "stddev", "vs none"
    );
    for r in rows {
        let ratio = r.ratio_to_none.map(|x| format!("{x:.2}x")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<8} {:>5} {:>7} {:>12.4} {:>12.4} {:>9}\n",
            r.model, r.runs, r.epochs, r.mean_seconds, r.stddev_seconds, ratio
        ));
    }
    out
}

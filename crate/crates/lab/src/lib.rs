//! Experiment harness: configuration, the measurement pipeline, training and
//! evaluation runs, baseline comparison and report files.

pub mod config;
mod error;
pub mod membership;
pub mod pipeline;
pub mod report;

use std::path::Path;

use cdmr_agents::checkpoint;
use cdmr_agents::train::{train, TrainingRun, TrainingSet};
use cdmr_agents::MultiAgent;

pub use config::{Algorithm, ExperimentConfig};
pub use error::{Error, Result};
pub use pipeline::{Lab, Snapshot};
pub use report::{evaluate_tree, ReportRow, Summary, TreeMetrics};

use crate::pipeline::{eval_seeds, train_seeds};
use crate::report::{run_comparison, summarize, Instance};

/// Trains fresh agents on the configured training snapshots.
pub fn train_for(cfg: &ExperimentConfig, lab: &Lab) -> Result<TrainingRun> {
    let snaps = lab.measure_all(&cfg.traffic, &train_seeds(cfg))?;
    let norms: Vec<_> = snaps.into_iter().map(|s| s.norm).collect();
    let data = TrainingSet { net: &lab.net, partition: &lab.partition, group: &lab.group, snapshots: &norms };
    Ok(train(&data, &cfg.hyperparams())?)
}

pub fn load_agents(cfg: &ExperimentConfig, lab: &Lab, path: &Path) -> Result<MultiAgent> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    let params = checkpoint::decode(&bytes)?;
    Ok(MultiAgent::from_params(&lab.net, &lab.partition, params, &cfg.hyperparams())?)
}

pub struct Comparison {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
    /// Present when the agents were trained as part of the run.
    pub training: Option<TrainingRun>,
}

/// Runs every configured algorithm on every evaluation snapshot. MA-CDMR
/// agents come from the configured checkpoint, or are trained first.
pub fn compare(cfg: &ExperimentConfig) -> Result<Comparison> {
    let lab = Lab::load(cfg)?;
    let mut training = None;
    let mut loaded = None;
    if cfg.algorithms.contains(&Algorithm::Macdmr) {
        match &cfg.checkpoint {
            Some(path) => loaded = Some(load_agents(cfg, &lab, path)?),
            None => training = Some(train_for(cfg, &lab)?),
        }
    }
    let agents = loaded.as_ref().or(training.as_ref().map(|t| &t.agents));
    let snaps = lab.measure_all(&cfg.traffic, &eval_seeds(cfg))?;
    let inst = Instance { net: &lab.net, partition: &lab.partition, group: &lab.group };
    let rows = run_comparison(&inst, &snaps, &cfg.algorithms, agents, &cfg.hyperparams());
    let summary = summarize(&rows);
    Ok(Comparison { rows, summary, training })
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(Error::io(path))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::Runtime(e.to_string()))
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cdmr_agents::Hyperparams;
use cdmr_core::topology::TopoGenParams;
use cdmr_core::traffic::TrafficParams;
use cdmr_core::NodeId;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Where the network comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySource {
    /// A topology bundled with the library, by name.
    Fixture(String),
    /// A topology JSON file.
    File(PathBuf),
    /// A random network drawn from the `generator` parameters.
    Generate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Macdmr,
    Kmb,
    Sctf,
    Exact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Macdmr, Algorithm::Kmb, Algorithm::Sctf, Algorithm::Exact];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Macdmr => "macdmr",
            Algorithm::Kmb => "kmb",
            Algorithm::Sctf => "sctf",
            Algorithm::Exact => "exact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub src: NodeId,
    pub dests: Vec<NodeId>,
}

impl Default for GroupSpec {
    fn default() -> Self {
        Self { src: 2, dests: vec![5, 14, 17, 18, 25, 27] }
    }
}

/// Snapshot schedule. Explicit seed lists take precedence over counts;
/// otherwise seeds are derived from the experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotSchedule {
    pub train: usize,
    pub eval: usize,
    pub train_seeds: Vec<u64>,
    pub eval_seeds: Vec<u64>,
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        Self { train: 20, eval: 100, train_seeds: Vec::new(), eval_seeds: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembershipSim {
    /// Random join/leave events after the configured members have joined.
    pub events: usize,
    pub group_id: u32,
}

impl Default for MembershipSim {
    fn default() -> Self {
        Self { events: 100, group_id: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    /// Generator parameters; for fixture and file topologies only the metric
    /// ranges are used.
    pub generator: TopoGenParams,
    pub group: GroupSpec,
    /// Training hyperparameters. `seed` inside is replaced by the experiment
    /// seed.
    pub hyperparams: Hyperparams,
    pub traffic: TrafficParams,
    pub snapshots: SnapshotSchedule,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Trained agents to use instead of training from scratch.
    pub checkpoint: Option<PathBuf>,
    pub membership: MembershipSim,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: TopologySource::Fixture("four_domain_28".into()),
            generator: TopoGenParams::default(),
            group: GroupSpec::default(),
            hyperparams: Hyperparams::default(),
            traffic: TrafficParams::default(),
            snapshots: SnapshotSchedule::default(),
            algorithms: Algorithm::ALL.to_vec(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            membership: MembershipSim::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative topology and checkpoint paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let TopologySource::File(p) = &mut cfg.topology {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut cfg.checkpoint {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms: at least one algorithm is required".into()));
        }
        if self.eval_count() == 0 {
            return Err(Error::Config("snapshots.eval: at least one evaluation snapshot is required".into()));
        }
        if self.algorithms.contains(&Algorithm::Macdmr) && self.checkpoint.is_none() && self.train_count() == 0 {
            return Err(Error::Config("snapshots.train: training needs at least one snapshot".into()));
        }
        if self.group.dests.is_empty() {
            return Err(Error::Config("group.dests: at least one destination is required".into()));
        }
        self.hyperparams.validate().map_err(|e| Error::Config(format!("hyperparams: {e}")))?;
        self.traffic.validate().map_err(|e| Error::Config(format!("traffic: {e}")))?;
        self.generator.validate().map_err(|e| Error::Config(format!("generator: {e}")))?;
        Ok(())
    }

    pub fn train_count(&self) -> usize {
        if self.snapshots.train_seeds.is_empty() {
            self.snapshots.train
        } else {
            self.snapshots.train_seeds.len()
        }
    }

    pub fn eval_count(&self) -> usize {
        if self.snapshots.eval_seeds.is_empty() {
            self.snapshots.eval
        } else {
            self.snapshots.eval_seeds.len()
        }
    }

    /// Hyperparameters with the experiment seed applied.
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams { seed: self.seed, ..self.hyperparams.clone() }
    }
}

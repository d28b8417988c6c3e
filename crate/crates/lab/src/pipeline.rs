//! Topology loading and the measurement pipeline: base metrics, synthetic
//! counter traces, per-domain collection, root merge, normalization.

use cdmr_core::control_plane::{gather_global_snapshot, MessageBus};
use cdmr_core::link_metrics::normalize;
use cdmr_core::topology::{generate_random, parse_topology, random_link_metrics, DistanceSource, TopoGenParams};
use cdmr_core::traffic::{link_distances, synthesize_trace, TrafficParams};
use cdmr_core::{fixtures, DomainPartition, MetricSnapshot, MulticastGroup, Network, NormalizedSnapshot};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, TopologySource};
use crate::{Error, Result};

/// Network, partition, group and the base metrics every snapshot is
/// measured around.
#[derive(Clone, Debug)]
pub struct Lab {
    pub net: Network,
    pub partition: DomainPartition,
    pub group: MulticastGroup,
    pub base: MetricSnapshot,
}

pub fn fixture(name: &str) -> Result<&'static str> {
    match name {
        "four_domain_28" => Ok(fixtures::FOUR_DOMAIN_28),
        _ => Err(Error::Config(format!("topology.fixture: unknown fixture {name:?} (known: four_domain_28)"))),
    }
}

impl Lab {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let gen = TopoGenParams { seed: cfg.seed, ..cfg.generator.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (net, partition, base) = match &cfg.topology {
            TopologySource::Generate => generate_random(&gen)?,
            TopologySource::Fixture(name) => {
                let (net, p) = parse_topology(fixture(name)?)?;
                let base = random_link_metrics(&net, &p, &gen, DistanceSource::Coordinates, &mut rng)?;
                (net, p, base)
            }
            TopologySource::File(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let (net, p) = parse_topology(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let base = random_link_metrics(&net, &p, &gen, DistanceSource::Coordinates, &mut rng)?;
                (net, p, base)
            }
        };
        let group = MulticastGroup::new(cfg.group.src, cfg.group.dests.iter().copied())
            .and_then(|g| g.check_nodes(&net).map(|_| g))
            .map_err(|e| Error::Config(format!("group: {e}")))?;
        Ok(Self { net, partition, group, base })
    }

    /// One measured snapshot: a synthetic counter trace around the base
    /// metrics, collected by every controller and merged at the root.
    pub fn measure(&self, traffic: &TrafficParams, seed: u64, bus: &mut MessageBus) -> Result<Snapshot> {
        let trace = synthesize_trace(&self.base, traffic, seed)?;
        let raw = gather_global_snapshot(
            &self.net,
            &self.partition,
            &trace,
            &link_distances(&self.base),
            traffic.bw_max,
            bus,
        )?;
        let norm = normalize(&raw)?;
        Ok(Snapshot { seed, raw, norm })
    }

    pub fn measure_all(&self, traffic: &TrafficParams, seeds: &[u64]) -> Result<Vec<Snapshot>> {
        seeds.iter().map(|s| self.measure(traffic, *s, &mut MessageBus::default())).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub seed: u64,
    pub raw: MetricSnapshot,
    pub norm: NormalizedSnapshot,
}

const TRAIN_STREAM: u64 = 10;
const EVAL_STREAM: u64 = 11;

fn derive_seeds(seed: u64, stream: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Seeds of the training snapshots.
pub fn train_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    if cfg.snapshots.train_seeds.is_empty() {
        derive_seeds(cfg.seed, TRAIN_STREAM, cfg.snapshots.train)
    } else {
        cfg.snapshots.train_seeds.clone()
    }
}

/// Seeds of the evaluation snapshots, disjoint in practice from training.
pub fn eval_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    if cfg.snapshots.eval_seeds.is_empty() {
        derive_seeds(cfg.seed, EVAL_STREAM, cfg.snapshots.eval)
    } else {
        cfg.snapshots.eval_seeds.clone()
    }
}

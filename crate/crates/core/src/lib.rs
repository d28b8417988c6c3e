//! Core model for cross-domain multicast routing experiments.
//!
//! The crate is split along the layers of a multi-controller network:
//! [`topology`] describes the partitioned graph, [`link_metrics`] turns port
//! counters into per-link measurements, [`multicast`] holds the tree model and
//! its cost functions, [`baselines`] provides classic Steiner solvers and
//! [`control_plane`] simulates local/root controllers and group management.

pub mod baselines;
pub mod control_plane;
mod error;
pub mod group;
pub mod link_metrics;
pub mod multicast;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
pub use group::MulticastGroup;
pub use link_metrics::{EdgeMetrics, MetricSnapshot, NormalizedSnapshot};
pub use multicast::{CostWeights, CrossDomainTree};
pub use topology::{DomainId, DomainPartition, Link, Network, NodeId, Point};

/// Topologies shipped with the crate.
pub mod fixtures {
    /// Four domains of seven nodes on a 2x2 grid, two links between each pair
    /// of adjacent domains.
    pub const FOUR_DOMAIN_28: &str = include_str!("../fixtures/four_domain_28.json");
}

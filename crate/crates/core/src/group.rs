use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::topology::{Network, NodeId};
use crate::{Error, Result};

/// A single-source multicast group `{src} ∪ D` with per-destination online
/// flags maintained by group management.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticastGroup {
    src: NodeId,
    dests: BTreeMap<NodeId, bool>,
}

impl MulticastGroup {
    /// Creates a group with every destination online.
    pub fn new(src: NodeId, dests: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let dests: BTreeMap<NodeId, bool> = dests.into_iter().map(|d| (d, true)).collect();
        if dests.is_empty() {
            return Err(Error::InvalidGroup("destination set is empty".into()));
        }
        if dests.contains_key(&src) {
            return Err(Error::InvalidGroup(format!("source {src} is also a destination")));
        }
        Ok(Self { src, dests })
    }

    /// Creates a group whose destinations are registered but offline, the
    /// starting point for membership driven purely by joins.
    pub fn offline(src: NodeId, dests: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut g = Self::new(src, dests)?;
        g.dests.values_mut().for_each(|on| *on = false);
        Ok(g)
    }

    /// Checks that every member exists in `net`.
    pub fn check_nodes(&self, net: &Network) -> Result<()> {
        for v in std::iter::once(self.src).chain(self.dests.keys().copied()) {
            if v >= net.node_count() {
                return Err(Error::UnknownNode(v));
            }
        }
        Ok(())
    }

    pub fn src(&self) -> NodeId {
        self.src
    }

    /// All destinations, online or not.
    pub fn dests(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.dests.keys().copied()
    }

    pub fn online_dests(&self) -> BTreeSet<NodeId> {
        self.dests.iter().filter(|(_, on)| **on).map(|(d, _)| *d).collect()
    }

    pub fn is_online(&self, v: NodeId) -> bool {
        self.dests.get(&v).copied().unwrap_or(false)
    }

    pub fn is_member(&self, v: NodeId) -> bool {
        self.dests.contains_key(&v)
    }

    /// Marks `v` online, adding it to the destination set if needed.
    pub(crate) fn set_online(&mut self, v: NodeId, online: bool) {
        self.dests.insert(v, online);
    }
}

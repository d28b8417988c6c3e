//! Join/leave simulation driven by the group management operations.

use std::collections::BTreeSet;

use cdmr_core::control_plane::{delivered_to, install_tree, mgm_join, mgm_leave};
use cdmr_core::multicast::validate;
use cdmr_core::{
    CostWeights, CrossDomainTree, DomainPartition, Link, MulticastGroup, Network, NodeId, NormalizedSnapshot,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Join,
    Leave,
}

/// What one event did and what was checked afterwards.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub event: EventKind,
    pub node: NodeId,
    /// Links grafted (join) or pruned (leave).
    pub links: Vec<[NodeId; 2]>,
    pub flow_installs: usize,
    pub flow_removals: usize,
    pub online: Vec<NodeId>,
    /// Nodes that receive the packet when forwarding along the installed
    /// flow tables.
    pub delivered: Vec<NodeId>,
    pub valid: bool,
    pub tree_edges: usize,
}

pub struct MembershipRun {
    pub events: Vec<EventRecord>,
    pub tree: CrossDomainTree,
    pub group: MulticastGroup,
}

pub struct Membership<'a> {
    pub net: &'a Network,
    pub partition: &'a DomainPartition,
    pub snapshot: &'a NormalizedSnapshot,
    pub weights: CostWeights,
    pub group_id: u32,
}

impl Membership<'_> {
    /// Starts from an empty tree, joins the configured destinations in order,
    /// then applies `events` random joins and leaves over all non-source
    /// nodes.
    pub fn run(&self, initial: &MulticastGroup, events: usize, seed: u64) -> Result<MembershipRun> {
        let src = initial.src();
        let mut group = MulticastGroup::offline(src, initial.dests())?;
        let mut tree = CrossDomainTree::source_only(src, self.partition)?;
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scripted: Vec<NodeId> = initial.online_dests().into_iter().collect();
        let random = (0..events).map(|_| {
            let v = rng.gen_range(0..self.net.node_count() - 1);
            if v >= src {
                v + 1
            } else {
                v
            }
        });
        let order: Vec<NodeId> = scripted.into_iter().chain(random).collect();
        for v in order {
            let (kind, change) = if group.is_online(v) {
                (EventKind::Leave, mgm_leave(self.partition, &tree, &mut group, v, self.group_id)?)
            } else {
                let c = mgm_join(
                    self.net,
                    self.partition,
                    &tree,
                    &mut group,
                    v,
                    self.snapshot,
                    &self.weights,
                    self.group_id,
                )?;
                (EventKind::Join, c)
            };
            tree = change.tree;
            out.push(self.record(kind, v, &change.links, &change.delta, &tree, &group));
        }
        Ok(MembershipRun { events: out, tree, group })
    }

    fn record(
        &self,
        event: EventKind,
        node: NodeId,
        links: &BTreeSet<Link>,
        delta: &cdmr_core::control_plane::FlowDelta,
        tree: &CrossDomainTree,
        group: &MulticastGroup,
    ) -> EventRecord {
        let online = group.online_dests();
        let (valid, delivered) = if online.is_empty() {
            (tree.links().is_empty(), BTreeSet::new())
        } else {
            let valid = validate(tree, group, self.partition).is_empty();
            let delivered = install_tree(tree, group, self.partition, self.group_id)
                .map(|t| delivered_to(&t, group.src(), self.group_id))
                .unwrap_or_default();
            (valid, delivered)
        };
        EventRecord {
            event,
            node,
            links: links.iter().map(|l| [l.a(), l.b()]).collect(),
            flow_installs: delta.install.values().map(Vec::len).sum(),
            flow_removals: delta.remove.len(),
            online: online.into_iter().collect(),
            delivered: delivered.into_iter().collect(),
            valid,
            tree_edges: tree.edge_count(),
        }
    }
}

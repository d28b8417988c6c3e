//! Simulated multi-controller control plane: per-domain metric collection,
//! controller messages merged by a root store, flow-table compilation and
//! group membership changes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{dijkstra_from, edge_weights, WeightedGraph};
use crate::group::MulticastGroup;
use crate::link_metrics::{
    compute_bandwidth, compute_delay, compute_err, compute_loss, DelayProbe, EdgeMetrics, MetricSnapshot,
    NormalizedSnapshot, PortCounterSample, TraceRecord,
};
use crate::multicast::{validate, CostWeights, CrossDomainTree};
use crate::topology::{DomainId, DomainPartition, Link, Network, NodeId};
use crate::{Error, Result};

/// Domain id used by the root controller in messages.
pub const ROOT: DomainId = DomainId(0);

/// Metrics measured by one controller over the edges it owns.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSnapshot {
    pub domain: DomainId,
    /// Latest counter timestamp used, in seconds.
    pub timestamp: f64,
    pub metrics: MetricSnapshot,
}

#[derive(Default)]
struct EdgeSamples {
    ports: BTreeMap<u32, PortCounterSample>,
    probe: Option<DelayProbe>,
}

/// Edges owned by `domain`: its intra-domain edges, or every inter-domain
/// edge for [`ROOT`].
pub fn owned_edges(net: &Network, p: &DomainPartition, domain: DomainId) -> Vec<(NodeId, NodeId)> {
    net.directed_edges()
        .filter(|(u, v)| {
            let (du, dv) = (p.dom(*u), p.dom(*v));
            if domain == ROOT {
                du != dv
            } else {
                du == domain && dv == domain
            }
        })
        .collect()
}

/// Computes metrics for the edges `domain` owns from a counter trace.
/// `distances` gives each link's AP distance.
pub fn collect_domain_snapshot(
    net: &Network,
    p: &DomainPartition,
    domain: DomainId,
    trace: &[TraceRecord],
    distances: &BTreeMap<Link, f64>,
    bw_max: f64,
) -> Result<DomainSnapshot> {
    let mut samples: BTreeMap<(NodeId, NodeId), EdgeSamples> = BTreeMap::new();
    for r in trace {
        match r {
            TraceRecord::Port { from, to, sample, counters } => {
                samples.entry((*from, *to)).or_default().ports.insert(*sample, *counters);
            }
            TraceRecord::Probe { from, to, probe } => {
                samples.entry((*from, *to)).or_default().probe = Some(*probe);
            }
        }
    }
    let edges = owned_edges(net, p, domain);
    let window = |e: &(NodeId, NodeId)| -> Option<(PortCounterSample, PortCounterSample)> {
        let ports = &samples.get(e)?.ports;
        let (first, last) = (ports.first_key_value()?.1, ports.last_key_value()?.1);
        (ports.len() >= 2).then_some((*first, *last))
    };
    let probe = |u: NodeId, v: NodeId| {
        samples.get(&(u, v)).and_then(|s| s.probe).or_else(|| samples.get(&(v, u)).and_then(|s| s.probe))
    };
    let missing: Vec<(NodeId, NodeId)> = edges
        .iter()
        .filter(|(u, v)| {
            window(&(*u, *v)).is_none()
                || window(&(*v, *u)).is_none()
                || probe(*u, *v).is_none()
                || !distances.contains_key(&Link::new(*u, *v))
        })
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSamples(missing));
    }
    let mut metrics = MetricSnapshot::default();
    let mut timestamp = f64::NEG_INFINITY;
    for (u, v) in edges {
        let (s0, s1) = window(&(u, v)).expect("checked");
        let (r0, r1) = window(&(v, u)).expect("checked");
        let (tx, rx) = (s1.delta_since(&s0), r1.delta_since(&r0));
        let (_, bw) = compute_bandwidth(&s0, &s1, bw_max)?;
        timestamp = timestamp.max(s1.t_dur);
        metrics.insert(
            u,
            v,
            EdgeMetrics {
                bw,
                delay: compute_delay(&probe(u, v).expect("checked")),
                loss: compute_loss(&tx, &rx)?,
                err: compute_err(&tx, &rx)?,
                dist: distances[&Link::new(u, v)],
            },
        );
    }
    Ok(DomainSnapshot { domain, timestamp, metrics })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgType {
    TopologySync,
    MetricsSync,
    TreeInstall,
    GroupUpdate,
}

/// One controller-to-controller message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcmMessage {
    pub msg_type: MsgType,
    pub domain: DomainId,
    pub seq: u64,
    pub payload: Value,
}

/// `metrics_sync` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsPayload {
    pub timestamp: f64,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(flatten)]
    pub metrics: EdgeMetrics,
}

/// `topology_sync` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyPayload {
    pub nodes: Vec<NodeId>,
    pub links: Vec<[NodeId; 2]>,
    pub boundary: Vec<NodeId>,
}

/// `group_update` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupPayload {
    pub group: u32,
    pub event: GroupEvent,
}

/// `tree_install` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeInstallPayload {
    pub group: u32,
    pub flows: FlowTables,
}

/// A membership request from a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "node", rename_all = "snake_case")]
pub enum GroupEvent {
    Add(NodeId),
    Leave(NodeId),
}

/// A controller that numbers its own messages.
#[derive(Clone, Debug)]
pub struct Controller {
    domain: DomainId,
    next_seq: BTreeMap<MsgType, u64>,
}

impl Controller {
    pub fn new(domain: DomainId) -> Self {
        Self { domain, next_seq: BTreeMap::new() }
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    fn message(&mut self, msg_type: MsgType, payload: Value) -> CcmMessage {
        let seq = self.next_seq.entry(msg_type).or_insert(1);
        let msg = CcmMessage { msg_type, domain: self.domain, seq: *seq, payload };
        *seq += 1;
        msg
    }

    pub fn metrics_message(&mut self, snap: &DomainSnapshot) -> CcmMessage {
        let payload = MetricsPayload {
            timestamp: snap.timestamp,
            edges: snap.metrics.iter().map(|((u, v), m)| EdgeRecord { from: *u, to: *v, metrics: *m }).collect(),
        };
        self.message(MsgType::MetricsSync, serde_json::to_value(payload).expect("payload serializes"))
    }

    pub fn topology_message(&mut self, net: &Network, p: &DomainPartition) -> CcmMessage {
        let payload = if self.domain == ROOT {
            TopologyPayload {
                nodes: Vec::new(),
                links: p.inter_links().iter().map(|l| [l.a(), l.b()]).collect(),
                boundary: Vec::new(),
            }
        } else {
            TopologyPayload {
                nodes: p.nodes_in(self.domain).to_vec(),
                links: p.intra_links(net, self.domain).map(|l| [l.a(), l.b()]).collect(),
                boundary: p.boundary(self.domain).iter().copied().collect(),
            }
        };
        self.message(MsgType::TopologySync, serde_json::to_value(payload).expect("payload serializes"))
    }

    pub fn group_message(&mut self, group: u32, event: GroupEvent) -> CcmMessage {
        self.message(
            MsgType::GroupUpdate,
            serde_json::to_value(GroupPayload { group, event }).expect("payload serializes"),
        )
    }

    pub fn install_message(&mut self, group: u32, flows: FlowTables) -> CcmMessage {
        self.message(
            MsgType::TreeInstall,
            serde_json::to_value(TreeInstallPayload { group, flows }).expect("payload serializes"),
        )
    }
}

/// Parses and checks the payload of `msg` against its type's schema.
pub fn check_payload(msg: &CcmMessage) -> Result<()> {
    let schema =
        |e: serde_json::Error| Error::Schema(format!("{:?} seq {} from {}: {e}", msg.msg_type, msg.seq, msg.domain));
    match msg.msg_type {
        MsgType::MetricsSync => serde_json::from_value::<MetricsPayload>(msg.payload.clone()).map(drop),
        MsgType::TopologySync => serde_json::from_value::<TopologyPayload>(msg.payload.clone()).map(drop),
        MsgType::GroupUpdate => serde_json::from_value::<GroupPayload>(msg.payload.clone()).map(drop),
        MsgType::TreeInstall => serde_json::from_value::<TreeInstallPayload>(msg.payload.clone()).map(drop),
    }
    .map_err(schema)
}

/// Global network view held by the root controller. Each directed edge keeps
/// the value with the highest sequence number its owner has sent, so merging
/// is idempotent and order-independent.
#[derive(Clone, Debug)]
pub struct RootStore {
    owner: BTreeMap<(NodeId, NodeId), DomainId>,
    edges: BTreeMap<(NodeId, NodeId), (u64, EdgeMetrics)>,
    last_seen: BTreeMap<(DomainId, MsgType), u64>,
    topology: BTreeMap<DomainId, (u64, TopologyPayload)>,
}

impl RootStore {
    pub fn new(net: &Network, p: &DomainPartition) -> Self {
        let owner =
            net.directed_edges().map(|(u, v)| ((u, v), if p.dom(u) == p.dom(v) { p.dom(u) } else { ROOT })).collect();
        Self { owner, edges: BTreeMap::new(), last_seen: BTreeMap::new(), topology: BTreeMap::new() }
    }

    /// Applies one message. Returns whether it changed the store. Edge
    /// values older than what is stored are ignored.
    pub fn apply(&mut self, msg: &CcmMessage) -> Result<bool> {
        check_payload(msg)?;
        let last = self.last_seen.entry((msg.domain, msg.msg_type)).or_insert(0);
        *last = (*last).max(msg.seq);
        match msg.msg_type {
            MsgType::MetricsSync => {
                let payload: MetricsPayload = serde_json::from_value(msg.payload.clone()).expect("checked");
                for r in &payload.edges {
                    match self.owner.get(&(r.from, r.to)) {
                        Some(d) if *d == msg.domain => {}
                        Some(d) => {
                            return Err(Error::Schema(format!(
                                "{} reported edge {}->{} owned by {d}",
                                msg.domain, r.from, r.to
                            )))
                        }
                        None => return Err(Error::MissingEdgeMetric(r.from, r.to)),
                    }
                }
                let mut changed = false;
                for r in payload.edges {
                    let slot = self.edges.get(&(r.from, r.to));
                    if slot.is_none_or(|(seq, _)| msg.seq > *seq) {
                        self.edges.insert((r.from, r.to), (msg.seq, r.metrics));
                        changed = true;
                    }
                }
                Ok(changed)
            }
            MsgType::TopologySync => {
                let payload: TopologyPayload = serde_json::from_value(msg.payload.clone()).expect("checked");
                if self.topology.get(&msg.domain).is_none_or(|(seq, _)| msg.seq > *seq) {
                    self.topology.insert(msg.domain, (msg.seq, payload));
                    return Ok(true);
                }
                Ok(false)
            }
            MsgType::GroupUpdate | MsgType::TreeInstall => Ok(false),
        }
    }

    /// Copy of the merged global snapshot.
    pub fn snapshot(&self) -> MetricSnapshot {
        let mut out = MetricSnapshot::default();
        for ((u, v), (_, m)) in &self.edges {
            out.insert(*u, *v, *m);
        }
        out
    }

    /// Directed edges with no metric yet.
    pub fn missing(&self) -> Vec<(NodeId, NodeId)> {
        self.owner.keys().filter(|e| !self.edges.contains_key(e)).copied().collect()
    }

    pub fn last_seq(&self, domain: DomainId, msg_type: MsgType) -> Option<u64> {
        self.last_seen.get(&(domain, msg_type)).copied()
    }

    pub fn domains_synced(&self) -> BTreeSet<DomainId> {
        self.topology.keys().copied().collect()
    }
}

/// Merges `messages` into `store` in the given order.
pub fn sync_to_root(store: &mut RootStore, messages: &[CcmMessage]) -> Result<()> {
    for m in messages {
        store.apply(m)?;
    }
    Ok(())
}

/// In-process message log with JSON-lines record and replay.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageBus {
    log: Vec<CcmMessage>,
}

impl MessageBus {
    pub fn send(&mut self, msg: CcmMessage) {
        self.log.push(msg);
    }

    pub fn messages(&self) -> &[CcmMessage] {
        &self.log
    }

    pub fn to_jsonl(&self) -> String {
        self.log.iter().map(|m| serde_json::to_string(m).expect("message serializes") + "\n").collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let log = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("message line {}: {e}", i + 1))))
            .collect::<Result<Vec<CcmMessage>>>()?;
        Ok(Self { log })
    }
}

/// Runs every local controller and the root controller over one trace and
/// returns the merged global snapshot.
pub fn gather_global_snapshot(
    net: &Network,
    p: &DomainPartition,
    trace: &[TraceRecord],
    distances: &BTreeMap<Link, f64>,
    bw_max: f64,
    bus: &mut MessageBus,
) -> Result<MetricSnapshot> {
    let mut store = RootStore::new(net, p);
    for d in std::iter::once(ROOT).chain(p.domains()) {
        let mut ctl = Controller::new(d);
        bus.send(ctl.topology_message(net, p));
        let snap = collect_domain_snapshot(net, p, d, trace, distances, bw_max)?;
        bus.send(ctl.metrics_message(&snap));
    }
    sync_to_root(&mut store, bus.messages())?;
    let missing = store.missing();
    if !missing.is_empty() {
        return Err(Error::MissingSamples(missing));
    }
    Ok(store.snapshot())
}

/// Forwarding entry of one node for one group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub group: u32,
    #[serde(rename = "in")]
    pub in_node: Option<NodeId>,
    pub out: Vec<NodeId>,
    /// Hand a copy to the local host (the node is an online destination).
    #[serde(default)]
    pub local: bool,
}

pub type FlowTables = BTreeMap<NodeId, Vec<FlowEntry>>;

/// Compiles a valid tree to one entry per tree node: parent as the input,
/// children as outputs, local delivery on online destinations.
pub fn install_tree(t: &CrossDomainTree, g: &MulticastGroup, p: &DomainPartition, group: u32) -> Result<FlowTables> {
    let violations = validate(t, g, p);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidTree(v.to_string()));
    }
    let parents = t.parents();
    let children = t.children();
    Ok(parents
        .iter()
        .map(|(v, par)| {
            let out = children.get(v).cloned().unwrap_or_default();
            (*v, vec![FlowEntry { group, in_node: *par, out, local: g.is_online(*v) }])
        })
        .collect())
}

/// Nodes a packet from `src` reaches by following the group's out lists.
pub fn forward_simulate(tables: &FlowTables, src: NodeId, group: u32) -> BTreeSet<NodeId> {
    let mut reached = BTreeSet::from([src]);
    let mut stack = vec![src];
    while let Some(u) = stack.pop() {
        for e in tables.get(&u).into_iter().flatten().filter(|e| e.group == group) {
            for &v in &e.out {
                if reached.insert(v) {
                    stack.push(v);
                }
            }
        }
    }
    reached
}

/// Reached nodes whose entry hands the packet to the local host.
pub fn delivered_to(tables: &FlowTables, src: NodeId, group: u32) -> BTreeSet<NodeId> {
    forward_simulate(tables, src, group)
        .into_iter()
        .filter(|v| tables.get(v).into_iter().flatten().any(|e| e.group == group && e.local))
        .collect()
}

/// Flow changes needed to move from one installed table to another.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowDelta {
    pub install: BTreeMap<NodeId, Vec<FlowEntry>>,
    pub remove: BTreeSet<NodeId>,
}

impl FlowDelta {
    pub fn between(old: &FlowTables, new: &FlowTables) -> Self {
        let install = new.iter().filter(|(v, e)| old.get(v) != Some(e)).map(|(v, e)| (*v, e.clone())).collect();
        let remove = old.keys().filter(|v| !new.contains_key(v)).copied().collect();
        Self { install, remove }
    }

    pub fn is_empty(&self) -> bool {
        self.install.is_empty() && self.remove.is_empty()
    }
}

/// Domains holding the source and each destination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupDomains {
    pub source: DomainId,
    pub dests: BTreeMap<DomainId, BTreeSet<NodeId>>,
}

impl GroupDomains {
    pub fn is_single_domain(&self) -> bool {
        self.dests.keys().all(|d| *d == self.source)
    }
}

pub fn locate_group_domains(g: &MulticastGroup, p: &DomainPartition) -> GroupDomains {
    let mut dests: BTreeMap<DomainId, BTreeSet<NodeId>> = BTreeMap::new();
    for v in g.dests() {
        dests.entry(p.dom(v)).or_default().insert(v);
    }
    GroupDomains { source: p.dom(g.src()), dests }
}

/// Minimum-cost path from `v` to the tree that keeps the domain structure
/// valid: inside `v`'s domain when that domain already holds tree nodes,
/// otherwise through domains the tree does not touch yet, ending in the
/// first tree node reached. Returned from the tree node to `v`.
fn graft_path(
    net: &Network,
    p: &DomainPartition,
    graph: &WeightedGraph,
    tree_nodes: &BTreeSet<NodeId>,
    v: NodeId,
) -> Result<Vec<NodeId>> {
    let dv = p.dom(v);
    if tree_nodes.iter().any(|x| p.dom(*x) == dv) {
        let local: BTreeSet<NodeId> = p.nodes_in(dv).iter().copied().collect();
        let restricted = WeightedGraph::new(
            graph.node_count(),
            graph.links().filter(|(l, _)| local.contains(&l.a()) && local.contains(&l.b())).map(|(l, w)| (*l, *w)),
        )?;
        let sp = dijkstra_from(&restricted, tree_nodes.iter().copied().filter(|x| p.dom(*x) == dv));
        let hops = sp.path_to(v).ok_or(Error::Unreachable(v))?;
        let cut = hops.iter().rposition(|x| tree_nodes.contains(x)).expect("path starts in the tree");
        return Ok(hops[cut..].to_vec());
    }
    if p.domain_count() > 63 {
        return Err(Error::InstanceTooLarge(format!("{} domains", p.domain_count())));
    }
    let tree_domains: BTreeSet<DomainId> = tree_nodes.iter().map(|x| p.dom(*x)).collect();
    let bit = |d: DomainId| 1u64 << (d.0 - 1);
    // Dijkstra over (node, domains entered) from v outward.
    type State = (NodeId, u64);
    let start: State = (v, bit(dv));
    let mut dist: BTreeMap<State, f64> = BTreeMap::from([(start, 0.0)]);
    let mut prev: BTreeMap<State, State> = BTreeMap::new();
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(std::cmp::Reverse(Ordered(0.0, start)));
    while let Some(std::cmp::Reverse(Ordered(d, s))) = heap.pop() {
        if dist.get(&s).is_some_and(|best| d > *best) {
            continue;
        }
        let (u, mask) = s;
        if tree_nodes.contains(&u) {
            let mut hops = vec![u];
            let mut cur = s;
            while let Some(q) = prev.get(&cur) {
                hops.push(q.0);
                cur = *q;
            }
            return Ok(hops);
        }
        let du = p.dom(u);
        for &x in net.neighbors(u) {
            let dx = p.dom(x);
            let next_mask = if dx == du {
                mask
            } else if tree_domains.contains(&du) || mask & bit(dx) != 0 {
                continue;
            } else {
                mask | bit(dx)
            };
            let w = graph.weight(&Link::new(u, x)).ok_or(Error::MissingEdgeMetric(u, x))?;
            let ns = (x, next_mask);
            if dist.get(&ns).is_none_or(|best| d + w < *best) {
                dist.insert(ns, d + w);
                prev.insert(ns, s);
                heap.push(std::cmp::Reverse(Ordered(d + w, ns)));
            }
        }
    }
    Err(Error::Unreachable(v))
}

#[derive(Clone, Copy, PartialEq)]
struct Ordered(f64, (NodeId, u64));

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Result of a membership change.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipChange {
    pub tree: CrossDomainTree,
    /// Links added (join) or removed (leave).
    pub links: BTreeSet<Link>,
    pub delta: FlowDelta,
}

/// Marks `v` online and grafts the cheapest structurally valid path from
/// `v` to the tree.
#[allow(clippy::too_many_arguments)]
pub fn mgm_join(
    net: &Network,
    p: &DomainPartition,
    tree: &CrossDomainTree,
    g: &mut MulticastGroup,
    v: NodeId,
    snap: &NormalizedSnapshot,
    w: &CostWeights,
    group_id: u32,
) -> Result<MembershipChange> {
    if v >= net.node_count() {
        return Err(Error::UnknownNode(v));
    }
    if v == g.src() || g.is_online(v) {
        return Err(Error::AlreadyMember(v));
    }
    let old_tables = install_tree(tree, g, p, group_id).ok();
    let tree_nodes = tree.nodes();
    let added: BTreeSet<Link> = if tree_nodes.contains(&v) {
        BTreeSet::new()
    } else {
        let graph = WeightedGraph::from_network(net, &edge_weights(snap, w))?;
        let hops = graft_path(net, p, &graph, &tree_nodes, v)?;
        hops.windows(2).map(|h| Link::new(h[0], h[1])).collect()
    };
    let new_tree = CrossDomainTree::from_flat(tree.src(), tree.links().iter().chain(&added).copied(), p)?;
    g.set_online(v, true);
    let new_tables = install_tree(&new_tree, g, p, group_id)?;
    let delta = FlowDelta::between(&old_tables.unwrap_or_default(), &new_tables);
    Ok(MembershipChange { tree: new_tree, links: added, delta })
}

/// Marks `v` offline and prunes the branch that only served it.
pub fn mgm_leave(
    p: &DomainPartition,
    tree: &CrossDomainTree,
    g: &mut MulticastGroup,
    v: NodeId,
    group_id: u32,
) -> Result<MembershipChange> {
    if !g.is_online(v) {
        return Err(Error::NotMember(v));
    }
    let old_tables = install_tree(tree, g, p, group_id).ok();
    g.set_online(v, false);
    let mut links = tree.links().clone();
    let mut removed = BTreeSet::new();
    let mut cur = v;
    loop {
        if cur == tree.src() || g.is_online(cur) {
            break;
        }
        let incident: Vec<Link> = links.iter().filter(|l| l.contains(cur)).copied().collect();
        if incident.len() != 1 {
            break;
        }
        links.remove(&incident[0]);
        removed.insert(incident[0]);
        cur = incident[0].other(cur);
    }
    let new_tree = CrossDomainTree::from_flat(tree.src(), links, p)?;
    let new_tables = install_tree(&new_tree, g, p, group_id)?;
    let delta = FlowDelta::between(&old_tables.unwrap_or_default(), &new_tables);
    Ok(MembershipChange { tree: new_tree, links: removed, delta })
}

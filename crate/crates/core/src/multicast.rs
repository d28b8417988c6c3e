//! Multicast tree model: paths, composite costs, inter/intra-domain
//! decomposition and structural validation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::group::MulticastGroup;
use crate::link_metrics::{EdgeMetrics, NormalizedSnapshot};
use crate::topology::{DomainId, DomainPartition, Link, NodeId};
use crate::{Error, Result};

/// Weights of the composite cost: bandwidth, delay, loss, error, distance.
/// Serialized as a five-element array in that order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 5]", into = "[f64; 5]")]
pub struct CostWeights {
    pub bw: f64,
    pub delay: f64,
    pub loss: f64,
    pub err: f64,
    pub dist: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { bw: 0.7, delay: 0.3, loss: 0.1, err: 0.1, dist: 0.1 }
    }
}

impl From<[f64; 5]> for CostWeights {
    fn from(b: [f64; 5]) -> Self {
        Self { bw: b[0], delay: b[1], loss: b[2], err: b[3], dist: b[4] }
    }
}

impl From<CostWeights> for [f64; 5] {
    fn from(w: CostWeights) -> Self {
        [w.bw, w.delay, w.loss, w.err, w.dist]
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all: [f64; 5] = (*self).into();
        if all.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidParams(format!("cost weights must be finite and nonnegative: {all:?}")));
        }
        if all.iter().all(|b| *b == 0.0) {
            return Err(Error::InvalidParams("cost weights are all zero".into()));
        }
        Ok(())
    }

    /// Sum of all weights: the cost of the worst possible single edge.
    pub fn total(&self) -> f64 {
        self.bw + self.delay + self.loss + self.err + self.dist
    }

    /// Composite cost of one edge on normalized metrics.
    pub fn edge_cost(&self, m: &EdgeMetrics) -> f64 {
        path_cost(&PathMetrics::from(*m), self)
    }
}

/// A simple path given as its node sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path(Vec<NodeId>);

impl Path {
    pub fn new(nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTree("empty path".into()));
        }
        let mut seen = BTreeSet::new();
        if let Some(v) = nodes.iter().find(|v| !seen.insert(**v)) {
            return Err(Error::InvalidTree(format!("path repeats node {v}")));
        }
        Ok(Self(nodes))
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn first(&self) -> NodeId {
        self.0[0]
    }

    pub fn last(&self) -> NodeId {
        self.0[self.0.len() - 1]
    }

    /// Directed edges in travel order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    /// Number of edges.
    pub fn hop_count(&self) -> usize {
        self.0.len() - 1
    }
}

/// Aggregated metrics of a path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub bw: f64,
    pub delay: f64,
    pub loss: f64,
    pub err: f64,
    pub dist: f64,
}

impl From<EdgeMetrics> for PathMetrics {
    fn from(m: EdgeMetrics) -> Self {
        Self { bw: m.bw, delay: m.delay, loss: m.loss, err: m.err, dist: m.dist }
    }
}

/// Bottleneck bandwidth, summed delay, complement-product loss and error,
/// mean distance. An empty sequence yields an ideal path (bottleneck 1 on
/// the normalized scale, zero elsewhere).
pub fn aggregate<'a>(edges: impl IntoIterator<Item = &'a EdgeMetrics>) -> PathMetrics {
    let mut out = PathMetrics { bw: f64::INFINITY, delay: 0.0, loss: 0.0, err: 0.0, dist: 0.0 };
    let mut count = 0usize;
    for m in edges {
        out.bw = out.bw.min(m.bw);
        out.delay += m.delay;
        // 1 - (1 - a)(1 - b), kept exact for a single edge.
        out.loss += m.loss - out.loss * m.loss;
        out.err += m.err - out.err * m.err;
        out.dist += m.dist;
        count += 1;
    }
    if count == 0 {
        out.bw = 1.0;
        return out;
    }
    out.dist /= count as f64;
    out
}

/// Metrics of `p` traversed in its own direction.
pub fn path_metrics(p: &Path, snap: &NormalizedSnapshot) -> Result<PathMetrics> {
    let edges =
        p.edges().map(|(u, v)| snap.get(u, v).ok_or(Error::MissingEdgeMetric(u, v))).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(edges))
}

pub fn path_cost(m: &PathMetrics, w: &CostWeights) -> f64 {
    w.bw * (1.0 - m.bw) + w.delay * m.delay + w.loss * m.loss + w.err * m.err + w.dist * m.dist
}

/// Inter-domain edge set connecting the source domain to the destination
/// domains.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterdomainTree {
    pub edges: BTreeSet<Link>,
}

/// Edges of one domain plus the node the domain is entered from (the source
/// or an entry boundary node). May be a forest when built from a flawed
/// tree; [`validate`] reports that.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntradomainTree {
    pub domain: DomainId,
    pub root: NodeId,
    pub edges: BTreeSet<Link>,
}

impl IntradomainTree {
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        std::iter::once(self.root).chain(self.edges.iter().flat_map(|l| [l.a(), l.b()])).collect()
    }
}

/// A cross-domain multicast tree kept both as its decomposition and as the
/// flat edge union.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossDomainTree {
    src: NodeId,
    inter: InterdomainTree,
    intra: Vec<IntradomainTree>,
    flat: BTreeSet<Link>,
}

impl CrossDomainTree {
    /// Builds the decomposed form of a flat edge set rooted at `src`.
    pub fn from_flat(src: NodeId, links: impl IntoIterator<Item = Link>, p: &DomainPartition) -> Result<Self> {
        let flat: BTreeSet<Link> = links.into_iter().collect();
        for l in &flat {
            p.domain_of(l.a())?;
            p.domain_of(l.b())?;
        }
        p.domain_of(src)?;
        let depth = bfs_depth(src, &flat);
        let mut inter = InterdomainTree::default();
        let mut per_domain: BTreeMap<DomainId, BTreeSet<Link>> = BTreeMap::new();
        let mut nodes_by_domain: BTreeMap<DomainId, BTreeSet<NodeId>> = BTreeMap::new();
        nodes_by_domain.entry(p.dom(src)).or_default().insert(src);
        for l in &flat {
            let (da, db) = (p.dom(l.a()), p.dom(l.b()));
            nodes_by_domain.entry(da).or_default().insert(l.a());
            nodes_by_domain.entry(db).or_default().insert(l.b());
            if da == db {
                per_domain.entry(da).or_default().insert(*l);
            } else {
                inter.edges.insert(*l);
            }
        }
        let intra = nodes_by_domain
            .into_iter()
            .map(|(d, nodes)| {
                let root = if p.dom(src) == d {
                    src
                } else {
                    *nodes
                        .iter()
                        .min_by_key(|v| (depth.get(*v).copied().unwrap_or(usize::MAX), **v))
                        .expect("domain entry has nodes")
                };
                IntradomainTree { domain: d, root, edges: per_domain.remove(&d).unwrap_or_default() }
            })
            .collect();
        Ok(Self { src, inter, intra, flat })
    }

    /// A tree holding only the source.
    pub fn source_only(src: NodeId, p: &DomainPartition) -> Result<Self> {
        Self::from_flat(src, [], p)
    }

    pub fn src(&self) -> NodeId {
        self.src
    }

    pub fn inter(&self) -> &InterdomainTree {
        &self.inter
    }

    pub fn intra(&self) -> &[IntradomainTree] {
        &self.intra
    }

    pub fn intra_for(&self, d: DomainId) -> Option<&IntradomainTree> {
        self.intra.iter().find(|t| t.domain == d)
    }

    pub fn links(&self) -> &BTreeSet<Link> {
        &self.flat
    }

    pub fn edge_count(&self) -> usize {
        self.flat.len()
    }

    /// The source plus every edge endpoint.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        std::iter::once(self.src).chain(self.flat.iter().flat_map(|l| [l.a(), l.b()])).collect()
    }

    pub fn contains_node(&self, v: NodeId) -> bool {
        v == self.src || self.flat.iter().any(|l| l.contains(v))
    }

    /// Parent of each node reachable from the source (BFS over the flat
    /// edges, smallest neighbor first); the source maps to `None`.
    pub fn parents(&self) -> BTreeMap<NodeId, Option<NodeId>> {
        let adj = adjacency(&self.flat);
        let mut parent = BTreeMap::from([(self.src, None)]);
        let mut queue = VecDeque::from([self.src]);
        while let Some(u) = queue.pop_front() {
            for &v in adj.get(&u).into_iter().flatten() {
                if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(v) {
                    e.insert(Some(u));
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    /// Children lists keyed by node, derived from [`Self::parents`].
    pub fn children(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (v, p) in self.parents() {
            out.entry(v).or_default();
            if let Some(p) = p {
                out.entry(p).or_default().push(v);
            }
        }
        out
    }

    /// The tree path from the source to `v`.
    pub fn path_to(&self, v: NodeId) -> Result<Path> {
        let parents = self.parents();
        path_from_parents(&parents, v)
    }
}

fn path_from_parents(parents: &BTreeMap<NodeId, Option<NodeId>>, v: NodeId) -> Result<Path> {
    let mut hops = vec![v];
    let mut cur = *parents.get(&v).ok_or(Error::Unreachable(v))?;
    while let Some(u) = cur {
        hops.push(u);
        cur = parents[&u];
    }
    hops.reverse();
    Path::new(hops)
}

fn adjacency(links: &BTreeSet<Link>) -> BTreeMap<NodeId, Vec<NodeId>> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for l in links {
        adj.entry(l.a()).or_default().push(l.b());
        adj.entry(l.b()).or_default().push(l.a());
    }
    for a in adj.values_mut() {
        a.sort_unstable();
    }
    adj
}

fn bfs_depth(src: NodeId, links: &BTreeSet<Link>) -> BTreeMap<NodeId, usize> {
    let adj = adjacency(links);
    let mut depth = BTreeMap::from([(src, 0)]);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = depth[&u];
        for &v in adj.get(&u).into_iter().flatten() {
            depth.entry(v).or_insert_with(|| {
                queue.push_back(v);
                du + 1
            });
        }
    }
    depth
}

pub fn decompose(t: &CrossDomainTree) -> (InterdomainTree, Vec<IntradomainTree>) {
    (t.inter.clone(), t.intra.clone())
}

/// Flat union of an inter-domain tree and per-domain trees. Every boundary
/// node used by an inter-domain edge must appear in some per-domain tree.
pub fn compose(src: NodeId, ti: InterdomainTree, mut ts: Vec<IntradomainTree>) -> Result<CrossDomainTree> {
    let covered: BTreeSet<NodeId> = ts.iter().flat_map(|t| t.nodes()).collect();
    for l in &ti.edges {
        for v in [l.a(), l.b()] {
            if !covered.contains(&v) {
                return Err(Error::DanglingBoundaryNode(v));
            }
        }
    }
    if !covered.contains(&src) {
        return Err(Error::DanglingBoundaryNode(src));
    }
    ts.sort_by_key(|t| t.domain);
    let flat = ti.edges.iter().chain(ts.iter().flat_map(|t| t.edges.iter())).copied().collect();
    Ok(CrossDomainTree { src, inter: ti, intra: ts, flat })
}

/// Tree path from the source to every online destination.
pub fn extract_paths(t: &CrossDomainTree, g: &MulticastGroup) -> Result<BTreeMap<NodeId, Path>> {
    let parents = t.parents();
    g.online_dests().into_iter().map(|d| Ok((d, path_from_parents(&parents, d)?))).collect()
}

/// Sum of composite path costs from the source to each online destination.
pub fn tree_cost_endtoend(
    t: &CrossDomainTree,
    g: &MulticastGroup,
    snap: &NormalizedSnapshot,
    w: &CostWeights,
) -> Result<f64> {
    extract_paths(t, g)?.values().map(|p| Ok(path_cost(&path_metrics(p, snap)?, w))).sum()
}

/// Per-domain and inter-domain cost parts of a tree.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedCost {
    pub per_domain: BTreeMap<DomainId, f64>,
    pub inter: f64,
    pub total: f64,
}

/// Domain-level view of a tree: each domain's parent domain and the
/// inter-domain edge (oriented away from the source) used to enter it.
fn domain_entries(t: &CrossDomainTree, p: &DomainPartition) -> BTreeMap<DomainId, (NodeId, NodeId)> {
    let parents = t.parents();
    let mut entries = BTreeMap::new();
    for (v, par) in &parents {
        if let Some(u) = par {
            if p.dom(*u) != p.dom(*v) {
                entries.entry(p.dom(*v)).or_insert((*u, *v));
            }
        }
    }
    entries
}

/// Cost of each per-domain tree (paths from its root to its online
/// destinations and exit boundary nodes) plus the inter-domain cost (paths of
/// inter-domain edges from the source domain to each destination domain).
pub fn tree_cost_decomposed(
    t: &CrossDomainTree,
    g: &MulticastGroup,
    p: &DomainPartition,
    snap: &NormalizedSnapshot,
    w: &CostWeights,
) -> Result<DecomposedCost> {
    let parents = t.parents();
    let online = g.online_dests();
    let mut per_domain = BTreeMap::new();
    for ti in &t.intra {
        let mut targets: BTreeSet<NodeId> = online.iter().copied().filter(|v| p.dom(*v) == ti.domain).collect();
        for l in &t.inter.edges {
            for (u, v) in [(l.a(), l.b()), (l.b(), l.a())] {
                if p.dom(u) == ti.domain && parents.get(&v) == Some(&Some(u)) {
                    targets.insert(u);
                }
            }
        }
        let mut c = 0.0;
        for target in targets {
            let mut hops = vec![target];
            let mut cur = target;
            while cur != ti.root {
                cur = parents.get(&cur).copied().flatten().filter(|u| p.dom(*u) == ti.domain).ok_or_else(|| {
                    Error::InvalidTree(format!("{target} is not below root {} in {}", ti.root, ti.domain))
                })?;
                hops.push(cur);
            }
            hops.reverse();
            c += path_cost(&path_metrics(&Path::new(hops)?, snap)?, w);
        }
        per_domain.insert(ti.domain, c);
    }
    let inter = inter_cost(t, g, p, snap, w)?;
    let total = per_domain.values().sum::<f64>() + inter;
    Ok(DecomposedCost { per_domain, inter, total })
}

/// Inter-domain edges (oriented away from the source) on the domain-level
/// path from the source domain to `d`.
pub fn inter_edges_to(t: &CrossDomainTree, p: &DomainPartition, d: DomainId) -> Result<Vec<(NodeId, NodeId)>> {
    let entries = domain_entries(t, p);
    let src_domain = p.dom(t.src);
    let mut seq = Vec::new();
    let mut cur = d;
    while cur != src_domain {
        let (u, v) = *entries.get(&cur).ok_or_else(|| Error::InvalidTree(format!("domain {cur} is not reached")))?;
        seq.push((u, v));
        cur = p.dom(u);
        if seq.len() > p.domain_count() {
            return Err(Error::InvalidTree("domain-level loop".into()));
        }
    }
    seq.reverse();
    Ok(seq)
}

fn inter_cost(
    t: &CrossDomainTree,
    g: &MulticastGroup,
    p: &DomainPartition,
    snap: &NormalizedSnapshot,
    w: &CostWeights,
) -> Result<f64> {
    let src_domain = p.dom(t.src);
    let dest_domains: BTreeSet<DomainId> =
        g.online_dests().into_iter().map(|v| p.dom(v)).filter(|d| *d != src_domain).collect();
    let mut total = 0.0;
    for d in dest_domains {
        let edges = inter_edges_to(t, p, d)?
            .into_iter()
            .map(|(u, v)| snap.get(u, v).ok_or(Error::MissingEdgeMetric(u, v)))
            .collect::<Result<Vec<_>>>()?;
        total += path_cost(&aggregate(edges), w);
    }
    Ok(total)
}

/// Domain sequence of each online destination's tree path, consecutive
/// repeats collapsed.
pub fn interdomain_paths(
    t: &CrossDomainTree,
    g: &MulticastGroup,
    p: &DomainPartition,
) -> Result<BTreeMap<NodeId, Vec<DomainId>>> {
    Ok(extract_paths(t, g)?.into_iter().map(|(d, path)| (d, domain_sequence(&path, p))).collect())
}

pub fn domain_sequence(path: &Path, p: &DomainPartition) -> Vec<DomainId> {
    let mut seq: Vec<DomainId> = path.nodes().iter().map(|v| p.dom(*v)).collect();
    seq.dedup();
    seq
}

/// One structural defect found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The edges reachable from the source contain a cycle.
    Cycle,
    /// An edge endpoint that the source cannot reach.
    Detached(NodeId),
    /// An online destination missing from the tree.
    Uncovered(NodeId),
    /// A destination whose path re-enters a domain.
    DomainLoop { dest: NodeId, domains: Vec<DomainId> },
    /// Two destinations of one domain reached through different domain
    /// sequences.
    SplitDomainPaths { domain: DomainId, first: NodeId, second: NodeId },
    /// A domain whose tree nodes form more than one component.
    DomainForest { domain: DomainId, components: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle => write!(f, "tree contains a cycle"),
            Violation::Detached(v) => write!(f, "node {v} is not connected to the source"),
            Violation::Uncovered(v) => write!(f, "online destination {v} is not covered"),
            Violation::DomainLoop { dest, domains } => write!(f, "path to {dest} revisits a domain: {domains:?}"),
            Violation::SplitDomainPaths { domain, first, second } => {
                write!(f, "destinations {first} and {second} of {domain} use different domain paths")
            }
            Violation::DomainForest { domain, components } => {
                write!(f, "{domain} holds {components} disjoint subtrees")
            }
        }
    }
}

/// All structural violations of `t` for group `g`; empty means valid.
pub fn validate(t: &CrossDomainTree, g: &MulticastGroup, p: &DomainPartition) -> Vec<Violation> {
    let mut out = Vec::new();
    let parents = t.parents();
    let nodes = t.nodes();
    let reached_edges = t.flat.iter().filter(|l| parents.contains_key(&l.a())).count();
    if reached_edges + 1 != parents.len() {
        out.push(Violation::Cycle);
    }
    out.extend(nodes.iter().filter(|v| !parents.contains_key(v)).map(|v| Violation::Detached(*v)));

    let mut first_seq: BTreeMap<DomainId, (NodeId, Vec<DomainId>)> = BTreeMap::new();
    for d in g.online_dests() {
        let Ok(path) = path_from_parents(&parents, d) else {
            out.push(Violation::Uncovered(d));
            continue;
        };
        let seq = domain_sequence(&path, p);
        let distinct: BTreeSet<DomainId> = seq.iter().copied().collect();
        if distinct.len() != seq.len() {
            out.push(Violation::DomainLoop { dest: d, domains: seq.clone() });
        }
        match first_seq.get(&p.dom(d)) {
            Some((other, s)) if *s != seq => {
                out.push(Violation::SplitDomainPaths { domain: p.dom(d), first: *other, second: d });
            }
            Some(_) => {}
            None => {
                first_seq.insert(p.dom(d), (d, seq));
            }
        }
    }

    let mut by_domain: BTreeMap<DomainId, BTreeSet<NodeId>> = BTreeMap::new();
    for v in &nodes {
        by_domain.entry(p.dom(*v)).or_default().insert(*v);
    }
    for (d, members) in by_domain {
        let intra: BTreeSet<Link> = t.flat.iter().filter(|l| p.dom(l.a()) == d && p.dom(l.b()) == d).copied().collect();
        let components = count_components(&members, &intra);
        if components > 1 {
            out.push(Violation::DomainForest { domain: d, components });
        }
    }
    out
}

fn count_components(nodes: &BTreeSet<NodeId>, links: &BTreeSet<Link>) -> usize {
    let adj = adjacency(links);
    let mut seen = BTreeSet::new();
    let mut count = 0;
    for &start in nodes {
        if !seen.insert(start) {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in adj.get(&u).into_iter().flatten() {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// JSON form of a tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub src: NodeId,
    pub dests: Vec<NodeId>,
    pub inter_edges: Vec<[NodeId; 2]>,
    pub intra: Vec<IntraFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntraFile {
    pub domain: DomainId,
    pub root: NodeId,
    pub edges: Vec<[NodeId; 2]>,
}

fn link_pairs(links: &BTreeSet<Link>) -> Vec<[NodeId; 2]> {
    links.iter().map(|l| [l.a(), l.b()]).collect()
}

fn pair_links(pairs: &[[NodeId; 2]]) -> Result<BTreeSet<Link>> {
    pairs.iter().map(|[u, v]| if u == v { Err(Error::SelfLoop(*u)) } else { Ok(Link::new(*u, *v)) }).collect()
}

impl TreeFile {
    pub fn from_tree(t: &CrossDomainTree, g: &MulticastGroup) -> Self {
        Self {
            src: t.src,
            dests: g.online_dests().into_iter().collect(),
            inter_edges: link_pairs(&t.inter.edges),
            intra: t
                .intra
                .iter()
                .map(|ti| IntraFile { domain: ti.domain, root: ti.root, edges: link_pairs(&ti.edges) })
                .collect(),
        }
    }

    pub fn to_tree(&self) -> Result<CrossDomainTree> {
        let intra = self
            .intra
            .iter()
            .map(|f| Ok(IntradomainTree { domain: f.domain, root: f.root, edges: pair_links(&f.edges)? }))
            .collect::<Result<Vec<_>>>()?;
        compose(self.src, InterdomainTree { edges: pair_links(&self.inter_edges)? }, intra)
    }
}

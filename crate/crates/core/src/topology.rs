//! Multi-domain network graph: nodes with planar coordinates, undirected
//! links, the domain partition with its boundary nodes, and a seeded
//! synthetic topology generator.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::group::MulticastGroup;
use crate::link_metrics::{distance, normalize, EdgeMetrics, MetricSnapshot, NormalizedSnapshot};
use crate::multicast::{path_cost, path_metrics, CostWeights, Path};
use crate::{Error, Result};

/// Dense 0-based node index.
pub type NodeId = usize;

/// Control domain identifier, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub u32);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.0)
    }
}

/// Position of an access point in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Undirected link stored with the smaller endpoint first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link(NodeId, NodeId);

impl Link {
    /// Panics on a self-loop.
    pub fn new(u: NodeId, v: NodeId) -> Self {
        assert_ne!(u, v, "self-loop {u}-{v}");
        if u < v {
            Link(u, v)
        } else {
            Link(v, u)
        }
    }

    pub fn a(&self) -> NodeId {
        self.0
    }

    pub fn b(&self) -> NodeId {
        self.1
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0 == v || self.1 == v
    }

    /// The endpoint opposite to `v`.
    pub fn other(&self, v: NodeId) -> NodeId {
        if self.0 == v {
            self.1
        } else {
            self.0
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Connected undirected graph with coordinates. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    coords: Vec<Point>,
    links: BTreeSet<Link>,
    adj: Vec<Vec<NodeId>>,
}

impl Network {
    pub fn new(coords: Vec<Point>, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let n = coords.len();
        let mut links = BTreeSet::new();
        for (u, v) in edges {
            if u >= n {
                return Err(Error::UnknownNode(u));
            }
            if v >= n {
                return Err(Error::UnknownNode(v));
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            let link = Link::new(u, v);
            if !links.insert(link) {
                return Err(Error::DuplicateEdge(link));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for l in &links {
            adj[l.a()].push(l.b());
            adj[l.b()].push(l.a());
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let net = Self { coords, links, adj };
        if n > 0 {
            let seen = bfs_within(&net, 0, |_| true);
            if let Some(v) = (0..n).find(|v| !seen.contains(v)) {
                return Err(Error::Disconnected(v));
            }
        }
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.coords.len()
    }

    pub fn links(&self) -> &BTreeSet<Link> {
        &self.links
    }

    /// Both orientations of every link.
    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.links.iter().flat_map(|l| [(l.a(), l.b()), (l.b(), l.a())])
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn has_link(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.links.contains(&Link::new(u, v))
    }

    pub fn coord(&self, v: NodeId) -> Point {
        self.coords[v]
    }
}

/// BFS from `start` restricted to nodes accepted by `allow`.
fn bfs_within(net: &Network, start: NodeId, allow: impl Fn(NodeId) -> bool) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in net.neighbors(u) {
            if allow(v) && seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Assignment of nodes to control domains plus the derived boundary-node and
/// inter-domain link sets.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPartition {
    assignment: Vec<DomainId>,
    members: BTreeMap<DomainId, Vec<NodeId>>,
    boundary: BTreeMap<DomainId, BTreeSet<NodeId>>,
    inter_links: BTreeSet<Link>,
}

impl DomainPartition {
    /// Validates that domains are numbered `1..=m` without gaps and that each
    /// domain's induced subgraph is connected.
    pub fn new(net: &Network, assignment: Vec<DomainId>) -> Result<Self> {
        if assignment.len() != net.node_count() {
            return Err(Error::UnassignedNode(assignment.len().min(net.node_count())));
        }
        let mut members: BTreeMap<DomainId, Vec<NodeId>> = BTreeMap::new();
        for (v, d) in assignment.iter().enumerate() {
            if d.0 == 0 {
                return Err(Error::InvalidDomain(0));
            }
            members.entry(*d).or_default().push(v);
        }
        let m = members.keys().last().map_or(0, |d| d.0);
        for i in 1..=m {
            if !members.contains_key(&DomainId(i)) {
                return Err(Error::EmptyDomain(DomainId(i)));
            }
        }
        for (d, nodes) in &members {
            let seen = bfs_within(net, nodes[0], |v| assignment[v] == *d);
            if let Some(&v) = nodes.iter().find(|v| !seen.contains(v)) {
                return Err(Error::DomainDisconnected { domain: *d, node: v });
            }
        }
        let mut boundary: BTreeMap<DomainId, BTreeSet<NodeId>> =
            members.keys().map(|d| (*d, BTreeSet::new())).collect();
        let mut inter_links = BTreeSet::new();
        for l in net.links() {
            let (da, db) = (assignment[l.a()], assignment[l.b()]);
            if da != db {
                inter_links.insert(*l);
                boundary.get_mut(&da).unwrap().insert(l.a());
                boundary.get_mut(&db).unwrap().insert(l.b());
            }
        }
        Ok(Self { assignment, members, boundary, inter_links })
    }

    /// Single-domain partition of the whole network.
    pub fn single(net: &Network) -> Self {
        Self::new(net, vec![DomainId(1); net.node_count()]).expect("connected network")
    }

    pub fn domain_count(&self) -> usize {
        self.members.len()
    }

    pub fn domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        self.members.keys().copied()
    }

    pub fn domain_of(&self, v: NodeId) -> Result<DomainId> {
        self.assignment.get(v).copied().ok_or(Error::UnknownNode(v))
    }

    /// Unchecked lookup for nodes known to exist.
    pub fn dom(&self, v: NodeId) -> DomainId {
        self.assignment[v]
    }

    /// Sorted nodes of domain `d`.
    pub fn nodes_in(&self, d: DomainId) -> &[NodeId] {
        self.members.get(&d).map_or(&[], |v| v.as_slice())
    }

    /// `BND(N_i)`.
    pub fn boundary(&self, d: DomainId) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.boundary.get(&d).unwrap_or(&EMPTY)
    }

    pub fn inter_links(&self) -> &BTreeSet<Link> {
        &self.inter_links
    }

    pub fn is_inter(&self, l: &Link) -> bool {
        self.assignment[l.a()] != self.assignment[l.b()]
    }

    /// Links with both endpoints inside `d`.
    pub fn intra_links<'a>(&'a self, net: &'a Network, d: DomainId) -> impl Iterator<Item = Link> + 'a {
        net.links().iter().copied().filter(move |l| self.assignment[l.a()] == d && self.assignment[l.b()] == d)
    }

    /// `dm(N_i)` restricted to `dests`.
    pub fn dests_in_domain(&self, dests: impl IntoIterator<Item = NodeId>, d: DomainId) -> BTreeSet<NodeId> {
        dests.into_iter().filter(|v| self.assignment.get(*v) == Some(&d)).collect()
    }
}

/// Destinations of `group` (online or not) that lie in domain `d`.
pub fn dests_in_domain(p: &DomainPartition, group: &MulticastGroup, d: DomainId) -> BTreeSet<NodeId> {
    p.dests_in_domain(group.dests(), d)
}

// ---------------------------------------------------------------------------
// Topology file

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopologyFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<[NodeId; 2]>,
}

/// Parses the JSON topology schema.
pub fn parse_topology(text: &str) -> Result<(Network, DomainPartition)> {
    let file: TopologyFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let n = file.nodes.len();
    let mut coords = vec![None; n];
    let mut assignment = vec![None; n];
    for rec in &file.nodes {
        if rec.id >= n || coords[rec.id].is_some() {
            return Err(Error::NonDenseIds { expected: n, found: rec.id });
        }
        coords[rec.id] = Some(Point { x: rec.x, y: rec.y });
        let d = rec.domain.ok_or(Error::UnassignedNode(rec.id))?;
        if d == 0 {
            return Err(Error::InvalidDomain(0));
        }
        assignment[rec.id] = Some(DomainId(d));
    }
    for &[u, v] in &file.edges {
        for w in [u, v] {
            if w >= n {
                return Err(Error::UnassignedNode(w));
            }
        }
    }
    let coords = coords.into_iter().map(Option::unwrap).collect();
    let assignment = assignment.into_iter().map(Option::unwrap).collect();
    let net = Network::new(coords, file.edges.iter().map(|&[u, v]| (u, v)))?;
    let p = DomainPartition::new(&net, assignment)?;
    Ok((net, p))
}

pub fn load_topology(path: impl AsRef<FsPath>) -> Result<(Network, DomainPartition)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    parse_topology(&text)
}

/// Serializes to the JSON topology schema.
pub fn topology_to_json(net: &Network, p: &DomainPartition) -> String {
    let file = TopologyFile {
        nodes: net
            .nodes()
            .map(|v| {
                let c = net.coord(v);
                NodeRecord { id: v, x: c.x, y: c.y, domain: Some(p.dom(v).0) }
            })
            .collect(),
        edges: net.links().iter().map(|l| [l.a(), l.b()]).collect(),
    };
    serde_json::to_string_pretty(&file).expect("topology serializes")
}

// ---------------------------------------------------------------------------
// Generator

/// Closed interval used for uniform draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min >= 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} must satisfy 0 <= min <= max")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoGenParams {
    pub n_domains: usize,
    pub nodes_per_domain: usize,
    /// Target average node degree inside a domain.
    pub intra_degree: f64,
    pub inter_links_per_adjacent_pair: usize,
    pub bw_range: Range,
    pub delay_range: Range,
    pub dist_range: Range,
    pub loss_range: Range,
    pub err_range: Range,
    pub bw_max: f64,
    /// Weights used when checking the inter-domain cost separation.
    pub weights: CostWeights,
    pub seed: u64,
}

impl Default for TopoGenParams {
    fn default() -> Self {
        Self {
            n_domains: 4,
            nodes_per_domain: 7,
            intra_degree: 3.0,
            inter_links_per_adjacent_pair: 2,
            bw_range: Range::new(5.0, 40.0),
            delay_range: Range::new(1.0, 10.0),
            dist_range: Range::new(30.0, 120.0),
            loss_range: Range::new(0.0, 0.05),
            err_range: Range::new(0.0, 0.02),
            bw_max: 40.0,
            weights: CostWeights::default(),
            seed: 0,
        }
    }
}

impl TopoGenParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_domains == 0 || self.nodes_per_domain == 0 {
            return Err(Error::InvalidParams("need at least one domain and one node per domain".into()));
        }
        self.bw_range.check("bw_range")?;
        self.delay_range.check("delay_range")?;
        self.dist_range.check("dist_range")?;
        self.loss_range.check("loss_range")?;
        self.err_range.check("err_range")?;
        if self.bw_range.min <= 0.0 || self.bw_range.max > self.bw_max {
            return Err(Error::InvalidParams("bw_range must lie in (0, bw_max]".into()));
        }
        if self.loss_range.max > 1.0 || self.err_range.max > 1.0 {
            return Err(Error::InvalidParams("loss/err ranges must lie in [0, 1]".into()));
        }
        self.weights.validate()
    }
}

/// Grid neighbors among `m` domains laid out on a near-square grid.
fn adjacent_domain_pairs(m: usize) -> Vec<(usize, usize)> {
    let cols = (m as f64).sqrt().ceil() as usize;
    let mut pairs = Vec::new();
    for k in 0..m {
        if k % cols + 1 < cols && k + 1 < m {
            pairs.push((k, k + 1));
        }
        if k + cols < m {
            pairs.push((k, k + cols));
        }
    }
    pairs
}

/// Builds a random connected multi-domain network with uniformly drawn raw
/// link metrics. Inter-domain metrics are rescaled until the inter-domain
/// cost separation holds (see [`enforce_hypothesis2`]).
pub fn generate_random(params: &TopoGenParams) -> Result<(Network, DomainPartition, MetricSnapshot)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.nodes_per_domain;
    let m = params.n_domains;

    let min_degree = 2.0 * (n as f64 - 1.0) / n as f64;
    if params.intra_degree + 1e-12 < min_degree {
        return Err(Error::Infeasible(format!(
            "intra_degree {} too low to connect a domain of {n} nodes (needs >= {min_degree:.3})",
            params.intra_degree
        )));
    }
    let max_edges = n * (n - 1) / 2;
    let target_edges = ((params.intra_degree * n as f64) / 2.0).ceil() as usize;
    if target_edges > max_edges {
        return Err(Error::Infeasible(format!(
            "intra_degree {} exceeds a complete graph on {n} nodes",
            params.intra_degree
        )));
    }
    let pairs = adjacent_domain_pairs(m);
    if m > 1 && params.inter_links_per_adjacent_pair == 0 {
        return Err(Error::Infeasible("domains cannot be connected without inter-domain links".into()));
    }
    if params.inter_links_per_adjacent_pair > n * n && m > 1 {
        return Err(Error::Infeasible("more inter-domain links requested than node pairs".into()));
    }

    let cols = (m as f64).sqrt().ceil() as usize;
    let cell = 2.0 * params.dist_range.max.max(1.0);
    let mut coords = Vec::with_capacity(n * m);
    let mut assignment = Vec::with_capacity(n * m);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for k in 0..m {
        let (ox, oy) = ((k % cols) as f64 * cell * 1.5, (k / cols) as f64 * cell * 1.5);
        let base = k * n;
        for _ in 0..n {
            coords.push(Point { x: ox + rng.gen_range(0.0..cell), y: oy + rng.gen_range(0.0..cell) });
            assignment.push(DomainId(k as u32 + 1));
        }
        let mut order: Vec<NodeId> = (base..base + n).collect();
        order.shuffle(&mut rng);
        let mut present = BTreeSet::new();
        for i in 1..n {
            let j = rng.gen_range(0..i);
            present.insert(Link::new(order[i], order[j]));
        }
        let mut candidates: Vec<Link> = (base..base + n)
            .flat_map(|u| (u + 1..base + n).map(move |v| Link::new(u, v)))
            .filter(|l| !present.contains(l))
            .collect();
        candidates.shuffle(&mut rng);
        let extra = target_edges.saturating_sub(present.len());
        present.extend(candidates.into_iter().take(extra));
        edges.extend(present.iter().map(|l| (l.a(), l.b())));
    }
    for (a, b) in pairs {
        let mut candidates: Vec<(NodeId, NodeId)> =
            (a * n..(a + 1) * n).flat_map(|u| (b * n..(b + 1) * n).map(move |v| (u, v))).collect();
        candidates.shuffle(&mut rng);
        edges.extend(candidates.into_iter().take(params.inter_links_per_adjacent_pair));
    }

    let net = Network::new(coords, edges)?;
    let p = DomainPartition::new(&net, assignment)?;

    let snap = random_link_metrics(&net, &p, params, DistanceSource::Range, &mut rng)?;
    Ok((net, p, snap))
}

/// Where link distances come from when drawing metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceSource {
    /// Uniform draw from the configured distance range.
    Range,
    /// Euclidean distance between the node coordinates.
    Coordinates,
}

/// Draws raw metrics for every link of an existing network (bandwidth, delay
/// and distance per link, loss and error per direction), then rescales the
/// inter-domain ones (see [`enforce_hypothesis2`]).
pub fn random_link_metrics(
    net: &Network,
    p: &DomainPartition,
    params: &TopoGenParams,
    dist: DistanceSource,
    rng: &mut impl Rng,
) -> Result<MetricSnapshot> {
    params.validate()?;
    let mut raw = MetricSnapshot::default();
    for l in net.links() {
        let bw = params.bw_range.sample(rng);
        let delay = params.delay_range.sample(rng);
        let d = match dist {
            DistanceSource::Range => params.dist_range.sample(rng),
            DistanceSource::Coordinates => distance(net.coord(l.a()), net.coord(l.b())),
        };
        for (u, v) in [(l.a(), l.b()), (l.b(), l.a())] {
            let loss = params.loss_range.sample(rng);
            let err = params.err_range.sample(rng);
            raw.insert(u, v, EdgeMetrics { bw, delay, loss, err, dist: d });
        }
    }
    let caps = InterScaleCaps { loss_max: params.loss_range.max, err_max: params.err_range.max };
    Ok(enforce_hypothesis2(net, p, &raw, &params.weights, caps)?.0)
}

// ---------------------------------------------------------------------------
// Inter-domain cost separation

/// Worst intra-domain pair found by the separation check.
#[derive(Clone, Debug, PartialEq)]
pub struct IntraPair {
    pub domain: DomainId,
    pub from: NodeId,
    pub to: NodeId,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis2Report {
    pub pass: bool,
    /// Cheapest single inter-domain link cost (`None` without inter links).
    pub min_inter_cost: Option<f64>,
    /// Most expensive pairwise intra-domain path cost.
    pub max_intra: Option<IntraPair>,
    /// Inter-domain links whose cost does not exceed the worst intra pair.
    pub violations: Vec<(Link, f64)>,
}

/// Cost of one inter-domain link: the cheaper of its two orientations.
pub fn inter_link_cost(snap: &NormalizedSnapshot, l: &Link, w: &CostWeights) -> Result<f64> {
    let fwd = snap.get(l.a(), l.b()).ok_or(Error::MissingEdgeMetric(l.a(), l.b()))?;
    let rev = snap.get(l.b(), l.a()).ok_or(Error::MissingEdgeMetric(l.b(), l.a()))?;
    Ok(w.edge_cost(fwd).min(w.edge_cost(rev)))
}

type HopTable = Vec<Vec<Option<usize>>>;

/// Shortest directed intra-domain paths under single-edge costs, all pairs.
/// Returns `next[i][j]` hop tables over the domain's local indices.
fn domain_shortest_paths(
    net: &Network,
    p: &DomainPartition,
    d: DomainId,
    snap: &NormalizedSnapshot,
    w: &CostWeights,
) -> Result<(Vec<NodeId>, HopTable)> {
    let nodes = p.nodes_in(d).to_vec();
    let k = nodes.len();
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut dist = vec![vec![f64::INFINITY; k]; k];
    let mut next = vec![vec![None; k]; k];
    for i in 0..k {
        dist[i][i] = 0.0;
        next[i][i] = Some(i);
    }
    for l in p.intra_links(net, d) {
        for (u, v) in [(l.a(), l.b()), (l.b(), l.a())] {
            let m = snap.get(u, v).ok_or(Error::MissingEdgeMetric(u, v))?;
            let (iu, iv) = (index[&u], index[&v]);
            dist[iu][iv] = w.edge_cost(m);
            next[iu][iv] = Some(iv);
        }
    }
    for via in 0..k {
        for i in 0..k {
            if dist[i][via].is_infinite() {
                continue;
            }
            for j in 0..k {
                let cand = dist[i][via] + dist[via][j];
                if cand < dist[i][j] {
                    dist[i][j] = cand;
                    next[i][j] = next[i][via];
                }
            }
        }
    }
    Ok((nodes, next))
}

/// Checks that every single inter-domain link costs more than the most
/// expensive pairwise intra-domain path (minimum-weight path, priced with the
/// composite path cost). Vacuously passes without inter-domain links.
pub fn check_hypothesis2(
    net: &Network,
    p: &DomainPartition,
    snap: &NormalizedSnapshot,
    w: &CostWeights,
) -> Result<Hypothesis2Report> {
    let mut max_intra: Option<IntraPair> = None;
    for d in p.domains() {
        let (nodes, next) = domain_shortest_paths(net, p, d, snap, w)?;
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                if i == j {
                    continue;
                }
                let mut hops = vec![nodes[i]];
                let mut cur = i;
                while cur != j {
                    cur = next[cur][j].expect("domain is connected");
                    hops.push(nodes[cur]);
                }
                let cost = path_cost(&path_metrics(&Path::new(hops)?, snap)?, w);
                if max_intra.as_ref().is_none_or(|m| cost > m.cost) {
                    max_intra = Some(IntraPair { domain: d, from: nodes[i], to: nodes[j], cost });
                }
            }
        }
    }
    let mut min_inter: Option<f64> = None;
    let mut costs = Vec::new();
    for l in p.inter_links() {
        let c = inter_link_cost(snap, l, w)?;
        min_inter = Some(min_inter.map_or(c, |m| m.min(c)));
        costs.push((*l, c));
    }
    let worst = max_intra.as_ref().map_or(f64::NEG_INFINITY, |m| m.cost);
    let violations: Vec<(Link, f64)> = costs.into_iter().filter(|(_, c)| *c <= worst).collect();
    Ok(Hypothesis2Report { pass: violations.is_empty(), min_inter_cost: min_inter, max_intra, violations })
}

/// Upper bounds applied to rescaled inter-domain loss and error rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterScaleCaps {
    pub loss_max: f64,
    pub err_max: f64,
}

/// Multiplies inter-domain delay/distance (and loss/err up to their caps) and
/// divides bandwidth by `scale`.
pub fn scale_inter_metrics(
    p: &DomainPartition,
    raw: &MetricSnapshot,
    scale: f64,
    caps: InterScaleCaps,
) -> MetricSnapshot {
    let mut out = raw.clone();
    for ((u, v), m) in out.iter_mut() {
        if p.dom(*u) != p.dom(*v) {
            m.bw /= scale;
            m.delay *= scale;
            m.dist *= scale;
            m.loss = (m.loss * scale).min(caps.loss_max.max(m.loss));
            m.err = (m.err * scale).min(caps.err_max.max(m.err));
        }
    }
    out
}

const MAX_DOUBLINGS: u32 = 30;

/// Doubles the inter-domain scale factor from 1 until
/// [`check_hypothesis2`] passes on the normalized snapshot. Returns the
/// rescaled raw snapshot and the factor used.
pub fn enforce_hypothesis2(
    net: &Network,
    p: &DomainPartition,
    raw: &MetricSnapshot,
    w: &CostWeights,
    caps: InterScaleCaps,
) -> Result<(MetricSnapshot, f64)> {
    let mut scale = 1.0;
    for _ in 0..=MAX_DOUBLINGS {
        let snap = scale_inter_metrics(p, raw, scale, caps);
        if check_hypothesis2(net, p, &normalize(&snap)?, w)?.pass {
            return Ok((snap, scale));
        }
        scale *= 2.0;
    }
    Err(Error::Infeasible(format!(
        "inter-domain links cannot be made costlier than intra-domain paths (scale up to 2^{MAX_DOUBLINGS})"
    )))
}

//! Steiner-tree solvers on the flat weighted graph: shortest paths, KMB,
//! SCTF and an exact Dreyfus-Wagner dynamic program.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::link_metrics::NormalizedSnapshot;
use crate::multicast::CostWeights;
use crate::topology::{Link, Network, NodeId};
use crate::{Error, Result};

/// Composite single-edge cost of every directed edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeightMap {
    directed: BTreeMap<(NodeId, NodeId), f64>,
}

impl EdgeWeightMap {
    pub fn get(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.directed.get(&(u, v)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &f64)> {
        self.directed.iter()
    }

    /// Mean of both directions of `l`.
    pub fn symmetric(&self, l: &Link) -> Option<f64> {
        Some((self.get(l.a(), l.b())? + self.get(l.b(), l.a())?) / 2.0)
    }
}

pub fn edge_weights(snap: &NormalizedSnapshot, w: &CostWeights) -> EdgeWeightMap {
    EdgeWeightMap { directed: snap.iter().map(|(k, m)| (*k, w.edge_cost(m))).collect() }
}

/// Undirected graph with nonnegative link weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(NodeId, f64)>>,
    weights: BTreeMap<Link, f64>,
}

impl WeightedGraph {
    pub fn new(node_count: usize, links: impl IntoIterator<Item = (Link, f64)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); node_count];
        let mut weights = BTreeMap::new();
        for (l, w) in links {
            if l.b() >= node_count {
                return Err(Error::UnknownNode(l.b()));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParams(format!("weight {w} on {l}")));
            }
            if weights.insert(l, w).is_some() {
                return Err(Error::DuplicateEdge(l));
            }
            adj[l.a()].push((l.b(), w));
            adj[l.b()].push((l.a(), w));
        }
        for a in &mut adj {
            a.sort_by_key(|(v, _)| *v);
        }
        Ok(Self { adj, weights })
    }

    /// Topology links weighted by the symmetrized composite edge cost.
    pub fn from_network(net: &Network, weights: &EdgeWeightMap) -> Result<Self> {
        let links = net
            .links()
            .iter()
            .map(|l| Ok((*l, weights.symmetric(l).ok_or(Error::MissingEdgeMetric(l.a(), l.b()))?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(net.node_count(), links)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, f64)] {
        &self.adj[v]
    }

    pub fn weight(&self, l: &Link) -> Option<f64> {
        self.weights.get(l).copied()
    }

    pub fn links(&self) -> impl Iterator<Item = (&Link, &f64)> {
        self.weights.iter()
    }

    /// Total weight of `links`; `None` if one is not in the graph.
    pub fn total_weight<'a>(&self, links: impl IntoIterator<Item = &'a Link>) -> Option<f64> {
        links.into_iter().map(|l| self.weight(l)).sum()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, NodeId);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Single-source (or multi-source) shortest-path distances and predecessors.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pub parent: Vec<Option<NodeId>>,
}

impl ShortestPaths {
    /// Node sequence from the nearest source to `v`.
    pub fn path_to(&self, v: NodeId) -> Option<Vec<NodeId>> {
        if self.dist[v].is_infinite() {
            return None;
        }
        let mut hops = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            hops.push(p);
            cur = p;
        }
        hops.reverse();
        Some(hops)
    }
}

/// Dijkstra from every node in `sources` at once. Equal-distance ties prefer
/// the smaller predecessor id. Unreachable nodes keep infinite distance.
pub fn dijkstra_from(g: &WeightedGraph, sources: impl IntoIterator<Item = NodeId>) -> ShortestPaths {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for s in sources {
        dist[s] = 0.0;
        heap.push(Reverse(Key(0.0, s)));
    }
    while let Some(Reverse(Key(d, u))) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in g.neighbors(u) {
            if done[v] {
                continue;
            }
            let cand = d + w;
            let better = cand < dist[v] || (cand == dist[v] && parent[v].is_some_and(|p| u < p));
            if better {
                dist[v] = cand;
                parent[v] = Some(u);
                heap.push(Reverse(Key(cand, v)));
            }
        }
    }
    ShortestPaths { dist, parent }
}

pub fn dijkstra(g: &WeightedGraph, src: NodeId) -> ShortestPaths {
    dijkstra_from(g, [src])
}

/// A tree returned by a solver together with its total weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SteinerTree {
    pub links: BTreeSet<Link>,
    pub cost: f64,
}

impl SteinerTree {
    fn from_links(g: &WeightedGraph, links: BTreeSet<Link>) -> Self {
        let cost = g.total_weight(&links).expect("solver links come from the graph");
        Self { links, cost }
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.links.iter().flat_map(|l| [l.a(), l.b()]).collect()
    }
}

/// Union of shortest paths from `src` to each terminal.
pub fn shortest_path_tree(g: &WeightedGraph, src: NodeId, terminals: &BTreeSet<NodeId>) -> Result<SteinerTree> {
    let sp = dijkstra(g, src);
    let mut links = BTreeSet::new();
    for &t in terminals {
        let hops = sp.path_to(t).ok_or(Error::DisconnectedTerminals(t))?;
        links.extend(hops.windows(2).map(|w| Link::new(w[0], w[1])));
    }
    Ok(SteinerTree::from_links(g, links))
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Kruskal over `(weight, link)` candidates, ties by link order.
fn kruskal(n: usize, mut edges: Vec<(f64, Link)>) -> BTreeSet<Link> {
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut sets = DisjointSets::new(n);
    edges.into_iter().filter(|(_, l)| sets.union(l.a(), l.b())).map(|(_, l)| l).collect()
}

fn check_terminals(g: &WeightedGraph, terminals: &BTreeSet<NodeId>) -> Result<NodeId> {
    let first = *terminals.first().ok_or_else(|| Error::InvalidGroup("no terminals".into()))?;
    if let Some(v) = terminals.iter().find(|v| **v >= g.node_count()) {
        return Err(Error::UnknownNode(*v));
    }
    let sp = dijkstra(g, first);
    if let Some(v) = terminals.iter().find(|v| sp.dist[**v].is_infinite()) {
        return Err(Error::DisconnectedTerminals(*v));
    }
    Ok(first)
}

/// Kou-Markowsky-Berman: metric closure, MST, path expansion, MST again,
/// prune non-terminal leaves.
pub fn kmb(g: &WeightedGraph, terminals: &BTreeSet<NodeId>) -> Result<SteinerTree> {
    check_terminals(g, terminals)?;
    let terms: Vec<NodeId> = terminals.iter().copied().collect();
    let paths: Vec<ShortestPaths> = terms.iter().map(|t| dijkstra(g, *t)).collect();
    let mut closure = Vec::new();
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            closure.push((paths[i].dist[terms[j]], Link::new(terms[i], terms[j])));
        }
    }
    let closure_mst = kruskal(g.node_count(), closure);
    let mut expanded = BTreeSet::new();
    for l in &closure_mst {
        let i = terms.binary_search(&l.a()).expect("closure link joins terminals");
        let hops = paths[i].path_to(l.b()).expect("terminals are connected");
        expanded.extend(hops.windows(2).map(|w| Link::new(w[0], w[1])));
    }
    let candidates = expanded.iter().map(|l| (g.weight(l).expect("expanded link in graph"), *l)).collect();
    let mst = kruskal(g.node_count(), candidates);
    Ok(SteinerTree::from_links(g, prune_links(mst, terminals)))
}

/// Repeatedly removes leaves that are not terminals.
fn prune_links(mut links: BTreeSet<Link>, terminals: &BTreeSet<NodeId>) -> BTreeSet<Link> {
    loop {
        let mut degree: BTreeMap<NodeId, usize> = BTreeMap::new();
        for l in &links {
            *degree.entry(l.a()).or_default() += 1;
            *degree.entry(l.b()).or_default() += 1;
        }
        let before = links.len();
        links.retain(|l| {
            let leaf = |v: NodeId| degree[&v] == 1 && !terminals.contains(&v);
            !leaf(l.a()) && !leaf(l.b())
        });
        if links.len() == before {
            return links;
        }
    }
}

/// Selective closest terminal first: grows a tree from `src`, each round
/// attaching the unconnected terminal nearest to the tree by its shortest
/// path.
pub fn sctf(g: &WeightedGraph, src: NodeId, terminals: &BTreeSet<NodeId>) -> Result<SteinerTree> {
    let mut all = terminals.clone();
    all.insert(src);
    check_terminals(g, &all)?;
    let mut in_tree = BTreeSet::from([src]);
    let mut links = BTreeSet::new();
    let mut pending: BTreeSet<NodeId> = terminals.iter().copied().filter(|t| *t != src).collect();
    while !pending.is_empty() {
        let sp = dijkstra_from(g, in_tree.iter().copied());
        let next = *pending
            .iter()
            .min_by(|a, b| sp.dist[**a].total_cmp(&sp.dist[**b]).then(a.cmp(b)))
            .expect("pending is nonempty");
        let hops = sp.path_to(next).expect("terminals are connected");
        links.extend(hops.windows(2).map(|w| Link::new(w[0], w[1])));
        for v in hops {
            in_tree.insert(v);
            pending.remove(&v);
        }
    }
    Ok(SteinerTree::from_links(g, links))
}

/// Largest terminal set accepted by [`exact_steiner`].
pub const MAX_EXACT_TERMINALS: usize = 14;

#[derive(Clone, Copy)]
enum Back {
    Leaf,
    Edge(NodeId),
    Split(usize),
}

/// Minimum-weight tree spanning `terminals` (Dreyfus-Wagner over terminal
/// subsets, exponential in the terminal count only).
pub fn exact_steiner(g: &WeightedGraph, terminals: &BTreeSet<NodeId>) -> Result<SteinerTree> {
    if terminals.len() > MAX_EXACT_TERMINALS {
        return Err(Error::InstanceTooLarge(format!(
            "{} terminals, at most {MAX_EXACT_TERMINALS} supported",
            terminals.len()
        )));
    }
    let root = check_terminals(g, terminals)?;
    let others: Vec<NodeId> = terminals.iter().copied().filter(|t| *t != root).collect();
    if others.is_empty() {
        return Ok(SteinerTree { links: BTreeSet::new(), cost: 0.0 });
    }
    let n = g.node_count();
    let k = others.len();
    let full = (1usize << k) - 1;
    let mut cost = vec![vec![f64::INFINITY; n]; full + 1];
    let mut back = vec![vec![Back::Leaf; n]; full + 1];
    for mask in 1..=full {
        if mask.is_power_of_two() {
            let t = others[mask.trailing_zeros() as usize];
            cost[mask][t] = 0.0;
        } else {
            // Split at u into two nonempty halves; the half holding the
            // lowest bit is enumerated once.
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let part = sub | low;
                if part != mask {
                    for u in 0..n {
                        let c = cost[part][u] + cost[mask ^ part][u];
                        if c < cost[mask][u] {
                            cost[mask][u] = c;
                            back[mask][u] = Back::Split(part);
                        }
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        relax(g, &mut cost[mask], &mut back[mask]);
    }
    let mut links = BTreeSet::new();
    collect(&back, full, root, &mut links);
    // Zero-weight links can make the union non-tree; a spanning tree of it
    // is still optimal.
    let candidates = links.iter().map(|l| (g.weight(l).expect("link in graph"), *l)).collect();
    let links = prune_links(kruskal(n, candidates), terminals);
    Ok(SteinerTree::from_links(g, links))
}

fn relax(g: &WeightedGraph, cost: &mut [f64], back: &mut [Back]) {
    let mut heap: BinaryHeap<Reverse<Key>> =
        cost.iter().enumerate().filter(|(_, c)| c.is_finite()).map(|(v, c)| Reverse(Key(*c, v))).collect();
    let mut done = vec![false; cost.len()];
    while let Some(Reverse(Key(d, u))) = heap.pop() {
        if done[u] || d > cost[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in g.neighbors(u) {
            if d + w < cost[v] {
                cost[v] = d + w;
                back[v] = Back::Edge(u);
                heap.push(Reverse(Key(cost[v], v)));
            }
        }
    }
}

fn collect(back: &[Vec<Back>], mask: usize, v: NodeId, out: &mut BTreeSet<Link>) {
    match back[mask][v] {
        Back::Leaf => {}
        Back::Edge(u) => {
            out.insert(Link::new(u, v));
            collect(back, mask, u, out);
        }
        Back::Split(part) => {
            collect(back, part, v, out);
            collect(back, mask ^ part, v, out);
        }
    }
}

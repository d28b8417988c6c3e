#![allow(dead_code)]

use std::collections::BTreeSet;

use cdmr_core::link_metrics::normalize;
use cdmr_core::multicast::CrossDomainTree;
use cdmr_core::{
    DomainId, DomainPartition, EdgeMetrics, Link, MetricSnapshot, MulticastGroup, Network, NodeId, NormalizedSnapshot,
    Point,
};
use rand::seq::SliceRandom;
use rand::Rng;

// Four-domain toy:
//   N1: src 0, bn11 1, bn13 2, v 3, d1 4, bn12 5
//   N2: bn21 6, bn24 7, d2 8, bn22 9
//   N3: bn31 10, bn32 11, d3 12, d4 13
//   N4: bn41 14, bn42 15, d5 16, d6 17
pub const SRC: NodeId = 0;
pub const DESTS: [NodeId; 6] = [4, 8, 12, 13, 16, 17];

pub fn toy() -> (Network, DomainPartition) {
    let intra = [
        (0, 1),
        (0, 3),
        (3, 4),
        (4, 2),
        (0, 5),
        (5, 2),
        (4, 5),
        (6, 7),
        (6, 8),
        (6, 9),
        (9, 7),
        (10, 11),
        (11, 12),
        (10, 13),
        (10, 12),
        (14, 16),
        (14, 15),
        (15, 17),
        (16, 17),
    ];
    let inter = [(1, 6), (2, 10), (7, 14), (5, 11), (9, 11), (11, 15)];
    let coords = (0..18).map(|i| Point { x: (i % 5) as f64 * 40.0, y: (i / 5) as f64 * 40.0 }).collect();
    let net = Network::new(coords, intra.into_iter().chain(inter)).unwrap();
    let assignment = [1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4].map(DomainId).to_vec();
    let p = DomainPartition::new(&net, assignment).unwrap();
    (net, p)
}

pub fn toy_group() -> MulticastGroup {
    MulticastGroup::new(SRC, DESTS).unwrap()
}

pub fn links(pairs: &[(NodeId, NodeId)]) -> BTreeSet<Link> {
    pairs.iter().map(|(u, v)| Link::new(*u, *v)).collect()
}

/// Inter-domain tree plus the four per-domain trees of the toy.
pub const TOY_TREE: [(NodeId, NodeId); 15] = [
    (1, 6),
    (2, 10),
    (7, 14),
    (0, 1),
    (0, 3),
    (3, 4),
    (4, 2),
    (6, 7),
    (6, 8),
    (10, 11),
    (11, 12),
    (10, 13),
    (14, 16),
    (14, 15),
    (15, 17),
];

pub fn toy_tree(p: &DomainPartition) -> CrossDomainTree {
    CrossDomainTree::from_flat(SRC, links(&TOY_TREE), p).unwrap()
}

/// Every directed edge carries `m`; normalizing then maps every channel to 0.
pub fn uniform_snapshot(net: &Network, m: EdgeMetrics) -> MetricSnapshot {
    let mut s = MetricSnapshot::default();
    for (u, v) in net.directed_edges() {
        s.insert(u, v, m);
    }
    s
}

pub fn random_snapshot(net: &Network, rng: &mut impl Rng) -> MetricSnapshot {
    let mut s = MetricSnapshot::default();
    for (u, v) in net.directed_edges() {
        s.insert(
            u,
            v,
            EdgeMetrics {
                bw: rng.gen_range(5.0..40.0),
                delay: rng.gen_range(1.0..10.0),
                loss: rng.gen_range(0.0..0.05),
                err: rng.gen_range(0.0..0.02),
                dist: rng.gen_range(30.0..120.0),
            },
        );
    }
    s
}

pub fn random_normalized(net: &Network, rng: &mut impl Rng) -> NormalizedSnapshot {
    normalize(&random_snapshot(net, rng)).unwrap()
}

/// A random subtree of `net` containing `root`: random-order BFS spanning
/// tree, then a random number of leaf removals.
pub fn random_subtree(net: &Network, root: NodeId, rng: &mut impl Rng) -> BTreeSet<Link> {
    let mut seen = BTreeSet::from([root]);
    let mut frontier = vec![root];
    let mut out = BTreeSet::new();
    while !frontier.is_empty() {
        let i = rng.gen_range(0..frontier.len());
        let u = frontier.swap_remove(i);
        let mut nbrs = net.neighbors(u).to_vec();
        nbrs.shuffle(rng);
        for v in nbrs {
            if seen.insert(v) {
                out.insert(Link::new(u, v));
                frontier.push(v);
            }
        }
    }
    let removals = rng.gen_range(0..net.node_count());
    for _ in 0..removals {
        let leaves: Vec<Link> = out
            .iter()
            .filter(|l| [l.a(), l.b()].iter().any(|x| *x != root && out.iter().filter(|k| k.contains(*x)).count() == 1))
            .copied()
            .collect();
        match leaves.choose(rng) {
            Some(l) => {
                out.remove(l);
            }
            None => break,
        }
    }
    out
}

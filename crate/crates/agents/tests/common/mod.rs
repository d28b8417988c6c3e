#![allow(dead_code)]

use cdmr_core::link_metrics::normalize;
use cdmr_core::{DomainId, DomainPartition, EdgeMetrics, MetricSnapshot, Network, NodeId, NormalizedSnapshot, Point};
use rand::Rng;

// Four domains: N1 = 0..=5 (source 0), N2 = 6..=9, N3 = 10..=13, N4 = 14..=17.
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

pub fn random_normalized(net: &Network, rng: &mut impl Rng) -> NormalizedSnapshot {
    let mut s = MetricSnapshot::default();
    for (u, v) in net.directed_edges() {
        let m = EdgeMetrics {
            bw: rng.gen_range(5.0..40.0),
            delay: rng.gen_range(1.0..10.0),
            loss: rng.gen_range(0.0..0.05),
            err: rng.gen_range(0.0..0.02),
            dist: rng.gen_range(30.0..120.0),
        };
        s.insert(u, v, m);
    }
    normalize(&s).unwrap()
}

/// Every edge gets mediocre raw metrics except `best` (both directions),
/// which is ideal; after normalization `best` reads (1, 0, 0, 0, 0) and every
/// other edge (0, 1, 1, 1, 1).
pub fn one_perfect_link(net: &Network, best: (NodeId, NodeId)) -> NormalizedSnapshot {
    let mut s = MetricSnapshot::default();
    for (u, v) in net.directed_edges() {
        let ideal = (u, v) == best || (v, u) == best;
        let m = if ideal {
            EdgeMetrics { bw: 20.0, delay: 1.0, loss: 0.0, err: 0.0, dist: 10.0 }
        } else {
            EdgeMetrics { bw: 10.0, delay: 5.0, loss: 0.02, err: 0.01, dist: 50.0 }
        };
        s.insert(u, v, m);
    }
    normalize(&s).unwrap()
}

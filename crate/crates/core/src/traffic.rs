//! Synthetic port-counter traces standing in for live switch statistics.
//!
//! Every directed edge gets two counter samples of the port on its tail, plus
//! one delay probe. Background traffic is a uniform random fraction of the
//! edge's base remaining bandwidth; loss, error and delay are jittered around
//! the base values.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::link_metrics::{DelayProbe, MetricSnapshot, PortCounterSample, TraceRecord};
use crate::topology::{Link, NodeId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    /// Seconds between the two counter samples.
    pub interval_s: f64,
    /// Largest fraction of an edge's base remaining bandwidth consumed by
    /// background traffic.
    pub max_extra_utilization: f64,
    /// Relative jitter applied to base delay, loss and error.
    pub jitter: f64,
    pub bytes_per_packet: f64,
    /// Packets sent per direction on top of the byte-derived count, so loss
    /// stays defined on idle links.
    pub probe_packets: u64,
    pub bw_max: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            interval_s: 1.0,
            max_extra_utilization: 0.5,
            jitter: 0.2,
            bytes_per_packet: 1500.0,
            probe_packets: 20_000,
            bw_max: 40.0,
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.interval_s > 0.0
            && (0.0..=1.0).contains(&self.max_extra_utilization)
            && (0.0..1.0).contains(&self.jitter)
            && self.bytes_per_packet > 0.0
            && self.probe_packets > 0
            && self.bw_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("traffic parameters out of range: {self:?}")))
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, x: f64, j: f64) -> f64 {
    x * rng.gen_range(1.0 - j..=1.0 + j)
}

/// Counter trace for every edge present in `base` (both directions of each
/// link must be present). Deterministic for a fixed seed.
pub fn synthesize_trace(base: &MetricSnapshot, params: &TrafficParams, seed: u64) -> Result<Vec<TraceRecord>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = BTreeSet::new();
    for ((u, v), _) in base.iter() {
        if base.get(*v, *u).is_none() {
            return Err(Error::MissingEdgeMetric(*v, *u));
        }
        links.insert(Link::new(*u, *v));
    }
    let dt = params.interval_s;
    let start = 100.0;
    let mut out = Vec::new();
    for l in &links {
        let (a, b) = (l.a(), l.b());
        let base_bw = base.get(a, b).expect("checked").bw.min(base.get(b, a).expect("checked").bw);
        let remaining = base_bw.min(params.bw_max) * (1.0 - rng.gen_range(0.0..=params.max_extra_utilization));
        let used_mbps = params.bw_max - remaining;
        let total_bytes = (used_mbps * dt / 8.0e-6).round() as u64;
        let a_share = rng.gen_range(0.3..=0.7);
        let bytes_ab = (total_bytes as f64 * a_share).round() as u64;
        let bytes_ba = total_bytes - bytes_ab;

        let mut sent = BTreeMap::new();
        for (from, to, bytes) in [(a, b, bytes_ab), (b, a, bytes_ba)] {
            let m = base.get(from, to).expect("checked");
            let tx_p = params.probe_packets + (bytes as f64 / params.bytes_per_packet) as u64;
            let loss = jitter(&mut rng, m.loss, params.jitter).clamp(0.0, 1.0);
            let err = jitter(&mut rng, m.err, params.jitter).clamp(0.0, 1.0);
            let rx_p = tx_p - (tx_p as f64 * loss).round() as u64;
            sent.insert((from, to), (bytes, tx_p, rx_p, err));
        }
        // Port on `from` facing `to`: transmits `from -> to`, receives `to -> from`.
        for (from, to) in [(a, b), (b, a)] {
            let (tx_b, tx_p, _, tx_err_rate) = sent[&(from, to)];
            let (rx_b, _, rx_p, rx_err_rate) = sent[&(to, from)];
            let t0 = start + rng.gen_range(0.0..1.0);
            let first = PortCounterSample {
                tx_p: rng.gen_range(0..1_000_000),
                rx_p: rng.gen_range(0..1_000_000),
                tx_b: rng.gen_range(0..1_000_000_000),
                rx_b: rng.gen_range(0..1_000_000_000),
                tx_err: rng.gen_range(0..1000),
                rx_err: rng.gen_range(0..1000),
                t_dur: t0,
            };
            let second = PortCounterSample {
                tx_p: first.tx_p + tx_p,
                rx_p: first.rx_p + rx_p,
                tx_b: first.tx_b + tx_b,
                rx_b: first.rx_b + rx_b,
                tx_err: first.tx_err + (tx_p as f64 * tx_err_rate).round() as u64,
                rx_err: first.rx_err + (rx_p as f64 * rx_err_rate).round() as u64,
                t_dur: t0 + dt,
            };
            out.push(TraceRecord::Port { from, to, sample: 0, counters: first });
            out.push(TraceRecord::Port { from, to, sample: 1, counters: second });
        }
        let base_delay = (base.get(a, b).expect("checked").delay + base.get(b, a).expect("checked").delay) / 2.0;
        let delay = jitter(&mut rng, base_delay, params.jitter);
        let rtt1 = rng.gen_range(1.0..5.0);
        let rtt2 = rng.gen_range(1.0..5.0);
        let half = (2.0 * delay + rtt1 + rtt2) / 2.0;
        out.push(TraceRecord::Probe { from: a, to: b, probe: DelayProbe { t_fwd: half, t_re: half, rtt1, rtt2 } });
    }
    Ok(out)
}

/// Distance of each link, taken from a base snapshot (mean of directions).
pub fn link_distances(base: &MetricSnapshot) -> BTreeMap<Link, f64> {
    let mut out: BTreeMap<Link, (f64, u32)> = BTreeMap::new();
    for ((u, v), m) in base.iter() {
        let e = out.entry(Link::new(*u, *v)).or_insert((0.0, 0));
        e.0 += m.dist;
        e.1 += 1;
    }
    out.into_iter().map(|(l, (s, c))| (l, s / c as f64)).collect()
}

/// Edges touched by a trace, as directed pairs.
pub fn traced_edges(trace: &[TraceRecord]) -> Vec<(NodeId, NodeId)> {
    let mut out: Vec<(NodeId, NodeId)> = trace
        .iter()
        .map(|r| match r {
            TraceRecord::Port { from, to, .. } | TraceRecord::Probe { from, to, .. } => (*from, *to),
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

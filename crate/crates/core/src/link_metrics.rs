//! Link measurements derived from port counters and delay probes, plus
//! max-min normalization of whole snapshots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::topology::{Network, NodeId, Point};
use crate::{Error, Result};

/// Cumulative counters of one switch port at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PortCounterSample {
    pub tx_p: u64,
    pub rx_p: u64,
    pub tx_b: u64,
    pub rx_b: u64,
    pub tx_err: u64,
    pub rx_err: u64,
    /// Seconds since the port came up.
    #[serde(default)]
    pub t_dur: f64,
}

impl PortCounterSample {
    /// Counter increments from `earlier` to `self`; `t_dur` becomes the
    /// interval length. Saturates on counter resets.
    pub fn delta_since(&self, earlier: &PortCounterSample) -> PortCounterSample {
        PortCounterSample {
            tx_p: self.tx_p.saturating_sub(earlier.tx_p),
            rx_p: self.rx_p.saturating_sub(earlier.rx_p),
            tx_b: self.tx_b.saturating_sub(earlier.tx_b),
            rx_b: self.rx_b.saturating_sub(earlier.rx_b),
            tx_err: self.tx_err.saturating_sub(earlier.tx_err),
            rx_err: self.rx_err.saturating_sub(earlier.rx_err),
            t_dur: self.t_dur - earlier.t_dur,
        }
    }
}

/// Timing data the controller uses to estimate one-way link delay (ms).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayProbe {
    pub t_fwd: f64,
    pub t_re: f64,
    pub rtt1: f64,
    pub rtt2: f64,
}

/// Raw per-link measurements: remaining bandwidth (Mbps), delay (ms), loss and
/// error fractions, AP distance (m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub bw: f64,
    pub delay: f64,
    pub loss: f64,
    pub err: f64,
    pub dist: f64,
}

/// One metric channel of [`EdgeMetrics`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Bw,
    Delay,
    Loss,
    Err,
    Dist,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::Bw, Channel::Delay, Channel::Loss, Channel::Err, Channel::Dist];

    pub fn get(self, m: &EdgeMetrics) -> f64 {
        match self {
            Channel::Bw => m.bw,
            Channel::Delay => m.delay,
            Channel::Loss => m.loss,
            Channel::Err => m.err,
            Channel::Dist => m.dist,
        }
    }

    pub fn set(self, m: &mut EdgeMetrics, x: f64) {
        match self {
            Channel::Bw => m.bw = x,
            Channel::Delay => m.delay = x,
            Channel::Loss => m.loss = x,
            Channel::Err => m.err = x,
            Channel::Dist => m.dist = x,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

const MBPS_PER_BYTE_RATE: f64 = 8.0e-6;

/// Used and remaining bandwidth in Mbps from two samples of the same port.
/// The byte delta is taken later-minus-earlier so throughput is never
/// negative; remaining bandwidth is clamped at zero.
pub fn compute_bandwidth(s1: &PortCounterSample, s2: &PortCounterSample, bw_max: f64) -> Result<(f64, f64)> {
    let dt = s2.t_dur - s1.t_dur;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::NonPositiveInterval(dt));
    }
    let bytes = (s2.tx_b + s2.rx_b).abs_diff(s1.tx_b + s1.rx_b) as f64;
    let ubw = MBPS_PER_BYTE_RATE * bytes / dt;
    Ok((ubw, (bw_max - ubw).max(0.0)))
}

/// Packet loss from the sender's transmitted count and the receiver's
/// received count, clamped to `[0, 1]`.
pub fn compute_loss(tx: &PortCounterSample, rx: &PortCounterSample) -> Result<f64> {
    if tx.tx_p == 0 {
        return Err(Error::UndefinedLoss);
    }
    let lost = tx.tx_p as f64 - rx.rx_p as f64;
    Ok((lost / tx.tx_p as f64).clamp(0.0, 1.0))
}

/// Error rate over the packets seen at both ends, clamped to `[0, 1]`.
pub fn compute_err(sender: &PortCounterSample, receiver: &PortCounterSample) -> Result<f64> {
    let total = sender.tx_p + receiver.rx_p;
    if total == 0 {
        return Err(Error::UndefinedErrorRate);
    }
    Ok(((sender.tx_err + receiver.rx_err) as f64 / total as f64).clamp(0.0, 1.0))
}

/// One-way link delay estimate in ms; negative estimates clamp to zero.
pub fn compute_delay(p: &DelayProbe) -> f64 {
    ((p.t_fwd + p.t_re - p.rtt1 - p.rtt2) / 2.0).max(0.0)
}

/// Euclidean distance in meters.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Per-directed-edge metrics at one instant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    edges: BTreeMap<(NodeId, NodeId), EdgeMetrics>,
}

impl MetricSnapshot {
    pub fn insert(&mut self, from: NodeId, to: NodeId, m: EdgeMetrics) {
        self.edges.insert((from, to), m);
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> Option<&EdgeMetrics> {
        self.edges.get(&(from, to))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &EdgeMetrics)> {
        self.edges.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&(NodeId, NodeId), &mut EdgeMetrics)> {
        self.edges.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn extend(&mut self, other: &MetricSnapshot) {
        self.edges.extend(other.edges.iter().map(|(k, v)| (*k, *v)));
    }

    /// Directed edges of `net` with no entry.
    pub fn missing_edges(&self, net: &Network) -> Vec<(NodeId, NodeId)> {
        net.directed_edges().filter(|e| !self.edges.contains_key(e)).collect()
    }

    /// `edge,bw,delay,loss,err,dist` rows; the edge is written as `from->to`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge,bw,delay,loss,err,dist\n");
        for ((u, v), m) in &self.edges {
            let _ = writeln!(out, "{u}->{v},{},{},{},{},{}", m.bw, m.delay, m.loss, m.err, m.dist);
        }
        out
    }
}

/// Observed `(min, max)` of one channel before normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    fn scale(&self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    fn unscale(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }
}

/// A snapshot max-min normalized per channel across all edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSnapshot {
    values: MetricSnapshot,
    ranges: [ChannelRange; 5],
}

impl NormalizedSnapshot {
    pub fn get(&self, from: NodeId, to: NodeId) -> Option<&EdgeMetrics> {
        self.values.get(from, to)
    }

    /// Overwrites one normalized entry (used to build counterfactual states).
    pub fn set(&mut self, from: NodeId, to: NodeId, m: EdgeMetrics) {
        self.values.insert(from, to, m);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &EdgeMetrics)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn range(&self, c: Channel) -> ChannelRange {
        self.ranges[c.index()]
    }

    /// Maps a normalized value back to raw units.
    pub fn denormalize(&self, m: &EdgeMetrics) -> EdgeMetrics {
        let mut out = *m;
        for c in Channel::ALL {
            c.set(&mut out, self.ranges[c.index()].unscale(c.get(m)));
        }
        out
    }

    pub fn values(&self) -> &MetricSnapshot {
        &self.values
    }

    /// Five row-major `n x n` matrices (bw, delay, loss, err, dist); entry
    /// `[i][j]` is the normalized metric of edge `i -> j`, zero for non-edges.
    pub fn channel_matrices(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; 5 * n * n];
        for ((u, v), m) in self.values.iter() {
            if *u < n && *v < n {
                for c in Channel::ALL {
                    out[c.index() * n * n + u * n + v] = c.get(m);
                }
            }
        }
        out
    }
}

/// Max-min normalization per channel over every edge of the snapshot. A
/// channel with a degenerate range maps to zero everywhere.
pub fn normalize(snap: &MetricSnapshot) -> Result<NormalizedSnapshot> {
    if snap.is_empty() {
        return Err(Error::EmptySnapshot);
    }
    let mut ranges = [ChannelRange { min: f64::INFINITY, max: f64::NEG_INFINITY }; 5];
    for (_, m) in snap.iter() {
        for c in Channel::ALL {
            let r = &mut ranges[c.index()];
            r.min = r.min.min(c.get(m));
            r.max = r.max.max(c.get(m));
        }
    }
    let mut values = snap.clone();
    for (_, m) in values.iter_mut() {
        for c in Channel::ALL {
            let x = ranges[c.index()].scale(c.get(m));
            c.set(m, x);
        }
    }
    Ok(NormalizedSnapshot { values, ranges })
}

/// One line of a counter trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    /// Counters of the port on `from` that faces `to`.
    Port {
        from: NodeId,
        to: NodeId,
        sample: u32,
        #[serde(flatten)]
        counters: PortCounterSample,
    },
    /// Delay probe of the link `from -> to`.
    Probe {
        from: NodeId,
        to: NodeId,
        #[serde(flatten)]
        probe: DelayProbe,
    },
}

pub fn read_trace_jsonl(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 1))))
        .collect()
}

pub fn write_trace_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

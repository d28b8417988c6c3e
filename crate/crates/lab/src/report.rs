use std::collections::{BTreeMap, BTreeSet};

use cdmr_agents::train::{greedy_rollout, tree_weight};
use cdmr_agents::{Hyperparams, MultiAgent, Scenario};
use cdmr_core::baselines::{edge_weights, exact_steiner, kmb, sctf, WeightedGraph};
use cdmr_core::multicast::{aggregate, extract_paths, validate};
use cdmr_core::{
    CostWeights, CrossDomainTree, DomainPartition, MetricSnapshot, MulticastGroup, Network, NormalizedSnapshot,
};
use serde::Serialize;

use crate::config::Algorithm;
use crate::pipeline::Snapshot;
use crate::{Error, Result};

/// Raw-unit metrics of one tree, averaged over its source-destination paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TreeMetrics {
    pub bw_mbps: f64,
    pub delay_ms: f64,
    pub loss: f64,
    pub err: f64,
    /// Edge count of the whole tree.
    pub len: usize,
    pub dist_m: f64,
}

/// Per-path bottleneck bandwidth, total delay, combined loss and error and
/// mean hop distance on raw metrics, averaged over the online destinations.
/// Fails only when some destination has no tree path.
pub fn evaluate_tree(t: &CrossDomainTree, g: &MulticastGroup, raw: &MetricSnapshot) -> Result<TreeMetrics> {
    let paths = extract_paths(t, g)?;
    if paths.is_empty() {
        return Err(Error::Runtime("group has no online destinations".into()));
    }
    let mut sum = [0.0; 5];
    for p in paths.values() {
        let edges = p
            .edges()
            .map(|(u, v)| raw.get(u, v).ok_or(cdmr_core::Error::MissingEdgeMetric(u, v)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let m = aggregate(edges);
        for (s, x) in sum.iter_mut().zip([m.bw, m.delay, m.loss, m.err, m.dist]) {
            *s += x;
        }
    }
    let k = paths.len() as f64;
    Ok(TreeMetrics {
        bw_mbps: sum[0] / k,
        delay_ms: sum[1] / k,
        loss: sum[2] / k,
        err: sum[3] / k,
        len: t.edge_count(),
        dist_m: sum[4] / k,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub snapshot_id: usize,
    pub algorithm: Algorithm,
    /// Absent when the algorithm failed or its tree misses a destination.
    pub metrics: Option<TreeMetrics>,
    pub cost: Option<f64>,
    pub valid: bool,
    pub tree: Option<CrossDomainTree>,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "snapshot_id,algorithm,bw_mbps,delay_ms,loss,err,len,dist_m,cost,valid";

impl ReportRow {
    pub fn csv(&self) -> String {
        let m = self.metrics.map_or_else(
            || ",,,,,".to_string(),
            |m| format!("{},{},{},{},{},{}", m.bw_mbps, m.delay_ms, m.loss, m.err, m.len, m.dist_m),
        );
        let cost = self.cost.map(|c| c.to_string()).unwrap_or_default();
        format!("{},{},{m},{cost},{}", self.snapshot_id, self.algorithm, u8::from(self.valid))
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// Topology and group shared by every snapshot of a comparison.
pub struct Instance<'a> {
    pub net: &'a Network,
    pub partition: &'a DomainPartition,
    pub group: &'a MulticastGroup,
}

fn steiner_tree(
    inst: &Instance<'_>,
    alg: Algorithm,
    norm: &NormalizedSnapshot,
    w: &CostWeights,
) -> Result<CrossDomainTree> {
    let graph = WeightedGraph::from_network(inst.net, &edge_weights(norm, w))?;
    let src = inst.group.src();
    let dests = inst.group.online_dests();
    let mut terminals: BTreeSet<_> = dests.clone();
    terminals.insert(src);
    let tree = match alg {
        Algorithm::Kmb => kmb(&graph, &terminals)?,
        Algorithm::Sctf => sctf(&graph, src, &dests)?,
        Algorithm::Exact => exact_steiner(&graph, &terminals)?,
        Algorithm::Macdmr => unreachable!("not a Steiner baseline"),
    };
    Ok(CrossDomainTree::from_flat(src, tree.links, inst.partition)?)
}

/// Runs one algorithm on one snapshot. Failures become rows with the error
/// recorded and metrics omitted.
pub fn run_algorithm(
    inst: &Instance<'_>,
    alg: Algorithm,
    snapshot_id: usize,
    snap: &Snapshot,
    agents: Option<&MultiAgent>,
    hp: &Hyperparams,
) -> ReportRow {
    let built = match alg {
        Algorithm::Macdmr => match agents {
            Some(a) => Scenario::new(inst.net, inst.partition, inst.group, &snap.norm, hp.rewards())
                .and_then(|sc| greedy_rollout(a, &sc, hp))
                .map_err(Error::from)
                .and_then(|r| r.tree.ok_or_else(|| Error::Runtime("agents did not complete a tree".into()))),
            None => Err(Error::Runtime("no trained agents".into())),
        },
        _ => steiner_tree(inst, alg, &snap.norm, &hp.weights),
    };
    let mut row =
        ReportRow { snapshot_id, algorithm: alg, metrics: None, cost: None, valid: false, tree: None, error: None };
    match built {
        Ok(t) => {
            row.valid = validate(&t, inst.group, inst.partition).is_empty();
            match evaluate_tree(&t, inst.group, &snap.raw) {
                Ok(m) => row.metrics = Some(m),
                Err(e) => row.error = Some(e.to_string()),
            }
            row.cost = Scenario::new(inst.net, inst.partition, inst.group, &snap.norm, hp.rewards())
                .and_then(|sc| tree_weight(&t, &sc))
                .ok();
            row.tree = Some(t);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Every algorithm on every snapshot, snapshot-major.
pub fn run_comparison(
    inst: &Instance<'_>,
    snapshots: &[Snapshot],
    algorithms: &[Algorithm],
    agents: Option<&MultiAgent>,
    hp: &Hyperparams,
) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (i, s) in snapshots.iter().enumerate() {
        for alg in algorithms {
            rows.push(run_algorithm(inst, *alg, i, s, agents, hp));
        }
    }
    rows
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Means {
    pub bw_mbps: f64,
    pub delay_ms: f64,
    pub loss: f64,
    pub err: f64,
    pub len: f64,
    pub dist_m: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub rows: usize,
    /// Rows with metrics; the means are taken over these.
    pub evaluated: usize,
    pub valid: usize,
    pub failed: usize,
    pub mean: Option<Means>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub snapshots: usize,
    pub algorithms: BTreeMap<String, AlgorithmSummary>,
}

/// Arithmetic means per algorithm over the rows that carry metrics, summed
/// in row order.
pub fn summarize(rows: &[ReportRow]) -> Summary {
    let mut by_alg: BTreeMap<Algorithm, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        by_alg.entry(r.algorithm).or_default().push(r);
    }
    let snapshots = rows.iter().map(|r| r.snapshot_id).collect::<BTreeSet<_>>().len();
    let algorithms = by_alg
        .into_iter()
        .map(|(alg, rs)| {
            let measured: Vec<(&TreeMetrics, f64)> =
                rs.iter().filter_map(|r| Some((r.metrics.as_ref()?, r.cost?))).collect();
            let k = measured.len() as f64;
            let mean = (!measured.is_empty()).then(|| {
                let mut m = Means::default();
                for (x, c) in &measured {
                    m.bw_mbps += x.bw_mbps;
                    m.delay_ms += x.delay_ms;
                    m.loss += x.loss;
                    m.err += x.err;
                    m.len += x.len as f64;
                    m.dist_m += x.dist_m;
                    m.cost += c;
                }
                Means {
                    bw_mbps: m.bw_mbps / k,
                    delay_ms: m.delay_ms / k,
                    loss: m.loss / k,
                    err: m.err / k,
                    len: m.len / k,
                    dist_m: m.dist_m / k,
                    cost: m.cost / k,
                }
            });
            let summary = AlgorithmSummary {
                rows: rs.len(),
                evaluated: measured.len(),
                valid: rs.iter().filter(|r| r.valid).count(),
                failed: rs.iter().filter(|r| r.tree.is_none()).count(),
                mean,
            };
            (alg.name().to_string(), summary)
        })
        .collect();
    Summary { snapshots, algorithms }
}

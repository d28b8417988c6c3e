//! Agent observations: five metric planes plus a tree-state plane, each
//! `n x n`, flattened channel-major.
//!
//! The metric planes are shared by every state built from one snapshot, and
//! both parts are kept sparse since non-edges are zero.

use std::collections::BTreeMap;
use std::sync::Arc;

use cdmr_core::link_metrics::Channel;
use cdmr_core::{NodeId, NormalizedSnapshot};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 6;
const METRIC_CHANNELS: usize = 5;

/// Nonzero entries of the five metric matrices of a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricPlanes {
    n: usize,
    entries: Vec<(usize, f64)>,
}

impl MetricPlanes {
    pub fn from_snapshot(snap: &NormalizedSnapshot, n: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for ((u, v), m) in snap.iter() {
            if *u >= n || *v >= n {
                return Err(Error::DimensionMismatch { expected: n, got: (*u).max(*v) + 1 });
            }
            for c in Channel::ALL {
                let x = c.get(m);
                if x != 0.0 {
                    entries.push((c.index() * n * n + u * n + v, x));
                }
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        Ok(Self { n, entries })
    }

    /// Planes from a dense channel-major `5 x n x n` array.
    pub fn from_dense(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != METRIC_CHANNELS * n * n {
            return Err(Error::DimensionMismatch { expected: METRIC_CHANNELS * n * n, got: values.len() });
        }
        let entries = values.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; METRIC_CHANNELS * self.n * self.n];
        for (i, x) in &self.entries {
            out[*i] = *x;
        }
        out
    }
}

/// Role of a node on the diagonal of the tree-state plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Source of the group or root of an intra-domain tree.
    Root,
    UnreachedTarget,
    ReachedTarget,
    InTree,
}

impl Role {
    pub fn value(self) -> f64 {
        match self {
            Role::Root => 1.0,
            Role::UnreachedTarget => 0.5,
            Role::ReachedTarget => 0.75,
            Role::InTree => 0.25,
        }
    }
}

/// Tree-state matrix: `[i][j] = 1` for tree edges in both orientations,
/// role marks on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeMask {
    n: usize,
    cells: BTreeMap<(NodeId, NodeId), f64>,
}

impl TreeMask {
    pub fn new(n: usize) -> Self {
        Self { n, cells: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set_role(&mut self, v: NodeId, role: Role) {
        self.cells.insert((v, v), role.value());
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) {
        self.cells.insert((u, v), 1.0);
        self.cells.insert((v, u), 1.0);
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.cells.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for ((i, j), x) in &self.cells {
            out[i * self.n + j] = *x;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateTensor {
    planes: Arc<MetricPlanes>,
    mask: TreeMask,
}

pub fn build_state(planes: &Arc<MetricPlanes>, mask: TreeMask) -> Result<StateTensor> {
    if planes.n != mask.n {
        return Err(Error::DimensionMismatch { expected: planes.n, got: mask.n });
    }
    if let Some((i, j)) = mask.cells.keys().find(|(i, j)| *i >= mask.n || *j >= mask.n) {
        return Err(Error::DimensionMismatch { expected: mask.n, got: (*i).max(*j) + 1 });
    }
    Ok(StateTensor { planes: Arc::clone(planes), mask })
}

impl StateTensor {
    pub fn n(&self) -> usize {
        self.planes.n
    }

    pub fn input_len(&self) -> usize {
        CHANNELS * self.n() * self.n()
    }

    pub fn mask(&self) -> &TreeMask {
        &self.mask
    }

    /// Entry `[channel][i][j]`; channel 5 is the tree plane.
    pub fn get(&self, channel: usize, i: usize, j: usize) -> f64 {
        let n = self.n();
        if channel == METRIC_CHANNELS {
            return self.mask.get(i, j);
        }
        let idx = channel * n * n + i * n + j;
        match self.planes.entries.binary_search_by_key(&idx, |e| e.0) {
            Ok(k) => self.planes.entries[k].1,
            Err(_) => 0.0,
        }
    }

    /// Nonzero entries of the flattened tensor.
    pub fn sparse(&self) -> Vec<(usize, f64)> {
        let n = self.n();
        let offset = METRIC_CHANNELS * n * n;
        let mut out = Vec::with_capacity(self.planes.entries.len() + self.mask.cells.len());
        out.extend_from_slice(&self.planes.entries);
        out.extend(self.mask.cells.iter().map(|((i, j), x)| (offset + i * n + j, *x)));
        out
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = self.planes.dense();
        out.extend(self.mask.dense());
        out
    }
}

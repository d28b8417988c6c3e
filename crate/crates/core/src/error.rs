use std::path::PathBuf;

use crate::topology::{DomainId, Link, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unassigned node {0}")]
    UnassignedNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid domain id {0} (domains are numbered from 1)")]
    InvalidDomain(u32),
    #[error("domain {0} has no nodes")]
    EmptyDomain(DomainId),
    #[error("node ids must be dense 0..{expected}, found {found}")]
    NonDenseIds { expected: usize, found: NodeId },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Link),
    #[error("network is disconnected: node {0} unreachable from node 0")]
    Disconnected(NodeId),
    #[error("domain {domain} is disconnected: node {node} unreachable inside the domain")]
    DomainDisconnected { domain: DomainId, node: NodeId },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("time delta must be positive, got {0} s")]
    NonPositiveInterval(f64),
    #[error("loss undefined: sender transmitted zero packets")]
    UndefinedLoss,
    #[error("error rate undefined: zero packets on the link")]
    UndefinedErrorRate,
    #[error("snapshot is empty")]
    EmptySnapshot,
    #[error("missing metrics for edge {0}->{1}")]
    MissingEdgeMetric(NodeId, NodeId),
    #[error("missing counter samples for edges: {0:?}")]
    MissingSamples(Vec<(NodeId, NodeId)>),
    #[error("destination {0} is not reachable in the tree")]
    Unreachable(NodeId),
    #[error("boundary node {0} is not part of the intra-domain tree of its domain")]
    DanglingBoundaryNode(NodeId),
    #[error("invalid multicast group: {0}")]
    InvalidGroup(String),
    #[error("disconnected terminals: {0} cannot be reached")]
    DisconnectedTerminals(NodeId),
    #[error("instance too large for the exact solver: {0}")]
    InstanceTooLarge(String),
    #[error("tree rejected: {0}")]
    InvalidTree(String),
    #[error("node {0} is already an online member")]
    AlreadyMember(NodeId),
    #[error("node {0} is not an online member")]
    NotMember(NodeId),
    #[error("schema violation: {0}")]
    Schema(String),
}

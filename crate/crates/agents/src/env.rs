//! Tree-building environments. The inter-domain environment picks
//! inter-domain links until every destination domain hangs off the source
//! domain; each intra-domain environment picks nodes until its root reaches
//! all its targets (local destinations and exit boundary nodes).
//!
//! Valid actions extend the tree and earn the scaled single-edge reward, plus
//! an end-task reward when a target is first reached. Loop actions and
//! invalid actions earn a fixed penalty and leave the state unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use cdmr_core::multicast::{aggregate, path_cost, InterdomainTree, IntradomainTree};
use cdmr_core::{
    CostWeights, DomainId, DomainPartition, EdgeMetrics, Link, MulticastGroup, Network, NodeId, NormalizedSnapshot,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{build_state, MetricPlanes, Role, StateTensor, TreeMask};

/// Which of the two positive rewards the ratio `lambda_part` scales.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaledReward {
    #[default]
    Part,
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub weights: CostWeights,
    pub lambda_part: f64,
    pub scaled: ScaledReward,
    pub r_loop: f64,
    pub r_hell: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            lambda_part: 0.1,
            scaled: ScaledReward::Part,
            r_loop: -0.5,
            r_hell: -0.7,
        }
    }
}

impl RewardParams {
    fn scales(&self) -> (f64, f64) {
        match self.scaled {
            ScaledReward::Part => (self.lambda_part, 1.0),
            ScaledReward::End => (1.0, self.lambda_part),
        }
    }

    /// Single-edge reward on normalized metrics, already scaled.
    pub fn part(&self, m: &EdgeMetrics) -> f64 {
        self.scales().0 * (self.weights.total() - self.weights.edge_cost(m))
    }

    /// End-task reward of a whole path, already scaled. Delay is summed along
    /// the path and not clamped, so this can go negative on long paths.
    pub fn end<'a>(&self, edges: impl IntoIterator<Item = &'a EdgeMetrics>) -> f64 {
        self.scales().1 * (self.weights.total() - path_cost(&aggregate(edges), &self.weights))
    }
}

/// Everything an episode reads: topology, group, one snapshot and rewards.
#[derive(Clone, Debug)]
pub struct Scenario<'a> {
    pub net: &'a Network,
    pub partition: &'a DomainPartition,
    pub group: &'a MulticastGroup,
    pub snapshot: &'a NormalizedSnapshot,
    pub planes: Arc<MetricPlanes>,
    pub rewards: RewardParams,
}

impl<'a> Scenario<'a> {
    pub fn new(
        net: &'a Network,
        partition: &'a DomainPartition,
        group: &'a MulticastGroup,
        snapshot: &'a NormalizedSnapshot,
        rewards: RewardParams,
    ) -> Result<Self> {
        let planes = Arc::new(MetricPlanes::from_snapshot(snapshot, net.node_count())?);
        Ok(Self::with_planes(net, partition, group, snapshot, planes, rewards))
    }

    /// Reuses precomputed planes of `snapshot`.
    pub fn with_planes(
        net: &'a Network,
        partition: &'a DomainPartition,
        group: &'a MulticastGroup,
        snapshot: &'a NormalizedSnapshot,
        planes: Arc<MetricPlanes>,
        rewards: RewardParams,
    ) -> Self {
        Self { net, partition, group, snapshot, planes, rewards }
    }

    fn metrics(&self, u: NodeId, v: NodeId) -> Result<&'a EdgeMetrics> {
        self.snapshot.get(u, v).ok_or(Error::Core(cdmr_core::Error::MissingEdgeMetric(u, v)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Extended,
    Loop,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub outcome: Outcome,
    /// The tree is complete.
    pub done: bool,
}

pub trait Environment {
    fn action_count(&self) -> usize;
    fn state(&self) -> Result<StateTensor>;
    /// Actions that would extend the tree.
    fn valid_actions(&self) -> Vec<bool>;
    fn step(&mut self, action: usize) -> Result<StepResult>;
    fn is_complete(&self) -> bool;
    fn steps(&self) -> usize;
    fn t_max(&self) -> usize;

    fn is_over(&self) -> bool {
        self.is_complete() || self.steps() >= self.t_max()
    }
}

fn check_action(action: usize, count: usize) -> Result<()> {
    if action >= count {
        return Err(Error::ActionOutOfRange { action, count });
    }
    Ok(())
}

/// Inter-domain tree under construction, with the boundary nodes each
/// domain is entered and left through.
#[derive(Clone, Debug, PartialEq)]
pub struct InterdomainPlan {
    pub tree: InterdomainTree,
    /// Entry node per domain in the plan; the source for its own domain.
    pub roots: BTreeMap<DomainId, NodeId>,
    pub exits: BTreeMap<DomainId, BTreeSet<NodeId>>,
}

pub struct InterdomainEnv<'s, 'a> {
    scenario: &'s Scenario<'a>,
    actions: Vec<Link>,
    source_domain: DomainId,
    dest_domains: BTreeSet<DomainId>,
    /// Entry edge of every connected domain except the source domain,
    /// oriented parent side first.
    parent: BTreeMap<DomainId, (NodeId, NodeId)>,
    steps: usize,
    t_max: usize,
}

impl<'s, 'a> InterdomainEnv<'s, 'a> {
    pub fn new(scenario: &'s Scenario<'a>, t_max: usize) -> Self {
        let p = scenario.partition;
        let source_domain = p.dom(scenario.group.src());
        let dest_domains =
            scenario.group.online_dests().into_iter().map(|v| p.dom(v)).filter(|d| *d != source_domain).collect();
        Self {
            scenario,
            actions: p.inter_links().iter().copied().collect(),
            source_domain,
            dest_domains,
            parent: BTreeMap::new(),
            steps: 0,
            t_max,
        }
    }

    pub fn actions(&self) -> &[Link] {
        &self.actions
    }

    fn is_connected(&self, d: DomainId) -> bool {
        d == self.source_domain || self.parent.contains_key(&d)
    }

    /// Directed inter-domain edges from the source domain down to `d`.
    fn edges_to(&self, mut d: DomainId) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        while let Some(&(u, v)) = self.parent.get(&d) {
            out.push((u, v));
            d = self.scenario.partition.dom(u);
        }
        out.reverse();
        out
    }

    /// Orientation of action `a` if it would attach a new domain.
    fn extension(&self, a: usize) -> Option<(NodeId, NodeId)> {
        let l = self.actions[a];
        let p = self.scenario.partition;
        match (self.is_connected(p.dom(l.a())), self.is_connected(p.dom(l.b()))) {
            (true, false) => Some((l.a(), l.b())),
            (false, true) => Some((l.b(), l.a())),
            _ => None,
        }
    }

    /// The built tree with branches leading only to transit domains removed.
    pub fn plan(&self) -> InterdomainPlan {
        let p = self.scenario.partition;
        let mut parent = self.parent.clone();
        loop {
            let has_child: BTreeSet<DomainId> = parent.values().map(|(u, _)| p.dom(*u)).collect();
            let dead: Vec<DomainId> =
                parent.keys().copied().filter(|d| !has_child.contains(d) && !self.dest_domains.contains(d)).collect();
            if dead.is_empty() {
                break;
            }
            for d in dead {
                parent.remove(&d);
            }
        }
        let mut roots = BTreeMap::from([(self.source_domain, self.scenario.group.src())]);
        let mut exits: BTreeMap<DomainId, BTreeSet<NodeId>> = BTreeMap::new();
        for (d, (u, v)) in &parent {
            roots.insert(*d, *v);
            exits.entry(p.dom(*u)).or_default().insert(*u);
        }
        let tree = InterdomainTree { edges: parent.values().map(|(u, v)| Link::new(*u, *v)).collect() };
        InterdomainPlan { tree, roots, exits }
    }
}

impl Environment for InterdomainEnv<'_, '_> {
    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn state(&self) -> Result<StateTensor> {
        let s = self.scenario;
        let mut mask = TreeMask::new(s.net.node_count());
        for (u, v) in self.parent.values() {
            mask.add_edge(*u, *v);
            mask.set_role(*u, Role::InTree);
            mask.set_role(*v, Role::InTree);
        }
        for d in s.group.online_dests() {
            let role = if self.is_connected(s.partition.dom(d)) { Role::ReachedTarget } else { Role::UnreachedTarget };
            mask.set_role(d, role);
        }
        mask.set_role(s.group.src(), Role::Root);
        build_state(&s.planes, mask)
    }

    fn valid_actions(&self) -> Vec<bool> {
        (0..self.actions.len()).map(|a| self.extension(a).is_some()).collect()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, self.actions.len())?;
        self.steps += 1;
        let rewards = &self.scenario.rewards;
        let l = self.actions[action];
        let p = self.scenario.partition;
        let (reward, outcome) = match self.extension(action) {
            Some((u, v)) => {
                let d = p.dom(v);
                self.parent.insert(d, (u, v));
                let mut r = rewards.part(self.scenario.metrics(u, v)?);
                if self.dest_domains.contains(&d) {
                    let edges = self
                        .edges_to(d)
                        .into_iter()
                        .map(|(a, b)| self.scenario.metrics(a, b))
                        .collect::<Result<Vec<_>>>()?;
                    r += rewards.end(edges);
                }
                (r, Outcome::Extended)
            }
            None if self.is_connected(p.dom(l.a())) => (rewards.r_loop, Outcome::Loop),
            None => (rewards.r_hell, Outcome::Invalid),
        };
        Ok(StepResult { reward, outcome, done: self.is_complete() })
    }

    fn is_complete(&self) -> bool {
        self.dest_domains.iter().all(|d| self.parent.contains_key(d))
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn t_max(&self) -> usize {
        self.t_max
    }
}

pub struct IntradomainEnv<'s, 'a> {
    scenario: &'s Scenario<'a>,
    domain: DomainId,
    actions: Vec<NodeId>,
    root: NodeId,
    targets: BTreeSet<NodeId>,
    parent: BTreeMap<NodeId, NodeId>,
    steps: usize,
    t_max: usize,
}

impl<'s, 'a> IntradomainEnv<'s, 'a> {
    pub fn new(
        scenario: &'s Scenario<'a>,
        domain: DomainId,
        root: NodeId,
        targets: BTreeSet<NodeId>,
        t_max: usize,
    ) -> Result<Self> {
        let p = scenario.partition;
        if let Some(v) =
            std::iter::once(root).chain(targets.iter().copied()).find(|v| p.domain_of(*v).ok() != Some(domain))
        {
            return Err(Error::InvalidConfig(format!("node {v} is not in domain {domain}")));
        }
        Ok(Self {
            scenario,
            domain,
            actions: p.nodes_in(domain).to_vec(),
            root,
            targets,
            parent: BTreeMap::new(),
            steps: 0,
            t_max,
        })
    }

    /// Root, local online destinations and exit boundary nodes taken from an
    /// inter-domain plan.
    pub fn from_plan(
        scenario: &'s Scenario<'a>,
        plan: &InterdomainPlan,
        domain: DomainId,
        t_max: usize,
    ) -> Result<Self> {
        let root = *plan
            .roots
            .get(&domain)
            .ok_or_else(|| Error::InvalidConfig(format!("domain {domain} is not part of the plan")))?;
        let mut targets = scenario.partition.dests_in_domain(scenario.group.online_dests(), domain);
        targets.extend(plan.exits.get(&domain).into_iter().flatten().copied());
        Self::new(scenario, domain, root, targets, t_max)
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn actions(&self) -> &[NodeId] {
        &self.actions
    }

    pub fn targets(&self) -> &BTreeSet<NodeId> {
        &self.targets
    }

    fn in_tree(&self, v: NodeId) -> bool {
        v == self.root || self.parent.contains_key(&v)
    }

    /// Cheapest edge from the tree to `v`, ties to the smaller tree node.
    fn attachment(&self, v: NodeId) -> Option<(NodeId, f64)> {
        let w = &self.scenario.rewards.weights;
        let mut best: Option<(NodeId, f64)> = None;
        for &u in self.scenario.net.neighbors(v) {
            if self.scenario.partition.dom(u) != self.domain || !self.in_tree(u) {
                continue;
            }
            let c = w.edge_cost(self.scenario.snapshot.get(u, v)?);
            if best.is_none_or(|(bu, bc)| c < bc || (c == bc && u < bu)) {
                best = Some((u, c));
            }
        }
        best
    }

    fn path_from_root(&self, mut v: NodeId) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        while let Some(&u) = self.parent.get(&v) {
            out.push((u, v));
            v = u;
        }
        out.reverse();
        out
    }

    /// The built tree with leaves that are not targets pruned away.
    pub fn tree(&self) -> IntradomainTree {
        let mut parent = self.parent.clone();
        loop {
            let inner: BTreeSet<NodeId> = parent.values().copied().collect();
            let dead: Vec<NodeId> =
                parent.keys().copied().filter(|v| !inner.contains(v) && !self.targets.contains(v)).collect();
            if dead.is_empty() {
                break;
            }
            for v in dead {
                parent.remove(&v);
            }
        }
        IntradomainTree {
            domain: self.domain,
            root: self.root,
            edges: parent.iter().map(|(v, u)| Link::new(*u, *v)).collect(),
        }
    }
}

impl Environment for IntradomainEnv<'_, '_> {
    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn state(&self) -> Result<StateTensor> {
        let mut mask = TreeMask::new(self.scenario.net.node_count());
        for (v, u) in &self.parent {
            mask.add_edge(*u, *v);
            mask.set_role(*v, Role::InTree);
        }
        for t in &self.targets {
            mask.set_role(*t, if self.in_tree(*t) { Role::ReachedTarget } else { Role::UnreachedTarget });
        }
        mask.set_role(self.root, Role::Root);
        build_state(&self.scenario.planes, mask)
    }

    fn valid_actions(&self) -> Vec<bool> {
        self.actions.iter().map(|v| !self.in_tree(*v) && self.attachment(*v).is_some()).collect()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, self.actions.len())?;
        self.steps += 1;
        let rewards = &self.scenario.rewards;
        let v = self.actions[action];
        let (reward, outcome) = if self.in_tree(v) {
            (rewards.r_loop, Outcome::Loop)
        } else if let Some((u, _)) = self.attachment(v) {
            self.parent.insert(v, u);
            let mut r = rewards.part(self.scenario.metrics(u, v)?);
            if self.targets.contains(&v) {
                let edges = self
                    .path_from_root(v)
                    .into_iter()
                    .map(|(a, b)| self.scenario.metrics(a, b))
                    .collect::<Result<Vec<_>>>()?;
                r += rewards.end(edges);
            }
            (r, Outcome::Extended)
        } else {
            (rewards.r_hell, Outcome::Invalid)
        };
        Ok(StepResult { reward, outcome, done: self.is_complete() })
    }

    fn is_complete(&self) -> bool {
        self.targets.iter().all(|t| self.in_tree(*t))
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn t_max(&self) -> usize {
        self.t_max
    }
}

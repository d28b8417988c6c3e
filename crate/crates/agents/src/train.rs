//! Episode orchestration for the inter-domain agent and one agent per
//! domain, and the hybrid offline/online trainer.
//!
//! Agents never share parameters, buffers or random streams: each owns a
//! ChaCha stream derived from the run seed and its identity, so one agent's
//! data cannot perturb another's updates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use cdmr_core::baselines::edge_weights;
use cdmr_core::multicast::{compose, validate};
use cdmr_core::{CostWeights, CrossDomainTree, DomainId, DomainPartition, MulticastGroup, Network, NormalizedSnapshot};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor_critic::ActorCritic;
use crate::buffer::{ReplayBuffer, Transition};
use crate::env::{Environment, InterdomainEnv, IntradomainEnv, RewardParams, ScaledReward, Scenario};
use crate::error::{Error, Result};
use crate::state::{MetricPlanes, StateTensor, CHANNELS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Random-policy prefill and offline pretraining, then online episodes
    /// with periodic offline batches.
    #[default]
    Hybrid,
    /// Online episodes only.
    Online,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub weights: CostWeights,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Offline batch size `k`.
    pub batch_size: usize,
    /// Online updates after every environment step.
    pub n_update: usize,
    pub episodes: usize,
    pub r_loop: f64,
    pub r_hell: f64,
    pub lambda_part: f64,
    pub scaled_reward: ScaledReward,
    /// Step cap per episode as a multiple of the agent's action count.
    pub t_max_factor: usize,
    pub prefill_episodes: usize,
    /// Share of prefill actions drawn from the valid set.
    pub prefill_valid_bias: f64,
    /// Passes over each buffer after prefill.
    pub pretrain_epochs: usize,
    /// Environment steps between offline batches during online episodes.
    pub offline_interval: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub mode: TrainingMode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            gamma: 0.9,
            batch_size: 32,
            n_update: 10,
            episodes: 2000,
            r_loop: -0.5,
            r_hell: -0.7,
            lambda_part: 0.1,
            scaled_reward: ScaledReward::Part,
            t_max_factor: 4,
            prefill_episodes: 50,
            prefill_valid_bias: 0.8,
            pretrain_epochs: 2,
            offline_interval: 32,
            buffer_capacity: 10_000,
            hidden: vec![256, 256],
            seed: 0,
            mode: TrainingMode::Hybrid,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        self.weights.validate()?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.prefill_valid_bias) {
            return bad("prefill_valid_bias must lie in [0, 1]");
        }
        if self.offline_interval == 0 || self.buffer_capacity == 0 {
            return bad("offline_interval and buffer_capacity must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if ![self.r_loop, self.r_hell, self.lambda_part].iter().all(|x| x.is_finite()) {
            return bad("rewards must be finite");
        }
        Ok(())
    }

    pub fn rewards(&self) -> RewardParams {
        RewardParams {
            weights: self.weights,
            lambda_part: self.lambda_part,
            scaled: self.scaled_reward,
            r_loop: self.r_loop,
            r_hell: self.r_hell,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentId {
    Inter,
    Intra(DomainId),
}

impl AgentId {
    fn stream(self) -> u64 {
        match self {
            AgentId::Inter => 1,
            AgentId::Intra(d) => 2 + u64::from(d.0),
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentId::Inter => write!(f, "inter"),
            AgentId::Intra(d) => write!(f, "intra-{}", d.0),
        }
    }
}

impl FromStr for AgentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inter" {
            return Ok(AgentId::Inter);
        }
        s.strip_prefix("intra-")
            .and_then(|d| d.parse().ok())
            .map(|d| AgentId::Intra(DomainId(d)))
            .ok_or_else(|| Error::Checkpoint(format!("bad agent id {s:?}")))
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub struct Agent {
    pub id: AgentId,
    pub net: ActorCritic,
    pub buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    since_offline: usize,
}

impl Agent {
    pub fn new(id: AgentId, input_len: usize, actions: usize, hp: &Hyperparams) -> Self {
        let mut rng = stream_rng(hp.seed, id.stream());
        let net = ActorCritic::new(input_len, &hp.hidden, actions, &mut rng);
        Self::with_net(id, net, hp)
    }

    /// Wraps existing parameters with a fresh buffer and random stream.
    pub fn with_net(id: AgentId, net: ActorCritic, hp: &Hyperparams) -> Self {
        let mut rng = stream_rng(hp.seed, id.stream());
        rng.set_word_pos(1 << 40);
        Self { id, net, buffer: ReplayBuffer::new(hp.buffer_capacity), rng, since_offline: 0 }
    }

    /// One pass over the buffer in batches of `k` (see [`offline_training`]).
    pub fn offline_epoch(&mut self, hp: &Hyperparams) -> Result<usize> {
        let batches = self.buffer.len().div_ceil(hp.batch_size);
        offline_training(&mut self.net, &self.buffer, hp, batches, &mut self.rng)
    }
}

/// Runs `batches` batches of `k` transitions, each drawn without replacement,
/// applying the critic then actor update per transition. Returns the number
/// of updates.
pub fn offline_training(
    net: &mut ActorCritic,
    buffer: &ReplayBuffer,
    hp: &Hyperparams,
    batches: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    if buffer.len() < hp.batch_size.max(1) {
        return Err(Error::BufferTooSmall { len: buffer.len(), needed: hp.batch_size.max(1) });
    }
    let mut updates = 0;
    for _ in 0..batches {
        for t in buffer.sample(hp.batch_size, rng) {
            net.learn(t, hp.gamma, hp.actor_lr, hp.critic_lr)?;
            updates += 1;
        }
    }
    Ok(updates)
}

/// The inter-domain agent and one intra-domain agent per domain.
pub struct MultiAgent {
    n: usize,
    pub inter: Agent,
    pub intra: BTreeMap<DomainId, Agent>,
}

impl MultiAgent {
    pub fn new(net: &Network, p: &DomainPartition, hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        let n = net.node_count();
        let input = CHANNELS * n * n;
        if p.inter_links().is_empty() {
            return Err(Error::InvalidConfig("partition has no inter-domain links".into()));
        }
        let inter = Agent::new(AgentId::Inter, input, p.inter_links().len(), hp);
        let intra = p.domains().map(|d| (d, Agent::new(AgentId::Intra(d), input, p.nodes_in(d).len(), hp))).collect();
        Ok(Self { n, inter, intra })
    }

    /// Agents with the given parameters, checked against the topology.
    pub fn from_params(
        net: &Network,
        p: &DomainPartition,
        params: Vec<(AgentId, ActorCritic)>,
        hp: &Hyperparams,
    ) -> Result<Self> {
        let mut fresh = Self::new(net, p, &Hyperparams { hidden: vec![1], ..hp.clone() })?;
        let mut seen = 0;
        for (id, ac) in params {
            let slot = match id {
                AgentId::Inter => &mut fresh.inter,
                AgentId::Intra(d) => {
                    fresh.intra.get_mut(&d).ok_or_else(|| Error::Checkpoint(format!("unknown agent {id}")))?
                }
            };
            let want = (slot.net.actor.input_len(), slot.net.action_count());
            if (ac.actor.input_len(), ac.action_count()) != want || ac.critic.input_len() != want.0 {
                return Err(Error::Checkpoint(format!("agent {id} does not match the topology")));
            }
            *slot = Agent::with_net(id, ac, hp);
            seen += 1;
        }
        if seen != 1 + fresh.intra.len() {
            return Err(Error::Checkpoint(format!("expected {} agents, found {seen}", 1 + fresh.intra.len())));
        }
        Ok(fresh)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        std::iter::once(&self.inter).chain(self.intra.values())
    }

    pub fn agents_mut(&mut self) -> impl Iterator<Item = &mut Agent> {
        std::iter::once(&mut self.inter).chain(self.intra.values_mut())
    }
}

/// How actions are picked during an episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Behaviour {
    /// Sample from the policy and learn according to the training mode.
    Learn,
    /// Random prefill policy; transitions are stored, nothing is learned.
    Prefill,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AgentStats {
    pub reward: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub agents: Vec<(AgentId, AgentStats)>,
    /// Composed tree, absent when some agent hit its step cap.
    pub tree: Option<CrossDomainTree>,
    pub valid: bool,
    /// Sum of symmetric composite link weights of the tree.
    pub cost: Option<f64>,
}

impl EpisodeStats {
    pub fn total_reward(&self) -> f64 {
        self.agents.iter().map(|(_, s)| s.reward).sum()
    }

    pub fn total_steps(&self) -> usize {
        self.agents.iter().map(|(_, s)| s.steps).sum()
    }
}

trait Driver {
    fn choose(&mut self, s: &StateTensor, valid: &[bool]) -> Result<usize>;
    fn observe(&mut self, t: Transition) -> Result<()>;
}

struct Learner<'a> {
    agent: &'a mut Agent,
    hp: &'a Hyperparams,
    behaviour: Behaviour,
}

impl Driver for Learner<'_> {
    fn choose(&mut self, s: &StateTensor, valid: &[bool]) -> Result<usize> {
        let rng = &mut self.agent.rng;
        match self.behaviour {
            Behaviour::Learn => {
                let probs = self.agent.net.policy(s)?;
                let dist = WeightedIndex::new(&probs).map_err(|_| Error::CorruptParams("policy"))?;
                Ok(dist.sample(rng))
            }
            Behaviour::Prefill => {
                let candidates: Vec<usize> = (0..valid.len()).filter(|a| valid[*a]).collect();
                if !candidates.is_empty() && rng.gen_bool(self.hp.prefill_valid_bias) {
                    Ok(candidates[rng.gen_range(0..candidates.len())])
                } else {
                    Ok(rng.gen_range(0..valid.len()))
                }
            }
        }
    }

    fn observe(&mut self, t: Transition) -> Result<()> {
        let hp = self.hp;
        let agent = &mut *self.agent;
        if self.behaviour == Behaviour::Prefill {
            agent.buffer.push(t);
            return Ok(());
        }
        for _ in 0..hp.n_update {
            agent.net.learn(&t, hp.gamma, hp.actor_lr, hp.critic_lr)?;
        }
        if hp.mode == TrainingMode::Hybrid {
            agent.buffer.push(t);
            agent.since_offline += 1;
            if agent.since_offline >= hp.offline_interval && agent.buffer.len() >= hp.batch_size {
                offline_training(&mut agent.net, &agent.buffer, hp, 1, &mut agent.rng)?;
                agent.since_offline = 0;
            }
        }
        Ok(())
    }
}

/// Masked argmax: the most probable valid action, lowest index on ties.
/// Falls back to all actions if none is valid.
pub fn greedy_action(probs: &[f64], valid: &[bool]) -> usize {
    let any_valid = valid.iter().any(|v| *v);
    let mut best: Option<usize> = None;
    for (a, p) in probs.iter().enumerate() {
        if any_valid && !valid[a] {
            continue;
        }
        if best.is_none_or(|b| *p > probs[b]) {
            best = Some(a);
        }
    }
    best.unwrap_or(0)
}

struct Greedy<'a> {
    net: &'a ActorCritic,
}

impl Driver for Greedy<'_> {
    fn choose(&mut self, s: &StateTensor, valid: &[bool]) -> Result<usize> {
        Ok(greedy_action(&self.net.policy(s)?, valid))
    }

    fn observe(&mut self, _: Transition) -> Result<()> {
        Ok(())
    }
}

fn drive(env: &mut impl Environment, driver: &mut impl Driver) -> Result<AgentStats> {
    let mut stats = AgentStats::default();
    let mut state = env.state()?;
    while !env.is_over() {
        let action = driver.choose(&state, &env.valid_actions())?;
        let res = env.step(action)?;
        let next = env.state()?;
        stats.reward += res.reward;
        stats.steps += 1;
        driver.observe(Transition { state, action, reward: res.reward, next: next.clone(), done: res.done })?;
        state = next;
    }
    Ok(stats)
}

fn finish(
    scenario: &Scenario<'_>,
    agents: Vec<(AgentId, AgentStats)>,
    parts: Option<(cdmr_core::multicast::InterdomainTree, Vec<cdmr_core::multicast::IntradomainTree>)>,
) -> Result<EpisodeStats> {
    let tree = match parts {
        Some((ti, ts)) => compose(scenario.group.src(), ti, ts).ok(),
        None => None,
    };
    let valid = tree.as_ref().is_some_and(|t| validate(t, scenario.group, scenario.partition).is_empty());
    let cost = match &tree {
        Some(t) => Some(tree_weight(t, scenario)?),
        None => None,
    };
    Ok(EpisodeStats { agents, tree, valid, cost })
}

/// Sum of symmetric composite weights over the links of `t`.
pub fn tree_weight(t: &CrossDomainTree, scenario: &Scenario<'_>) -> Result<f64> {
    let w = edge_weights(scenario.snapshot, &scenario.rewards.weights);
    t.links().iter().map(|l| w.symmetric(l).ok_or(Error::Core(cdmr_core::Error::MissingEdgeMetric(l.a(), l.b())))).sum()
}

fn t_max(hp: &Hyperparams, actions: usize) -> usize {
    hp.t_max_factor * actions
}

/// One episode: the inter-domain agent builds its tree, the plan's boundary
/// nodes are handed to the intra-domain agents, each builds its domain tree,
/// and the parts are composed.
pub fn run_macdmr_episode(
    agents: &mut MultiAgent,
    scenario: &Scenario<'_>,
    hp: &Hyperparams,
    behaviour: Behaviour,
) -> Result<EpisodeStats> {
    let mut env = InterdomainEnv::new(scenario, t_max(hp, scenario.partition.inter_links().len()));
    let stats = drive(&mut env, &mut Learner { agent: &mut agents.inter, hp, behaviour })?;
    let mut all = vec![(AgentId::Inter, stats)];
    if !env.is_complete() {
        return finish(scenario, all, None);
    }
    let plan = env.plan();
    let mut trees = Vec::new();
    for d in plan.roots.keys() {
        let agent = agents.intra.get_mut(d).ok_or_else(|| Error::InvalidConfig(format!("no agent for domain {d}")))?;
        let limit = t_max(hp, scenario.partition.nodes_in(*d).len());
        let mut env = IntradomainEnv::from_plan(scenario, &plan, *d, limit)?;
        let stats = drive(&mut env, &mut Learner { agent, hp, behaviour })?;
        all.push((AgentId::Intra(*d), stats));
        if !env.is_complete() {
            return finish(scenario, all, None);
        }
        trees.push(env.tree());
    }
    finish(scenario, all, Some((plan.tree, trees)))
}

/// Evaluation rollout: masked argmax actions, no learning.
pub fn greedy_rollout(agents: &MultiAgent, scenario: &Scenario<'_>, hp: &Hyperparams) -> Result<EpisodeStats> {
    let mut env = InterdomainEnv::new(scenario, t_max(hp, scenario.partition.inter_links().len()));
    let stats = drive(&mut env, &mut Greedy { net: &agents.inter.net })?;
    let mut all = vec![(AgentId::Inter, stats)];
    if !env.is_complete() {
        return finish(scenario, all, None);
    }
    let plan = env.plan();
    let mut trees = Vec::new();
    for d in plan.roots.keys() {
        let agent = agents.intra.get(d).ok_or_else(|| Error::InvalidConfig(format!("no agent for domain {d}")))?;
        let limit = t_max(hp, scenario.partition.nodes_in(*d).len());
        let mut env = IntradomainEnv::from_plan(scenario, &plan, *d, limit)?;
        let stats = drive(&mut env, &mut Greedy { net: &agent.net })?;
        all.push((AgentId::Intra(*d), stats));
        if !env.is_complete() {
            return finish(scenario, all, None);
        }
        trees.push(env.tree());
    }
    finish(scenario, all, Some((plan.tree, trees)))
}

/// Training data shared read-only by every episode.
pub struct TrainingSet<'a> {
    pub net: &'a Network,
    pub partition: &'a DomainPartition,
    pub group: &'a MulticastGroup,
    pub snapshots: &'a [NormalizedSnapshot],
}

impl TrainingSet<'_> {
    fn planes(&self) -> Result<Vec<Arc<MetricPlanes>>> {
        self.snapshots.iter().map(|s| Ok(Arc::new(MetricPlanes::from_snapshot(s, self.net.node_count())?))).collect()
    }

    fn scenario(&self, i: usize, planes: &[Arc<MetricPlanes>], hp: &Hyperparams) -> Scenario<'_> {
        Scenario::with_planes(
            self.net,
            self.partition,
            self.group,
            &self.snapshots[i],
            Arc::clone(&planes[i]),
            hp.rewards(),
        )
    }
}

pub struct TrainingRun {
    pub agents: MultiAgent,
    pub episodes: Vec<EpisodeStats>,
}

/// Trains fresh agents. Snapshots are drawn uniformly per episode from the
/// run's own stream; with zero episodes the untrained agents are returned.
pub fn train(data: &TrainingSet<'_>, hp: &Hyperparams) -> Result<TrainingRun> {
    let mut agents = MultiAgent::new(data.net, data.partition, hp)?;
    let episodes = train_agents(&mut agents, data, hp)?;
    Ok(TrainingRun { agents, episodes })
}

/// Continues training `agents` in place.
pub fn train_agents(agents: &mut MultiAgent, data: &TrainingSet<'_>, hp: &Hyperparams) -> Result<Vec<EpisodeStats>> {
    hp.validate()?;
    if data.snapshots.is_empty() {
        return Err(Error::InvalidConfig("no training snapshots".into()));
    }
    data.group.check_nodes(data.net)?;
    if hp.episodes == 0 {
        return Ok(Vec::new());
    }
    let planes = data.planes()?;
    let mut rng = stream_rng(hp.seed, 0);
    if hp.mode == TrainingMode::Hybrid {
        for _ in 0..hp.prefill_episodes {
            let i = rng.gen_range(0..data.snapshots.len());
            run_macdmr_episode(agents, &data.scenario(i, &planes, hp), hp, Behaviour::Prefill)?;
        }
        for agent in agents.agents_mut() {
            if agent.buffer.len() >= hp.batch_size {
                for _ in 0..hp.pretrain_epochs {
                    agent.offline_epoch(hp)?;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(hp.episodes);
    for _ in 0..hp.episodes {
        let i = rng.gen_range(0..data.snapshots.len());
        out.push(run_macdmr_episode(agents, &data.scenario(i, &planes, hp), hp, Behaviour::Learn)?);
    }
    Ok(out)
}

/// `episode,agent_id,total_reward,steps,valid_tree,tree_cost` with one `all`
/// row per episode; an empty cost means no tree was built.
pub fn learning_curve_csv(episodes: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,agent_id,total_reward,steps,valid_tree,tree_cost\n");
    for (i, e) in episodes.iter().enumerate() {
        out.push_str(&curve_row(i, "all", e.total_reward(), e.total_steps(), e));
    }
    out
}

/// Same columns with one row per agent per episode.
pub fn agent_curve_csv(episodes: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,agent_id,total_reward,steps,valid_tree,tree_cost\n");
    for (i, e) in episodes.iter().enumerate() {
        for (id, s) in &e.agents {
            out.push_str(&curve_row(i, &id.to_string(), s.reward, s.steps, e));
        }
    }
    out
}

fn curve_row(i: usize, id: &str, reward: f64, steps: usize, e: &EpisodeStats) -> String {
    let cost = e.cost.map(|c| c.to_string()).unwrap_or_default();
    format!("{i},{id},{reward},{steps},{},{cost}\n", u8::from(e.valid))
}

mod common;

use std::collections::BTreeSet;

use cdmr_agents::env::{Environment, InterdomainEnv, IntradomainEnv, Outcome, RewardParams, ScaledReward};
use cdmr_agents::state::{Role, TreeMask};
use cdmr_agents::Scenario;
use cdmr_core::link_metrics::EdgeMetrics;
use cdmr_core::{DomainId, Link, MulticastGroup, NodeId, NormalizedSnapshot};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inter_action(env: &InterdomainEnv<'_, '_>, u: NodeId, v: NodeId) -> usize {
    env.actions().iter().position(|l| *l == Link::new(u, v)).unwrap()
}

fn intra_action(env: &IntradomainEnv<'_, '_>, v: NodeId) -> usize {
    env.actions().iter().position(|x| *x == v).unwrap()
}

#[test]
fn initial_state_carries_metrics_and_roles_only() {
    let (net, p) = toy();
    let snap = random_normalized(&net, &mut ChaCha8Rng::seed_from_u64(1));
    let g = MulticastGroup::new(0, [4, 16]).unwrap();
    let sc = Scenario::new(&net, &p, &g, &snap, RewardParams::default()).unwrap();
    let s = InterdomainEnv::new(&sc, 24).state().unwrap();
    let n = net.node_count();
    let dense = s.dense();
    assert_eq!(dense.len(), 6 * n * n);
    assert_eq!(&dense[..5 * n * n], snap.channel_matrices(n).as_slice());
    let tree_plane = &dense[5 * n * n..];
    for i in 0..n {
        for j in 0..n {
            let x = tree_plane[i * n + j];
            if i != j {
                assert_eq!(x, 0.0);
            }
        }
    }
    assert_eq!(s.get(5, 0, 0), 1.0);
    assert_eq!(s.get(5, 4, 4), 0.75);
    assert_eq!(s.get(5, 16, 16), 0.5);
    assert!(dense.iter().all(|x| (0.0..=1.0).contains(x)));
}

#[test]
fn adding_an_edge_flips_two_cells() {
    let mut mask = TreeMask::new(6);
    mask.set_role(0, Role::Root);
    mask.set_role(4, Role::UnreachedTarget);
    let before = mask.dense();
    mask.add_edge(1, 3);
    let changed: Vec<usize> =
        before.iter().zip(mask.dense()).enumerate().filter(|(_, (a, b))| **a != *b).map(|(i, _)| i).collect();
    assert_eq!(changed, vec![9, 19]); // cells (1, 3) and (3, 1) of a 6x6 grid
}

#[test]
fn inter_rewards() {
    let (net, p) = toy();
    let snap = one_perfect_link(&net, (1, 6));
    let g = MulticastGroup::new(0, [16]).unwrap();
    let rewards = RewardParams::default();
    let sc = Scenario::new(&net, &p, &g, &snap, rewards.clone()).unwrap();

    let mut env = InterdomainEnv::new(&sc, 24);
    let a = inter_action(&env, 7, 14);
    let before = env.state().unwrap();
    let r = env.step(a).unwrap();
    assert_eq!((r.reward, r.outcome), (-0.7, Outcome::Invalid));
    assert_eq!(env.state().unwrap(), before);

    let r = env.step(inter_action(&env, 1, 6)).unwrap();
    assert!((r.reward - 0.1 * 1.3).abs() < 1e-12);
    assert!(!r.done);
    env.step(inter_action(&env, 2, 10)).unwrap();
    let before = env.state().unwrap();
    let r = env.step(inter_action(&env, 9, 11)).unwrap();
    assert_eq!((r.reward, r.outcome), (-0.5, Outcome::Loop));
    assert_eq!(env.state().unwrap(), before);

    // Connecting the destination domain pays the end reward over 1-6, 7-14.
    let r = env.step(inter_action(&env, 7, 14)).unwrap();
    assert!(r.done);
    let worst = snap.get(7, 14).unwrap();
    let best = snap.get(1, 6).unwrap();
    let part = 0.1 * (1.3 - rewards.weights.edge_cost(worst));
    let end = rewards.end([best, worst]);
    assert!((r.reward - part - end).abs() < 1e-12);
    assert_eq!(env.steps(), 5);
    assert!(env.step(99).is_err());
}

#[test]
fn end_reward_example() {
    let m = EdgeMetrics { bw: 0.8, delay: 0.1, loss: 0.0, err: 0.0, dist: 0.2 };
    let r = RewardParams::default();
    assert!((r.end([&m]) - 1.11).abs() < 1e-12);
    let flipped = RewardParams { scaled: ScaledReward::End, ..r };
    assert!((flipped.end([&m]) - 0.111).abs() < 1e-12);
    assert!((flipped.part(&m) - (1.3 - 0.19)).abs() < 1e-12);
}

/// Path reward computed from scratch: bottleneck, summed delay, combined
/// loss and error, mean distance.
fn end_oracle(edges: &[EdgeMetrics], r: &RewardParams) -> f64 {
    let bw = edges.iter().map(|m| m.bw).fold(f64::INFINITY, f64::min);
    let delay: f64 = edges.iter().map(|m| m.delay).sum();
    let loss = 1.0 - edges.iter().map(|m| 1.0 - m.loss).product::<f64>();
    let err = 1.0 - edges.iter().map(|m| 1.0 - m.err).product::<f64>();
    let dist = edges.iter().map(|m| m.dist).sum::<f64>() / edges.len() as f64;
    let w = &r.weights;
    w.bw * bw + w.delay * (1.0 - delay) + w.loss * (1.0 - loss) + w.err * (1.0 - err) + w.dist * (1.0 - dist)
}

#[test]
fn intra_rewards() {
    let (net, p) = toy();
    let snap = random_normalized(&net, &mut ChaCha8Rng::seed_from_u64(5));
    let g = MulticastGroup::new(0, [4]).unwrap();
    let rewards = RewardParams::default();
    let sc = Scenario::new(&net, &p, &g, &snap, rewards.clone()).unwrap();
    let mut env = IntradomainEnv::new(&sc, DomainId(1), 0, BTreeSet::from([4]), 24).unwrap();

    let before = env.state().unwrap();
    let r = env.step(intra_action(&env, 0)).unwrap();
    assert_eq!((r.reward, r.outcome), (-0.5, Outcome::Loop));
    let r = env.step(intra_action(&env, 4)).unwrap();
    assert_eq!((r.reward, r.outcome), (-0.7, Outcome::Invalid));
    assert_eq!(env.state().unwrap(), before);

    let r = env.step(intra_action(&env, 3)).unwrap();
    let m03 = *snap.get(0, 3).unwrap();
    assert!((r.reward - 0.1 * (1.3 - rewards.weights.edge_cost(&m03))).abs() < 1e-12);
    let r = env.step(intra_action(&env, 4)).unwrap();
    let m34 = *snap.get(3, 4).unwrap();
    let want = 0.1 * (1.3 - rewards.weights.edge_cost(&m34)) + end_oracle(&[m03, m34], &rewards);
    assert!((r.reward - want).abs() < 1e-12);
    assert!(r.done && env.is_over());
    assert_eq!(env.tree().edges, BTreeSet::from([Link::new(0, 3), Link::new(3, 4)]));
}

#[test]
fn intra_attaches_through_the_cheapest_edge_and_prunes() {
    let (net, p) = toy();
    let snap = one_perfect_link(&net, (4, 5));
    let g = MulticastGroup::new(0, [2]).unwrap();
    let sc = Scenario::new(&net, &p, &g, &snap, RewardParams::default()).unwrap();
    let mut env = IntradomainEnv::new(&sc, DomainId(1), 0, BTreeSet::from([5]), 24).unwrap();
    for v in [1, 3, 4] {
        env.step(intra_action(&env, v)).unwrap();
    }
    // 5 touches both 0 and 4; the 4-5 link is ideal.
    env.step(intra_action(&env, 5)).unwrap();
    assert!(env.is_complete());
    // 1 is a dead end and goes; 3 and 4 carry the path to 5.
    let want: BTreeSet<Link> = [(0, 3), (3, 4), (4, 5)].map(|(a, b)| Link::new(a, b)).into();
    assert_eq!(env.tree().edges, want);
}

#[test]
fn inter_plan_drops_transit_dead_ends() {
    let (net, p) = toy();
    let snap = random_normalized(&net, &mut ChaCha8Rng::seed_from_u64(2));
    let g = MulticastGroup::new(0, [12]).unwrap();
    let sc = Scenario::new(&net, &p, &g, &snap, RewardParams::default()).unwrap();
    let mut env = InterdomainEnv::new(&sc, 24);
    env.step(inter_action(&env, 1, 6)).unwrap();
    assert!(env.step(inter_action(&env, 2, 10)).unwrap().done);
    let plan = env.plan();
    assert_eq!(plan.tree.edges, BTreeSet::from([Link::new(2, 10)]));
    assert_eq!(plan.roots.into_iter().collect::<Vec<_>>(), vec![(DomainId(1), 0), (DomainId(3), 10)]);
    assert_eq!(plan.exits[&DomainId(1)], BTreeSet::from([2]));
}

#[test]
fn local_group_needs_no_inter_tree() {
    let (net, p) = toy();
    let snap = random_normalized(&net, &mut ChaCha8Rng::seed_from_u64(3));
    let g = MulticastGroup::new(0, [4]).unwrap();
    let sc = Scenario::new(&net, &p, &g, &snap, RewardParams::default()).unwrap();
    let env = InterdomainEnv::new(&sc, 24);
    assert!(env.is_complete() && env.is_over());
}

fn run_random(env: &mut impl Environment, rng: &mut ChaCha8Rng, r: &RewardParams) -> Result<(), TestCaseError> {
    let ceiling = r.lambda_part * r.weights.total() + r.weights.total();
    while !env.is_over() {
        let valid = env.valid_actions();
        let a = rng.gen_range(0..env.action_count());
        let before = env.state().unwrap();
        let res = env.step(a).unwrap();
        match res.outcome {
            Outcome::Extended => {
                prop_assert!(valid[a]);
                prop_assert!(res.reward <= ceiling + 1e-12);
            }
            Outcome::Loop => {
                prop_assert!(!valid[a]);
                prop_assert_eq!(res.reward, r.r_loop);
                prop_assert_eq!(env.state().unwrap(), before);
            }
            Outcome::Invalid => {
                prop_assert!(!valid[a]);
                prop_assert_eq!(res.reward, r.r_hell);
                prop_assert_eq!(env.state().unwrap(), before);
            }
        }
        prop_assert!(env.state().unwrap().dense().iter().all(|x| (0.0..=1.0).contains(x)));
    }
    Ok(())
}

fn snapshot_and_group(seed: u64) -> (NormalizedSnapshot, MulticastGroup) {
    let (net, _) = toy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snap = random_normalized(&net, &mut rng);
    let dests: Vec<NodeId> = (1..18).filter(|_| rng.gen_bool(0.3)).collect();
    let g = MulticastGroup::new(0, if dests.is_empty() { vec![17] } else { dests }).unwrap();
    (snap, g)
}

proptest! {
    #[test]
    fn penalties_leave_the_state_alone(seed in any::<u64>()) {
        let (net, p) = toy();
        let (snap, g) = snapshot_and_group(seed);
        let r = RewardParams::default();
        let sc = Scenario::new(&net, &p, &g, &snap, r.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut inter = InterdomainEnv::new(&sc, 24);
        run_random(&mut inter, &mut rng, &r)?;
        if inter.is_complete() {
            let plan = inter.plan();
            for d in plan.roots.keys() {
                let mut env = IntradomainEnv::from_plan(&sc, &plan, *d, 4 * p.nodes_in(*d).len()).unwrap();
                run_random(&mut env, &mut rng, &r)?;
            }
        }
    }
}

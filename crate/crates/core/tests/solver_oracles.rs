//! Solver outputs checked against independent brute-force answers.

mod common;

use common::{dense_q, toys_with_margin, ToyPomdp, TOY_DEPTH};
use proptest::prelude::*;
use row_pomdp::belief::init_belief;
use row_pomdp::domain::RewardWeights;
use row_pomdp::harness::{Environment, EpisodeConfig};
use row_pomdp::planners::qmdp::{argmax_first, COMPACT_STATES};
use row_pomdp::planners::{
    compact_mdp, despot_search, pomcp_search, qmdp_action, qmdp_solve, CompactParams, DespotConfig, FiniteMdp,
    PomcpConfig, QTable, RolloutPolicy,
};
use row_pomdp::rng::stream;
use row_pomdp::scenario::{generate_suite, ScenarioConfig};

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Three states: 0 -> 1 -> 2 (terminal). "push" costs 1 and advances with
/// probability 0.7; "wait" costs 0.2 and stays put; pushing out of state 1
/// pays 10.
fn three_state_chain() -> FiniteMdp {
    FiniteMdp {
        n_states: 3,
        n_actions: 2,
        transitions: vec![
            vec![vec![(1, 0.7, -1.0), (0, 0.3, -1.0)], vec![(0, 1.0, -0.2)]],
            vec![vec![(2, 0.7, 10.0), (1, 0.3, -1.0)], vec![(1, 1.0, -0.2)]],
            vec![vec![], vec![]],
        ],
    }
}

#[test]
fn compact_qtable_matches_dense_value_iteration() {
    let mdp = compact_mdp(&CompactParams::default(), &RewardWeights::default());
    let table = QTable::solve(&CompactParams::default(), &RewardWeights::default(), 0.95, 1e-9).unwrap();
    let solver: Vec<Vec<f64>> = table.q.iter().map(|r| r.to_vec()).collect();
    assert_eq!(solver.len(), COMPACT_STATES);
    let err = max_abs_diff(&solver, &dense_q(&mdp, 0.95));
    assert!(err < 1e-6, "max |Q - Q*| = {err}");
}

#[test]
fn three_state_chain_matches_dense_value_iteration() {
    let mdp = three_state_chain();
    let q = qmdp_solve(&mdp, 0.9, 1e-12).unwrap();
    assert!(max_abs_diff(&q, &dense_q(&mdp, 0.9)) < 1e-6);
    // Closed form for state 1 under "push": v = 0.7*10 + 0.3*(-1 + 0.9 v).
    let v1 = (7.0 - 0.3) / (1.0 - 0.27);
    assert!((q[1][0] - v1).abs() < 1e-6);
    assert_eq!(q[2], vec![0.0, 0.0]);
}

#[test]
fn myopic_limit_gives_immediate_rewards() {
    let mdp = compact_mdp(&CompactParams::default(), &RewardWeights::default());
    let q = qmdp_solve(&mdp, 0.0, 1e-12).unwrap();
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            assert!((q[s][a] - mdp.expected_reward(s, a)).abs() < 1e-12);
        }
    }
}

#[test]
fn expectimax_oracle_hand_check() {
    // One state, no uncertainty: the oracle must sum rewards over two steps.
    let mut toy = ToyPomdp::random(0);
    toy.belief = [1.0, 0.0];
    toy.trans = [[[1.0, 0.0]; 3], [[0.0, 1.0]; 3]];
    toy.reward = [[1.0, 3.0, 2.0], [0.0; 3]];
    let q = toy.q_values(&toy.belief, TOY_DEPTH);
    assert!((q[1] - (3.0 + 0.95 * 3.0)).abs() < 1e-12);
    assert!((q[0] - (1.0 + 0.95 * 3.0)).abs() < 1e-12);
    assert_eq!(toy.optimal().0, 1);
}

/// Margin below which two actions count as tied (reward scale is 10).
const TOY_MARGIN: f64 = 0.5;

#[test]
fn pomcp_agrees_with_expectimax_on_toys() {
    let cfg =
        PomcpConfig { n_simulations: 10_000, max_depth: 2, ucb_constant: 20.0, rollout: RolloutPolicy::UniformRandom };
    let toys = toys_with_margin(200, TOY_MARGIN);
    let mut hits = 0;
    for (seed, toy, best) in &toys {
        let r = pomcp_search(toy, &toy.particles(), &cfg, &mut stream(*seed, &[1]));
        assert_eq!(r.root_visits.iter().sum::<u32>(), 10_000);
        hits += (r.action == *best) as usize;
    }
    println!("pomcp agreement {hits}/200");
    assert!(hits >= 190, "pomcp matched expectimax on {hits}/200 toys");
}

#[test]
fn despot_agrees_with_expectimax_on_toys() {
    let cfg = DespotConfig { n_scenarios: 256, max_depth: 2, max_trials: 1000, ..DespotConfig::default() };
    let toys = toys_with_margin(200, TOY_MARGIN);
    let mut hits = 0;
    for (seed, toy, best) in &toys {
        let r = despot_search(toy, &toy.particles(), &cfg, &mut stream(*seed, &[2]));
        assert!(r.bounds_consistent);
        hits += (r.action == *best) as usize;
    }
    println!("despot agreement {hits}/200");
    assert!(hits >= 180, "despot matched expectimax on {hits}/200 toys");
}

/// Argmax under `b`, or `None` when the top two are within `eps` (so a
/// rounding difference may legitimately flip it).
fn clear_argmax(v: &[f64; 3], eps: f64) -> Option<usize> {
    let best = argmax_first(v);
    let runner = (0..3).filter(|&i| i != best).map(|i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    (v[best] - runner > eps || v[best] == runner).then_some(best)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn qmdp_choice_is_invariant_to_reward_scaling(
        k in 0.05f64..50.0,
        raw in prop::collection::vec(0.0f64..1.0, COMPACT_STATES),
    ) {
        let w = RewardWeights::default();
        let base = QTable::solve(&CompactParams::default(), &w, 0.95, 1e-12).unwrap();
        let big = QTable::solve(&CompactParams::default(), &w.scaled(k), 0.95, 1e-12).unwrap();
        let total: f64 = raw.iter().sum::<f64>().max(1e-12);
        let mut v0 = [0.0; 3];
        let mut v1 = [0.0; 3];
        for (i, x) in raw.iter().enumerate() {
            for a in 0..3 {
                v0[a] += x / total * base.q[i][a];
                v1[a] += x / total * big.q[i][a];
            }
        }
        if let Some(a) = clear_argmax(&v0, 1e-6) {
            prop_assert_eq!(argmax_first(&v1), a);
        }
    }
}

#[test]
fn qmdp_choice_on_filter_beliefs_is_invariant_to_reward_scaling() {
    let cfg = EpisodeConfig::default();
    let w = cfg.sim.reward;
    let base = QTable::solve(&CompactParams::default(), &w, 0.95, 1e-12).unwrap();
    let scenarios = generate_suite(3, 30, &ScenarioConfig::default()).unwrap();
    for k in [0.1, 3.0, 40.0] {
        let big = QTable::solve(&CompactParams::default(), &w.scaled(k), 0.95, 1e-12).unwrap();
        for scn in &scenarios {
            let s = scn.initial_state();
            let o = Environment::new(scn.seed).observe(&s, &cfg.sim);
            let b = init_belief(scn, &o, 150, &cfg.filter(), &mut stream(scn.seed, &[9]));
            let (a0, v0) = qmdp_action(&b, &base);
            let (a1, _) = qmdp_action(&b, &big);
            if clear_argmax(&v0, 1e-6).is_some() {
                assert_eq!(a0, a1, "scenario {} k {k}", scn.id);
            }
        }
    }
}

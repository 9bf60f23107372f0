//! Invariants of the simulator and planners, checked on generated inputs.

use std::sync::Arc;

use proptest::prelude::*;
use row_pomdp::belief::{init_belief, Belief, ParticleSet};
use row_pomdp::domain::{
    paths_conflict, Action, ApproachDirection, Intent, Movement, PedestrianEvent, VehicleState, WorldState,
};
use row_pomdp::harness::{Environment, EpisodeConfig};
use row_pomdp::planners::{Planner, PlannerKind};
use row_pomdp::rng::stream;
use row_pomdp::scenario::{generate_scenario, ScenarioConfig};
use row_pomdp::sim::{is_terminal, project, transition};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn movement() -> impl Strategy<Value = Movement> {
    (0usize..4, 0usize..3).prop_map(|(a, i)| Movement::new(ApproachDirection::ALL[a], Intent::ALL[i]))
}

fn action() -> impl Strategy<Value = Action> {
    (0usize..3).prop_map(|i| Action::ALL[i])
}

/// A belief from the first observation of a generated scenario.
fn start_belief(seed: u64, adversarial: bool, cfg: &EpisodeConfig) -> (WorldState, Belief) {
    let scn = generate_scenario(seed, &ScenarioConfig::default(), adversarial).unwrap();
    let s = scn.initial_state();
    let o = Environment::new(seed).observe(&s, &cfg.sim);
    let b = init_belief(&scn, &o, cfg.n_particles, &cfg.filter(), &mut stream(seed, &[1]));
    (s, b)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn trajectories_keep_state_and_observation_invariants(
        seed in 0u64..100_000,
        adversarial: bool,
        actions in prop::collection::vec(action(), 12),
    ) {
        let cfg = EpisodeConfig::default();
        let scn = generate_scenario(seed, &ScenarioConfig::default(), adversarial).unwrap();
        let mut env = Environment::new(seed);
        let mut s = scn.initial_state();
        for a in actions {
            prop_assert_eq!(s.validate(cfg.sim.horizon), Ok(()));
            let o = env.observe(&s, &cfg.sim);
            if o.frame_dropped {
                prop_assert!(o.vehicles.is_empty());
            }
            for ov in &o.vehicles {
                if let Some(m) = ov.measurement {
                    let truth = s.vehicle(ov.id).unwrap().arrival_rank as i32;
                    prop_assert!((m.arrival_rank as i32 - truth).abs() <= 1);
                }
            }
            if is_terminal(&s, cfg.sim.horizon) {
                break;
            }
            s = env.step(&s, a, &cfg.sim);
        }
        prop_assert!(s.timestep <= cfg.sim.horizon);
    }

    #[test]
    fn transition_replays_exactly_from_the_same_stream(seed in 0u64..100_000, a in action(), k in 0u64..50) {
        let cfg = EpisodeConfig::default();
        let s = generate_scenario(seed, &ScenarioConfig::default(), true).unwrap().initial_state();
        let x = transition(&s, a, &cfg.sim, &mut stream(seed, &[k]));
        let y = transition(&s, a, &cfg.sim, &mut stream(seed, &[k]));
        prop_assert_eq!(x, y);
    }

    /// Whether a vehicle entering the box hits one already inside depends
    /// on the pair of paths only, not on which of them is the ego.
    #[test]
    fn collisions_depend_only_on_the_unordered_pair(m1 in movement(), m2 in movement()) {
        prop_assume!(m1.approach != m2.approach);
        let cfg = EpisodeConfig::default();
        let enter_next_to = |entering: Movement, inside: Movement| {
            let ego = VehicleState::approaching(0, entering.approach, entering.intent, 2, 0.0, 0.0).at_line();
            let other = VehicleState::approaching(1, inside.approach, inside.intent, 1, 0.0, 0.0).inside_box(2);
            let s = WorldState::new(ego, vec![other]);
            transition(&s, Action::Go, &cfg.sim, &mut stream(0, &[])).collision_occurred
        };
        let a = enter_next_to(m1, m2);
        prop_assert_eq!(a, enter_next_to(m2, m1));
        prop_assert_eq!(a, paths_conflict(m1, m2));
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn planners_are_deterministic_and_pomcp_conserves_visits(seed in 0u64..100_000, adversarial: bool) {
        let cfg = EpisodeConfig::default();
        let (s, b) = start_belief(seed, adversarial, &cfg);
        let o = project(&s, &cfg.sim.noise);
        let model = cfg.model();
        let table = Arc::new(cfg.solve_qtable().unwrap());
        for kind in PlannerKind::BENCHMARK {
            let decide = || {
                let mut p = Planner::new(kind, &cfg.planners, Some(table.clone())).unwrap();
                p.decide(&o, Some(&b), &model, &mut stream(seed, &[2])).unwrap()
            };
            let d = decide();
            prop_assert_eq!(&d, &decide());
            match kind {
                PlannerKind::Pomcp => {
                    prop_assert_eq!(d.diagnostics.simulations, Some(cfg.planners.pomcp.n_simulations));
                }
                PlannerKind::Despot => prop_assert_eq!(d.diagnostics.bounds_consistent, Some(true)),
                _ => {}
            }
        }
    }
}

#[test]
fn pomcp_root_visits_sum_to_the_simulation_budget() {
    let cfg = EpisodeConfig::default();
    for seed in 0..10 {
        let (_, b) = start_belief(seed, seed % 2 == 0, &cfg);
        let r = row_pomdp::planners::pomcp_search(&cfg.model(), &b, &cfg.planners.pomcp, &mut stream(seed, &[3]));
        assert_eq!(r.root_visits.iter().sum::<u32>(), cfg.planners.pomcp.n_simulations);
    }
}

fn decide_all(s: &WorldState, seed: u64) -> Vec<(PlannerKind, Action)> {
    let cfg = EpisodeConfig::default();
    let b = ParticleSet::uniform(vec![s.clone(); 32]);
    let o = project(s, &cfg.sim.noise);
    let table = Arc::new(cfg.solve_qtable().unwrap());
    [PlannerKind::Qmdp, PlannerKind::Pomcp, PlannerKind::Despot]
        .into_iter()
        .map(|kind| {
            let mut p = Planner::new(kind, &cfg.planners, Some(table.clone())).unwrap();
            (kind, p.decide(&o, Some(&b), &cfg.model(), &mut stream(seed, &[4])).unwrap().action)
        })
        .collect()
}

/// Beliefs certain that Go collides right now: a conflicting vehicle in
/// the box, or a pedestrian on a crosswalk the ego would cross.
#[test]
fn no_probabilistic_planner_goes_into_a_certain_collision() {
    let mut checked = 0;
    for ego_m in Movement::all() {
        let ego = VehicleState::approaching(0, ego_m.approach, ego_m.intent, 2, 0.0, 0.0).at_line();
        for other_m in Movement::all().filter(|m| paths_conflict(ego_m, *m)) {
            let other = VehicleState::approaching(1, other_m.approach, other_m.intent, 1, 0.0, 0.0).inside_box(2);
            let s = WorldState::new(ego, vec![other]);
            for (kind, a) in decide_all(&s, checked) {
                assert_ne!(a, Action::Go, "{kind:?} with {ego_m:?} vs {other_m:?} in the box");
            }
            checked += 1;
        }
        for crosswalk in [ego_m.approach, ego_m.exit()] {
            let s = WorldState::new(ego, vec![]).with_pedestrian(PedestrianEvent {
                approach: crosswalk,
                start_step: 0,
                duration: 4,
            });
            assert!(s.pedestrian_in_ego_path());
            for (kind, a) in decide_all(&s, checked) {
                assert_ne!(a, Action::Go, "{kind:?} with {ego_m:?} and a pedestrian on {crosswalk}");
            }
            checked += 1;
        }
    }
    let conflicting_pairs = Movement::all()
        .flat_map(|a| Movement::all().map(move |b| (a, b)))
        .filter(|&(a, b)| paths_conflict(a, b))
        .count();
    assert_eq!(checked as usize, conflicting_pairs + 2 * 12);
}

//! Generative POMDP interface consumed by the tree-search planners, and its
//! intersection instance.

use std::fmt::Debug;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::fsm::{cascade, Picture};
use crate::domain::{Action, Phase, WorldState};
use crate::sim::{self, Observation, SimConfig};

/// One sampled step of a generative model.
#[derive(Debug, Clone)]
pub struct Step<S, O> {
    pub next: S,
    pub obs: O,
    pub reward: f64,
}

/// A POMDP given as a simulator.
pub trait Pomdp {
    type State: Clone;
    type Action: Copy + Eq + Debug;
    /// Observation identity used to branch search trees.
    type ObsKey: Clone + Eq + Hash + Debug;

    /// Available actions, in tie-break preference order.
    fn actions(&self) -> &[Self::Action];

    fn step(&self, s: &Self::State, a: Self::Action, rng: &mut ChaCha8Rng) -> Step<Self::State, Self::ObsKey>;

    fn is_terminal(&self, s: &Self::State) -> bool;

    fn discount(&self) -> f64;

    /// Value estimate used where a search is cut off.
    fn leaf_value(&self, _s: &Self::State) -> f64 {
        0.0
    }

    /// An upper bound on the optimal value from `s`.
    fn upper_bound(&self, s: &Self::State) -> f64;

    /// Heuristic policy for rollouts and lower bounds.
    fn default_action(&self, s: &Self::State) -> Self::Action;
}

/// Rollout policy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    #[default]
    UniformRandom,
    /// The model's default action (the FSM cascade for the intersection).
    Default,
}

impl RolloutPolicy {
    pub fn pick<M: Pomdp>(self, model: &M, s: &M::State, rng: &mut ChaCha8Rng) -> M::Action {
        match self {
            RolloutPolicy::UniformRandom => *model.actions().choose(rng).expect("model has actions"),
            RolloutPolicy::Default => model.default_action(s),
        }
    }
}

/// Coarse observation signature: frame flag, ego phase, per-vehicle
/// visibility/phase/distance bucket, and pedestrian sightings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObsSignature(Vec<u8>);

/// Width of the distance buckets in an [`ObsSignature`], meters.
pub const OBS_DISTANCE_BUCKET: f64 = 4.0;

impl ObsSignature {
    pub fn of(o: &Observation) -> Self {
        let mut key = Vec::with_capacity(2 + 3 * o.vehicles.len() + 1);
        key.push(o.frame_dropped as u8);
        key.push(o.ego.phase.index() as u8);
        for v in &o.vehicles {
            match &v.measurement {
                Some(m) if v.visible => {
                    key.push(1 + m.phase.index() as u8);
                    key.push((m.distance.max(0.0) / OBS_DISTANCE_BUCKET) as u8);
                }
                _ => key.push(0),
            }
        }
        let peds = o.pedestrians.iter().enumerate().fold(0u8, |acc, (i, &p)| acc | ((p as u8) << i));
        key.push(peds);
        Self(key)
    }
}

/// The intersection POMDP as a generative model over [`WorldState`].
#[derive(Debug, Clone)]
pub struct IntersectionModel {
    pub sim: SimConfig,
}

impl IntersectionModel {
    /// Planning model. The evaluation cutoff is not part of the task the
    /// planner solves (clear the intersection safely), so the horizon is
    /// lifted and values stay discounted-infinite; otherwise every action
    /// looks equal once clearing before the cutoff is out of reach.
    pub fn new(mut sim: SimConfig) -> Self {
        sim.horizon = u32::MAX;
        Self { sim }
    }

    /// Model that ends at `sim.horizon`, as the evaluation does.
    pub fn truncated(sim: SimConfig) -> Self {
        Self { sim }
    }

    /// Minimum number of steps until the ego clears, driving GO throughout.
    pub fn steps_to_clear(s: &WorldState) -> u32 {
        let ego = &s.ego;
        let occupancy = ego.intent.box_occupancy() as u32;
        match ego.phase {
            Phase::Cleared => 0,
            Phase::InIntersection => ego.box_steps_left as u32,
            Phase::AtLine => 1 + occupancy,
            Phase::Approaching => ego.steps_to_entry() + occupancy,
        }
    }

    /// Discounted return of clearing as fast as possible with nothing in the
    /// way, truncated at the horizon.
    pub fn optimistic_value(&self, s: &WorldState) -> f64 {
        if sim::is_terminal(s, self.sim.horizon) {
            return 0.0;
        }
        let w = &self.sim.reward;
        let g = self.sim.gamma;
        let remaining = self.sim.horizon.saturating_sub(s.timestep);
        let k = Self::steps_to_clear(s);
        let steps = k.min(remaining);
        let mut v = 0.0;
        let mut disc = 1.0;
        for _ in 0..steps {
            v += disc * w.step_cost;
            disc *= g;
        }
        if k <= remaining && k > 0 {
            v += g.powi(k as i32 - 1) * w.progress_reward;
        }
        v
    }
}

impl Pomdp for IntersectionModel {
    type State = WorldState;
    type Action = Action;
    type ObsKey = ObsSignature;

    fn actions(&self) -> &[Action] {
        &Action::ALL
    }

    fn step(&self, s: &WorldState, a: Action, rng: &mut ChaCha8Rng) -> Step<WorldState, ObsSignature> {
        let next = sim::transition(s, a, &self.sim, rng);
        let reward = sim::reward(s, a, &next, &self.sim.reward);
        let obs = ObsSignature::of(&sim::observe(&next, &self.sim.noise, rng));
        Step { next, obs, reward }
    }

    fn is_terminal(&self, s: &WorldState) -> bool {
        sim::is_terminal(s, self.sim.horizon)
    }

    fn discount(&self) -> f64 {
        self.sim.gamma
    }

    fn leaf_value(&self, s: &WorldState) -> f64 {
        self.optimistic_value(s)
    }

    fn upper_bound(&self, s: &WorldState) -> f64 {
        self.optimistic_value(s)
    }

    fn default_action(&self, s: &WorldState) -> Action {
        cascade(&Picture::from_state(s))
    }
}

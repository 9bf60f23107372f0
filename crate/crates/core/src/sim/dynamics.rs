use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{ground_truth_action, must_wait};
use super::SimConfig;
use crate::domain::{accelerate, Action, Phase, RewardWeights, VehicleState, WorldState};
use crate::scenario::assign_ranks;

/// Randomness consumed by one transition. Always drawn in full, whatever the
/// state or action, so environment streams stay aligned across policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepNoise {
    pub brake: f64,
}

impl StepNoise {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self { brake: rng.gen() }
    }
}

pub fn is_terminal(s: &WorldState, horizon: u32) -> bool {
    s.collision_occurred || s.ego.phase == Phase::Cleared || s.timestep >= horizon
}

/// Samples `s'` from `T(· | s, a)`.
pub fn transition<R: Rng + ?Sized>(s: &WorldState, a: Action, cfg: &SimConfig, rng: &mut R) -> WorldState {
    debug_assert!(!is_terminal(s, cfg.horizon), "transition from a terminal state");
    let noise = StepNoise::draw(rng);
    transition_with_noise(s, a, cfg, &noise)
}

pub fn transition_with_noise(s: &WorldState, a: Action, cfg: &SimConfig, noise: &StepNoise) -> WorldState {
    let mut next = s.clone();
    advance(&mut next, s, a, cfg.slippery_brake_failure_prob, noise);
    next
}

fn enter_box(v: &mut VehicleState) {
    v.phase = Phase::InIntersection;
    v.box_steps_left = v.intent.box_occupancy();
    v.distance_to_line = 0.0;
    v.speed = 0.0;
}

fn stop_at_line(v: &mut VehicleState) {
    v.phase = Phase::AtLine;
    v.distance_to_line = 0.0;
    v.speed = 0.0;
}

fn tick_box(v: &mut VehicleState) {
    v.box_steps_left = v.box_steps_left.saturating_sub(1);
    if v.box_steps_left == 0 {
        v.phase = Phase::Cleared;
    }
}

/// Moves an approaching vehicle `travel` meters. Returns true if it reached
/// the line.
fn approach(v: &mut VehicleState, travel: f64) -> bool {
    v.distance_to_line -= travel;
    v.distance_to_line <= 1e-9
}

/// Advances `next` (a copy of `prev`) by one step. All decisions are taken
/// on `prev`. Also used after the ego has cleared to let the remaining
/// traffic finish.
pub fn advance(next: &mut WorldState, prev: &WorldState, a: Action, brake_failure_prob: f64, noise: &StepNoise) {
    let mut ego_entered = false;
    let ego = &mut next.ego;
    match ego.phase {
        Phase::Cleared => {}
        // Stopping or yielding inside the box stalls there.
        Phase::InIntersection => {
            if a == Action::Go {
                tick_box(ego)
            }
        }
        Phase::AtLine => {
            if a == Action::Go {
                enter_box(ego);
                ego_entered = true;
            }
        }
        // Speed changes take effect within the step: Stop brakes to a
        // standstill, Yield creeps at half cruise speed, Go speeds back up
        // to cruise at a bounded rate.
        Phase::Approaching => match a {
            Action::Go => {
                ego.speed = accelerate(ego.speed, ego.cruise_speed);
                if approach(ego, ego.speed) {
                    enter_box(ego);
                    ego_entered = true;
                }
            }
            Action::Yield => {
                ego.speed = accelerate(ego.speed, 0.5 * ego.cruise_speed);
                if approach(ego, ego.speed) {
                    stop_at_line(ego);
                }
            }
            Action::Stop => {
                if prev.slippery && noise.brake < brake_failure_prob {
                    // The brakes fail: the ego rolls on at its current speed.
                    if approach(ego, ego.speed) {
                        stop_at_line(ego);
                    }
                } else {
                    ego.speed = 0.0;
                }
            }
        },
    }

    for (v, before) in next.others.iter_mut().zip(prev.others.iter()) {
        match v.phase {
            Phase::Cleared => {}
            Phase::InIntersection => tick_box(v),
            Phase::AtLine => {
                if !v.compliant || !must_wait(prev, before) {
                    enter_box(v);
                }
            }
            Phase::Approaching => {
                let travel = v.speed;
                if approach(v, travel) {
                    if v.compliant {
                        stop_at_line(v);
                    } else {
                        enter_box(v);
                    }
                }
            }
        }
    }

    if !prev.collision_occurred {
        let ped_hit = ego_entered && prev.pedestrian_in_ego_path();
        let box_hit = next.ego.in_box() && next.others.iter().any(|o| o.in_box() && o.conflicts_with(&next.ego));
        next.collision_occurred = ped_hit || box_hit;
    }

    next.timestep = prev.timestep + 1;
    update_arrivals(next);
    next.pedestrians = WorldState::pedestrian_flags_at(&next.pedestrian_schedule, next.timestep);
}

/// Right of way goes by actual arrival at the line. Whoever is still
/// approaching is expected at `t + steps_to_entry`; when any expectation
/// moves (the ego braked, or a hypothesis was corrected), everyone is
/// re-ranked.
fn update_arrivals(next: &mut WorldState) {
    let t = next.timestep;
    let mut changed = false;
    for v in std::iter::once(&mut next.ego).chain(next.others.iter_mut()) {
        if v.phase == Phase::Approaching {
            let step = t.saturating_add(v.steps_to_entry());
            changed |= step != v.arrival_step;
            v.arrival_step = step;
        }
    }
    if changed {
        let mut vehicles: Vec<VehicleState> = next.vehicles().cloned().collect();
        assign_ranks(&mut vehicles);
        next.ego = vehicles.remove(0);
        next.others = vehicles;
    }
}

/// Reward split into its components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub collision: f64,
    pub unsafe_maneuver: f64,
    pub progress: f64,
    pub step: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.collision + self.unsafe_maneuver + self.progress + self.step
    }
}

/// `R(s, a, s')`: collision penalty on the step a collision happens; unsafe
/// penalty when the action is more aggressive than the oracle's (and no
/// collision happened); progress reward when the ego clears; step cost always.
pub fn reward_breakdown(s: &WorldState, a: Action, next: &WorldState, w: &RewardWeights) -> RewardBreakdown {
    let collided = !s.collision_occurred && next.collision_occurred;
    let mut r = RewardBreakdown { step: w.step_cost, ..Default::default() };
    if collided {
        r.collision = w.collision_penalty;
        return r;
    }
    if a.aggressiveness() > ground_truth_action(s).aggressiveness() {
        r.unsafe_maneuver = w.unsafe_penalty;
    }
    if next.ego.is_cleared() && !s.ego.is_cleared() {
        r.progress = w.progress_reward;
    }
    r
}

pub fn reward(s: &WorldState, a: Action, next: &WorldState, w: &RewardWeights) -> f64 {
    reward_breakdown(s, a, next, w).total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ApproachDirection::*, Intent, PedestrianEvent};
    use crate::rng;

    fn lone_ego(distance: f64, speed: f64) -> WorldState {
        WorldState::new(VehicleState::approaching(0, North, Intent::Straight, 1, distance, speed), vec![])
    }

    fn calm() -> StepNoise {
        StepNoise { brake: 0.99 }
    }

    #[test]
    fn go_on_empty_dry_road_moves_by_speed() {
        let s = lone_ego(20.0, 5.0);
        let n = transition_with_noise(&s, Action::Go, &SimConfig::default(), &calm());
        assert!((n.ego.distance_to_line - 15.0).abs() < 1e-12);
        assert!(!n.collision_occurred);
        assert_eq!(n.timestep, 1);
    }

    #[test]
    fn go_across_occupied_exit_crosswalk_collides() {
        // North straight exits to the south leg.
        let s = WorldState::new(VehicleState::approaching(0, North, Intent::Straight, 1, 2.0, 5.0).at_line(), vec![])
            .with_pedestrian(PedestrianEvent { approach: South, start_step: 0, duration: 3 });
        let n = transition_with_noise(&s, Action::Go, &SimConfig::default(), &calm());
        assert!(n.collision_occurred);
    }

    #[test]
    fn entering_next_to_a_conflicting_occupant_collides_either_way_round() {
        let sim = SimConfig::default();
        let ego = VehicleState::approaching(0, North, Intent::Straight, 1, 3.0, 5.0).at_line();
        let other = VehicleState::approaching(1, East, Intent::Straight, 2, 3.0, 5.0).inside_box(2);
        let a = transition_with_noise(&WorldState::new(ego.clone(), vec![other.clone()]), Action::Go, &sim, &calm());
        assert!(a.collision_occurred);
        // Swap who is already inside.
        let ego2 = VehicleState::approaching(0, East, Intent::Straight, 2, 3.0, 5.0).at_line();
        let other2 = VehicleState::approaching(1, North, Intent::Straight, 1, 3.0, 5.0).inside_box(2);
        let b = transition_with_noise(&WorldState::new(ego2, vec![other2]), Action::Go, &sim, &calm());
        assert!(b.collision_occurred);
    }

    #[test]
    fn slippery_brake_failure_rate_matches_config() {
        let sim = SimConfig::default();
        let mut s = lone_ego(3.0, 5.0);
        s.slippery = true;
        let mut r = rng::stream(11, &[]);
        let trials = 10_000;
        let advanced =
            (0..trials).filter(|_| transition(&s, Action::Stop, &sim, &mut r).ego.distance_to_line < 3.0).count();
        let p = advanced as f64 / trials as f64;
        assert!((p - 0.2).abs() <= 0.02, "brake failure rate {p}");
    }

    #[test]
    fn dry_stop_brakes_to_zero_and_go_speeds_back_up() {
        let sim = SimConfig::default();
        let s = lone_ego(30.0, 6.0);
        let stopped = transition_with_noise(&s, Action::Stop, &sim, &calm());
        assert_eq!(stopped.ego.distance_to_line, 30.0);
        assert_eq!(stopped.ego.speed, 0.0);
        let moving = transition_with_noise(&stopped, Action::Go, &sim, &calm());
        assert!((moving.ego.speed - crate::domain::ACCELERATION).abs() < 1e-12);
        let yielding = transition_with_noise(&s, Action::Yield, &sim, &calm());
        assert!((yielding.ego.speed - 3.0).abs() < 1e-12);
    }

    #[test]
    fn braking_far_out_hands_priority_to_the_next_arrival() {
        let sim = SimConfig::default();
        let ego = VehicleState::approaching(0, North, Intent::Straight, 1, 9.0, 5.0);
        let other = VehicleState::approaching(1, East, Intent::Straight, 2, 13.5, 4.5);
        let mut s = WorldState::new(ego, vec![other]);
        for _ in 0..2 {
            s = transition_with_noise(&s, Action::Stop, &sim, &calm());
        }
        assert_eq!(s.others[0].arrival_rank, 1);
        assert_eq!(s.ego.arrival_rank, 2);
    }

    #[test]
    fn stalled_in_the_box_unless_going() {
        let sim = SimConfig::default();
        let s = WorldState::new(VehicleState::approaching(0, North, Intent::Left, 1, 1.0, 5.0).inside_box(2), vec![]);
        let held = transition_with_noise(&s, Action::Stop, &sim, &calm());
        assert_eq!(held.ego.box_steps_left, 2);
        let went = transition_with_noise(&s, Action::Go, &sim, &calm());
        assert_eq!(went.ego.box_steps_left, 1);
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights::default();
        let s = lone_ego(20.0, 5.0);
        let mut crashed = s.clone();
        crashed.collision_occurred = true;
        assert_eq!(reward(&s, Action::Go, &crashed, &w), -100.0 + -1.0);

        let inside =
            WorldState::new(VehicleState::approaching(0, North, Intent::Straight, 1, 1.0, 5.0).inside_box(1), vec![]);
        let out = transition_with_noise(&inside, Action::Go, &SimConfig::default(), &calm());
        assert!(out.ego.is_cleared());
        assert_eq!(reward(&inside, Action::Go, &out, &w), 10.0 - 1.0);

        let blocked = WorldState::new(
            VehicleState::approaching(0, North, Intent::Straight, 2, 20.0, 5.0),
            vec![VehicleState::approaching(1, East, Intent::Straight, 1, 5.0, 5.0)],
        );
        let n = transition_with_noise(&blocked, Action::Go, &SimConfig::default(), &calm());
        let b = reward_breakdown(&blocked, Action::Go, &n, &w);
        assert_eq!((b.unsafe_maneuver, b.step), (-10.0, -1.0));
        assert_eq!(reward_breakdown(&blocked, Action::Yield, &n, &w).unsafe_maneuver, 0.0);
    }

    #[test]
    fn safe_episode_return_matches_a_hand_sum() {
        // 10 m at 5 m/step: the second step enters the box, two more clear it.
        let sim = SimConfig::default();
        let mut s = lone_ego(10.0, 5.0);
        let mut ret = 0.0;
        let mut disc = 1.0;
        while !is_terminal(&s, sim.horizon) {
            let n = transition_with_noise(&s, Action::Go, &sim, &calm());
            ret += disc * reward(&s, Action::Go, &n, &sim.reward);
            disc *= sim.gamma;
            s = n;
        }
        assert_eq!(s.timestep, 4);
        let g: f64 = 0.95;
        let expected = -1.0 - g - g * g + g * g * g * (10.0 - 1.0);
        assert!((ret - expected).abs() < 1e-12, "{ret} vs {expected}");
    }

    #[test]
    fn terminal_examples() {
        let mut s = lone_ego(20.0, 5.0);
        assert!(!is_terminal(&s, 12));
        s.timestep = 12;
        assert!(is_terminal(&s, 12));
        s.timestep = 3;
        s.collision_occurred = true;
        assert!(is_terminal(&s, 12));
    }

    #[test]
    fn transition_is_a_pure_function_of_the_stream() {
        let scn = crate::scenario::generate_scenario(5, &Default::default(), true).unwrap();
        let sim = SimConfig::default();
        let run = || {
            let mut r = rng::stream(9, &[]);
            let mut s = scn.initial_state();
            let mut out = Vec::new();
            while !is_terminal(&s, sim.horizon) {
                s = transition(&s, Action::ALL[s.timestep as usize % 3], &sim, &mut r);
                out.push(s.clone());
            }
            out
        };
        assert_eq!(run(), run());
    }
}

//! Belief tracking over the hidden parts of the intersection state: other
//! drivers' intents, compliance, kinematics and true arrival order, the
//! pedestrian schedule and the road surface.

mod filter;

pub use filter::{systematic_resample, FilterModel, ParticleSet, UpdateOutcome};

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Action, ApproachDirection, Intent, PedestrianEvent, Phase, VehicleState, WorldState};
use crate::scenario::{assign_ranks, distance_for_arrival, relative_arrival, Scenario, ScenarioConfig};
use crate::sim::{rank_likelihood, transition_with_noise, Observation, SimConfig, StepNoise, VehicleMeasurement};
use crate::{Error, Result};

/// Particle belief over full world-state hypotheses.
pub type Belief = ParticleSet<WorldState>;

/// Ego distance/odometry agreement tolerance, meters.
const EGO_TOLERANCE: f64 = 1e-6;

/// The intersection POMDP's transition and observation model, seen as a
/// filter.
#[derive(Debug, Clone)]
pub struct IntersectionFilter {
    pub sim: SimConfig,
    pub priors: ScenarioConfig,
}

impl IntersectionFilter {
    pub fn new(sim: SimConfig, priors: ScenarioConfig) -> Self {
        Self { sim, priors }
    }
}

fn gaussian(x: f64, mean: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if (x - mean).abs() <= 1e-9 { 1.0 } else { 0.0 };
    }
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

impl FilterModel for IntersectionFilter {
    type State = WorldState;
    type Action = Action;
    type Obs = Observation;

    fn propagate(&self, s: &WorldState, a: Action, rng: &mut ChaCha8Rng) -> WorldState {
        let noise = StepNoise::draw(rng);
        transition_with_noise(s, a, &self.sim, &noise)
    }

    fn likelihood(&self, s: &WorldState, o: &Observation) -> f64 {
        let noise = &self.sim.noise;
        // The ego is still being driven, so no hypothesis with a collision
        // behind it can be right.
        if s.collision_occurred
            || s.ego.phase != o.ego.phase
            || (s.ego.distance_to_line - o.ego.distance).abs() > EGO_TOLERANCE
        {
            return 0.0;
        }
        if o.frame_dropped {
            return 1.0;
        }
        let n = 1 + s.others.len();
        let mut l = 1.0;
        if let Some(r) = o.ego.arrival_rank {
            l *= robust_rank(r, s.ego.arrival_rank, noise.arrival_noise, n);
        }
        for v in &s.others {
            let Some(obs) = o.vehicle(v.id) else { continue };
            match &obs.measurement {
                Some(m) if obs.visible => {
                    l *= (1.0 - noise.occlusion_prob) * measurement_likelihood(v, m, &self.sim, n);
                }
                _ => l *= noise.occlusion_prob,
            }
            if l == 0.0 {
                return 0.0;
            }
        }
        for (i, &seen) in o.pedestrians.iter().enumerate() {
            let present = s.pedestrians[i].present;
            l *= match (present, seen) {
                (true, true) => 1.0 - noise.occlusion_prob,
                (true, false) => noise.occlusion_prob,
                (false, true) => 0.0,
                (false, false) => 1.0,
            };
        }
        l
    }

    /// Moves a hypothesis onto the observation: ego odometry, the phase and
    /// kinematics of every visible vehicle, and any sighted pedestrian are
    /// taken from `o` (with measurement noise re-drawn); occluded vehicles
    /// get their distance jittered; then one hidden discrete field is
    /// re-drawn.
    fn reinvigorate(&self, s: &WorldState, o: &Observation, rng: &mut ChaCha8Rng) -> WorldState {
        let noise = &self.sim.noise;
        let mut out = s.clone();
        out.collision_occurred = false;
        out.ego.phase = o.ego.phase;
        out.ego.distance_to_line = o.ego.distance;
        out.ego.speed = o.ego.speed;
        if out.ego.phase == Phase::InIntersection && out.ego.box_steps_left == 0 {
            out.ego.box_steps_left = 1;
        }
        let sigma = noise.position_sigma.max(0.1);
        for v in out.others.iter_mut() {
            let seen = o.vehicle(v.id).and_then(|ov| ov.measurement.filter(|_| ov.visible && !o.frame_dropped));
            match seen {
                Some(m) => snap_vehicle(v, &m, noise.position_sigma, noise.speed_sigma, rng),
                None if v.phase == Phase::Approaching => {
                    let d: f64 = rng.sample(StandardNormal);
                    v.distance_to_line = (v.distance_to_line + sigma * d).max(0.05);
                }
                None => {}
            }
        }
        if !o.frame_dropped {
            for approach in ApproachDirection::ALL {
                if o.pedestrians[approach.index()] && !out.pedestrians[approach.index()].present {
                    let [lo, hi] = self.priors.pedestrian_duration_range;
                    let duration = rng.gen_range(lo..=hi).max(1);
                    out.pedestrian_schedule.push(PedestrianEvent { approach, start_step: out.timestep, duration });
                }
            }
            out.pedestrians = WorldState::pedestrian_flags_at(&out.pedestrian_schedule, out.timestep);
        }

        let choices = 1 + 2 * out.others.len();
        let pick = rng.gen_range(0..choices);
        if pick == 0 {
            out.slippery = !out.slippery;
        } else {
            let v = &mut out.others[(pick - 1) / 2];
            if pick % 2 == 1 {
                v.intent = self.priors.sample_intent(rng);
            } else {
                v.compliant = !v.compliant;
            }
        }
        out
    }
}

fn snap_vehicle<R: Rng + ?Sized>(
    v: &mut VehicleState,
    m: &VehicleMeasurement,
    pos_sigma: f64,
    speed_sigma: f64,
    rng: &mut R,
) {
    let z: f64 = rng.sample(StandardNormal);
    let zs: f64 = rng.sample(StandardNormal);
    match m.phase {
        Phase::Approaching => {
            v.distance_to_line = (m.distance + pos_sigma * z).max(0.05);
            if v.phase != Phase::Approaching || v.speed <= 0.0 {
                v.speed = (m.speed + speed_sigma * zs).max(0.5);
                v.cruise_speed = v.speed;
            }
        }
        Phase::AtLine | Phase::Cleared => {
            v.distance_to_line = 0.0;
            v.speed = 0.0;
        }
        Phase::InIntersection => {
            v.distance_to_line = 0.0;
            v.speed = 0.0;
            if v.phase != Phase::InIntersection {
                v.box_steps_left = rng.gen_range(1..=v.intent.box_occupancy());
            }
        }
    }
    v.phase = m.phase;
    if v.phase != Phase::InIntersection {
        v.box_steps_left = 0;
    }
}

/// Rank likelihood with a small floor, so a single rank disagreement
/// down-weights a hypothesis instead of eliminating it.
fn robust_rank(observed: u8, truth: u8, bound: u8, n: usize) -> f64 {
    RANK_FLOOR + (1.0 - RANK_FLOOR) * rank_likelihood(observed, truth, bound, n)
}

/// Floor of [`robust_rank`].
pub const RANK_FLOOR: f64 = 0.01;

fn measurement_likelihood(v: &VehicleState, m: &VehicleMeasurement, sim: &SimConfig, n: usize) -> f64 {
    let noise = &sim.noise;
    if m.phase != v.phase {
        return 0.0;
    }
    robust_rank(m.arrival_rank, v.arrival_rank, noise.arrival_noise, n)
        * gaussian(m.distance, v.distance_to_line, noise.position_sigma)
        * gaussian(m.speed, v.speed, noise.speed_sigma)
        * gaussian(m.lateral_offset, noise.lateral_mean(v.intent), noise.lateral_sigma)
}

/// Draws one world hypothesis using only what the ego knows up front (its
/// own plan and which approaches are occupied) and the generator's priors
/// for everything else.
pub fn sample_hypothesis<R: Rng + ?Sized>(scn: &Scenario, priors: &ScenarioConfig, rng: &mut R) -> WorldState {
    let mut base = scn.initial_state();
    let ego_step = base.ego.arrival_step;
    let ego_offset = rng.gen_range(0..=priors.max_arrival_offset);
    let mut vehicles: Vec<VehicleState> = vec![base.ego];
    for truth in &base.others {
        let intent = priors.sample_intent(rng);
        let compliant = rng.gen::<f64>() >= priors.noncompliance_prob;
        let [lo, hi] = priors.speed_range(compliant);
        let speed = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let offset = rng.gen_range(0..=priors.max_arrival_offset);
        let k = relative_arrival(ego_step, ego_offset, offset);
        vehicles.push(VehicleState {
            intent,
            compliant,
            speed,
            cruise_speed: speed,
            arrival_step: k,
            arrival_rank: 0,
            distance_to_line: distance_for_arrival(k, speed),
            ..*truth
        });
    }
    assign_ranks(&mut vehicles);
    base.ego = vehicles.remove(0);
    base.others = vehicles;
    base.pedestrian_schedule = priors.sample_pedestrians(rng);
    base.pedestrians = WorldState::pedestrian_flags_at(&base.pedestrian_schedule, 0);
    base.slippery = rng.gen::<f64>() < priors.slippery_prob;
    base
}

/// Initial belief: prior samples conditioned on the first observation by
/// importance resampling, returned with uniform weights.
pub fn init_belief(
    scn: &Scenario,
    first_obs: &Observation,
    n_particles: usize,
    model: &IntersectionFilter,
    rng: &mut ChaCha8Rng,
) -> Belief {
    assert!(n_particles >= 1, "n_particles must be >= 1");
    let n_candidates = (8 * n_particles).max(64);
    let candidates: Vec<WorldState> = (0..n_candidates).map(|_| sample_hypothesis(scn, &model.priors, rng)).collect();
    let weights: Vec<f64> = candidates.iter().map(|s| model.likelihood(s, first_obs)).collect();
    if weights.iter().sum::<f64>() > 0.0 {
        let idx = systematic_resample(&weights, n_particles, rng);
        Belief::uniform(idx.into_iter().map(|i| candidates[i].clone()).collect())
    } else {
        log::warn!("initial observation inconsistent with every prior sample");
        let mut b = Belief::uniform(candidates.into_iter().take(n_particles).collect());
        b.degenerate_updates = 1;
        b
    }
}

/// Convenience wrapper around [`ParticleSet::update`].
pub fn update(
    b: &Belief,
    a: Action,
    o: &Observation,
    model: &IntersectionFilter,
    rng: &mut ChaCha8Rng,
) -> (Belief, UpdateOutcome) {
    b.update(model, a, o, rng)
}

/// Posterior probability of each intent (straight, left, right) for a
/// vehicle.
pub fn intent_marginal(b: &Belief, vehicle_id: u8) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    let mut found = false;
    for (s, w) in b.iter() {
        if let Some(v) = s.vehicle(vehicle_id) {
            out[v.intent.index()] += w;
            found = true;
        }
    }
    if !found {
        return Err(Error::UnknownVehicle(vehicle_id));
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|p| *p /= total);
    }
    Ok(out)
}

/// Most probable intent; ties go to the earlier intent in [`Intent::ALL`].
pub fn predicted_intent(marginal: &[f64; 3]) -> Intent {
    let mut best = 0;
    for i in 1..3 {
        if marginal[i] > marginal[best] {
            best = i;
        }
    }
    Intent::ALL[best]
}

/// Posterior probability of a pedestrian on each crosswalk (N, E, S, W).
pub fn pedestrian_posterior(b: &Belief) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (s, w) in b.iter() {
        for (i, f) in s.pedestrians.iter().enumerate() {
            if f.present {
                out[i] += w;
            }
        }
    }
    out
}

/// Compact view of a belief for logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub intents: BTreeMap<u8, [f64; 3]>,
    pub noncompliance: BTreeMap<u8, f64>,
    pub pedestrians: [f64; 4],
    pub effective_sample_size: f64,
}

impl BeliefSummary {
    pub fn of(b: &Belief) -> Self {
        let mut intents = BTreeMap::new();
        let mut noncompliance = BTreeMap::new();
        if let Some(first) = b.particles.first() {
            for v in &first.others {
                if let Ok(m) = intent_marginal(b, v.id) {
                    intents.insert(v.id, m);
                }
                let nc: f64 =
                    b.iter().filter(|(s, _)| s.vehicle(v.id).is_some_and(|x| !x.compliant)).map(|(_, w)| w).sum();
                noncompliance.insert(v.id, nc);
            }
        }
        Self {
            intents,
            noncompliance,
            pedestrians: pedestrian_posterior(b),
            effective_sample_size: b.effective_sample_size(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scenario::generate_scenario;
    use crate::sim::observe;

    fn setup(cfg: &ScenarioConfig, seed: u64) -> (Scenario, IntersectionFilter) {
        let scn = generate_scenario(seed, cfg, false).unwrap();
        (scn, IntersectionFilter::new(SimConfig::from_scenario_config(cfg), cfg.clone()))
    }

    #[test]
    fn particle_count_matches_request() {
        let cfg = ScenarioConfig::default();
        let (scn, model) = setup(&cfg, 3);
        let mut r = rng::stream(1, &[]);
        let o = observe(&scn.initial_state(), &model.sim.noise, &mut r);
        let b = init_belief(&scn, &o, 150, &model, &mut r);
        assert_eq!(b.len(), 150);
        assert!((b.weight_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_hidden_configuration_gives_identical_particles() {
        let cfg = ScenarioConfig {
            intent_weights: [1.0, 0.0, 0.0],
            noncompliance_prob: 0.0,
            adversarial_noncompliance_prob: 0.0,
            compliant_speed_range: [4.0, 4.0],
            max_arrival_offset: 0,
            pedestrian_prob_range: [0.0, 0.0],
            slippery_prob: 0.0,
            ..Default::default()
        };
        let (scn, model) = setup(&cfg, 11);
        let mut r = rng::stream(2, &[]);
        let o = observe(&scn.initial_state(), &model.sim.noise, &mut r);
        let b = init_belief(&scn, &o, 50, &model, &mut r);
        assert!(b.particles.iter().all(|p| p == &b.particles[0]));
        assert_eq!(b.particles[0], scn.initial_state());
    }

    #[test]
    fn dropped_frame_leaves_prediction_unweighted() {
        let cfg = ScenarioConfig::default();
        let (scn, model) = setup(&cfg, 4);
        let mut r = rng::stream(3, &[]);
        let truth = scn.initial_state();
        let o = observe(&truth, &model.sim.noise, &mut r);
        let b = init_belief(&scn, &o, 100, &model, &mut r);

        let next = crate::sim::transition(&truth, Action::Yield, &model.sim, &mut r);
        let mut dropped = observe(&next, &model.sim.noise, &mut r);
        dropped.frame_dropped = true;
        dropped.vehicles.clear();
        dropped.ego.arrival_rank = None;

        let mut r1 = rng::stream(9, &[]);
        let mut r2 = rng::stream(9, &[]);
        let (post, _) = b.reweight(&model, Action::Yield, &dropped, &mut r1);
        let pred = b.predict(&model, Action::Yield, &mut r2);
        assert_eq!(post.particles, pred.particles);
        for (a, b) in post.weights.iter().zip(pred.weights.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_observation_collapses_onto_truth() {
        let cfg = ScenarioConfig {
            position_noise_sigma: 0.0,
            arrival_noise: 0,
            occlusion_prob: 0.0,
            dropout_prob: 0.0,
            ..Default::default()
        };
        let (scn, mut model) = setup(&cfg, 21);
        model.sim.noise.speed_sigma = 0.0;
        model.sim.noise.lateral_sigma = 0.0;
        let truth = scn.initial_state();
        let o = crate::sim::project(&truth, &model.sim.noise);
        // Candidate set containing the truth plus perturbed hypotheses.
        let mut r = rng::stream(5, &[]);
        let mut particles = vec![truth.clone()];
        for _ in 0..40 {
            particles.push(sample_hypothesis(&scn, &cfg, &mut r));
        }
        let weights: Vec<f64> = particles.iter().map(|p| model.likelihood(p, &o)).collect();
        let b = Belief::from_weighted(particles, weights);
        let on_truth: f64 = b.iter().filter(|(s, _)| *s == &truth).map(|(_, w)| w).sum();
        assert!((on_truth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intent_marginal_cases() {
        let cfg = ScenarioConfig::default();
        let (scn, _) = setup(&cfg, 8);
        let base = scn.initial_state();
        let id = base.others[0].id;
        let with = |i: Intent| {
            let mut s = base.clone();
            s.others[0].intent = i;
            s
        };
        let all_left = Belief::uniform(vec![with(Intent::Left); 4]);
        assert_eq!(intent_marginal(&all_left, id).unwrap(), [0.0, 1.0, 0.0]);

        let spread = Belief::uniform(vec![with(Intent::Straight), with(Intent::Left), with(Intent::Right)]);
        for p in intent_marginal(&spread, id).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(matches!(intent_marginal(&spread, 42), Err(Error::UnknownVehicle(42))));
    }
}

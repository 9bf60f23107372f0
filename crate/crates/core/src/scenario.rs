//! Seeded scenario generation.
//!
//! A [`Scenario`] is a fully specified episode setup: every random choice is
//! made here, from one `ChaCha8Rng` seeded with the scenario's own seed, so a
//! scenario can be regenerated byte-for-byte from `(seed, config, adversarial)`.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    paths_conflict, pedestrian_blocks, right_neighbor, ApproachDirection, Intent, Movement, PedestrianEvent, Phase,
    VehicleState, WorldState, MAX_OTHER_VEHICLES,
};
use crate::rng;
use crate::{Error, Result};

pub const SUITE_SCHEMA: &str = "row-suite/1";

/// Distributions used by the generator and, as priors, by the belief filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Straight, left, right.
    pub intent_weights: [f64; 3],
    pub pedestrian_prob_range: [f64; 2],
    /// Standard deviation of measured distance, meters.
    pub position_noise_sigma: f64,
    /// Maximum arrival-order error, in ranks.
    pub arrival_noise: u8,
    pub occlusion_prob: f64,
    pub dropout_prob: f64,
    pub slippery_prob: f64,
    pub adversarial_fraction: f64,
    pub max_other_vehicles: usize,
    pub noncompliance_prob: f64,
    pub adversarial_noncompliance_prob: f64,
    pub horizon: u32,
    /// Ego distance to its line at t = 0, meters.
    pub ego_distance_range: [f64; 2],
    /// Ego speed, meters per step.
    pub ego_speed_range: [f64; 2],
    pub compliant_speed_range: [f64; 2],
    pub noncompliant_speed_range: [f64; 2],
    /// Arrival offsets are drawn uniformly from `0..=max_arrival_offset`.
    pub max_arrival_offset: u32,
    pub pedestrian_duration_range: [u32; 2],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            intent_weights: [0.55, 0.30, 0.15],
            pedestrian_prob_range: [0.12, 0.25],
            position_noise_sigma: 1.0,
            arrival_noise: 1,
            occlusion_prob: 0.15,
            dropout_prob: 0.02,
            slippery_prob: 0.12,
            adversarial_fraction: 1.0 / 3.0,
            max_other_vehicles: 3,
            noncompliance_prob: 0.05,
            adversarial_noncompliance_prob: 0.30,
            horizon: 12,
            ego_distance_range: [10.0, 30.0],
            ego_speed_range: [3.0, 8.0],
            compliant_speed_range: [3.0, 6.0],
            noncompliant_speed_range: [6.0, 8.0],
            max_arrival_offset: 3,
            pedestrian_duration_range: [2, 4],
        }
    }
}

fn is_prob(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, p) in [
            ("occlusion_prob", self.occlusion_prob),
            ("dropout_prob", self.dropout_prob),
            ("slippery_prob", self.slippery_prob),
            ("adversarial_fraction", self.adversarial_fraction),
            ("noncompliance_prob", self.noncompliance_prob),
            ("adversarial_noncompliance_prob", self.adversarial_noncompliance_prob),
        ] {
            if !is_prob(p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !self.intent_weights.iter().all(|&w| is_prob(w))
            || (self.intent_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("intent_weights {:?} must be probabilities summing to 1", self.intent_weights));
        }
        let [lo, hi] = self.pedestrian_prob_range;
        if !(is_prob(lo) && is_prob(hi) && lo <= hi) {
            return bad(format!(
                "pedestrian_prob_range {:?} must be a sub-interval of [0, 1]",
                self.pedestrian_prob_range
            ));
        }
        if !(self.position_noise_sigma >= 0.0 && self.position_noise_sigma.is_finite()) {
            return bad("position_noise_sigma must be >= 0".into());
        }
        if self.max_other_vehicles == 0 || self.max_other_vehicles > MAX_OTHER_VEHICLES {
            return bad(format!("max_other_vehicles must be in 1..={MAX_OTHER_VEHICLES}"));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        for (name, [lo, hi]) in [
            ("ego_distance_range", self.ego_distance_range),
            ("ego_speed_range", self.ego_speed_range),
            ("compliant_speed_range", self.compliant_speed_range),
            ("noncompliant_speed_range", self.noncompliant_speed_range),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} [{lo}, {hi}] must be a positive interval"));
            }
        }
        let [dlo, dhi] = self.pedestrian_duration_range;
        if dlo == 0 || dlo > dhi {
            return bad("pedestrian_duration_range must be a positive interval".into());
        }
        Ok(())
    }

    pub fn sample_intent<R: Rng + ?Sized>(&self, rng: &mut R) -> Intent {
        let u: f64 = rng.gen();
        let [s, l, _] = self.intent_weights;
        if u < s {
            Intent::Straight
        } else if u < s + l {
            Intent::Left
        } else {
            Intent::Right
        }
    }

    pub fn speed_range(&self, compliant: bool) -> [f64; 2] {
        if compliant {
            self.compliant_speed_range
        } else {
            self.noncompliant_speed_range
        }
    }

    fn sample_range<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    }

    /// Draws the pedestrian schedule for one episode.
    pub fn sample_pedestrians<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<PedestrianEvent> {
        let mut out = Vec::new();
        for approach in ApproachDirection::ALL {
            let p = Self::sample_range(rng, self.pedestrian_prob_range);
            let present = rng.gen::<f64>() < p;
            let start = rng.gen_range(0..self.horizon);
            let [dlo, dhi] = self.pedestrian_duration_range;
            let duration = rng.gen_range(dlo..=dhi);
            if present {
                out.push(PedestrianEvent { approach, start_step: start, duration });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub approach: ApproachDirection,
    pub intent: Intent,
    pub initial_distance: f64,
    pub speed: f64,
    pub arrival_offset: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtherSpec {
    pub id: u8,
    pub approach: ApproachDirection,
    pub intent: Intent,
    /// Arrival at the stop line, in steps after the earliest arrival slot.
    pub arrival_offset: u32,
    pub speed: f64,
    pub compliant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialFeature {
    SimultaneousArrival,
    StopRunner,
    PedestrianIntrusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: u32,
    pub seed: u64,
    pub adversarial: bool,
    pub ego: EgoSpec,
    pub others: Vec<OtherSpec>,
    pub pedestrian_schedule: Vec<PedestrianEvent>,
    pub slippery: bool,
    pub horizon: u32,
}

/// Step at which a vehicle placed `distance` meters out reaches the line.
pub fn arrival_step(distance: f64, speed: f64) -> u32 {
    (distance / speed).ceil().max(1.0) as u32
}

/// Distance that makes a vehicle at `speed` reach its line exactly on step `k`.
pub fn distance_for_arrival(k: u32, speed: f64) -> f64 {
    speed * (k as f64 - 0.5)
}

/// Other vehicle's arrival step given the ego's and both offsets.
pub fn relative_arrival(ego_step: u32, ego_offset: u32, offset: u32) -> u32 {
    (ego_step as i64 + offset as i64 - ego_offset as i64).max(1) as u32
}

/// Assigns arrival ranks: earlier arrival first; on a tie the vehicle with
/// nobody on its right goes first, a left turn gives way to an opposing
/// through movement, and remaining ties fall back to the lower id.
pub fn assign_ranks(vehicles: &mut [VehicleState]) {
    let mut order: Vec<usize> = (0..vehicles.len()).collect();
    order.sort_by_key(|&i| (vehicles[i].arrival_step, vehicles[i].id));
    let mut ranked = Vec::with_capacity(vehicles.len());
    let mut i = 0;
    while i < order.len() {
        let step = vehicles[order[i]].arrival_step;
        let mut group: Vec<usize> =
            order[i..].iter().copied().take_while(|&j| vehicles[j].arrival_step == step).collect();
        i += group.len();
        while !group.is_empty() {
            let has_right = |c: usize, g: &[usize]| {
                g.iter().any(|&o| o != c && vehicles[o].approach == right_neighbor(vehicles[c].approach))
            };
            let yields_left = |c: usize, g: &[usize]| {
                vehicles[c].intent == Intent::Left
                    && g.iter().any(|&o| {
                        o != c
                            && vehicles[o].approach == vehicles[c].approach.opposite()
                            && vehicles[o].intent != Intent::Left
                    })
            };
            let mut cands: Vec<usize> = group.iter().copied().filter(|&c| !has_right(c, &group)).collect();
            if cands.is_empty() {
                cands = group.clone();
            }
            let preferred: Vec<usize> = cands.iter().copied().filter(|&c| !yields_left(c, &group)).collect();
            let pool = if preferred.is_empty() { &cands } else { &preferred };
            let pick = *pool.iter().min_by_key(|&&c| vehicles[c].id).expect("non-empty");
            ranked.push(pick);
            group.retain(|&g| g != pick);
        }
    }
    for (r, idx) in ranked.into_iter().enumerate() {
        vehicles[idx].arrival_rank = r as u8 + 1;
    }
}

impl Scenario {
    pub fn ego_arrival_step(&self) -> u32 {
        arrival_step(self.ego.initial_distance, self.ego.speed)
    }

    pub fn other_arrival_step(&self, o: &OtherSpec) -> u32 {
        relative_arrival(self.ego_arrival_step(), self.ego.arrival_offset, o.arrival_offset)
    }

    pub fn ego_movement(&self) -> Movement {
        Movement::new(self.ego.approach, self.ego.intent)
    }

    pub fn vehicle_count(&self) -> usize {
        1 + self.others.len()
    }

    /// Ground-truth world at t = 0.
    pub fn initial_state(&self) -> WorldState {
        let ego_step = self.ego_arrival_step();
        let ego = VehicleState {
            id: 0,
            approach: self.ego.approach,
            intent: self.ego.intent,
            arrival_rank: 0,
            arrival_step: ego_step,
            distance_to_line: self.ego.initial_distance,
            speed: self.ego.speed,
            cruise_speed: self.ego.speed,
            compliant: true,
            phase: Phase::Approaching,
            box_steps_left: 0,
        };
        let mut vehicles = vec![ego];
        for o in &self.others {
            let k = self.other_arrival_step(o);
            vehicles.push(VehicleState {
                id: o.id,
                approach: o.approach,
                intent: o.intent,
                arrival_rank: 0,
                arrival_step: k,
                distance_to_line: distance_for_arrival(k, o.speed),
                speed: o.speed,
                cruise_speed: o.speed,
                compliant: o.compliant,
                phase: Phase::Approaching,
                box_steps_left: 0,
            });
        }
        assign_ranks(&mut vehicles);
        let ego = vehicles.remove(0);
        WorldState {
            ego,
            others: vehicles,
            pedestrians: WorldState::pedestrian_flags_at(&self.pedestrian_schedule, 0),
            pedestrian_schedule: self.pedestrian_schedule.clone(),
            slippery: self.slippery,
            timestep: 0,
            collision_occurred: false,
        }
    }

    /// Adversarial features present in this scenario.
    pub fn features(&self) -> BTreeSet<AdversarialFeature> {
        let mut out = BTreeSet::new();
        let ego_m = self.ego_movement();
        if self.others.iter().any(|o| o.arrival_offset == self.ego.arrival_offset) {
            out.insert(AdversarialFeature::SimultaneousArrival);
        }
        if self.others.iter().any(|o| !o.compliant) {
            out.insert(AdversarialFeature::StopRunner);
        }
        if self.pedestrian_schedule.iter().any(|e| e.start_step >= 1 && pedestrian_blocks(e.approach, ego_m)) {
            out.insert(AdversarialFeature::PedestrianIntrusion);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Generates one scenario. Identical arguments give identical output.
pub fn generate_scenario(seed: u64, cfg: &ScenarioConfig, adversarial: bool) -> Result<Scenario> {
    generate_scenario_with_id(0, seed, cfg, adversarial)
}

pub fn generate_scenario_with_id(id: u32, seed: u64, cfg: &ScenarioConfig, adversarial: bool) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = rng::stream(seed, &[rng::tag("scenario")]);

    let ego_approach = ApproachDirection::ALL[rng.gen_range(0..4)];
    let ego = EgoSpec {
        approach: ego_approach,
        intent: cfg.sample_intent(&mut rng),
        initial_distance: ScenarioConfig::sample_range(&mut rng, cfg.ego_distance_range),
        speed: ScenarioConfig::sample_range(&mut rng, cfg.ego_speed_range),
        arrival_offset: rng.gen_range(0..=cfg.max_arrival_offset),
    };

    let n_others = rng.gen_range(1..=cfg.max_other_vehicles);
    let mut approaches: Vec<ApproachDirection> =
        ApproachDirection::ALL.into_iter().filter(|&a| a != ego_approach).collect();
    approaches.shuffle(&mut rng);
    let nc_prob = if adversarial { cfg.adversarial_noncompliance_prob } else { cfg.noncompliance_prob };
    let mut others: Vec<OtherSpec> = approaches[..n_others]
        .iter()
        .enumerate()
        .map(|(i, &approach)| {
            let intent = cfg.sample_intent(&mut rng);
            let arrival_offset = rng.gen_range(0..=cfg.max_arrival_offset);
            let compliant = rng.gen::<f64>() >= nc_prob;
            let speed = ScenarioConfig::sample_range(&mut rng, cfg.speed_range(compliant));
            OtherSpec { id: i as u8 + 1, approach, intent, arrival_offset, speed, compliant }
        })
        .collect();
    others.sort_by_key(|o| o.id);

    let mut pedestrian_schedule = cfg.sample_pedestrians(&mut rng);
    let slippery = rng.gen::<f64>() < cfg.slippery_prob;

    let mut scn = Scenario {
        id,
        seed,
        adversarial,
        ego,
        others: Vec::new(),
        pedestrian_schedule: Vec::new(),
        slippery,
        horizon: cfg.horizon,
    };

    if adversarial {
        let forced = [
            AdversarialFeature::SimultaneousArrival,
            AdversarialFeature::StopRunner,
            AdversarialFeature::PedestrianIntrusion,
        ][rng.gen_range(0..3)];
        let ego_m = scn.ego_movement();
        let conflicting: Vec<usize> = (0..others.len())
            .filter(|&i| paths_conflict(ego_m, Movement::new(others[i].approach, others[i].intent)))
            .collect();
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
            if conflicting.is_empty() {
                rng.gen_range(0..others.len())
            } else {
                conflicting[rng.gen_range(0..conflicting.len())]
            }
        };
        match forced {
            AdversarialFeature::SimultaneousArrival => {
                let i = pick(&mut rng);
                others[i].arrival_offset = scn.ego.arrival_offset;
            }
            AdversarialFeature::StopRunner => {
                let i = pick(&mut rng);
                others[i].compliant = false;
                others[i].speed = ScenarioConfig::sample_range(&mut rng, cfg.noncompliant_speed_range);
            }
            AdversarialFeature::PedestrianIntrusion => {
                let crosswalk = if rng.gen_bool(0.5) { ego_m.approach } else { ego_m.exit() };
                let latest = (cfg.horizon.saturating_sub(2)).max(1);
                let start = rng.gen_range(1..=latest.min(scn.ego_arrival_step() + 1).max(1));
                let [dlo, dhi] = cfg.pedestrian_duration_range;
                let duration = rng.gen_range(dlo..=dhi);
                pedestrian_schedule.retain(|e| e.approach != crosswalk);
                pedestrian_schedule.push(PedestrianEvent { approach: crosswalk, start_step: start, duration });
                pedestrian_schedule.sort_by_key(|e| e.approach);
            }
        }
    }

    scn.others = others;
    scn.pedestrian_schedule = pedestrian_schedule;
    Ok(scn)
}

/// Number of adversarial scenarios in a suite of `n`.
pub fn adversarial_count(n: usize, fraction: f64) -> usize {
    (((n as f64) * fraction) - 1e-9).ceil().max(0.0) as usize
}

/// Generates `n` scenarios; the adversarial ones come first.
pub fn generate_suite(base_seed: u64, n: usize, cfg: &ScenarioConfig) -> Result<Vec<Scenario>> {
    cfg.validate()?;
    let n_adv = adversarial_count(n, cfg.adversarial_fraction);
    (0..n)
        .map(|i| {
            let seed = rng::mix_seed(base_seed, &[rng::tag("suite"), i as u64]);
            generate_scenario_with_id(i as u32, seed, cfg, i < n_adv)
        })
        .collect()
}

/// A suite plus the information needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteFile {
    pub schema: String,
    pub base_seed: u64,
    pub config: ScenarioConfig,
    pub scenarios: Vec<Scenario>,
}

impl SuiteFile {
    pub fn generate(base_seed: u64, n: usize, cfg: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            schema: SUITE_SCHEMA.to_string(),
            base_seed,
            config: cfg.clone(),
            scenarios: generate_suite(base_seed, n, cfg)?,
        })
    }

    pub fn adversarial_count(&self) -> usize {
        self.scenarios.iter().filter(|s| s.adversarial).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &std::path::Path) -> Result<Self> {
        let suite: SuiteFile = serde_json::from_str(text).map_err(|e| Error::parse(path, e))?;
        if suite.schema != SUITE_SCHEMA {
            return Err(Error::parse(path, format!("unsupported suite schema `{}`", suite.schema)));
        }
        Ok(suite)
    }
}

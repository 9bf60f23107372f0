use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{ApproachDirection, Intent, Phase, VehicleState, WorldState, MAX_OTHER_VEHICLES};
use crate::{Error, Result};

/// Sensor model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationNoise {
    /// Distance noise, meters.
    pub position_sigma: f64,
    /// Speed noise, meters per step.
    pub speed_sigma: f64,
    /// Lateral lane-position noise, meters.
    pub lateral_sigma: f64,
    /// Mean lateral shift of a turning vehicle (left negative, right positive).
    pub lateral_shift: f64,
    /// Arrival-order error bound, in ranks.
    pub arrival_noise: u8,
    pub occlusion_prob: f64,
    pub dropout_prob: f64,
}

impl Default for ObservationNoise {
    fn default() -> Self {
        Self {
            position_sigma: 1.0,
            speed_sigma: 0.75,
            lateral_sigma: 0.4,
            lateral_shift: 1.0,
            arrival_noise: 1,
            occlusion_prob: 0.15,
            dropout_prob: 0.02,
        }
    }
}

impl ObservationNoise {
    pub fn noiseless() -> Self {
        Self {
            position_sigma: 0.0,
            speed_sigma: 0.0,
            lateral_sigma: 0.0,
            arrival_noise: 0,
            occlusion_prob: 0.0,
            dropout_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sig = [self.position_sigma, self.speed_sigma, self.lateral_sigma];
        if sig.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidConfig("noise sigmas must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) || !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidConfig("occlusion/dropout must be probabilities".into()));
        }
        Ok(())
    }

    pub fn lateral_mean(&self, intent: Intent) -> f64 {
        match intent {
            Intent::Straight => 0.0,
            Intent::Left => -self.lateral_shift,
            Intent::Right => self.lateral_shift,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleMeasurement {
    pub distance: f64,
    pub speed: f64,
    pub lateral_offset: f64,
    pub arrival_rank: u8,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleObservation {
    pub id: u8,
    pub approach: ApproachDirection,
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<VehicleMeasurement>,
}

/// Ego odometry is always available; only its place in the arrival order
/// comes from perception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoObservation {
    pub approach: ApproachDirection,
    pub intent: Intent,
    pub distance: f64,
    pub speed: f64,
    pub phase: Phase,
    pub arrival_rank: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub timestep: u32,
    pub frame_dropped: bool,
    pub ego: EgoObservation,
    pub vehicles: Vec<VehicleObservation>,
    /// Pedestrian sighted on each approach's crosswalk (N, E, S, W).
    pub pedestrians: [bool; 4],
}

impl Observation {
    pub fn vehicle(&self, id: u8) -> Option<&VehicleObservation> {
        self.vehicles.iter().find(|v| v.id == id)
    }
}

fn noisy_rank(rank: u8, delta: i32, n: usize) -> u8 {
    (rank as i32 + delta).clamp(1, n.max(1) as i32) as u8
}

/// `P(observed rank | true rank)` under a uniform ±`bound` error clamped to
/// `1..=n`.
pub fn rank_likelihood(observed: u8, truth: u8, bound: u8, n: usize) -> f64 {
    let k = bound as i32;
    let hits = (-k..=k).filter(|&d| noisy_rank(truth, d, n) == observed).count();
    hits as f64 / (2 * k + 1) as f64
}

struct SlotNoise {
    occluded: f64,
    distance: f64,
    speed: f64,
    lateral: f64,
    rank: i32,
}

/// Samples `o ~ O(· | s)`.
///
/// Draws a fixed amount of randomness per call (frame, ego, three vehicle
/// slots, four crosswalks) regardless of how many vehicles are present.
pub fn observe<R: Rng + ?Sized>(s: &WorldState, noise: &ObservationNoise, rng: &mut R) -> Observation {
    let k = noise.arrival_noise as i32;
    let dropped = rng.gen::<f64>() < noise.dropout_prob;
    let ego_rank_delta = rng.gen_range(-k..=k);
    let slots: Vec<SlotNoise> = (0..MAX_OTHER_VEHICLES)
        .map(|_| SlotNoise {
            occluded: rng.gen(),
            distance: rng.sample(StandardNormal),
            speed: rng.sample(StandardNormal),
            lateral: rng.sample(StandardNormal),
            rank: rng.gen_range(-k..=k),
        })
        .collect();
    let crosswalk: Vec<f64> = (0..4).map(|_| rng.gen()).collect();

    let n = 1 + s.others.len();
    let ego = EgoObservation {
        approach: s.ego.approach,
        intent: s.ego.intent,
        distance: s.ego.distance_to_line,
        speed: s.ego.speed,
        phase: s.ego.phase,
        arrival_rank: (!dropped).then(|| noisy_rank(s.ego.arrival_rank, ego_rank_delta, n)),
    };
    if dropped {
        return Observation {
            timestep: s.timestep,
            frame_dropped: true,
            ego,
            vehicles: Vec::new(),
            pedestrians: [false; 4],
        };
    }

    let vehicles = s
        .others
        .iter()
        .zip(slots.iter())
        .map(|(v, z)| {
            let visible = z.occluded >= noise.occlusion_prob;
            VehicleObservation {
                id: v.id,
                approach: v.approach,
                visible,
                measurement: visible.then(|| measure(v, noise, z, n)),
            }
        })
        .collect();
    let mut pedestrians = [false; 4];
    for (i, p) in pedestrians.iter_mut().enumerate() {
        *p = s.pedestrians[i].present && crosswalk[i] >= noise.occlusion_prob;
    }
    Observation { timestep: s.timestep, frame_dropped: false, ego, vehicles, pedestrians }
}

fn measure(v: &VehicleState, noise: &ObservationNoise, z: &SlotNoise, n: usize) -> VehicleMeasurement {
    VehicleMeasurement {
        distance: v.distance_to_line + noise.position_sigma * z.distance,
        speed: v.speed + noise.speed_sigma * z.speed,
        lateral_offset: noise.lateral_mean(v.intent) + noise.lateral_sigma * z.lateral,
        arrival_rank: noisy_rank(v.arrival_rank, z.rank, n),
        phase: v.phase,
    }
}

/// Noise-free observation of `s`.
pub fn project(s: &WorldState, noise: &ObservationNoise) -> Observation {
    let n = 1 + s.others.len();
    let zero = SlotNoise { occluded: 1.0, distance: 0.0, speed: 0.0, lateral: 0.0, rank: 0 };
    let clean = ObservationNoise { lateral_shift: noise.lateral_shift, ..ObservationNoise::noiseless() };
    Observation {
        timestep: s.timestep,
        frame_dropped: false,
        ego: EgoObservation {
            approach: s.ego.approach,
            intent: s.ego.intent,
            distance: s.ego.distance_to_line,
            speed: s.ego.speed,
            phase: s.ego.phase,
            arrival_rank: Some(s.ego.arrival_rank),
        },
        vehicles: s
            .others
            .iter()
            .map(|v| VehicleObservation {
                id: v.id,
                approach: v.approach,
                visible: true,
                measurement: Some(measure(v, &clean, &zero, n)),
            })
            .collect(),
        pedestrians: std::array::from_fn(|i| s.pedestrians[i].present),
    }
}

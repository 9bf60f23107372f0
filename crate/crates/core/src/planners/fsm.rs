//! Rule-based baseline: a fixed priority cascade over the observed picture.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{paths_conflict, Action, ApproachDirection, Intent, Movement, Phase, WorldState};
use crate::sim::{Observation, VehicleMeasurement};

/// Lateral offset (m) beyond which a vehicle is taken to be turning.
pub const TURN_THRESHOLD: f64 = 0.5;
/// Below this measured speed (m/step) a vehicle at its line counts as stopped.
pub const STOPPED_SPEED: f64 = 0.5;

/// Intent guess from one measurement.
///
/// A vehicle stopped at its line gives no lane-position cue and is assumed to
/// go straight when its turn comes. Otherwise the lateral offset decides:
/// left of `-TURN_THRESHOLD` is a left turn, right of `TURN_THRESHOLD` a right
/// turn, anything in between straight.
pub fn fsm_intent_estimate(m: &VehicleMeasurement) -> Intent {
    if m.phase == Phase::AtLine && m.speed.abs() < STOPPED_SPEED {
        return Intent::Straight;
    }
    if m.lateral_offset < -TURN_THRESHOLD {
        Intent::Left
    } else if m.lateral_offset > TURN_THRESHOLD {
        Intent::Right
    } else {
        Intent::Straight
    }
}

/// What the cascade looks at for one other vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeenVehicle {
    pub approach: ApproachDirection,
    pub intent: Intent,
    pub phase: Phase,
    pub rank: u8,
}

/// The cascade's input: ego plan and status plus the vehicles and
/// pedestrians it can see.
#[derive(Debug, Clone, PartialEq)]
pub struct Picture {
    pub ego: Movement,
    pub ego_phase: Phase,
    pub ego_rank: u8,
    pub vehicles: Vec<SeenVehicle>,
    pub pedestrians: [bool; 4],
}

impl Picture {
    /// Full-information picture (true intents and ranks).
    pub fn from_state(s: &WorldState) -> Self {
        Self {
            ego: s.ego.movement(),
            ego_phase: s.ego.phase,
            ego_rank: s.ego.arrival_rank,
            vehicles: s
                .others
                .iter()
                .map(|v| SeenVehicle { approach: v.approach, intent: v.intent, phase: v.phase, rank: v.arrival_rank })
                .collect(),
            pedestrians: std::array::from_fn(|i| s.pedestrians[i].present),
        }
    }

    /// Picture from a (non-dropped) observation. Occluded vehicles are absent.
    pub fn from_observation(o: &Observation, intents: &BTreeMap<u8, Intent>) -> Self {
        let vehicles = o
            .vehicles
            .iter()
            .filter_map(|v| {
                let m = v.measurement.as_ref().filter(|_| v.visible)?;
                Some(SeenVehicle {
                    approach: v.approach,
                    intent: intents.get(&v.id).copied().unwrap_or_else(|| fsm_intent_estimate(m)),
                    phase: m.phase,
                    rank: m.arrival_rank,
                })
            })
            .collect();
        Self {
            ego: Movement::new(o.ego.approach, o.ego.intent),
            ego_phase: o.ego.phase,
            ego_rank: o.ego.arrival_rank.unwrap_or(1),
            vehicles,
            pedestrians: o.pedestrians,
        }
    }
}

/// Holding action while a conflict is pending.
fn hold(p: &Picture) -> Action {
    if p.ego_phase == Phase::AtLine {
        Action::Stop
    } else {
        Action::Yield
    }
}

/// The rule cascade: pedestrians, then earlier arrivals (and anyone already
/// in the box), then the vehicle on the right on a tie, then left-turn
/// conflicts with opposing traffic. GO only when every rule passes.
pub fn cascade(p: &Picture) -> Action {
    if matches!(p.ego_phase, Phase::InIntersection | Phase::Cleared) {
        return Action::Go;
    }
    let ego_blocked_by_ped =
        ApproachDirection::ALL.iter().any(|&c| p.pedestrians[c.index()] && crate::domain::pedestrian_blocks(c, p.ego));
    if ego_blocked_by_ped {
        return Action::Stop;
    }
    let live = || {
        p.vehicles
            .iter()
            .filter(|v| v.phase != Phase::Cleared && paths_conflict(p.ego, Movement::new(v.approach, v.intent)))
    };
    if live().any(|v| v.phase == Phase::InIntersection || v.rank < p.ego_rank) {
        return hold(p);
    }
    let right = p.ego.approach.right_neighbor();
    if live().any(|v| v.rank == p.ego_rank && v.approach == right) {
        return hold(p);
    }
    if p.ego.intent == Intent::Left {
        let opposing = p.ego.approach.opposite();
        let threat = live().any(|v| {
            v.approach == opposing && v.intent != Intent::Left && (v.phase == Phase::AtLine || v.rank <= p.ego_rank)
        });
        if threat {
            return hold(p);
        }
    }
    Action::Go
}

/// FSM memory across steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FsmMemory {
    pub last_action: Option<Action>,
    /// Latest intent estimate per vehicle id.
    pub intents: BTreeMap<u8, Intent>,
}

/// One FSM decision: the action and its per-vehicle intent predictions.
pub fn fsm_plan(o: &Observation, memory: &mut FsmMemory) -> (Action, BTreeMap<u8, Intent>) {
    if o.frame_dropped {
        let a = memory.last_action.unwrap_or(Action::Stop);
        return (a, memory.intents.clone());
    }
    for v in &o.vehicles {
        let Some(m) = v.measurement.as_ref().filter(|_| v.visible) else {
            memory.intents.entry(v.id).or_insert(Intent::Straight);
            continue;
        };
        let fresh = fsm_intent_estimate(m);
        // A stopped vehicle keeps whatever turn cue it showed on approach.
        let keep = m.phase == Phase::AtLine && m.speed.abs() < STOPPED_SPEED;
        if !keep || !memory.intents.contains_key(&v.id) {
            memory.intents.insert(v.id, fresh);
        }
    }
    let a = cascade(&Picture::from_observation(o, &memory.intents));
    memory.last_action = Some(a);
    (a, memory.intents.clone())
}

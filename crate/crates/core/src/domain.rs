//! Vocabulary of the intersection world.
//!
//! Geometry is a single shared conflict box. A movement is an (approach,
//! intent) pair; whether two movements conflict is decided by treating each
//! one as a chord between its inbound and outbound lane points on a circle
//! around the box (right-hand traffic). Two chords that cross, or that share
//! an outbound point (merge into the same exit lane), conflict.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproachDirection {
    North,
    East,
    South,
    West,
}

impl ApproachDirection {
    pub const ALL: [ApproachDirection; 4] =
        [ApproachDirection::North, ApproachDirection::East, ApproachDirection::South, ApproachDirection::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn opposite(self) -> Self {
        Self::from_index(self.index() + 2)
    }

    /// The approach on the right-hand side of a vehicle arriving from `self`.
    pub fn right_neighbor(self) -> Self {
        right_neighbor(self)
    }

    /// The approach on the left-hand side of a vehicle arriving from `self`.
    pub fn left_neighbor(self) -> Self {
        Self::from_index(self.index() + 1)
    }
}

impl fmt::Display for ApproachDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ApproachDirection::North => "north",
            ApproachDirection::East => "east",
            ApproachDirection::South => "south",
            ApproachDirection::West => "west",
        };
        f.write_str(s)
    }
}

/// North→West, West→South, South→East, East→North.
pub fn right_neighbor(a: ApproachDirection) -> ApproachDirection {
    ApproachDirection::from_index(a.index() + 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Straight,
    Left,
    Right,
}

impl Intent {
    pub const ALL: [Intent; 3] = [Intent::Straight, Intent::Left, Intent::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Number of states a vehicle with this intent spends inside the box.
    pub fn box_occupancy(self) -> u8 {
        match self {
            Intent::Left => 3,
            Intent::Straight | Intent::Right => 2,
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Intent::Straight => "straight",
            Intent::Left => "left",
            Intent::Right => "right",
        };
        f.write_str(s)
    }
}

/// Recommended maneuver for the ego driver.
///
/// Variants are ordered from most to least conservative; that order doubles
/// as the tie-break preference of every planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Stop,
    Yield,
    Go,
}

impl Action {
    /// Preference order used to break value ties.
    pub const ALL: [Action; 3] = [Action::Stop, Action::Yield, Action::Go];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Higher is more aggressive.
    pub fn aggressiveness(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Stop => "STOP",
            Action::Yield => "YIELD",
            Action::Go => "GO",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approaching,
    AtLine,
    InIntersection,
    Cleared,
}

impl Phase {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// A planned path through the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Movement {
    pub approach: ApproachDirection,
    pub intent: Intent,
}

impl Movement {
    pub const fn new(approach: ApproachDirection, intent: Intent) -> Self {
        Self { approach, intent }
    }

    pub fn exit(self) -> ApproachDirection {
        match self.intent {
            Intent::Straight => self.approach.opposite(),
            Intent::Left => self.approach.left_neighbor(),
            Intent::Right => self.approach.right_neighbor(),
        }
    }

    /// Position of the inbound lane point, clockwise from north-inbound.
    fn entry_point(self) -> u8 {
        2 * self.approach.index() as u8
    }

    fn exit_point(self) -> u8 {
        2 * self.exit().index() as u8 + 1
    }

    /// Every 12 movements in a fixed order.
    pub fn all() -> impl Iterator<Item = Movement> {
        ApproachDirection::ALL.into_iter().flat_map(|a| Intent::ALL.into_iter().map(move |i| Movement::new(a, i)))
    }
}

/// True iff the two paths cross or merge inside the box.
///
/// Movements from the same approach share a lane and are ordered by the
/// queue rather than by the box, so they never conflict here.
pub fn paths_conflict(a: Movement, b: Movement) -> bool {
    if a.approach == b.approach {
        return false;
    }
    let (a0, a1) = (a.entry_point(), a.exit_point());
    let (b0, b1) = (b.entry_point(), b.exit_point());
    if a1 == b1 {
        return true;
    }
    let inside = |p: u8| strictly_between(a0, a1, p);
    inside(b0) != inside(b1)
}

/// Whether `p` lies on the clockwise arc strictly between `from` and `to`.
fn strictly_between(from: u8, to: u8, p: u8) -> bool {
    let span = (to + 8 - from) % 8;
    let off = (p + 8 - from) % 8;
    off > 0 && off < span
}

/// Renders the conflict relation as CSV, one row per ordered movement pair.
pub fn conflict_table_csv() -> String {
    let mut out = String::from("a_approach,a_intent,b_approach,b_intent,conflict\n");
    for a in Movement::all() {
        for b in Movement::all() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a.approach,
                a.intent,
                b.approach,
                b.intent,
                paths_conflict(a, b) as u8
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u8,
    pub approach: ApproachDirection,
    pub intent: Intent,
    /// Position in the arrival order (1 = first); ties in arrival step are
    /// already resolved into this order.
    pub arrival_rank: u8,
    /// Step at which the vehicle is planned to reach its stop line.
    pub arrival_step: u32,
    /// Meters to the stop line.
    pub distance_to_line: f64,
    /// Meters per step.
    pub speed: f64,
    /// Speed the driver returns to after braking, meters per step.
    pub cruise_speed: f64,
    pub compliant: bool,
    pub phase: Phase,
    /// States left inside the box while `phase == InIntersection`.
    pub box_steps_left: u8,
}

/// Speed gained per step when speeding back up, meters per step squared.
pub const ACCELERATION: f64 = 2.0;

/// Next-step speed when speeding up toward `target`.
pub fn accelerate(speed: f64, target: f64) -> f64 {
    if speed >= target {
        target
    } else {
        (speed + ACCELERATION).min(target)
    }
}

impl VehicleState {
    /// A vehicle approaching at cruise speed; `arrival_step` is derived from
    /// the kinematics.
    pub fn approaching(
        id: u8,
        approach: ApproachDirection,
        intent: Intent,
        rank: u8,
        distance: f64,
        speed: f64,
    ) -> Self {
        let mut v = Self {
            id,
            approach,
            intent,
            arrival_rank: rank,
            arrival_step: 0,
            distance_to_line: distance,
            speed,
            cruise_speed: speed,
            compliant: true,
            phase: Phase::Approaching,
            box_steps_left: 0,
        };
        v.arrival_step = v.steps_to_entry();
        v
    }

    /// The same vehicle stopped at its line.
    pub fn at_line(mut self) -> Self {
        self.phase = Phase::AtLine;
        self.distance_to_line = 0.0;
        self.speed = 0.0;
        self.arrival_step = 0;
        self
    }

    /// The same vehicle inside the box with `steps_left` steps to go.
    pub fn inside_box(mut self, steps_left: u8) -> Self {
        self = self.at_line();
        self.phase = Phase::InIntersection;
        self.box_steps_left = steps_left;
        self
    }

    pub fn noncompliant(mut self) -> Self {
        self.compliant = false;
        self
    }

    pub fn movement(&self) -> Movement {
        Movement::new(self.approach, self.intent)
    }

    pub fn conflicts_with(&self, other: &VehicleState) -> bool {
        paths_conflict(self.movement(), other.movement())
    }

    pub fn is_cleared(&self) -> bool {
        self.phase == Phase::Cleared
    }

    pub fn in_box(&self) -> bool {
        self.phase == Phase::InIntersection
    }

    /// Steps until this vehicle could be inside the box if unimpeded.
    pub fn steps_to_entry(&self) -> u32 {
        match self.phase {
            Phase::InIntersection | Phase::Cleared => 0,
            Phase::AtLine => 1,
            Phase::Approaching => {
                // Full throttle from the current speed up to cruise.
                let cruise = self.cruise_speed.max(self.speed);
                if cruise <= 0.0 {
                    return u32::MAX;
                }
                let (mut d, mut v, mut k) = (self.distance_to_line, self.speed, 0);
                while d > 1e-9 {
                    v = accelerate(v, cruise);
                    d -= v;
                    k += 1;
                }
                k.max(1)
            }
        }
    }
}

/// Pedestrian presence on one approach's crosswalk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedestrianFlag {
    pub present: bool,
    pub steps_remaining: u32,
}

/// A scheduled crosswalk occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedestrianEvent {
    pub approach: ApproachDirection,
    pub start_step: u32,
    pub duration: u32,
}

impl PedestrianEvent {
    pub fn active_at(&self, t: u32) -> bool {
        t >= self.start_step && t < self.start_step + self.duration
    }
}

/// A pedestrian on approach `x` blocks every path that enters from or exits
/// through leg `x`.
pub fn pedestrian_blocks(crosswalk: ApproachDirection, m: Movement) -> bool {
    m.approach == crosswalk || m.exit() == crosswalk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub ego: VehicleState,
    pub others: Vec<VehicleState>,
    pub pedestrians: [PedestrianFlag; 4],
    /// Future and current crosswalk occupations. Part of the hidden state.
    pub pedestrian_schedule: Vec<PedestrianEvent>,
    pub slippery: bool,
    pub timestep: u32,
    pub collision_occurred: bool,
}

pub const MAX_OTHER_VEHICLES: usize = 3;

impl WorldState {
    /// Dry road, no pedestrians, t = 0.
    pub fn new(ego: VehicleState, others: Vec<VehicleState>) -> Self {
        Self {
            ego,
            others,
            pedestrians: [PedestrianFlag::default(); 4],
            pedestrian_schedule: Vec::new(),
            slippery: false,
            timestep: 0,
            collision_occurred: false,
        }
    }

    /// Adds a pedestrian event and refreshes the current flags.
    pub fn with_pedestrian(mut self, event: PedestrianEvent) -> Self {
        self.pedestrian_schedule.push(event);
        self.pedestrians = Self::pedestrian_flags_at(&self.pedestrian_schedule, self.timestep);
        self
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleState> {
        std::iter::once(&self.ego).chain(self.others.iter())
    }

    pub fn vehicle(&self, id: u8) -> Option<&VehicleState> {
        self.vehicles().find(|v| v.id == id)
    }

    /// Pedestrian flags implied by the schedule at time `t`.
    pub fn pedestrian_flags_at(schedule: &[PedestrianEvent], t: u32) -> [PedestrianFlag; 4] {
        let mut flags = [PedestrianFlag::default(); 4];
        for ev in schedule.iter().filter(|e| e.active_at(t)) {
            let f = &mut flags[ev.approach.index()];
            f.present = true;
            f.steps_remaining = f.steps_remaining.max(ev.start_step + ev.duration - t);
        }
        flags
    }

    pub fn pedestrian_in_path(&self, m: Movement) -> bool {
        ApproachDirection::ALL.into_iter().any(|a| self.pedestrians[a.index()].present && pedestrian_blocks(a, m))
    }

    pub fn pedestrian_in_ego_path(&self) -> bool {
        self.pedestrian_in_path(self.ego.movement())
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self, horizon: u32) -> Result<(), String> {
        if self.others.len() > MAX_OTHER_VEHICLES {
            return Err(format!("{} other vehicles", self.others.len()));
        }
        if self.timestep > horizon {
            return Err(format!("timestep {} beyond horizon {horizon}", self.timestep));
        }
        let mut ranks: Vec<u8> = self.vehicles().map(|v| v.arrival_rank).collect();
        ranks.sort_unstable();
        if ranks.windows(2).any(|w| w[0] == w[1]) || ranks.first() == Some(&0) {
            return Err(format!("arrival ranks not distinct positive: {ranks:?}"));
        }
        for v in self.vehicles() {
            let at_zero = v.distance_to_line == 0.0;
            let past_line = v.phase != Phase::Approaching;
            if at_zero != past_line {
                return Err(format!("vehicle {} distance/phase mismatch", v.id));
            }
            if v.phase == Phase::AtLine && v.speed != 0.0 {
                return Err(format!("vehicle {} moving at the line", v.id));
            }
        }
        for (f, a) in self.pedestrians.iter().zip(ApproachDirection::ALL) {
            if f.present != (f.steps_remaining > 0) {
                return Err(format!("pedestrian flag inconsistent on {a}"));
            }
        }
        Ok(())
    }
}

/// Reward magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub collision_penalty: f64,
    pub unsafe_penalty: f64,
    pub progress_reward: f64,
    pub step_cost: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { collision_penalty: -100.0, unsafe_penalty: -10.0, progress_reward: 10.0, step_cost: -1.0 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.collision_penalty < self.unsafe_penalty
            && self.unsafe_penalty < 0.0
            && self.progress_reward > 0.0
            && self.step_cost <= 0.0
            && [self.collision_penalty, self.unsafe_penalty, self.progress_reward, self.step_cost]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(format!(
                "reward weights must satisfy collision < unsafe < 0 < progress and step_cost <= 0, got {self:?}"
            ))
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            collision_penalty: self.collision_penalty * k,
            unsafe_penalty: self.unsafe_penalty * k,
            progress_reward: self.progress_reward * k,
            step_cost: self.step_cost * k,
        }
    }
}

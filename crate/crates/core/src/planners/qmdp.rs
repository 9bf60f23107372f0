//! QMDP: value iteration on a compact fully observable abstraction, acted
//! on through belief-weighted Q-values.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::domain::{Action, Phase, RewardWeights, VehicleState, WorldState};
use crate::{Error, Result};

/// A finite MDP: `transitions[s][a]` lists `(next, probability, reward)`.
/// A state with no outgoing transitions is terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<Vec<(usize, f64, f64)>>>,
}

impl FiniteMdp {
    pub fn is_terminal(&self, s: usize) -> bool {
        self.transitions[s].iter().all(|outs| outs.is_empty())
    }

    /// Expected immediate reward of `a` in `s`.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.transitions[s][a].iter().map(|&(_, p, r)| p * r).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != self.n_states {
            return Err(Error::InvalidConfig("transition table has wrong state count".into()));
        }
        for (s, row) in self.transitions.iter().enumerate() {
            if row.len() != self.n_actions {
                return Err(Error::InvalidConfig(format!("state {s}: wrong action count")));
            }
            for (a, outs) in row.iter().enumerate() {
                let total: f64 = outs.iter().map(|o| o.1).sum();
                if !outs.is_empty() && (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!("state {s} action {a}: probabilities sum to {total}")));
                }
                if outs.iter().any(|o| o.0 >= self.n_states) {
                    return Err(Error::InvalidConfig(format!("state {s} action {a}: successor out of range")));
                }
            }
        }
        Ok(())
    }
}

/// Iteration cap for [`qmdp_solve`].
pub const MAX_ITERATIONS: usize = 100_000;

/// Value iteration on Q until successive iterates differ by at most `tol` in
/// sup-norm.
pub fn qmdp_solve(mdp: &FiniteMdp, gamma: f64, tol: f64) -> Result<Vec<Vec<f64>>> {
    assert!(tol > 0.0, "tolerance must be positive");
    mdp.validate()?;
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let mut v = vec![0.0; mdp.n_states];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut delta: f64 = 0.0;
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let new: f64 = mdp.transitions[s][a].iter().map(|&(n, p, r)| p * (r + gamma * v[n])).sum();
                delta = delta.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        for s in 0..mdp.n_states {
            v[s] = if mdp.is_terminal(s) { 0.0 } else { q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max) };
        }
        residual = delta;
        if delta <= tol {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual })
}

/// Who holds priority over the ego, as seen by the compact encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Priority {
    EgoFirst,
    OtherFirst,
    /// The ego holds priority but a conflicting vehicle arrives within a step
    /// of it.
    Tie,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::EgoFirst, Priority::OtherFirst, Priority::Tie];
}

/// One compact state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactState {
    pub phase: Phase,
    pub priority: Priority,
    pub pedestrian: bool,
    pub active: bool,
}

/// `4 phases x 3 priority classes x pedestrian flag x active-conflict flag`.
pub const COMPACT_STATES: usize = 48;

const PHASES: [Phase; 4] = [Phase::Approaching, Phase::AtLine, Phase::InIntersection, Phase::Cleared];

impl CompactState {
    pub fn index(&self) -> usize {
        let prio = Priority::ALL.iter().position(|p| *p == self.priority).unwrap();
        ((self.phase.index() * 3 + prio) * 2 + self.pedestrian as usize) * 2 + self.active as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < COMPACT_STATES);
        Self {
            active: i % 2 == 1,
            pedestrian: (i / 2) % 2 == 1,
            priority: Priority::ALL[(i / 4) % 3],
            phase: PHASES[i / 12],
        }
    }

    /// The oracle's action in compact terms.
    pub fn safe_action(&self) -> Action {
        match self.phase {
            Phase::InIntersection | Phase::Cleared => Action::Go,
            _ if self.pedestrian => Action::Stop,
            Phase::AtLine if self.priority == Priority::OtherFirst => Action::Stop,
            _ if self.priority == Priority::OtherFirst => Action::Yield,
            _ => Action::Go,
        }
    }
}

fn threat(ego: &VehicleState, v: &VehicleState) -> bool {
    v.in_box() || v.phase == Phase::AtLine || v.steps_to_entry() <= ego.steps_to_entry() + 1
}

/// Maps a full world hypothesis onto the compact space.
pub fn encode(s: &WorldState) -> CompactState {
    let ego = &s.ego;
    let phase = if s.collision_occurred { Phase::Cleared } else { ego.phase };
    let conflicting: Vec<&VehicleState> =
        s.others.iter().filter(|v| !v.is_cleared() && v.conflicts_with(ego)).collect();
    let blocking: Vec<&&VehicleState> =
        conflicting.iter().filter(|v| v.in_box() || !v.compliant || v.arrival_rank < ego.arrival_rank).collect();
    let (priority, active) = if !blocking.is_empty() {
        (Priority::OtherFirst, blocking.iter().any(|v| threat(ego, v)))
    } else {
        let close: Vec<_> = conflicting.iter().filter(|v| v.arrival_step.abs_diff(ego.arrival_step) <= 1).collect();
        if close.is_empty() {
            (Priority::EgoFirst, conflicting.iter().any(|v| threat(ego, v)))
        } else {
            (Priority::Tie, close.iter().any(|v| threat(ego, v)))
        }
    };
    CompactState { phase, priority, pedestrian: s.pedestrian_in_ego_path(), active }
}

/// Rates of the compact abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompactParams {
    /// Chance per step that GO takes an approaching ego into the box.
    pub go_arrival: f64,
    /// Chance per step that YIELD brings an approaching ego to the line.
    pub yield_arrival: f64,
    /// Chance per GO step in the box of clearing it.
    pub box_clear: f64,
    pub collide_pedestrian: f64,
    pub collide_other_first_active: f64,
    pub collide_other_first_inactive: f64,
    pub collide_tie_active: f64,
    pub collide_tie_inactive: f64,
    pub pedestrian_leaves: f64,
    pub pedestrian_appears: f64,
    /// OtherFirst, active: the blocking vehicle passes and priority returns.
    pub other_first_resolves: f64,
    /// OtherFirst, inactive: the blocking vehicle closes in.
    pub other_first_activates: f64,
    pub tie_resolves: f64,
    pub tie_activates: f64,
}

impl Default for CompactParams {
    fn default() -> Self {
        Self {
            go_arrival: 0.3,
            yield_arrival: 0.15,
            box_clear: 0.4,
            collide_pedestrian: 0.9,
            collide_other_first_active: 0.7,
            collide_other_first_inactive: 0.2,
            collide_tie_active: 0.1,
            collide_tie_inactive: 0.0,
            pedestrian_leaves: 0.35,
            pedestrian_appears: 0.03,
            other_first_resolves: 0.35,
            other_first_activates: 0.4,
            tie_resolves: 0.5,
            tie_activates: 0.5,
        }
    }
}

impl CompactParams {
    fn entry_collision(&self, s: &CompactState) -> f64 {
        if s.pedestrian {
            return self.collide_pedestrian;
        }
        match (s.priority, s.active) {
            (Priority::EgoFirst, _) => 0.0,
            (Priority::OtherFirst, true) => self.collide_other_first_active,
            (Priority::OtherFirst, false) => self.collide_other_first_inactive,
            (Priority::Tie, true) => self.collide_tie_active,
            (Priority::Tie, false) => self.collide_tie_inactive,
        }
    }

    /// Joint distribution of the next (priority, active, pedestrian).
    fn context_successors(&self, s: &CompactState) -> Vec<(Priority, bool, bool, f64)> {
        let prio: Vec<(Priority, bool, f64)> = match (s.priority, s.active) {
            (Priority::OtherFirst, true) => vec![
                (Priority::EgoFirst, false, self.other_first_resolves),
                (Priority::OtherFirst, true, 1.0 - self.other_first_resolves),
            ],
            (Priority::OtherFirst, false) => vec![
                (Priority::OtherFirst, true, self.other_first_activates),
                (Priority::OtherFirst, false, 1.0 - self.other_first_activates),
            ],
            (Priority::Tie, true) => {
                vec![(Priority::EgoFirst, false, self.tie_resolves), (Priority::Tie, true, 1.0 - self.tie_resolves)]
            }
            (Priority::Tie, false) => {
                vec![(Priority::Tie, true, self.tie_activates), (Priority::Tie, false, 1.0 - self.tie_activates)]
            }
            (Priority::EgoFirst, act) => vec![(Priority::EgoFirst, act, 1.0)],
        };
        let ped: Vec<(bool, f64)> = if s.pedestrian {
            vec![(false, self.pedestrian_leaves), (true, 1.0 - self.pedestrian_leaves)]
        } else {
            vec![(true, self.pedestrian_appears), (false, 1.0 - self.pedestrian_appears)]
        };
        let mut out = Vec::new();
        for &(p, act, pp) in &prio {
            for &(ped, pq) in &ped {
                if pp * pq > 0.0 {
                    out.push((p, act, ped, pp * pq));
                }
            }
        }
        out
    }
}

/// Builds the 48-state compact MDP. Collisions end the episode: they lead
/// to a terminal state with the collision penalty instead of progress.
pub fn compact_mdp(params: &CompactParams, w: &RewardWeights) -> FiniteMdp {
    let mut transitions = Vec::with_capacity(COMPACT_STATES);
    for i in 0..COMPACT_STATES {
        let s = CompactState::from_index(i);
        if s.phase == Phase::Cleared {
            transitions.push(vec![Vec::new(); 3]);
            continue;
        }
        let safe = s.safe_action();
        let mut row = Vec::with_capacity(3);
        for a in Action::ALL {
            let unsafe_cost = if a.aggressiveness() > safe.aggressiveness() { w.unsafe_penalty } else { 0.0 };
            let base = w.step_cost + unsafe_cost;
            // (probability, next phase, collided)
            let moves: Vec<(f64, Phase, bool)> = match (s.phase, a) {
                (Phase::Approaching, Action::Go) => {
                    let pc = params.entry_collision(&s);
                    vec![
                        (params.go_arrival * pc, Phase::Cleared, true),
                        (params.go_arrival * (1.0 - pc), Phase::InIntersection, false),
                        (1.0 - params.go_arrival, Phase::Approaching, false),
                    ]
                }
                (Phase::Approaching, Action::Yield) => vec![
                    (params.yield_arrival, Phase::AtLine, false),
                    (1.0 - params.yield_arrival, Phase::Approaching, false),
                ],
                (Phase::Approaching, Action::Stop) => vec![(1.0, Phase::Approaching, false)],
                (Phase::AtLine, Action::Go) => {
                    let pc = params.entry_collision(&s);
                    vec![(pc, Phase::Cleared, true), (1.0 - pc, Phase::InIntersection, false)]
                }
                (Phase::AtLine, _) => vec![(1.0, Phase::AtLine, false)],
                (Phase::InIntersection, Action::Go) => vec![
                    (params.box_clear, Phase::Cleared, false),
                    (1.0 - params.box_clear, Phase::InIntersection, false),
                ],
                (Phase::InIntersection, _) => vec![(1.0, Phase::InIntersection, false)],
                (Phase::Cleared, _) => unreachable!(),
            };
            let mut outs = Vec::new();
            for (pm, phase, collided) in moves {
                if pm <= 0.0 {
                    continue;
                }
                let r = if collided {
                    w.step_cost + w.collision_penalty
                } else if phase == Phase::Cleared {
                    base + w.progress_reward
                } else {
                    base
                };
                for (priority, active, pedestrian, pc) in params.context_successors(&s) {
                    let next = CompactState { phase, priority, pedestrian, active };
                    outs.push((next.index(), pm * pc, r));
                }
            }
            row.push(outs);
        }
        transitions.push(row);
    }
    FiniteMdp { n_states: COMPACT_STATES, n_actions: 3, transitions }
}

/// Solved Q-values over the compact space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    /// `q[state][action]`, actions in [`Action::ALL`] order.
    pub q: Vec<[f64; 3]>,
    pub encoder: String,
}

impl QTable {
    pub fn solve(params: &CompactParams, w: &RewardWeights, gamma: f64, tol: f64) -> Result<Self> {
        let q = qmdp_solve(&compact_mdp(params, w), gamma, tol)?;
        Ok(Self {
            q: q.into_iter().map(|row| [row[0], row[1], row[2]]).collect(),
            encoder: "phase(approaching,at_line,in_intersection,cleared) x priority(ego_first,other_first,tie) \
                      x pedestrian_in_path x active_conflict; index = ((phase*3+priority)*2+pedestrian)*2+active"
                .into(),
        })
    }

    pub fn values(&self, s: &CompactState) -> [f64; 3] {
        self.q[s.index()]
    }

    /// Belief-weighted Q-values for each action.
    pub fn belief_values(&self, b: &Belief) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (s, w) in b.iter() {
            let q = self.values(&encode(s));
            for a in 0..3 {
                out[a] += w * q[a];
            }
        }
        out
    }
}

/// Index of the largest value; ties go to the earliest entry.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// The QMDP rule: `argmax_a sum_s b(s) Q(s, a)`.
pub fn qmdp_action(b: &Belief, table: &QTable) -> (Action, [f64; 3]) {
    let v = table.belief_values(b);
    (Action::ALL[argmax_first(&v)], v)
}

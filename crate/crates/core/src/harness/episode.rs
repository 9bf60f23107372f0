//! Running one planner through one scenario, and a whole suite.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log::{EpisodeLog, Outcome, StepRecord, EPISODE_SCHEMA};
use crate::belief::{init_belief, Belief, BeliefSummary, IntersectionFilter};
use crate::domain::{Action, Intent, Phase, WorldState};
use crate::planners::{IntersectionModel, Planner, PlannerConfig, PlannerKind, QTable};
use crate::rng::{self, tag, CountingRng};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::sim::{self, ground_truth_action, Observation, SimConfig, StepNoise};
use crate::{Error, Result};

/// Everything an episode needs besides the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub sim: SimConfig,
    /// Priors handed to the belief filter.
    pub priors: ScenarioConfig,
    pub planners: PlannerConfig,
    pub n_particles: usize,
    /// Per-decision deadline, seconds.
    pub deadline: f64,
    /// Measure wall-clock decision time. When off, every decision is logged
    /// as taking zero seconds, which makes outputs byte-reproducible.
    pub timing: bool,
    /// Include belief summaries in step records.
    pub log_beliefs: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        let priors = ScenarioConfig::default();
        Self {
            sim: SimConfig::from_scenario_config(&priors),
            priors,
            planners: PlannerConfig::default(),
            n_particles: 150,
            deadline: 0.05,
            timing: true,
            log_beliefs: true,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.priors.validate()?;
        self.planners.validate()?;
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("n_particles must be >= 1".into()));
        }
        if !(self.deadline > 0.0) {
            return Err(Error::InvalidConfig("deadline must be > 0".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> IntersectionModel {
        IntersectionModel::new(self.sim.clone())
    }

    pub fn filter(&self) -> IntersectionFilter {
        IntersectionFilter::new(self.sim.clone(), self.priors.clone())
    }

    pub fn solve_qtable(&self) -> Result<QTable> {
        QTable::solve(&self.planners.qmdp, &self.sim.reward, self.sim.gamma, self.planners.qmdp_tolerance)
    }
}

/// The environment's random streams for one scenario: one per step and
/// purpose, keyed only by the scenario seed, so the planner cannot shift
/// them.
#[derive(Debug, Clone)]
pub struct Environment {
    seed: u64,
    draws: u64,
}

impl Environment {
    pub fn new(seed: u64) -> Self {
        Self { seed, draws: 0 }
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    fn with_stream<T>(&mut self, purpose: &str, step: u32, f: impl FnOnce(&mut CountingRng<ChaCha8Rng>) -> T) -> T {
        let mut r = CountingRng::new(rng::stream(self.seed, &[tag(purpose), step as u64]));
        let out = f(&mut r);
        self.draws += r.draws();
        out
    }

    pub fn observe(&mut self, s: &WorldState, sim: &SimConfig) -> Observation {
        self.with_stream("observe", s.timestep, |r| sim::observe(s, &sim.noise, r))
    }

    /// Steps the world; also used to let traffic finish once the ego has
    /// left (the action is then irrelevant).
    pub fn step(&mut self, s: &WorldState, a: Action, sim: &SimConfig) -> WorldState {
        let noise = self.with_stream("transition", s.timestep, |r| StepNoise::draw(r));
        let mut next = s.clone();
        sim::advance(&mut next, s, a, sim.slippery_brake_failure_prob, &noise);
        next
    }
}

/// Marks vehicles that are cleared in `s` and have no clear step yet.
fn note_clears(s: &WorldState, clears: &mut BTreeMap<u8, Option<u32>>) {
    for v in s.vehicles() {
        let slot = clears.entry(v.id).or_insert(None);
        if slot.is_none() && v.phase == Phase::Cleared {
            *slot = Some(s.timestep);
        }
    }
}

/// A conflicting ego/other pair that could both be in the box within a
/// step of each other, one of them within a step of entering.
pub fn near_miss(s: &WorldState) -> bool {
    let ego = &s.ego;
    if ego.is_cleared() {
        return false;
    }
    let te = ego.steps_to_entry();
    s.others.iter().any(|v| {
        !v.is_cleared() && v.conflicts_with(ego) && {
            let tv = v.steps_to_entry();
            te.abs_diff(tv) <= 1 && te.min(tv) <= 1
        }
    })
}

/// Lets the remaining traffic run to the horizon; returns the final state.
fn finish_traffic(
    env: &mut Environment,
    mut s: WorldState,
    sim: &SimConfig,
    clears: &mut BTreeMap<u8, Option<u32>>,
) -> WorldState {
    while !s.collision_occurred && s.timestep < sim.horizon && s.vehicles().any(|v| !v.is_cleared()) {
        s = env.step(&s, Action::Go, sim);
        note_clears(&s, clears);
    }
    s
}

fn completion(clears: &BTreeMap<u8, Option<u32>>, last_t: u32) -> u32 {
    if clears.values().all(|c| c.is_some()) {
        clears.values().filter_map(|c| *c).max().unwrap_or(0)
    } else {
        last_t
    }
}

/// The oracle's run: its actions and each vehicle's clear step.
pub fn reference_run(scn: &Scenario, sim: &SimConfig) -> (Vec<Action>, BTreeMap<u8, Option<u32>>) {
    let mut env = Environment::new(scn.seed);
    let mut s = scn.initial_state();
    let mut clears = BTreeMap::new();
    note_clears(&s, &mut clears);
    let mut actions = Vec::new();
    while !sim::is_terminal(&s, sim.horizon) {
        let a = ground_truth_action(&s);
        actions.push(a);
        s = env.step(&s, a, sim);
        note_clears(&s, &mut clears);
    }
    finish_traffic(&mut env, s, sim, &mut clears);
    (actions, clears)
}

/// Belief bookkeeping under perception latency: a filtered belief over the
/// newest delivered observation's state, predicted forward through the
/// actions taken since.
struct Tracker {
    filter: IntersectionFilter,
    filtered: Belief,
    filtered_at: u32,
    rng: ChaCha8Rng,
}

impl Tracker {
    fn planning_belief(&mut self, t: u32, delivered_at: u32, obs: &[Observation], actions: &[Action]) -> Belief {
        while self.filtered_at < delivered_at {
            let k = self.filtered_at as usize;
            let (next, outcome) = self.filtered.update(&self.filter, actions[k], &obs[k + 1], &mut self.rng);
            if outcome.degenerate {
                log::warn!("degenerate belief update at step {}", k + 1);
            }
            self.filtered = next;
            self.filtered_at += 1;
        }
        let mut b = self.filtered.clone();
        for &a in &actions[self.filtered_at as usize..t as usize] {
            b = b.predict(&self.filter, a, &mut self.rng);
        }
        b
    }
}

/// Runs one planner through one scenario. Planner errors end the episode
/// with [`Outcome::Failed`]; they are never propagated.
pub fn run_episode(kind: PlannerKind, scn: &Scenario, cfg: &EpisodeConfig, table: Option<Arc<QTable>>) -> EpisodeLog {
    let sim = &cfg.sim;
    let model = cfg.model();
    let (reference_actions, reference_steps_to_clear) = reference_run(scn, sim);
    let mut log = EpisodeLog {
        schema: EPISODE_SCHEMA.to_string(),
        scenario_id: scn.id,
        seed: scn.seed,
        adversarial: scn.adversarial,
        planner: kind,
        records: Vec::new(),
        outcome: Outcome::Timeout,
        error: None,
        steps_to_clear: BTreeMap::new(),
        reference_steps_to_clear,
        reference_actions,
        completion_steps: 0,
        discounted_return: 0.0,
        env_draws: 0,
    };

    let mut planner = match kind {
        PlannerKind::Oracle => None,
        _ => match Planner::new(kind, &cfg.planners, table) {
            Ok(p) => Some(p),
            Err(e) => {
                log.outcome = Outcome::Failed;
                log.error = Some(e.to_string());
                return log;
            }
        },
    };
    let mut planner_rng = rng::stream(scn.seed, &[tag("planner"), tag(kind.name())]);

    let mut env = Environment::new(scn.seed);
    let mut s = scn.initial_state();
    let mut clears = BTreeMap::new();
    note_clears(&s, &mut clears);
    let mut observations = vec![env.observe(&s, sim)];
    let mut actions: Vec<Action> = Vec::new();

    let mut tracker = kind.uses_belief().then(|| {
        let filter = cfg.filter();
        let mut brng = rng::stream(scn.seed, &[tag("belief"), tag(kind.name())]);
        let filtered = init_belief(scn, &observations[0], cfg.n_particles, &filter, &mut brng);
        Tracker { filter, filtered, filtered_at: 0, rng: brng }
    });

    let mut disc = 1.0;
    while !sim::is_terminal(&s, sim.horizon) {
        let t = s.timestep;
        let delivered_at = t.saturating_sub(sim.perception_latency);
        let obs = observations[delivered_at as usize].clone();
        let belief = tracker.as_mut().map(|tr| tr.planning_belief(t, delivered_at, &observations, &actions));

        let started = Instant::now();
        let decision = match planner.as_mut() {
            None => Ok(crate::planners::PlannerDecision {
                action: ground_truth_action(&s),
                intent_predictions: s.others.iter().map(|v| (v.id, v.intent)).collect(),
                compute_time: 0.0,
                diagnostics: Default::default(),
            }),
            Some(p) => p.decide(&obs, belief.as_ref(), &model, &mut planner_rng),
        };
        let elapsed = started.elapsed().as_secs_f64();
        let mut decision = match decision {
            Ok(d) => d,
            Err(e) => {
                log.outcome = Outcome::Failed;
                log.error = Some(format!("step {t}: {e}"));
                break;
            }
        };
        decision.compute_time = if cfg.timing { elapsed } else { 0.0 };

        let a = decision.action;
        let next = env.step(&s, a, sim);
        let reward = sim::reward_breakdown(&s, a, &next, &sim.reward);
        log.discounted_return += disc * reward.total();
        disc *= sim.gamma;
        let true_intents: BTreeMap<u8, Intent> = s.others.iter().map(|v| (v.id, v.intent)).collect();
        log.records.push(StepRecord {
            timestep: t,
            oracle_action: ground_truth_action(&s),
            near_miss: near_miss(&s),
            state: s,
            observation: obs,
            action: a,
            intent_predictions: decision.intent_predictions,
            true_intents,
            reward,
            compute_time: decision.compute_time,
            deadline_met: decision.compute_time <= cfg.deadline,
            env_draws: 0,
            belief: belief.as_ref().filter(|_| cfg.log_beliefs).map(BeliefSummary::of),
            diagnostics: decision.diagnostics,
        });
        actions.push(a);
        s = next;
        note_clears(&s, &mut clears);
        observations.push(env.observe(&s, sim));
        log.records.last_mut().unwrap().env_draws = env.draws();
    }

    if log.outcome != Outcome::Failed {
        log.outcome = if s.collision_occurred {
            Outcome::Collision
        } else if s.ego.is_cleared() {
            Outcome::Cleared
        } else {
            Outcome::Timeout
        };
    }
    if log.outcome == Outcome::Cleared {
        s = finish_traffic(&mut env, s, sim, &mut clears);
    }
    log.completion_steps = completion(&clears, s.timestep);
    log.steps_to_clear = clears;
    log.env_draws = env.draws();
    log
}

/// Runs every (scenario, planner) pair on `workers` threads. Output order is
/// by scenario, then by the order of `kinds`, whatever the worker count.
pub fn run_suite(
    scenarios: &[Scenario],
    kinds: &[PlannerKind],
    cfg: &EpisodeConfig,
    workers: usize,
) -> Result<Vec<EpisodeLog>> {
    cfg.validate()?;
    let table = if kinds.contains(&PlannerKind::Qmdp) { Some(Arc::new(cfg.solve_qtable()?)) } else { None };
    let jobs: Vec<(&Scenario, PlannerKind)> =
        scenarios.iter().flat_map(|s| kinds.iter().map(move |&k| (s, k))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let logs = pool
        .install(|| jobs.par_iter().map(|(scn, kind)| run_episode(*kind, scn, cfg, table.clone())).collect::<Vec<_>>());
    Ok(logs)
}

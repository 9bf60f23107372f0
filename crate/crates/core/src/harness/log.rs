//! Episode log records and their JSON-lines encoding.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::BeliefSummary;
use crate::domain::{Action, Intent, WorldState};
use crate::planners::{Diagnostics, PlannerKind};
use crate::sim::{Observation, RewardBreakdown};
use crate::{Error, Result};

pub const EPISODE_SCHEMA: &str = "row-episode/1";

/// One decision step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub timestep: u32,
    /// Ground truth before the action.
    pub state: WorldState,
    /// The (latency-delayed) observation the planner was given.
    pub observation: Observation,
    pub action: Action,
    pub oracle_action: Action,
    pub intent_predictions: BTreeMap<u8, Intent>,
    pub true_intents: BTreeMap<u8, Intent>,
    pub reward: RewardBreakdown,
    pub compute_time: f64,
    pub deadline_met: bool,
    /// A conflicting pair was within a step of entering the box together.
    pub near_miss: bool,
    /// Environment random draws consumed up to and including this step.
    pub env_draws: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<BeliefSummary>,
    pub diagnostics: Diagnostics,
}

impl StepRecord {
    pub fn correct(&self) -> bool {
        self.action == self.oracle_action
    }

    /// (matching predictions, vehicles scored).
    pub fn intent_hits(&self) -> (usize, usize) {
        let hits =
            self.true_intents.iter().filter(|(id, truth)| self.intent_predictions.get(id) == Some(truth)).count();
        (hits, self.true_intents.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Collision,
    Cleared,
    Timeout,
    /// The planner returned an error; the episode stopped there.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub schema: String,
    pub scenario_id: u32,
    pub seed: u64,
    pub adversarial: bool,
    pub planner: PlannerKind,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Step at which each vehicle (ego = 0) cleared the box, if it did.
    pub steps_to_clear: BTreeMap<u8, Option<u32>>,
    /// Same, for the oracle driving the ego through the same environment.
    pub reference_steps_to_clear: BTreeMap<u8, Option<u32>>,
    /// Oracle actions along the oracle's own run of this scenario.
    pub reference_actions: Vec<Action>,
    /// Steps until every vehicle cleared, or the simulated length if some
    /// never did.
    pub completion_steps: u32,
    pub discounted_return: f64,
    pub env_draws: u64,
}

impl EpisodeLog {
    pub fn collided(&self) -> bool {
        self.outcome == Outcome::Collision
    }

    pub fn action_accuracy(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        100.0 * self.records.iter().filter(|r| r.correct()).count() as f64 / self.records.len() as f64
    }

    pub fn vehicles_cleared(&self) -> usize {
        self.steps_to_clear.values().filter(|s| s.is_some()).count()
    }

    /// Vehicles that cleared no later than under the oracle.
    pub fn vehicles_on_time(&self) -> usize {
        self.steps_to_clear
            .iter()
            .filter(|(id, got)| {
                let reference = self.reference_steps_to_clear.get(id).copied().flatten();
                match (got, reference) {
                    (Some(g), Some(r)) => g <= &r,
                    (Some(_), None) => true,
                    (None, None) => true,
                    (None, Some(_)) => false,
                }
            })
            .count()
    }

    pub fn had_near_miss(&self) -> bool {
        self.records.iter().any(|r| r.near_miss)
    }
}

pub fn write_jsonl(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for log in logs {
        let line = serde_json::to_string(log).map_err(|e| Error::parse(path, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<EpisodeLog>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let log: EpisodeLog =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        if log.schema != EPISODE_SCHEMA {
            return Err(Error::parse(path, format!("line {}: unsupported schema `{}`", i + 1, log.schema)));
        }
        out.push(log);
    }
    Ok(out)
}

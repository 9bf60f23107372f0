//! Decision policies behind one interface: the FSM baseline reads the
//! delayed observation stream, QMDP/POMCP/DESPOT read the particle belief.

pub mod despot;
pub mod fsm;
pub mod model;
pub mod pomcp;
pub mod qmdp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use despot::{despot_search, DespotConfig, DespotResult};
pub use fsm::{cascade, fsm_intent_estimate, fsm_plan, FsmMemory, Picture};
pub use model::{IntersectionModel, ObsSignature, Pomdp, RolloutPolicy, Step};
pub use pomcp::{pomcp_search, PomcpConfig, PomcpResult};
pub use qmdp::{compact_mdp, encode, qmdp_action, qmdp_solve, CompactParams, CompactState, FiniteMdp, QTable};

use crate::belief::{intent_marginal, predicted_intent, Belief};
use crate::domain::{Action, Intent};
use crate::sim::Observation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Fsm,
    Qmdp,
    Pomcp,
    Despot,
    /// Ground-truth reference. Reads the true state; not a real planner.
    Oracle,
}

impl PlannerKind {
    /// The benchmarked planners, in report order.
    pub const BENCHMARK: [PlannerKind; 4] =
        [PlannerKind::Fsm, PlannerKind::Qmdp, PlannerKind::Pomcp, PlannerKind::Despot];
    pub const ALL: [PlannerKind; 5] =
        [PlannerKind::Fsm, PlannerKind::Qmdp, PlannerKind::Pomcp, PlannerKind::Despot, PlannerKind::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Fsm => "fsm",
            PlannerKind::Qmdp => "qmdp",
            PlannerKind::Pomcp => "pomcp",
            PlannerKind::Despot => "despot",
            PlannerKind::Oracle => "oracle",
        }
    }

    /// Label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            PlannerKind::Fsm => "FSM",
            PlannerKind::Qmdp => "QMDP",
            PlannerKind::Pomcp => "POMCP",
            PlannerKind::Despot => "DESPOT",
            PlannerKind::Oracle => "ORACLE",
        }
    }

    pub fn uses_belief(self) -> bool {
        matches!(self, PlannerKind::Qmdp | PlannerKind::Pomcp | PlannerKind::Despot)
    }

    /// Parses a comma-separated list such as `fsm,pomcp`.
    pub fn parse_list(s: &str) -> Result<Vec<PlannerKind>> {
        let mut out: Vec<PlannerKind> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let k: PlannerKind = part.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        if out.is_empty() {
            return Err(Error::UnknownPlanner { name: s.to_string(), valid: Self::valid_names() });
        }
        Ok(out)
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::UnknownPlanner { name: s.to_string(), valid: Self::valid_names() })
    }
}

/// Settings for every planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub pomcp: PomcpConfig,
    pub despot: DespotConfig,
    pub qmdp: CompactParams,
    /// Sup-norm stopping tolerance for QMDP value iteration.
    pub qmdp_tolerance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            pomcp: PomcpConfig::default(),
            despot: DespotConfig::default(),
            qmdp: CompactParams::default(),
            qmdp_tolerance: 1e-9,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.pomcp.validate()?;
        self.despot.validate()?;
        if !(self.qmdp_tolerance > 0.0) {
            return Err(Error::InvalidConfig("qmdp_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Planner-specific counters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulations: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_depth: Option<u32>,
    /// Per-action scores in STOP, YIELD, GO order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds_consistent: Option<bool>,
    /// The FSM repeated its last action on a dropped frame.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerDecision {
    pub action: Action,
    pub intent_predictions: BTreeMap<u8, Intent>,
    /// Wall-clock seconds spent deciding; filled in by the harness.
    pub compute_time: f64,
    pub diagnostics: Diagnostics,
}

/// Argmax of each vehicle's intent marginal.
pub fn belief_intents(b: &Belief) -> BTreeMap<u8, Intent> {
    let Some(first) = b.particles.first() else { return BTreeMap::new() };
    first.others.iter().filter_map(|v| intent_marginal(b, v.id).ok().map(|m| (v.id, predicted_intent(&m)))).collect()
}

/// A planner instance for one episode.
#[derive(Debug, Clone)]
pub enum Planner {
    Fsm(FsmMemory),
    Qmdp(Arc<QTable>),
    Pomcp(PomcpConfig),
    Despot(DespotConfig),
}

impl Planner {
    /// `table` is required for QMDP (solve it once and share it).
    pub fn new(kind: PlannerKind, cfg: &PlannerConfig, table: Option<Arc<QTable>>) -> Result<Self> {
        Ok(match kind {
            PlannerKind::Fsm => Planner::Fsm(FsmMemory::default()),
            PlannerKind::Qmdp => {
                Planner::Qmdp(table.ok_or_else(|| Error::InvalidConfig("qmdp planner needs a solved Q-table".into()))?)
            }
            PlannerKind::Pomcp => Planner::Pomcp(cfg.pomcp.clone()),
            PlannerKind::Despot => Planner::Despot(cfg.despot.clone()),
            PlannerKind::Oracle => {
                return Err(Error::InvalidConfig("the oracle is driven by the harness, not instantiated".into()))
            }
        })
    }

    pub fn kind(&self) -> PlannerKind {
        match self {
            Planner::Fsm(_) => PlannerKind::Fsm,
            Planner::Qmdp(_) => PlannerKind::Qmdp,
            Planner::Pomcp(_) => PlannerKind::Pomcp,
            Planner::Despot(_) => PlannerKind::Despot,
        }
    }

    /// One decision. The FSM reads `obs`; the others read `belief`.
    pub fn decide(
        &mut self,
        obs: &Observation,
        belief: Option<&Belief>,
        model: &IntersectionModel,
        rng: &mut ChaCha8Rng,
    ) -> Result<PlannerDecision> {
        let need_belief =
            || belief.ok_or_else(|| Error::InvalidConfig("belief planner called without a belief".into()));
        let (action, intent_predictions, diagnostics) = match self {
            Planner::Fsm(memory) => {
                let (a, intents) = fsm_plan(obs, memory);
                (a, intents, Diagnostics { held: obs.frame_dropped, ..Default::default() })
            }
            Planner::Qmdp(table) => {
                let b = need_belief()?;
                let (a, v) = qmdp_action(b, table);
                (a, belief_intents(b), Diagnostics { action_values: Some(v.to_vec()), ..Default::default() })
            }
            Planner::Pomcp(cfg) => {
                let b = need_belief()?;
                let r = pomcp_search(model, b, cfg, rng);
                let d = Diagnostics {
                    simulations: Some(r.simulations),
                    tree_nodes: Some(r.tree_nodes),
                    tree_depth: Some(r.max_depth_reached),
                    action_values: Some(r.root_values),
                    ..Default::default()
                };
                (r.action, belief_intents(b), d)
            }
            Planner::Despot(cfg) => {
                let b = need_belief()?;
                let r = despot_search(model, b, cfg, rng);
                let d = Diagnostics {
                    trials: Some(r.trials),
                    tree_nodes: Some(r.tree_nodes),
                    tree_depth: Some(r.max_depth_reached),
                    action_values: Some(r.root_values),
                    bounds_consistent: Some(r.bounds_consistent),
                    ..Default::default()
                };
                (r.action, belief_intents(b), d)
            }
        };
        Ok(PlannerDecision { action, intent_predictions, compute_time: 0.0, diagnostics })
    }
}

//! Ground-truth world model: transition, observation and reward functions,
//! plus the rules-of-the-road oracle.

mod dynamics;
mod observe;
mod oracle;

pub use dynamics::{
    advance, is_terminal, reward, reward_breakdown, transition, transition_with_noise, RewardBreakdown, StepNoise,
};
pub use observe::{
    observe, project, rank_likelihood, EgoObservation, Observation, ObservationNoise, VehicleMeasurement,
    VehicleObservation,
};
pub use oracle::{blockers, ground_truth_action, must_wait};

use serde::{Deserialize, Serialize};

use crate::domain::RewardWeights;
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

/// Simulation seconds per step.
pub const STEP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub gamma: f64,
    pub horizon: u32,
    pub reward: RewardWeights,
    pub slippery_brake_failure_prob: f64,
    /// Observations reach the planner this many steps late.
    pub perception_latency: u32,
    pub noise: ObservationNoise,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            horizon: 12,
            reward: RewardWeights::default(),
            slippery_brake_failure_prob: 0.2,
            perception_latency: 1,
            noise: ObservationNoise::default(),
        }
    }
}

impl SimConfig {
    /// Default dynamics with the noise and horizon taken from a scenario config.
    pub fn from_scenario_config(cfg: &ScenarioConfig) -> Self {
        let mut sim = Self { horizon: cfg.horizon, ..Self::default() };
        sim.noise.position_sigma = cfg.position_noise_sigma;
        sim.noise.arrival_noise = cfg.arrival_noise;
        sim.noise.occlusion_prob = cfg.occlusion_prob;
        sim.noise.dropout_prob = cfg.dropout_prob;
        sim
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.slippery_brake_failure_prob) {
            return Err(Error::InvalidConfig("slippery_brake_failure_prob must be a probability".into()));
        }
        self.reward.validate().map_err(Error::InvalidConfig)?;
        self.noise.validate()
    }
}

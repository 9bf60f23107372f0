//! Aggregate benchmark metrics and their radar normalization.

use serde::{Deserialize, Serialize};

use super::log::EpisodeLog;
use crate::sim::STEP_SECONDS;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent of steps where the action equals the oracle's.
    pub action_accuracy: f64,
    /// Percent of (vehicle, step) pairs with the intent predicted right.
    pub intent_accuracy: f64,
    pub collision_free_rate: f64,
    /// Percent of vehicles that cleared no later than under the oracle.
    pub flow_efficiency: f64,
    /// Mean simulated seconds until every vehicle cleared.
    pub avg_time_to_completion: f64,
    /// Mean wall-clock seconds per decision.
    pub avg_processing_time: f64,
    /// Vehicles cleared per simulated second.
    pub throughput: f64,
    /// Fraction of decisions that met the deadline.
    pub real_time_fraction: f64,
    /// Percent of episodes with a near miss that ended without a collision.
    pub near_miss_recovery: f64,
    pub episodes: usize,
    pub steps: usize,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn compute_metrics(logs: &[EpisodeLog]) -> Result<Metrics> {
    if logs.is_empty() {
        return Err(Error::EmptyLogs);
    }
    let records = || logs.iter().flat_map(|l| l.records.iter());
    let steps = records().count();
    let correct = records().filter(|r| r.correct()).count();
    let (hits, scored) = records().map(|r| r.intent_hits()).fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let collision_free = logs.iter().filter(|l| !l.collided()).count();
    let vehicles: usize = logs.iter().map(|l| l.steps_to_clear.len()).sum();
    let on_time: usize = logs.iter().map(|l| l.vehicles_on_time()).sum();
    let cleared: usize = logs.iter().map(|l| l.vehicles_cleared()).sum();
    let total_seconds: f64 = logs.iter().map(|l| l.completion_steps as f64 * STEP_SECONDS).sum();
    let compute: f64 = records().map(|r| r.compute_time).sum();
    let met = records().filter(|r| r.deadline_met).count();
    let near: Vec<&EpisodeLog> = logs.iter().filter(|l| l.had_near_miss()).collect();
    let recovered = near.iter().filter(|l| !l.collided()).count();

    Ok(Metrics {
        action_accuracy: pct(correct, steps),
        intent_accuracy: if scored == 0 { 100.0 } else { pct(hits, scored) },
        collision_free_rate: pct(collision_free, logs.len()),
        flow_efficiency: pct(on_time, vehicles),
        avg_time_to_completion: total_seconds / logs.len() as f64,
        avg_processing_time: if steps == 0 { 0.0 } else { compute / steps as f64 },
        throughput: if total_seconds > 0.0 { cleared as f64 / total_seconds } else { 0.0 },
        real_time_fraction: if steps == 0 { 1.0 } else { met as f64 / steps as f64 },
        near_miss_recovery: if near.is_empty() { 100.0 } else { pct(recovered, near.len()) },
        episodes: logs.len(),
        steps,
    })
}

/// The eight radar metrics and whether higher is better.
pub const RADAR_METRICS: [(&str, bool); 8] = [
    ("action_accuracy", true),
    ("intent_accuracy", true),
    ("collision_free_rate", true),
    ("flow_efficiency", true),
    ("avg_time_to_completion", false),
    ("avg_processing_time", false),
    ("throughput", true),
    ("real_time_fraction", true),
];

impl Metrics {
    pub fn radar_values(&self) -> [f64; 8] {
        [
            self.action_accuracy,
            self.intent_accuracy,
            self.collision_free_rate,
            self.flow_efficiency,
            self.avg_time_to_completion,
            self.avg_processing_time,
            self.throughput,
            self.real_time_fraction,
        ]
    }
}

/// Min-max normalization of one metric across planners: best -> 1, worst
/// -> 0. If every value is equal, all map to 1.
pub fn min_max_normalize(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if !(span > 0.0) {
                1.0
            } else if higher_is_better {
                (v - lo) / span
            } else {
                (hi - v) / span
            }
        })
        .collect()
}

/// Normalizes each radar metric across the given planners.
pub fn normalize_for_radar(rows: &[(String, Metrics)]) -> Vec<(String, [f64; 8])> {
    let mut out: Vec<(String, [f64; 8])> = rows.iter().map(|(n, _)| (n.clone(), [0.0; 8])).collect();
    for (j, (_, higher)) in RADAR_METRICS.iter().enumerate() {
        let column: Vec<f64> = rows.iter().map(|(_, m)| m.radar_values()[j]).collect();
        for (i, v) in min_max_normalize(&column, *higher).into_iter().enumerate() {
            out[i].1[j] = v;
        }
    }
    out
}

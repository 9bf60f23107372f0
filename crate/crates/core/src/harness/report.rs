//! Report files: metrics table, per-scenario accuracy matrix, decision
//! trajectories, processing times and the normalized radar chart.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::log::EpisodeLog;
use super::metrics::{compute_metrics, normalize_for_radar, Metrics, RADAR_METRICS};
use crate::domain::Action;
use crate::planners::PlannerKind;
use crate::{Error, Result};

pub const METRICS_CSV: &str = "metrics.csv";
pub const ACCURACY_CSV: &str = "accuracy_matrix.csv";
pub const TRAJECTORIES_JSON: &str = "trajectories.json";
pub const PROCESSING_CSV: &str = "processing_time.csv";
pub const RADAR_CSV: &str = "radar.csv";
pub const RADAR_SVG: &str = "radar.svg";

/// Metrics per planner, in report order.
pub fn metrics_by_planner(logs: &[EpisodeLog]) -> Result<Vec<(PlannerKind, Metrics)>> {
    if logs.is_empty() {
        return Err(Error::EmptyLogs);
    }
    let mut groups: BTreeMap<PlannerKind, Vec<EpisodeLog>> = BTreeMap::new();
    for l in logs {
        groups.entry(l.planner).or_default().push(l.clone());
    }
    groups.into_iter().map(|(k, ls)| Ok((k, compute_metrics(&ls)?))).collect()
}

pub fn metrics_csv(rows: &[(PlannerKind, Metrics)]) -> String {
    let mut s = String::from(
        "planner,action_accuracy,intent_accuracy,collision_free_rate,flow_efficiency,avg_time_to_completion,\
         avg_processing_time,throughput,real_time_fraction,near_miss_recovery,episodes,steps\n",
    );
    for (k, m) in rows {
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.6},{:.4},{:.4},{:.4},{},{}",
            k.label(),
            m.action_accuracy,
            m.intent_accuracy,
            m.collision_free_rate,
            m.flow_efficiency,
            m.avg_time_to_completion,
            m.avg_processing_time,
            m.throughput,
            m.real_time_fraction,
            m.near_miss_recovery,
            m.episodes,
            m.steps
        );
    }
    s
}

/// Action accuracy per scenario (rows) and planner (columns), adversarial
/// scenarios first.
pub fn accuracy_matrix_csv(logs: &[EpisodeLog]) -> String {
    let planners: BTreeSet<PlannerKind> = logs.iter().map(|l| l.planner).collect();
    let mut rows: BTreeMap<(bool, u32), BTreeMap<PlannerKind, f64>> = BTreeMap::new();
    for l in logs {
        rows.entry((!l.adversarial, l.scenario_id)).or_default().insert(l.planner, l.action_accuracy());
    }
    let mut s = String::from("scenario_id,adversarial");
    for p in &planners {
        let _ = write!(s, ",{}", p.label());
    }
    s.push('\n');
    for ((not_adv, id), cells) in &rows {
        let _ = write!(s, "{id},{}", !not_adv);
        for p in &planners {
            match cells.get(p) {
                Some(v) => {
                    let _ = write!(s, ",{v:.4}");
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct PlannerTrajectory {
    actions: Vec<Action>,
    ground_truth: Vec<Action>,
    outcome: super::log::Outcome,
}

#[derive(Debug, Serialize)]
struct ScenarioTrajectories {
    scenario_id: u32,
    adversarial: bool,
    /// Oracle actions when the oracle drives.
    ground_truth: Vec<Action>,
    planners: BTreeMap<String, PlannerTrajectory>,
}

pub fn trajectories_json(logs: &[EpisodeLog]) -> String {
    let mut by_scenario: BTreeMap<(bool, u32), ScenarioTrajectories> = BTreeMap::new();
    for l in logs {
        let entry = by_scenario.entry((!l.adversarial, l.scenario_id)).or_insert_with(|| ScenarioTrajectories {
            scenario_id: l.scenario_id,
            adversarial: l.adversarial,
            ground_truth: l.reference_actions.clone(),
            planners: BTreeMap::new(),
        });
        entry.planners.insert(
            l.planner.name().to_string(),
            PlannerTrajectory {
                actions: l.records.iter().map(|r| r.action).collect(),
                ground_truth: l.records.iter().map(|r| r.oracle_action).collect(),
                outcome: l.outcome,
            },
        );
    }
    let list: Vec<ScenarioTrajectories> = by_scenario.into_values().collect();
    let mut s = serde_json::to_string_pretty(&list).expect("trajectories serialize");
    s.push('\n');
    s
}

pub fn processing_time_csv(logs: &[EpisodeLog], deadline: f64) -> String {
    let mut sorted: Vec<&EpisodeLog> = logs.iter().collect();
    sorted.sort_by_key(|l| (l.planner, l.scenario_id));
    let mut s = String::from("planner,scenario_id,timestep,compute_time,deadline,deadline_met\n");
    for l in sorted {
        for r in &l.records {
            let _ = writeln!(
                s,
                "{},{},{},{:.9},{},{}",
                l.planner.label(),
                l.scenario_id,
                r.timestep,
                r.compute_time,
                deadline,
                r.deadline_met
            );
        }
    }
    s
}

pub fn radar_rows(rows: &[(PlannerKind, Metrics)]) -> Vec<(String, [f64; 8])> {
    let named: Vec<(String, Metrics)> = rows.iter().map(|(k, m)| (k.label().to_string(), m.clone())).collect();
    normalize_for_radar(&named)
}

pub fn radar_csv(radar: &[(String, [f64; 8])]) -> String {
    let mut s = String::from("planner");
    for (name, _) in RADAR_METRICS {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (p, v) in radar {
        s.push_str(p);
        for x in v {
            let _ = write!(s, ",{x:.4}");
        }
        s.push('\n');
    }
    s
}

const PALETTE: [&str; 5] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#7f7f7f"];

/// Static SVG radar chart of normalized metrics.
pub fn radar_svg(radar: &[(String, [f64; 8])]) -> String {
    let (cx, cy, r) = (260.0, 250.0, 170.0);
    let angle = |j: usize| -std::f64::consts::FRAC_PI_2 + j as f64 * std::f64::consts::TAU / 8.0;
    let point = |j: usize, v: f64| (cx + r * v * angle(j).cos(), cy + r * v * angle(j).sin());
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="640" height="520" viewBox="0 0 640 520">"#);
    let _ = writeln!(s, r#"<rect width="640" height="520" fill="white"/>"#);
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<String> = (0..8).map(|j| point(j, ring)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="none" stroke="#cccccc"/>"##, pts.join(" "));
    }
    for (j, (name, _)) in RADAR_METRICS.iter().enumerate() {
        let (x, y) = point(j, 1.0);
        let (lx, ly) = point(j, 1.12);
        let _ = writeln!(s, r##"<line x1="{cx}" y1="{cy}" x2="{x:.1}" y2="{y:.1}" stroke="#cccccc"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{name}</text>"#
        );
    }
    for (i, (planner, values)) in radar.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            values.iter().enumerate().map(|(j, v)| point(j, *v)).map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.12" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = 30.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="540" y="{:.1}" width="12" height="12" fill="{color}"/>"#, ly - 10.0);
        let _ = writeln!(s, r#"<text x="558" y="{ly:.1}" font-family="sans-serif" font-size="12">{planner}</text>"#);
    }
    s.push_str("</svg>\n");
    s
}

/// Table-1 style plain-text summary.
pub fn summary_table(rows: &[(PlannerKind, Metrics)]) -> String {
    let mut s = format!(
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>10} {:>10} {:>8} {:>9}\n",
        "planner", "act.acc", "int.acc", "coll.fr", "flow", "t.comp(s)", "proc(s)", "thru(v/s)", "rt.frac", "nm.recov"
    );
    for (k, m) in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>9.2} {:>10.5} {:>10.3} {:>8.3} {:>9.1}",
            k.label(),
            m.action_accuracy,
            m.intent_accuracy,
            m.collision_free_rate,
            m.flow_efficiency,
            m.avg_time_to_completion,
            m.avg_processing_time,
            m.throughput,
            m.real_time_fraction,
            m.near_miss_recovery
        );
    }
    s
}

fn write(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every report file into `dir` and returns their paths.
pub fn export_reports(dir: &Path, logs: &[EpisodeLog], deadline: f64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = metrics_by_planner(logs)?;
    let radar = radar_rows(&rows);
    Ok(vec![
        write(dir, METRICS_CSV, &metrics_csv(&rows))?,
        write(dir, ACCURACY_CSV, &accuracy_matrix_csv(logs))?,
        write(dir, TRAJECTORIES_JSON, &trajectories_json(logs))?,
        write(dir, PROCESSING_CSV, &processing_time_csv(logs, deadline))?,
        write(dir, RADAR_CSV, &radar_csv(&radar))?,
        write(dir, RADAR_SVG, &radar_svg(&radar))?,
    ])
}

//! The common evaluation wrapper: identical environments for every planner,
//! perception latency, deadline accounting, metrics and report files.

mod episode;
mod log;
mod metrics;
mod report;

pub use episode::{near_miss, reference_run, run_episode, run_suite, Environment, EpisodeConfig};
pub use log::{read_jsonl, write_jsonl, EpisodeLog, Outcome, StepRecord, EPISODE_SCHEMA};
pub use metrics::{compute_metrics, min_max_normalize, normalize_for_radar, Metrics, RADAR_METRICS};
pub use report::{
    accuracy_matrix_csv, export_reports, metrics_by_planner, metrics_csv, processing_time_csv, radar_csv, radar_rows,
    radar_svg, summary_table, trajectories_json, ACCURACY_CSV, METRICS_CSV, PROCESSING_CSV, RADAR_CSV, RADAR_SVG,
    TRAJECTORIES_JSON,
};

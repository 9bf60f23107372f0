//! Runs a small suite, saves the episode logs as JSON lines, reloads them
//! and writes the report files (metrics, accuracy matrix, trajectories,
//! processing times, radar chart) into a directory.
//!
//! ```text
//! cargo run --release --example export_reports -- [out_dir]
//! ```

use std::path::PathBuf;

use row_pomdp::harness::{export_reports, read_jsonl, run_suite, write_jsonl, EpisodeConfig};
use row_pomdp::planners::PlannerKind;
use row_pomdp::scenario::{generate_suite, ScenarioConfig};

fn main() -> row_pomdp::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "example_reports".into()).into();
    std::fs::create_dir_all(&out).map_err(|e| row_pomdp::Error::io(&out, e))?;

    let cfg = EpisodeConfig::default();
    let scenarios = generate_suite(21, 9, &ScenarioConfig::default())?;
    let logs = run_suite(&scenarios, &PlannerKind::BENCHMARK, &cfg, 1)?;

    let log_path = out.join("episodes.jsonl");
    write_jsonl(&log_path, &logs)?;
    let reloaded = read_jsonl(&log_path)?;
    assert_eq!(reloaded, logs);

    for path in export_reports(&out, &reloaded, cfg.deadline)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

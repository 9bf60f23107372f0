//! Runs the four planners over a generated suite and prints a Table-1 style
//! summary.
//!
//! ```text
//! cargo run --release --example benchmark_suite -- [base_seed] [n_scenarios]
//! ```

use std::time::Instant;

use row_pomdp::harness::{metrics_by_planner, run_suite, summary_table, EpisodeConfig};
use row_pomdp::planners::PlannerKind;
use row_pomdp::scenario::{generate_suite, ScenarioConfig};

fn main() -> row_pomdp::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);

    let scenarios = generate_suite(seed, n, &ScenarioConfig::default())?;
    let cfg = EpisodeConfig { log_beliefs: false, ..EpisodeConfig::default() };
    let started = Instant::now();
    let logs = run_suite(&scenarios, &PlannerKind::BENCHMARK, &cfg, 1)?;
    let rows = metrics_by_planner(&logs)?;
    print!("{}", summary_table(&rows));
    println!("{} episodes in {:.1} s", logs.len(), started.elapsed().as_secs_f64());
    Ok(())
}

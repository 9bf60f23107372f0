//! Runs one planner through one scenario and prints the step-by-step trace:
//! what the ego did, what the oracle would have done, and the reward.
//!
//! ```text
//! cargo run --release --example episode_trace -- [planner] [scenario_seed]
//! ```

use row_pomdp::harness::{run_episode, EpisodeConfig};
use row_pomdp::planners::PlannerKind;
use row_pomdp::scenario::{generate_scenario, ScenarioConfig};
use std::sync::Arc;

fn main() -> row_pomdp::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind = PlannerKind::parse_list(&args.next().unwrap_or_else(|| "despot".into()))?[0];
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);

    let cfg = EpisodeConfig::default();
    let scn = generate_scenario(seed, &ScenarioConfig::default(), true)?;
    let table = if kind == PlannerKind::Qmdp { Some(Arc::new(cfg.solve_qtable()?)) } else { None };
    let log = run_episode(kind, &scn, &cfg, table);

    println!("{} on scenario {} (adversarial features {:?})", kind.label(), scn.id, scn.features());
    for r in &log.records {
        let ego = &r.state.ego;
        println!(
            "t={:>2} ego {:<15} d={:>5.1} v={:>4.1}  action {:<5} oracle {:<5} {}  reward {:>7.2}{}",
            r.timestep,
            format!("{:?}", ego.phase),
            ego.distance_to_line,
            ego.speed,
            r.action,
            r.oracle_action,
            if r.correct() { " " } else { "x" },
            r.reward.total(),
            if r.near_miss { "  near miss" } else { "" }
        );
    }
    println!("outcome {:?}, discounted return {:.2}", log.outcome, log.discounted_return);
    Ok(())
}

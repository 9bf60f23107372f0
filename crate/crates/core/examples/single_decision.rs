//! One decision from each online planner on the same initial belief, with
//! the root statistics each search reports.
//!
//! ```text
//! cargo run --release --example single_decision -- [scenario_seed]
//! ```

use row_pomdp::belief::init_belief;
use row_pomdp::domain::Action;
use row_pomdp::harness::{Environment, EpisodeConfig};
use row_pomdp::planners::{despot_search, pomcp_search, qmdp_action};
use row_pomdp::rng::{stream, tag};
use row_pomdp::scenario::{generate_scenario, ScenarioConfig};
use row_pomdp::sim::ground_truth_action;

fn main() -> row_pomdp::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = EpisodeConfig::default();
    let scn = generate_scenario(seed, &ScenarioConfig::default(), false)?;
    let s = scn.initial_state();
    let o = Environment::new(seed).observe(&s, &cfg.sim);
    let mut rng = stream(seed, &[tag("example")]);
    let belief = init_belief(&scn, &o, cfg.n_particles, &cfg.filter(), &mut rng);
    let model = cfg.model();

    println!("oracle says {}", ground_truth_action(&s));

    let table = cfg.solve_qtable()?;
    let (a, q) = qmdp_action(&belief, &table);
    println!("QMDP    {:<5} Q = {}", a, fmt_values(&q));

    let r = pomcp_search(&model, &belief, &cfg.planners.pomcp, &mut rng);
    println!(
        "POMCP   {:<5} values = {} visits = {:?} nodes = {} depth = {}",
        r.action,
        fmt_values(&r.root_values),
        r.root_visits,
        r.tree_nodes,
        r.max_depth_reached
    );

    let r = despot_search(&model, &belief, &cfg.planners.despot, &mut rng);
    println!(
        "DESPOT  {:<5} values = {} bounds = [{:.2}, {:.2}] trials = {} nodes = {}",
        r.action,
        fmt_values(&r.root_values),
        r.root_lower,
        r.root_upper,
        r.trials,
        r.tree_nodes
    );
    Ok(())
}

fn fmt_values(v: &[f64]) -> String {
    let parts: Vec<String> = Action::ALL.iter().zip(v).map(|(a, x)| format!("{a}:{x:.2}")).collect();
    parts.join(" ")
}

//! Follows the particle filter through one scenario while the oracle drives.
//! Prints, per step, the posterior over each vehicle's intent next to the
//! truth, plus the pedestrian posterior and the effective sample size.
//!
//! ```text
//! cargo run --release --example belief_tracking -- [scenario_seed]
//! ```

use row_pomdp::belief::{init_belief, intent_marginal, pedestrian_posterior, update};
use row_pomdp::harness::{Environment, EpisodeConfig};
use row_pomdp::rng::{stream, tag};
use row_pomdp::scenario::{generate_scenario, ScenarioConfig};
use row_pomdp::sim::{ground_truth_action, is_terminal};

fn main() -> row_pomdp::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let cfg = EpisodeConfig::default();
    let scn = generate_scenario(seed, &ScenarioConfig::default(), true)?;
    let filter = cfg.filter();
    let mut rng = stream(seed, &[tag("example")]);
    let mut env = Environment::new(seed);

    let mut s = scn.initial_state();
    let mut belief = init_belief(&scn, &env.observe(&s, &cfg.sim), cfg.n_particles, &filter, &mut rng);
    println!("scenario {} ({} other vehicles, slippery={})", scn.id, s.others.len(), s.slippery);

    while !is_terminal(&s, cfg.sim.horizon) {
        println!("t={} ess={:.1}", s.timestep, belief.effective_sample_size());
        for v in &s.others {
            let m = intent_marginal(&belief, v.id)?;
            println!(
                "  vehicle {} from {}: true {:<8} belief S={:.2} L={:.2} R={:.2}",
                v.id, v.approach, v.intent, m[0], m[1], m[2]
            );
        }
        let peds = pedestrian_posterior(&belief);
        println!("  pedestrian N/E/S/W = {:.2} {:.2} {:.2} {:.2}", peds[0], peds[1], peds[2], peds[3]);

        // Plain filtering without perception latency, so the belief is about
        // the state the action is applied to.
        let a = ground_truth_action(&s);
        s = env.step(&s, a, &cfg.sim);
        let o = env.observe(&s, &cfg.sim);
        let (next, outcome) = update(&belief, a, &o, &filter, &mut rng);
        if outcome.reinvigorated {
            println!("  (particles reinvigorated)");
        }
        belief = next;
    }
    println!("done at t={}, ego {:?}", s.timestep, s.ego.phase);
    Ok(())
}

//! Solves the 48-state compact MDP behind the QMDP planner and prints the
//! Q-value of every action in every compact state.
//!
//! ```text
//! cargo run --release --example qmdp_table
//! ```

use row_pomdp::domain::{Action, RewardWeights};
use row_pomdp::planners::qmdp::{argmax_first, COMPACT_STATES};
use row_pomdp::planners::{CompactParams, CompactState, QTable};

fn main() -> row_pomdp::Result<()> {
    let table = QTable::solve(&CompactParams::default(), &RewardWeights::default(), 0.95, 1e-9)?;
    println!(
        "{:<15} {:<10} {:>4} {:>6} {:>9} {:>9} {:>9}  best  safe",
        "phase", "priority", "ped", "active", "Q(stop)", "Q(yield)", "Q(go)"
    );
    for i in 0..COMPACT_STATES {
        let c = CompactState::from_index(i);
        let q = table.values(&c);
        let best = Action::ALL[argmax_first(&q)];
        println!(
            "{:<15} {:<10} {:>4} {:>6} {:>9.2} {:>9.2} {:>9.2}  {:<5} {}",
            format!("{:?}", c.phase),
            format!("{:?}", c.priority),
            c.pedestrian,
            c.active,
            q[0],
            q[1],
            q[2],
            best,
            c.safe_action()
        );
    }
    Ok(())
}

//! The POMCP and DESPOT solvers are generic over [`Pomdp`]. This example
//! plugs in the classic tiger problem and lets both solvers pick an action
//! after hearing the tiger on the left once. Listening again is the right
//! call: opening the right door now is worth -6.5 in expectation.
//!
//! ```text
//! cargo run --release --example custom_pomdp
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use row_pomdp::belief::ParticleSet;
use row_pomdp::planners::{despot_search, pomcp_search, DespotConfig, PomcpConfig, Pomdp, RolloutPolicy, Step};
use row_pomdp::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TigerAction {
    Listen,
    OpenLeft,
    OpenRight,
}

/// State: the tiger is behind the left door, plus a done flag.
#[derive(Debug, Clone, Copy)]
struct Tiger {
    left: bool,
    done: bool,
}

struct TigerProblem;

impl Pomdp for TigerProblem {
    type State = Tiger;
    type Action = TigerAction;
    /// Heard left, heard right, or nothing (after opening).
    type ObsKey = u8;

    fn actions(&self) -> &[TigerAction] {
        &[TigerAction::Listen, TigerAction::OpenLeft, TigerAction::OpenRight]
    }

    fn step(&self, s: &Tiger, a: TigerAction, rng: &mut ChaCha8Rng) -> Step<Tiger, u8> {
        match a {
            TigerAction::Listen => {
                let correct = rng.gen::<f64>() < 0.85;
                let heard_left = s.left == correct;
                Step { next: *s, obs: heard_left as u8, reward: -1.0 }
            }
            TigerAction::OpenLeft | TigerAction::OpenRight => {
                let eaten = (a == TigerAction::OpenLeft) == s.left;
                Step { next: Tiger { done: true, ..*s }, obs: 2, reward: if eaten { -100.0 } else { 10.0 } }
            }
        }
    }

    fn is_terminal(&self, s: &Tiger) -> bool {
        s.done
    }

    fn discount(&self) -> f64 {
        0.95
    }

    fn upper_bound(&self, s: &Tiger) -> f64 {
        if s.done {
            0.0
        } else {
            10.0
        }
    }

    fn default_action(&self, _s: &Tiger) -> TigerAction {
        TigerAction::Listen
    }
}

fn main() {
    // One "left" reading: P(left) = 0.85.
    let p_left = 0.85;
    let mut rng = stream(1, &[]);
    let particles: Vec<Tiger> = (0..1000).map(|_| Tiger { left: rng.gen::<f64>() < p_left, done: false }).collect();
    let belief = ParticleSet::uniform(particles);

    let pomcp = PomcpConfig { n_simulations: 5000, max_depth: 4, ucb_constant: 100.0, rollout: RolloutPolicy::Default };
    let r = pomcp_search(&TigerProblem, &belief, &pomcp, &mut rng);
    println!("POMCP  picks {:?}; root values {:?}", r.action, r.root_values);

    let despot = DespotConfig { n_scenarios: 200, max_depth: 4, max_trials: 200, ..DespotConfig::default() };
    let r = despot_search(&TigerProblem, &belief, &despot, &mut rng);
    println!("DESPOT picks {:?}; root bounds [{:.2}, {:.2}]", r.action, r.root_lower, r.root_upper);
}

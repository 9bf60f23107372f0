//! POMCP: UCB1 tree search over action/observation histories, with root
//! states sampled from the particle belief.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Pomdp, RolloutPolicy};
use crate::belief::ParticleSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PomcpConfig {
    pub n_simulations: u32,
    pub max_depth: u32,
    pub ucb_constant: f64,
    pub rollout: RolloutPolicy,
}

impl Default for PomcpConfig {
    fn default() -> Self {
        Self { n_simulations: 150, max_depth: 6, ucb_constant: 50.0, rollout: RolloutPolicy::UniformRandom }
    }
}

impl PomcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_simulations == 0 || self.max_depth == 0 {
            return Err(Error::InvalidConfig("pomcp needs n_simulations >= 1 and max_depth >= 1".into()));
        }
        if !(self.ucb_constant.is_finite() && self.ucb_constant >= 0.0) {
            return Err(Error::InvalidConfig("pomcp ucb_constant must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct ActionStats<K> {
    visits: u32,
    value: f64,
    children: HashMap<K, usize>,
}

#[derive(Debug, Clone)]
struct HistoryNode<K> {
    visits: u32,
    actions: Vec<ActionStats<K>>,
}

/// Root statistics of one search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PomcpResult<A> {
    pub action: A,
    pub simulations: u32,
    pub root_visits: Vec<u32>,
    pub root_values: Vec<f64>,
    pub tree_nodes: usize,
    pub max_depth_reached: u32,
}

struct Search<'a, M: Pomdp> {
    model: &'a M,
    cfg: &'a PomcpConfig,
    nodes: Vec<HistoryNode<M::ObsKey>>,
    deepest: u32,
}

impl<'a, M: Pomdp> Search<'a, M> {
    fn new_node(&mut self) -> usize {
        let n = self.model.actions().len();
        self.nodes.push(HistoryNode {
            visits: 0,
            actions: (0..n).map(|_| ActionStats { visits: 0, value: 0.0, children: HashMap::new() }).collect(),
        });
        self.nodes.len() - 1
    }

    fn select(&self, node: usize) -> usize {
        let h = &self.nodes[node];
        if let Some(untried) = h.actions.iter().position(|a| a.visits == 0) {
            return untried;
        }
        let log_n = (h.visits as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, a) in h.actions.iter().enumerate() {
            let score = a.value + self.cfg.ucb_constant * (log_n / a.visits as f64).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    fn rollout(&mut self, s: &M::State, depth: u32, rng: &mut ChaCha8Rng) -> f64 {
        let g = self.model.discount();
        let mut s = s.clone();
        let mut ret = 0.0;
        let mut disc = 1.0;
        let mut d = depth;
        while !self.model.is_terminal(&s) {
            if d >= self.cfg.max_depth {
                return ret + disc * self.model.leaf_value(&s);
            }
            let a = self.cfg.rollout.pick(self.model, &s, rng);
            let step = self.model.step(&s, a, rng);
            ret += disc * step.reward;
            disc *= g;
            s = step.next;
            d += 1;
        }
        ret
    }

    fn simulate(&mut self, s: &M::State, node: usize, depth: u32, rng: &mut ChaCha8Rng) -> f64 {
        self.deepest = self.deepest.max(depth);
        if self.model.is_terminal(s) {
            return 0.0;
        }
        if depth >= self.cfg.max_depth {
            return self.model.leaf_value(s);
        }
        let ai = self.select(node);
        let a = self.model.actions()[ai];
        let step = self.model.step(s, a, rng);
        let future = if self.model.is_terminal(&step.next) {
            0.0
        } else {
            match self.nodes[node].actions[ai].children.get(&step.obs) {
                Some(&child) => self.simulate(&step.next, child, depth + 1, rng),
                None => {
                    let child = self.new_node();
                    self.nodes[node].actions[ai].children.insert(step.obs.clone(), child);
                    self.deepest = self.deepest.max(depth + 1);
                    self.rollout(&step.next, depth + 1, rng)
                }
            }
        };
        let total = step.reward + self.model.discount() * future;
        let h = &mut self.nodes[node];
        h.visits += 1;
        let st = &mut h.actions[ai];
        st.visits += 1;
        st.value += (total - st.value) / st.visits as f64;
        total
    }
}

/// Runs exactly `cfg.n_simulations` simulations from the belief and returns
/// the most visited root action (ties: higher value, then action order).
pub fn pomcp_search<M: Pomdp>(
    model: &M,
    belief: &ParticleSet<M::State>,
    cfg: &PomcpConfig,
    rng: &mut ChaCha8Rng,
) -> PomcpResult<M::Action> {
    assert!(!belief.is_empty(), "belief must be non-empty");
    let mut search = Search { model, cfg, nodes: Vec::new(), deepest: 0 };
    let root = search.new_node();
    for _ in 0..cfg.n_simulations {
        let idx = belief.sample_index(rng);
        let s = belief.particles[idx].clone();
        if model.is_terminal(&s) {
            // Nothing to learn from a finished hypothesis beyond its zero value.
            let ai = search.select(root);
            let h = &mut search.nodes[root];
            h.visits += 1;
            let st = &mut h.actions[ai];
            st.visits += 1;
            st.value += -st.value / st.visits as f64;
            continue;
        }
        search.simulate(&s, root, 0, rng);
    }
    let stats = &search.nodes[root].actions;
    let mut best = 0;
    for i in 1..stats.len() {
        let (a, b) = (&stats[i], &stats[best]);
        if a.visits > b.visits || (a.visits == b.visits && a.value > b.value) {
            best = i;
        }
    }
    PomcpResult {
        action: model.actions()[best],
        simulations: cfg.n_simulations,
        root_visits: stats.iter().map(|a| a.visits).collect(),
        root_values: stats.iter().map(|a| a.value).collect(),
        tree_nodes: search.nodes.len(),
        max_depth_reached: search.deepest,
    }
}

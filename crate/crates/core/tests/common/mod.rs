//! Small problems with exact answers, shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use row_pomdp::belief::{FilterModel, ParticleSet};
use row_pomdp::planners::{FiniteMdp, Pomdp, Step};
use row_pomdp::rng::stream;

// ---------------------------------------------------------------------------
// Random two-step POMDP and its exhaustive expectimax solution.

pub const TOY_STATES: usize = 2;
pub const TOY_ACTIONS: usize = 3;
pub const TOY_OBS: usize = 2;
pub const TOY_DEPTH: u8 = 2;
pub const TOY_GAMMA: f64 = 0.95;
pub const TOY_REWARD_MAX: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct ToyPomdp {
    pub reward: [[f64; TOY_ACTIONS]; TOY_STATES],
    /// `trans[s][a][s']`
    pub trans: [[[f64; TOY_STATES]; TOY_ACTIONS]; TOY_STATES],
    /// `obs[a][s'][o]`
    pub obs: [[[f64; TOY_OBS]; TOY_STATES]; TOY_ACTIONS],
    pub belief: [f64; TOY_STATES],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyState {
    pub s: usize,
    pub t: u8,
}

fn simplex<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut p = [0.0; N];
    for x in p.iter_mut() {
        *x = rng.gen_range(0.05..1.0);
    }
    let total: f64 = p.iter().sum();
    p.map(|x| x / total)
}

fn draw(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

impl ToyPomdp {
    pub fn random(seed: u64) -> Self {
        let mut rng = stream(seed, &[0x70]);
        let mut reward = [[0.0; TOY_ACTIONS]; TOY_STATES];
        for row in reward.iter_mut() {
            for r in row.iter_mut() {
                *r = rng.gen_range(-TOY_REWARD_MAX..TOY_REWARD_MAX);
            }
        }
        let mut trans = [[[0.0; TOY_STATES]; TOY_ACTIONS]; TOY_STATES];
        for s in 0..TOY_STATES {
            for a in 0..TOY_ACTIONS {
                trans[s][a] = simplex(&mut rng);
            }
        }
        let mut obs = [[[0.0; TOY_OBS]; TOY_STATES]; TOY_ACTIONS];
        for a in 0..TOY_ACTIONS {
            for s in 0..TOY_STATES {
                obs[a][s] = simplex(&mut rng);
            }
        }
        let belief = simplex(&mut rng);
        Self { reward, trans, obs, belief }
    }

    /// Root belief as two weighted particles.
    pub fn particles(&self) -> ParticleSet<ToyState> {
        ParticleSet::from_weighted((0..TOY_STATES).map(|s| ToyState { s, t: 0 }).collect(), self.belief.to_vec())
    }

    /// Exact Q-values at belief `b` with `depth` steps to go.
    pub fn q_values(&self, b: &[f64; TOY_STATES], depth: u8) -> [f64; TOY_ACTIONS] {
        let mut q = [0.0; TOY_ACTIONS];
        if depth == 0 {
            return q;
        }
        for (a, qa) in q.iter_mut().enumerate() {
            let mut v: f64 = (0..TOY_STATES).map(|s| b[s] * self.reward[s][a]).sum();
            let mut pred = [0.0; TOY_STATES];
            for s in 0..TOY_STATES {
                for (s2, p) in pred.iter_mut().enumerate() {
                    *p += b[s] * self.trans[s][a][s2];
                }
            }
            for o in 0..TOY_OBS {
                let joint: [f64; TOY_STATES] = std::array::from_fn(|s2| pred[s2] * self.obs[a][s2][o]);
                let p_o: f64 = joint.iter().sum();
                if p_o > 0.0 {
                    let post = joint.map(|x| x / p_o);
                    let best = self.q_values(&post, depth - 1).into_iter().fold(f64::NEG_INFINITY, f64::max);
                    v += TOY_GAMMA * p_o * best;
                }
            }
            *qa = v;
        }
        q
    }

    /// Optimal root action and its margin over the runner-up.
    pub fn optimal(&self) -> (usize, f64) {
        let q = self.q_values(&self.belief, TOY_DEPTH);
        let mut order: Vec<usize> = (0..TOY_ACTIONS).collect();
        order.sort_by(|&x, &y| q[y].total_cmp(&q[x]));
        (order[0], q[order[0]] - q[order[1]])
    }
}

const TOY_ACTION_LIST: [usize; TOY_ACTIONS] = [0, 1, 2];

impl Pomdp for ToyPomdp {
    type State = ToyState;
    type Action = usize;
    type ObsKey = usize;

    fn actions(&self) -> &[usize] {
        &TOY_ACTION_LIST
    }

    fn step(&self, s: &ToyState, a: usize, rng: &mut ChaCha8Rng) -> Step<ToyState, usize> {
        let s2 = draw(&self.trans[s.s][a], rng);
        let o = draw(&self.obs[a][s2], rng);
        Step { next: ToyState { s: s2, t: s.t + 1 }, obs: o, reward: self.reward[s.s][a] }
    }

    fn is_terminal(&self, s: &ToyState) -> bool {
        s.t >= TOY_DEPTH
    }

    fn discount(&self) -> f64 {
        TOY_GAMMA
    }

    fn upper_bound(&self, s: &ToyState) -> f64 {
        let left = TOY_DEPTH.saturating_sub(s.t) as i32;
        (0..left).map(|k| TOY_GAMMA.powi(k) * TOY_REWARD_MAX).sum()
    }

    fn default_action(&self, _s: &ToyState) -> usize {
        0
    }
}

/// Toys whose optimal action beats the runner-up by at least `margin`.
/// Near-ties have no well-defined "correct" action for a sampling solver.
pub fn toys_with_margin(count: usize, margin: f64) -> Vec<(u64, ToyPomdp, usize)> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 0;
    while out.len() < count {
        let toy = ToyPomdp::random(seed);
        let (best, gap) = toy.optimal();
        if gap >= margin {
            out.push((seed, toy, best));
        }
        seed += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Ring-world hidden Markov model and its exact enumeration filter.

/// A walker on a ring of `n` cells. The action is the intended step
/// (-1, 0, +1); it happens with probability 0.6, otherwise the walker drifts
/// one cell either way or stays. Observations report the cell with a
/// ±1 error.
#[derive(Debug, Clone)]
pub struct Ring {
    pub n: usize,
}

pub const RING_OBS_NOISE: [f64; 3] = [0.2, 0.6, 0.2];

impl Ring {
    fn shift(&self, s: usize, d: i64) -> usize {
        (s as i64 + d).rem_euclid(self.n as i64) as usize
    }

    /// Transition row `P(s' | s, a)`.
    pub fn trans_row(&self, s: usize, a: i64) -> Vec<f64> {
        let mut row = vec![0.0; self.n];
        row[self.shift(s, a)] += 0.6;
        for d in [-1, 0, 1] {
            row[self.shift(s, d)] += 0.4 / 3.0;
        }
        row
    }

    pub fn obs_prob(&self, s: usize, o: usize) -> f64 {
        let mut p = 0.0;
        for (k, d) in [-1, 0, 1].into_iter().enumerate() {
            if self.shift(s, d) == o {
                p += RING_OBS_NOISE[k];
            }
        }
        p
    }

    pub fn sample_obs(&self, s: usize, rng: &mut ChaCha8Rng) -> usize {
        self.shift(s, draw(&RING_OBS_NOISE, rng) as i64 - 1)
    }

    pub fn sample_next(&self, s: usize, a: i64, rng: &mut ChaCha8Rng) -> usize {
        draw(&self.trans_row(s, a), rng)
    }

    /// One exact Bayes step over the full state space.
    pub fn exact_update(&self, b: &[f64], a: i64, o: usize) -> Vec<f64> {
        let mut pred = vec![0.0; self.n];
        for (s, &p) in b.iter().enumerate() {
            for (s2, t) in self.trans_row(s, a).into_iter().enumerate() {
                pred[s2] += p * t;
            }
        }
        let mut post: Vec<f64> = pred.iter().enumerate().map(|(s, p)| p * self.obs_prob(s, o)).collect();
        let z: f64 = post.iter().sum();
        post.iter_mut().for_each(|p| *p /= z);
        post
    }
}

impl FilterModel for Ring {
    type State = usize;
    type Action = i64;
    type Obs = usize;

    fn propagate(&self, s: &usize, a: i64, rng: &mut ChaCha8Rng) -> usize {
        self.sample_next(*s, a, rng)
    }

    fn likelihood(&self, s: &usize, o: &usize) -> f64 {
        self.obs_prob(*s, *o)
    }
}

/// Histogram of a particle set over `n` cells.
pub fn histogram(b: &ParticleSet<usize>, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    for (s, w) in b.iter() {
        h[*s] += w;
    }
    h
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Finite MDPs.

/// Dense value iteration on V, run far past the solver's tolerance. Shares
/// nothing with the solver beyond the transition table it reads.
pub fn dense_q(mdp: &FiniteMdp, gamma: f64) -> Vec<Vec<f64>> {
    let n = mdp.n_states;
    let na = mdp.n_actions;
    let mut p = vec![vec![vec![0.0; n]; na]; n];
    let mut r = vec![vec![0.0; na]; n];
    let mut terminal = vec![true; n];
    for s in 0..n {
        for a in 0..na {
            for &(s2, prob, rew) in &mdp.transitions[s][a] {
                p[s][a][s2] += prob;
                r[s][a] += prob * rew;
                terminal[s] = false;
            }
        }
    }
    let mut v = vec![0.0; n];
    let q_of = |v: &[f64], s: usize, a: usize| r[s][a] + gamma * (0..n).map(|j| p[s][a][j] * v[j]).sum::<f64>();
    for _ in 0..200_000 {
        let next: Vec<f64> = (0..n)
            .map(|s| if terminal[s] { 0.0 } else { (0..na).map(|a| q_of(&v, s, a)).fold(f64::NEG_INFINITY, f64::max) })
            .collect();
        let delta = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    (0..n).map(|s| (0..na).map(|a| q_of(&v, s, a)).collect()).collect()
}

//! Generic weighted particle filter.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A generative transition model plus an observation likelihood.
pub trait FilterModel {
    type State: Clone;
    type Action: Copy;
    type Obs;

    fn propagate(&self, s: &Self::State, a: Self::Action, rng: &mut ChaCha8Rng) -> Self::State;

    /// `P(o | s)`, up to a constant shared by all states.
    fn likelihood(&self, s: &Self::State, o: &Self::Obs) -> f64;

    /// Perturbs a hypothesis after a total weight collapse. May use the
    /// observation that caused the collapse.
    fn reinvigorate(&self, s: &Self::State, _o: &Self::Obs, _rng: &mut ChaCha8Rng) -> Self::State {
        s.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet<S> {
    pub particles: Vec<S>,
    pub weights: Vec<f64>,
    /// Number of (action, observation) pairs absorbed so far.
    pub history_length: usize,
    /// Updates in which every particle had zero likelihood.
    pub degenerate_updates: usize,
}

/// What happened during one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub effective_sample_size: f64,
    pub resampled: bool,
    pub reinvigorated: bool,
    /// Every particle (including reinvigorated ones) had zero likelihood;
    /// the prediction was kept unweighted.
    pub degenerate: bool,
}

impl<S: Clone> ParticleSet<S> {
    pub fn uniform(particles: Vec<S>) -> Self {
        assert!(!particles.is_empty(), "a belief needs at least one particle");
        let w = 1.0 / particles.len() as f64;
        Self { weights: vec![w; particles.len()], particles, history_length: 0, degenerate_updates: 0 }
    }

    pub fn from_weighted(particles: Vec<S>, weights: Vec<f64>) -> Self {
        assert_eq!(particles.len(), weights.len());
        let mut b = Self { particles, weights, history_length: 0, degenerate_updates: 0 };
        b.normalize();
        b
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.particles.iter().zip(self.weights.iter().copied())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        if sq > 0.0 {
            1.0 / sq
        } else {
            0.0
        }
    }

    fn normalize(&mut self) {
        let total = self.weight_sum();
        if total > 0.0 && total.is_finite() {
            for w in &mut self.weights {
                *w /= total;
            }
        } else {
            let w = 1.0 / self.len() as f64;
            self.weights.iter_mut().for_each(|x| *x = w);
        }
    }

    /// Draws one particle index proportionally to weight.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.weight_sum();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }

    /// Pushes every particle through the transition model; weights unchanged.
    pub fn predict<M>(&self, model: &M, a: M::Action, rng: &mut ChaCha8Rng) -> Self
    where
        M: FilterModel<State = S>,
    {
        Self {
            particles: self.particles.iter().map(|s| model.propagate(s, a, rng)).collect(),
            weights: self.weights.clone(),
            history_length: self.history_length,
            degenerate_updates: self.degenerate_updates,
        }
    }

    /// Propagates and reweights by the observation likelihood, without
    /// resampling. Weights come back normalized.
    pub fn reweight<M>(&self, model: &M, a: M::Action, o: &M::Obs, rng: &mut ChaCha8Rng) -> (Self, UpdateOutcome)
    where
        M: FilterModel<State = S>,
    {
        let mut next = self.predict(model, a, rng);
        next.history_length += 1;
        let prior = next.weights.clone();
        let mut outcome =
            UpdateOutcome { effective_sample_size: 0.0, resampled: false, reinvigorated: false, degenerate: false };

        let mut weighted: Vec<f64> =
            next.particles.iter().zip(prior.iter()).map(|(s, w)| w * model.likelihood(s, o)).collect();
        if !(weighted.iter().sum::<f64>() > 0.0) {
            outcome.reinvigorated = true;
            let fresh: Vec<S> = next.particles.iter().map(|s| model.reinvigorate(s, o, rng)).collect();
            let fresh_w: Vec<f64> = fresh.iter().zip(prior.iter()).map(|(s, w)| w * model.likelihood(s, o)).collect();
            if fresh_w.iter().sum::<f64>() > 0.0 {
                next.particles = fresh;
                weighted = fresh_w;
            } else {
                log::warn!("belief update degenerate: every particle has zero likelihood");
                outcome.degenerate = true;
                next.degenerate_updates += 1;
                weighted = prior;
            }
        }
        next.weights = weighted;
        next.normalize();
        outcome.effective_sample_size = next.effective_sample_size();
        (next, outcome)
    }

    /// Full Bayes-filter step: propagate, reweight, and resample when the
    /// effective sample size drops below half the particle count.
    pub fn update<M>(&self, model: &M, a: M::Action, o: &M::Obs, rng: &mut ChaCha8Rng) -> (Self, UpdateOutcome)
    where
        M: FilterModel<State = S>,
    {
        let (mut next, mut outcome) = self.reweight(model, a, o, rng);
        if next.effective_sample_size() < next.len() as f64 / 2.0 {
            next = next.resample(next.len(), rng);
            outcome.resampled = true;
        }
        (next, outcome)
    }

    /// Systematic resampling to `n` equally weighted particles.
    pub fn resample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Self {
        let idx = systematic_resample(&self.weights, n, rng);
        Self {
            particles: idx.into_iter().map(|i| self.particles[i].clone()).collect(),
            weights: vec![1.0 / n as f64; n],
            history_length: self.history_length,
            degenerate_updates: self.degenerate_updates,
        }
    }
}

/// Indices of a systematic resample of `weights` (need not be normalized).
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.gen::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u >= acc && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}

//! Reward critics.
//!
//! Distributional critics map `(state, action)` to a distribution over the
//! `n_o` labels of their discretization and are trained with cross-entropy on
//! observed (perturbed) labels. The corrected reward shifts the observed one
//! by whole intervals towards the predicted mode:
//! `r̂ = r̃ + width * (argmax - label(r̃))`.
//!
//! Baselines: [`regression`] fits the conditional mean of observed rewards,
//! [`surrogate`] replaces observed labels by entries of `C⁻¹ · R`.

pub mod network;
pub mod regression;
pub mod surrogate;
pub mod tabular;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::LOG_FLOOR;
use crate::perturb::Discretization;

pub use network::{NetworkConfig, NetworkCritic};
pub use regression::RegressionCritic;
pub use surrogate::{surrogate_rewards, SurrogateTable};
pub use tabular::TabularCritic;

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// What a critic is allowed to see: no true reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: Action,
    pub r_tilde: f64,
}

impl Sample {
    pub fn discrete(state: Vec<f64>, action: usize, r_tilde: f64) -> Self {
        Self {
            state,
            action: Action::Discrete(action),
            r_tilde,
        }
    }

    /// Grid-rounded key for tabular critics.
    pub fn key(&self, grid: f64) -> SampleKey {
        let q = |x: f64| (x / grid).round() as i64;
        let mut k: Vec<i64> = self.state.iter().map(|&x| q(x)).collect();
        match &self.action {
            Action::Discrete(a) => {
                k.push(i64::MIN);
                k.push(*a as i64);
            }
            Action::Continuous(v) => {
                k.push(i64::MAX);
                k.extend(v.iter().map(|&x| q(x)));
            }
        }
        SampleKey(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleKey(Vec<i64>);

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous(usize),
}

/// Turns a sample into a network input: the state (optionally rescaled to
/// `[-1, 1]` per coordinate) followed by a one-hot or raw action.
#[derive(Debug, Clone, PartialEq)]
pub struct InputEncoder {
    pub state_dim: usize,
    pub state_bounds: Option<Vec<(f64, f64)>>,
    pub actions: ActionSpace,
}

impl InputEncoder {
    pub fn new(state_dim: usize, actions: ActionSpace) -> Self {
        Self {
            state_dim,
            state_bounds: None,
            actions,
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.state_bounds = Some(bounds);
        self
    }

    pub fn width(&self) -> usize {
        self.state_dim
            + match self.actions {
                ActionSpace::Discrete(n) | ActionSpace::Continuous(n) => n,
            }
    }

    pub fn encode(&self, sample: &Sample) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.width());
        match &self.state_bounds {
            Some(b) => x.extend(
                sample
                    .state
                    .iter()
                    .zip(b)
                    .map(|(&v, &(lo, hi))| 2.0 * (v - lo) / (hi - lo) - 1.0),
            ),
            None => x.extend_from_slice(&sample.state),
        }
        match (&self.actions, &sample.action) {
            (ActionSpace::Discrete(n), Action::Discrete(a)) => {
                x.extend((0..*n).map(|i| if i == *a { 1.0 } else { 0.0 }))
            }
            (ActionSpace::Continuous(_), Action::Continuous(v)) => x.extend_from_slice(v),
            _ => panic!("action kind does not match the encoder's action space"),
        }
        x
    }
}

/// A predicted label distribution; `unseen` is set when a tabular critic has
/// no data for the key and fell back to uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub unseen: bool,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub reward: f64,
    pub observed_label: usize,
    pub predicted_label: usize,
    pub clamped: bool,
}

pub fn correct_reward_detailed(disc: &Discretization, r_tilde: f64, dist: &[f64]) -> Correction {
    assert_eq!(dist.len(), disc.n(), "distribution length must equal n_o");
    let observed = disc.label(r_tilde);
    let predicted = argmax(dist);
    Correction {
        reward: r_tilde + disc.width() * (predicted as f64 - observed.index as f64),
        observed_label: observed.index,
        predicted_label: predicted,
        clamped: observed.clamped,
    }
}

/// `r̃ + width * (argmax(dist) - label(r̃))`.
pub fn correct_reward(disc: &Discretization, r_tilde: f64, dist: &[f64]) -> f64 {
    correct_reward_detailed(disc, r_tilde, dist).reward
}

/// A distributional critic of either kind.
#[derive(Debug, Clone)]
pub enum DistCritic {
    Tabular(TabularCritic),
    Network(NetworkCritic),
}

impl DistCritic {
    pub fn discretization(&self) -> &Discretization {
        match self {
            DistCritic::Tabular(c) => c.discretization(),
            DistCritic::Network(c) => c.discretization(),
        }
    }

    /// Swap in a discretization with the same interval count; learned state is kept.
    pub fn set_discretization(&mut self, disc: Discretization) -> Result<()> {
        if disc.n() != self.discretization().n() {
            return Err(Error::Config(format!(
                "cannot change interval count from {} to {}",
                self.discretization().n(),
                disc.n()
            )));
        }
        match self {
            DistCritic::Tabular(c) => c.disc = disc,
            DistCritic::Network(c) => c.disc = disc,
        }
        Ok(())
    }

    pub fn labels(&self, samples: &[Sample]) -> Vec<usize> {
        let d = self.discretization();
        samples.iter().map(|s| d.label(s.r_tilde).index).collect()
    }

    /// Train on `samples` with their labels; returns the post-training mean
    /// cross-entropy on the same samples.
    pub fn fit<R: Rng + ?Sized>(&mut self, samples: &[Sample], labels: &[usize], rng: &mut R) -> Result<f64> {
        match self {
            DistCritic::Tabular(c) => {
                c.update(samples, labels);
                Ok(mean_cross_entropy(&*c, samples, labels))
            }
            DistCritic::Network(c) => c.train_epoch(samples, labels, rng),
        }
    }

    pub fn predict(&self, sample: &Sample) -> Prediction {
        match self {
            DistCritic::Tabular(c) => c.predict(sample),
            DistCritic::Network(c) => Prediction {
                probs: c.predict_distribution(sample),
                unseen: false,
            },
        }
    }

    pub fn correct(&self, sample: &Sample) -> Correction {
        correct_reward_detailed(self.discretization(), sample.r_tilde, &self.predict(sample).probs)
    }
}

/// Anything that yields label distributions.
pub trait PredictDistribution {
    fn distribution(&self, sample: &Sample) -> Vec<f64>;
}

impl PredictDistribution for TabularCritic {
    fn distribution(&self, sample: &Sample) -> Vec<f64> {
        self.predict(sample).probs
    }
}

impl PredictDistribution for NetworkCritic {
    fn distribution(&self, sample: &Sample) -> Vec<f64> {
        self.predict_distribution(sample)
    }
}

impl PredictDistribution for DistCritic {
    fn distribution(&self, sample: &Sample) -> Vec<f64> {
        self.predict(sample).probs
    }
}

/// Mean of `-ln p(label)` with probabilities floored at 1e-12.
pub fn mean_cross_entropy<C: PredictDistribution + ?Sized>(critic: &C, samples: &[Sample], labels: &[usize]) -> f64 {
    assert_eq!(samples.len(), labels.len());
    assert!(!samples.is_empty(), "cross-entropy of an empty batch");
    let total: f64 = samples
        .iter()
        .zip(labels)
        .map(|(s, &y)| -critic.distribution(s)[y].max(LOG_FLOOR).ln())
        .sum();
    total / samples.len() as f64
}

//! Critics with unknown discretization.
//!
//! An ensemble holds one distributional critic per candidate interval count.
//! After each epoch of training the ensemble compares the post-training
//! cross-entropies `H_n` of consecutive candidates, casts votes, and keeps a
//! discounted tally; the candidate with the largest tally corrects rewards.
//! When the reward range is unknown it is tracked as the 5%/95% quantiles of
//! every observed reward.

pub mod sketch;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::TrainingScope;
use crate::critic::{Correction, DistCritic, InputEncoder, NetworkConfig, NetworkCritic, Sample, TabularCritic};
use crate::error::{Error, Result};
use crate::perturb::Discretization;

pub use sketch::{exact_quantile, PercentileSketch};

pub const DEFAULT_CANDIDATES: [usize; 10] = [2, 4, 6, 8, 10, 12, 16, 20, 24, 32];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VotingRule {
    /// For consecutive candidates `n'' < n' < n`: vote for `n'` whenever
    /// `dH_n > dH_{n'}`.
    Literal,
    /// Vote for the predecessor of the smallest candidate whose `dH` drops
    /// below `tau * max(dH)`.
    Knee { tau: f64 },
}

#[derive(Debug, Clone)]
pub enum RangeSource {
    Known {
        r_min: f64,
        r_max: f64,
    },
    Streaming {
        sketch: PercentileSketch,
        lower_q: f64,
        upper_q: f64,
    },
}

impl RangeSource {
    pub fn streaming(alpha: f64) -> Result<Self> {
        Ok(RangeSource::Streaming {
            sketch: PercentileSketch::new(alpha)?,
            lower_q: 0.05,
            upper_q: 0.95,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub candidates: Vec<usize>,
    pub discount: f64,
    /// Last epoch (1-based) that still votes; `None` never freezes.
    pub vote_deadline: Option<usize>,
    pub rule: VotingRule,
    /// Train network critics on separate threads.
    pub parallel: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            candidates: DEFAULT_CANDIDATES.to_vec(),
            discount: 0.9,
            vote_deadline: None,
            rule: VotingRule::Literal,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteRecord {
    pub epoch: usize,
    pub h_values: Vec<(usize, f64)>,
    /// Defined for every candidate but the smallest.
    pub dh_values: Vec<(usize, f64)>,
    pub voted_for: Vec<usize>,
    pub tally: Vec<(usize, f64)>,
    pub winner: usize,
    pub range: (f64, f64),
}

impl VoteRecord {
    pub fn h(&self, n: usize) -> Option<f64> {
        self.h_values.iter().find(|(k, _)| *k == n).map(|p| p.1)
    }

    pub fn dh(&self, n: usize) -> Option<f64> {
        self.dh_values.iter().find(|(k, _)| *k == n).map(|p| p.1)
    }
}

/// Votes cast for one epoch given `H_n` in candidate order.
pub fn cast_votes(candidates: &[usize], h: &[f64], rule: VotingRule) -> Vec<usize> {
    assert_eq!(candidates.len(), h.len());
    let dh: Vec<f64> = h.windows(2).map(|w| w[1] - w[0]).collect();
    // dh[i - 1] belongs to candidates[i]
    match rule {
        VotingRule::Literal => (1..dh.len())
            .filter(|&i| dh[i] > dh[i - 1])
            .map(|i| candidates[i])
            .collect(),
        VotingRule::Knee { tau } => {
            let max = dh.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(max > 0.0) {
                return Vec::new();
            }
            dh.iter()
                .position(|&d| d < tau * max)
                .map(|i| vec![candidates[i]])
                .unwrap_or_default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticEnsemble {
    config: EnsembleConfig,
    critics: Vec<DistCritic>,
    tally: Vec<f64>,
    epoch: usize,
    range: RangeSource,
    current_range: Option<(f64, f64)>,
}

fn validate_candidates(c: &[usize]) -> Result<()> {
    if c.is_empty() || c[0] == 0 || c.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "candidates must be distinct positive integers in increasing order, got {c:?}"
        )));
    }
    Ok(())
}

fn initial_range(range: &RangeSource) -> (f64, f64) {
    match range {
        RangeSource::Known { r_min, r_max } => (*r_min, *r_max),
        // placeholder until the first epoch's quantiles arrive
        RangeSource::Streaming { .. } => (0.0, 1.0),
    }
}

impl CriticEnsemble {
    pub fn new(config: EnsembleConfig, range: RangeSource, critics: Vec<DistCritic>) -> Result<Self> {
        validate_candidates(&config.candidates)?;
        if !(0.0..=1.0).contains(&config.discount) {
            return Err(Error::Config(format!(
                "vote discount {} outside [0, 1]",
                config.discount
            )));
        }
        if critics.len() != config.candidates.len()
            || critics
                .iter()
                .zip(&config.candidates)
                .any(|(c, &n)| c.discretization().n() != n)
        {
            return Err(Error::Config("one critic per candidate, in order".into()));
        }
        let n = critics.len();
        Ok(Self {
            config,
            critics,
            tally: vec![0.0; n],
            epoch: 0,
            current_range: match range {
                RangeSource::Known { r_min, r_max } => Some((r_min, r_max)),
                _ => None,
            },
            range,
        })
    }

    pub fn tabular(config: EnsembleConfig, range: RangeSource) -> Result<Self> {
        validate_candidates(&config.candidates)?;
        let (lo, hi) = initial_range(&range);
        let critics = config
            .candidates
            .iter()
            .map(|&n| Ok(DistCritic::Tabular(TabularCritic::new(Discretization::new(lo, hi, n)?))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(config, range, critics)
    }

    pub fn network<R: Rng + ?Sized>(
        config: EnsembleConfig,
        range: RangeSource,
        encoder: InputEncoder,
        net: NetworkConfig,
        rng: &mut R,
    ) -> Result<Self> {
        validate_candidates(&config.candidates)?;
        let (lo, hi) = initial_range(&range);
        let critics = config
            .candidates
            .iter()
            .map(|&n| {
                Ok(DistCritic::Network(NetworkCritic::new(
                    Discretization::new(lo, hi, n)?,
                    encoder.clone(),
                    net.clone(),
                    rng,
                )?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(config, range, critics)
    }

    pub fn candidates(&self) -> &[usize] {
        &self.config.candidates
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn tally(&self) -> &[f64] {
        &self.tally
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn critic(&self, n: usize) -> Option<&DistCritic> {
        self.config
            .candidates
            .iter()
            .position(|&c| c == n)
            .map(|i| &self.critics[i])
    }

    /// `(r_emin, r_emax)` used by the latest epoch.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.current_range
    }

    fn voting_open(&self) -> bool {
        self.config.vote_deadline.is_none_or(|d| self.epoch <= d)
    }

    fn refresh_range(&mut self, samples: &[Sample]) -> Result<(f64, f64)> {
        match &mut self.range {
            RangeSource::Known { r_min, r_max } => Ok((*r_min, *r_max)),
            RangeSource::Streaming {
                sketch,
                lower_q,
                upper_q,
            } => {
                sketch.extend(samples.iter().map(|s| s.r_tilde));
                let lo = sketch.quantile(*lower_q)?;
                let mut hi = sketch.quantile(*upper_q)?;
                if hi <= lo {
                    hi = lo + (lo.abs() * 1e-6).max(1e-9);
                }
                Ok((lo, hi))
            }
        }
    }

    /// Train every critic on the epoch's samples, then vote.
    pub fn train_epoch<R: Rng + ?Sized>(&mut self, samples: &[Sample], rng: &mut R) -> Result<VoteRecord> {
        if samples.is_empty() {
            return Err(Error::Usage("ensemble epoch with no samples".into()));
        }
        let _scope = TrainingScope::enter();
        let (lo, hi) = self.refresh_range(samples)?;
        self.current_range = Some((lo, hi));
        for c in &mut self.critics {
            let n = c.discretization().n();
            c.set_discretization(Discretization::new(lo, hi, n)?)?;
        }
        let seeds: Vec<u64> = self.critics.iter().map(|_| rng.random()).collect();
        let fit = |c: &mut DistCritic, seed: u64| -> Result<f64> {
            let labels = c.labels(samples);
            c.fit(samples, &labels, &mut ChaCha8Rng::seed_from_u64(seed))
        };
        let h: Vec<f64> = if self.config.parallel {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .critics
                    .iter_mut()
                    .zip(&seeds)
                    .map(|(c, &seed)| scope.spawn(move || fit(c, seed)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("critic training thread panicked"))
                    .collect::<Result<Vec<_>>>()
            })?
        } else {
            self.critics
                .iter_mut()
                .zip(&seeds)
                .map(|(c, &seed)| fit(c, seed))
                .collect::<Result<Vec<_>>>()?
        };

        self.epoch += 1;
        let voted_for = if self.voting_open() {
            let votes = cast_votes(&self.config.candidates, &h, self.config.rule);
            self.tally.iter_mut().for_each(|t| *t *= self.config.discount);
            for v in &votes {
                let i = self.config.candidates.iter().position(|c| c == v).unwrap();
                self.tally[i] += 1.0;
            }
            votes
        } else {
            Vec::new()
        };

        let cands = &self.config.candidates;
        Ok(VoteRecord {
            epoch: self.epoch,
            h_values: cands.iter().copied().zip(h.iter().copied()).collect(),
            dh_values: cands[1..]
                .iter()
                .copied()
                .zip(h.windows(2).map(|w| w[1] - w[0]))
                .collect(),
            voted_for,
            tally: cands.iter().copied().zip(self.tally.iter().copied()).collect(),
            winner: self.select_winner(),
            range: (lo, hi),
        })
    }

    /// Candidate with the largest tally; ties (including an all-zero tally)
    /// go to the smaller candidate.
    pub fn select_winner(&self) -> usize {
        select_winner(&self.config.candidates, &self.tally)
    }

    pub fn winner_critic(&self) -> &DistCritic {
        let w = self.select_winner();
        self.critic(w).expect("winner is a candidate")
    }

    pub fn gdrc_correct(&self, sample: &Sample) -> Correction {
        self.winner_critic().correct(sample)
    }
}

pub fn select_winner(candidates: &[usize], tally: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..candidates.len() {
        if tally[i] > tally[best] {
            best = i;
        }
    }
    candidates[best]
}

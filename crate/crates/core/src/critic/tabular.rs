//! Per-key label histograms: the empirical optimum of the cross-entropy
//! objective when every `(state, action)` pair repeats exactly.

use std::collections::HashMap;

use super::{Prediction, Sample, SampleKey};
use crate::perturb::Discretization;

pub const DEFAULT_KEY_GRID: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TabularCritic {
    pub(crate) disc: Discretization,
    grid: f64,
    table: HashMap<SampleKey, Vec<u64>>,
}

impl TabularCritic {
    pub fn new(disc: Discretization) -> Self {
        Self::with_grid(disc, DEFAULT_KEY_GRID)
    }

    pub fn with_grid(disc: Discretization, grid: f64) -> Self {
        assert!(grid > 0.0, "key grid must be positive");
        Self {
            disc,
            grid,
            table: HashMap::new(),
        }
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn keys(&self) -> usize {
        self.table.len()
    }

    pub fn counts(&self, sample: &Sample) -> Option<&[u64]> {
        self.table.get(&sample.key(self.grid)).map(Vec::as_slice)
    }

    /// Add one count per sample at its label.
    pub fn update(&mut self, samples: &[Sample], labels: &[usize]) {
        assert_eq!(samples.len(), labels.len());
        let n = self.disc.n();
        for (s, &y) in samples.iter().zip(labels) {
            assert!(y < n, "label {y} out of range for {n} outputs");
            self.table.entry(s.key(self.grid)).or_insert_with(|| vec![0; n])[y] += 1;
        }
    }

    /// Label each sample under the critic's own discretization, then update.
    pub fn update_from_rewards(&mut self, samples: &[Sample]) {
        let labels: Vec<usize> = samples.iter().map(|s| self.disc.label(s.r_tilde).index).collect();
        self.update(samples, &labels);
    }

    /// Normalised counts, or uniform with `unseen` set.
    pub fn predict(&self, sample: &Sample) -> Prediction {
        let n = self.disc.n();
        match self.table.get(&sample.key(self.grid)) {
            Some(c) => {
                let total: u64 = c.iter().sum();
                Prediction {
                    probs: c.iter().map(|&k| k as f64 / total as f64).collect(),
                    unseen: false,
                }
            }
            None => Prediction {
                probs: vec![1.0 / n as f64; n],
                unseen: true,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::{correct_reward, mean_cross_entropy};
    use crate::perturb::{gcm_perturb, ConfusionMatrix};
    use crate::rng::{RunRng, Stream};

    fn disc3() -> Discretization {
        Discretization::new(0.0, 3.0, 3).unwrap()
    }

    fn key(i: usize) -> Sample {
        Sample::discrete(vec![i as f64], 0, 0.0)
    }

    #[test]
    fn empty_update_is_noop() {
        let mut c = TabularCritic::new(disc3());
        c.update(&[], &[]);
        assert_eq!(c.keys(), 0);
        let p = c.predict(&key(0));
        assert!(p.unseen);
        assert_eq!(p.probs, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn normalisation_examples() {
        let mut c = TabularCritic::new(disc3());
        let s = vec![key(0); 10];
        c.update(&s, &[1; 10]);
        assert_eq!(c.predict(&key(0)).probs, vec![0.0, 1.0, 0.0]);

        let mut c = TabularCritic::new(disc3());
        let labels = [0, 0, 1, 1, 1, 1, 1, 2, 2, 2];
        c.update(&vec![key(1); 10], &labels);
        let p = c.predict(&key(1)).probs;
        for (a, b) in p.iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_at_two() {
        let d = Discretization::new(0.0, 4.0, 4).unwrap();
        let mut c = TabularCritic::new(d);
        c.update(&vec![key(3); 10], &[2; 10]);
        assert_eq!(c.predict(&key(3)).probs, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn converges_to_channel_row() {
        let d = disc3();
        let c =
            ConfusionMatrix::from_rows(vec![vec![0.8, 0.1, 0.1], vec![0.2, 0.5, 0.3], vec![0.1, 0.1, 0.8]]).unwrap();
        let mut rng = RunRng::new(2).stream(Stream::Noise);
        let samples: Vec<Sample> = (0..100_000)
            .map(|_| {
                let p = gcm_perturb(&d, &c, 1.4, &mut rng).unwrap();
                Sample::discrete(vec![7.0], 1, p.r_tilde)
            })
            .collect();
        let mut critic = TabularCritic::new(d);
        critic.update_from_rewards(&samples);
        let p = critic.predict(&samples[0]).probs;
        for (a, b) in p.iter().zip(c.row(1)) {
            assert!((a - b).abs() < 0.01);
        }
        // exact recovery via the mode
        for s in samples.iter().take(100) {
            assert!((correct_reward(&d, s.r_tilde, &p) - 1.4).abs() < 1e-12);
        }
        // H at the optimum is the entropy of the empirical row
        let labels: Vec<usize> = samples.iter().map(|s| d.label(s.r_tilde).index).collect();
        let h = mean_cross_entropy(&critic, &samples, &labels);
        let entropy: f64 = c.row(1).iter().map(|q| -q * q.ln()).sum();
        assert!((h - entropy).abs() < 0.01, "{h} vs {entropy}");
    }
}

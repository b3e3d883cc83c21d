//! Relative-error quantile sketch with logarithmic buckets.
//!
//! Magnitudes are mapped to bucket `ceil(log_γ |x|)` with
//! `γ = (1 + α) / (1 - α)`; every value in a bucket is within relative error
//! `α` of the bucket's representative `2γ^i / (γ + 1)`. Positive and negative
//! values get separate stores and exact zeros a counter of their own, so a
//! rank query always lands in the bucket that holds the exact order
//! statistic.

use crate::error::{Error, Result};

/// Dense bucket counts over a contiguous index window that grows on demand.
#[derive(Debug, Clone, Default)]
struct Store {
    offset: i32,
    counts: Vec<u64>,
    total: u64,
}

impl Store {
    fn add(&mut self, index: i32) {
        if self.counts.is_empty() {
            self.offset = index;
            self.counts.push(0);
        } else if index < self.offset {
            let grow = (self.offset - index) as usize;
            let mut v = vec![0; grow];
            v.extend_from_slice(&self.counts);
            self.counts = v;
            self.offset = index;
        } else if index >= self.offset + self.counts.len() as i32 {
            self.counts.resize((index - self.offset) as usize + 1, 0);
        }
        self.counts[(index - self.offset) as usize] += 1;
        self.total += 1;
    }

    /// Bucket index holding the `rank`-th (0-based) item in ascending index order.
    fn index_at_rank(&self, rank: u64) -> i32 {
        let mut seen = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            seen += c;
            if seen > rank {
                return self.offset + i as i32;
            }
        }
        self.offset + self.counts.len() as i32 - 1
    }

    /// Same, counting from the highest index down.
    fn index_at_rank_desc(&self, rank: u64) -> i32 {
        let mut seen = 0;
        for (i, &c) in self.counts.iter().enumerate().rev() {
            seen += c;
            if seen > rank {
                return self.offset + i as i32;
            }
        }
        self.offset
    }
}

#[derive(Debug, Clone)]
pub struct PercentileSketch {
    alpha: f64,
    gamma_ln: f64,
    positive: Store,
    negative: Store,
    zeros: u64,
    count: u64,
}

impl PercentileSketch {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("sketch accuracy {alpha} outside (0, 1)")));
        }
        let gamma = (1.0 + alpha) / (1.0 - alpha);
        Ok(Self {
            alpha,
            gamma_ln: gamma.ln(),
            positive: Store::default(),
            negative: Store::default(),
            zeros: 0,
            count: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn index(&self, magnitude: f64) -> i32 {
        (magnitude.ln() / self.gamma_ln).ceil() as i32
    }

    fn value(&self, index: i32) -> f64 {
        let gamma = self.gamma_ln.exp();
        2.0 * (self.gamma_ln * index as f64).exp() / (gamma + 1.0)
    }

    /// Non-finite values are ignored.
    pub fn insert(&mut self, x: f64) {
        if !x.is_finite() {
            return;
        }
        if x > 0.0 {
            let i = self.index(x);
            self.positive.add(i);
        } else if x < 0.0 {
            let i = self.index(-x);
            self.negative.add(i);
        } else {
            self.zeros += 1;
        }
        self.count += 1;
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, xs: I) {
        xs.into_iter().for_each(|x| self.insert(x));
    }

    /// Estimate of the order statistic at 0-based rank `floor(q * (count - 1))`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyStream);
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Usage(format!("quantile {q} outside [0, 1]")));
        }
        let rank = (q * (self.count - 1) as f64).floor() as u64;
        let neg = self.negative.total;
        if rank < neg {
            // most negative first: highest magnitude index first
            return Ok(-self.value(self.negative.index_at_rank_desc(rank)));
        }
        if rank < neg + self.zeros {
            return Ok(0.0);
        }
        Ok(self.value(self.positive.index_at_rank(rank - neg - self.zeros)))
    }
}

/// Exact order statistic with the same rank convention, for checking.
pub fn exact_quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[(q * (sorted.len() - 1) as f64).floor() as usize]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RunRng, Stream};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn check(xs: &[f64], alpha: f64, qs: &[f64]) {
        let mut sk = PercentileSketch::new(alpha).unwrap();
        sk.extend(xs.iter().copied());
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &q in qs {
            let exact = exact_quantile(&sorted, q);
            let est = sk.quantile(q).unwrap();
            assert!(
                (est - exact).abs() <= alpha * exact.abs() * (1.0 + 1e-12),
                "q {q}: est {est} exact {exact}"
            );
        }
    }

    #[test]
    fn singleton() {
        let mut sk = PercentileSketch::new(0.01).unwrap();
        sk.insert(7.0);
        for q in [0.0, 0.05, 0.5, 1.0] {
            assert!((sk.quantile(q).unwrap() - 7.0).abs() <= 0.07);
        }
    }

    #[test]
    fn empty_and_bad_queries() {
        let sk = PercentileSketch::new(0.01).unwrap();
        assert_eq!(sk.quantile(0.5), Err(Error::EmptyStream));
        let mut sk = sk;
        sk.insert(1.0);
        assert!(sk.quantile(1.5).is_err());
        assert!(PercentileSketch::new(0.0).is_err());
    }

    #[test]
    fn one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        let mut sk = PercentileSketch::new(0.01).unwrap();
        sk.extend(xs.iter().copied());
        let v = sk.quantile(0.05).unwrap();
        assert!((5.0 * 0.99..=5.0 * 1.01).contains(&v), "{v}");
        check(&xs, 0.01, &[0.0, 0.05, 0.5, 0.95, 1.0]);
    }

    #[test]
    fn gaussian_with_outliers() {
        let mut rng = RunRng::new(1).stream(Stream::Data);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut xs: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        xs.extend(std::iter::repeat_n(1e6, 100));
        check(&xs, 0.01, &[0.05, 0.95]);
        let mut sk = PercentileSketch::new(0.01).unwrap();
        sk.extend(xs.iter().copied());
        assert!(sk.quantile(0.95).unwrap() < 10.0);
    }

    #[test]
    fn mixed_signs_and_zeros() {
        let xs = [-3.0, -1.0, 0.0, 0.0, 2.0, 5.0, -0.5];
        check(&xs, 0.02, &[0.0, 0.2, 0.4, 0.5, 0.7, 1.0]);
    }

    proptest! {
        #[test]
        fn accuracy_contract(
            xs in proptest::collection::vec(-1e6f64..1e6, 1..400),
            q in 0.0f64..=1.0,
        ) {
            let mut sk = PercentileSketch::new(0.01).unwrap();
            sk.extend(xs.iter().copied());
            let mut sorted = xs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let exact = exact_quantile(&sorted, q);
            let est = sk.quantile(q).unwrap();
            prop_assert!((est - exact).abs() <= 0.01 * exact.abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn heavy_tail() {
        let mut rng = RunRng::new(2).stream(Stream::Data);
        // Pareto(alpha = 1) via inverse CDF
        let xs: Vec<f64> = (0..50_000).map(|_| 1.0 / (1.0 - rng.random::<f64>())).collect();
        check(&xs, 0.01, &[0.05, 0.5, 0.95, 0.999]);
    }
}

//! Fixtures shared by the benches in `benches/`.

use drc_core::critic::Sample;
use drc_core::perturb::{gcm_perturb, ConfusionMatrix, Discretization};
use drc_core::rng::{RunRng, Stream};

/// `keys * per_key` GCM-perturbed samples on `[0, 1)`, one true reward per key.
pub fn gcm_samples(n_r: usize, omega: f64, keys: usize, per_key: usize, seed: u64) -> Vec<Sample> {
    let d = Discretization::new(0.0, 1.0, n_r).expect("n_r > 0");
    let c = ConfusionMatrix::uniform(n_r, omega).expect("omega in [0, 1]");
    let mut rng = RunRng::new(seed).stream(Stream::Noise);
    let mut out = Vec::with_capacity(keys * per_key);
    for k in 0..keys {
        let r = (k as f64 + 0.5) / keys as f64;
        for _ in 0..per_key {
            let r_tilde = gcm_perturb(&d, &c, r, &mut rng).expect("r in range").r_tilde;
            out.push(Sample::discrete(vec![k as f64], 0, r_tilde));
        }
    }
    out
}

/// Samples with a continuous two-dimensional state in `[0, 1)^2` and four actions.
pub fn bandit_samples(n: usize, seed: u64) -> Vec<Sample> {
    use drc_core::envs::{ContinuousBandit, ContinuousBanditSpec};
    use drc_core::perturb::NoiseModel;
    let b = ContinuousBandit::new(ContinuousBanditSpec::default_cosine(), NoiseModel::Clean).expect("default spec");
    let rng = RunRng::new(seed);
    let (mut ctx, mut noise) = (rng.stream(Stream::Dynamics), rng.stream(Stream::Noise));
    (0..n)
        .map(|i| {
            let s = b.context(&mut ctx);
            b.sample(&b.pull(&s, i % 4, &mut noise).expect("valid arm"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_sizes() {
        assert_eq!(gcm_samples(6, 0.5, 8, 10, 0).len(), 80);
        assert_eq!(bandit_samples(12, 0)[5].state.len(), 2);
    }
}

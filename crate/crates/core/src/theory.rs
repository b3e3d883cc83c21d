//! Exact, sampling-free versions of the quantities the critics estimate.
//!
//! For a true reward `r` in interval `y`, a GCM channel produces atoms at
//! `r + (j - y) * width` with probability `C(y, j)`. Bucketing those atoms by a
//! critic discretization with `n_o` intervals gives the label distribution
//! `p_{r→o}` a perfectly trained critic would output; its entropy is the
//! minimum achievable cross-entropy, and its mode gives the critic's
//! correction, from which the expected reconstruction error follows.

use rand::Rng;

use crate::critic::argmax;
use crate::error::{Error, Result};
use crate::perturb::{ConfusionMatrix, Discretization, NoiseModel};

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDistribution {
    /// `(reward value, probability)`; values distinct.
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicDistribution {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_o: usize,
    pub value: f64,
}

/// True reward `r` pushed through the channel, one atom per target label.
/// Zero-probability labels are dropped.
pub fn perturbed_atoms(disc_r: &Discretization, matrix: &ConfusionMatrix, r: f64) -> Result<AtomicDistribution> {
    if matrix.n() != disc_r.n() {
        return Err(Error::Config("channel and discretization sizes differ".into()));
    }
    if !disc_r.contains(r) {
        return Err(Error::OutOfRange {
            reward: r,
            r_min: disc_r.r_min(),
            r_max: disc_r.r_max(),
        });
    }
    let y = disc_r.label(r).index;
    let w = disc_r.width();
    let atoms = matrix
        .row(y)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(j, &p)| (r + (j as f64 - y as f64) * w, p))
        .collect();
    Ok(AtomicDistribution { atoms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucketed {
    pub probs: Vec<f64>,
    /// Some atom fell outside the discretization range and was clamped.
    pub clamped: bool,
}

/// Sum atom probabilities per label of `disc_o`.
pub fn discretize_atoms(atoms: &AtomicDistribution, disc_o: &Discretization) -> Bucketed {
    let mut probs = vec![0.0; disc_o.n()];
    let mut clamped = false;
    for &(v, p) in &atoms.atoms {
        let l = disc_o.label(v);
        clamped |= l.clamped;
        probs[l.index] += p;
    }
    Bucketed { probs, clamped }
}

/// Shannon entropy in nats; zero entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// `min over p_o of H(p_{r→o}, p_o)`, which is `H(p_{r→o})`, for each
/// candidate interval count over the same reward range.
pub fn min_cross_entropy_curve(
    disc_r: &Discretization,
    matrix: &ConfusionMatrix,
    r: f64,
    candidates: &[usize],
) -> Result<Vec<CurvePoint>> {
    let atoms = perturbed_atoms(disc_r, matrix, r)?;
    candidates
        .iter()
        .map(|&n_o| {
            let d = Discretization::new(disc_r.r_min(), disc_r.r_max(), n_o)?;
            Ok(CurvePoint {
                n_o,
                value: entropy(&discretize_atoms(&atoms, &d).probs),
            })
        })
        .collect()
}

/// Expected `|r̂ - r|` for one true reward when the critic outputs
/// `p_{r→o}` exactly. Returns the error and whether the mode was tied.
pub fn expected_abs_error(atoms: &AtomicDistribution, r: f64, disc_o: &Discretization) -> (f64, bool) {
    let p = discretize_atoms(atoms, disc_o).probs;
    let mode = argmax(&p);
    let tied = p.iter().enumerate().any(|(k, &v)| k != mode && v == p[mode]);
    let w = disc_o.width();
    let err = atoms
        .atoms
        .iter()
        .map(|&(v, q)| {
            let r_hat = v + w * (mode as f64 - disc_o.label(v).index as f64);
            q * (r_hat - r).abs()
        })
        .sum();
    (err, tied)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionCurve {
    pub points: Vec<CurvePoint>,
    /// Number of true rewards whose discretized distribution had a tied
    /// mode, per candidate (same order as `points`).
    pub ties: Vec<usize>,
}

/// Mean expected reconstruction error over `true_rewards` for each candidate.
pub fn reconstruction_error_curve(
    disc_r: &Discretization,
    matrix: &ConfusionMatrix,
    true_rewards: &[f64],
    candidates: &[usize],
) -> Result<ReconstructionCurve> {
    if true_rewards.is_empty() {
        return Err(Error::Usage("no true rewards given".into()));
    }
    let atoms: Vec<AtomicDistribution> = true_rewards
        .iter()
        .map(|&r| perturbed_atoms(disc_r, matrix, r))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(candidates.len());
    let mut ties = Vec::with_capacity(candidates.len());
    for &n_o in candidates {
        let d = Discretization::new(disc_r.r_min(), disc_r.r_max(), n_o)?;
        let mut total = 0.0;
        let mut tied = 0;
        for (a, &r) in atoms.iter().zip(true_rewards) {
            let (e, t) = expected_abs_error(a, r, &d);
            total += e;
            tied += t as usize;
        }
        points.push(CurvePoint {
            n_o,
            value: total / true_rewards.len() as f64,
        });
        ties.push(tied);
    }
    Ok(ReconstructionCurve { points, ties })
}

/// `per_interval` uniform draws inside each interval of `disc_r`.
pub fn default_true_rewards<R: Rng + ?Sized>(disc_r: &Discretization, per_interval: usize, rng: &mut R) -> Vec<f64> {
    let w = disc_r.width();
    let mut out = Vec::with_capacity(per_interval * disc_r.n());
    for k in 0..disc_r.n() {
        let lo = disc_r.lower(k);
        for _ in 0..per_interval {
            let r = lo + w * rng.random::<f64>();
            // stay inside [lo, lo + w) after roundoff
            out.push(if disc_r.label(r).index == k {
                r
            } else {
                disc_r.center(k)
            });
        }
    }
    out
}

/// The largest deviation seen between a continuously perturbed reward `r̄`
/// and its GCM stand-in `r̃ = r + (label(r̄) - label(r)) * width`.
///
/// True rewards are drawn uniformly from the range; perturbed values are
/// clamped into `[r_min, r_max)` first. The result never exceeds `width`.
pub fn prop1_max_error<R: Rng + ?Sized>(
    model: &NoiseModel,
    disc: &Discretization,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if !model.is_continuous() {
        return Err(Error::Config("prop1 check needs a continuous noise model".into()));
    }
    let top = disc.r_max() - (disc.r_max() - disc.r_min()) * f64::EPSILON;
    let span = disc.r_max() - disc.r_min();
    let w = disc.width();
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let r = (disc.r_min() + span * rng.random::<f64>()).min(top);
        let bar = model.apply(r, rng)?.r_tilde.clamp(disc.r_min(), top);
        let y = disc.label(r).index as f64;
        let y_bar = disc.label(bar).index as f64;
        let tilde = r + (y_bar - y) * w;
        worst = worst.max((tilde - bar).abs());
    }
    Ok(worst)
}

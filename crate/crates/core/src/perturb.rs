//! Reward discretization and the reward-corruption channels.
//!
//! A [`Discretization`] splits `[r_min, r_max)` into `n` half-open intervals of
//! equal width. A GCM perturbation draws a new label `ỹ` from row `y` of a
//! row-stochastic [`ConfusionMatrix`] and shifts the reward by `(ỹ - y) * width`,
//! so continuous rewards stay continuous. The continuous noise models
//! (Gaussian, uniform replacement, range-uniform replacement) live alongside
//! it in [`NoiseModel`].

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must match 1 to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Label snapping tolerance, in interval widths.
pub const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    r_min: f64,
    r_max: f64,
    n: usize,
}

/// A label together with whether the reward had to be clamped into range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label {
    pub index: usize,
    pub clamped: bool,
}

impl Discretization {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite()) || r_min >= r_max {
            return Err(Error::Config(format!(
                "discretization needs finite r_min < r_max, got [{r_min}, {r_max})"
            )));
        }
        if n == 0 {
            return Err(Error::Config("discretization needs n >= 1".into()));
        }
        Ok(Self { r_min, r_max, n })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        (self.r_max - self.r_min) / self.n as f64
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_min && r < self.r_max
    }

    /// `floor((r - r_min) / width)`, clamped into `0..n`.
    ///
    /// Positions within [`EDGE_SNAP`] interval widths of an upper edge are
    /// labelled with the interval above it, so `r + m * width` keeps the
    /// label offset `m` under rounding.
    ///
    /// Values below `r_min`, at or above `r_max`, and NaN are clamped to the
    /// nearest edge interval and reported through [`Label::clamped`].
    pub fn label(&self, r: f64) -> Label {
        if r.is_nan() {
            return Label {
                index: 0,
                clamped: true,
            };
        }
        if r < self.r_min {
            return Label {
                index: 0,
                clamped: true,
            };
        }
        if r >= self.r_max {
            return Label {
                index: self.n - 1,
                clamped: true,
            };
        }
        // a value a shift's roundoff below an edge belongs above it
        let k = ((r - self.r_min) / self.width() + EDGE_SNAP).floor();
        // roundoff just below r_max can land on n
        let index = (k.max(0.0) as usize).min(self.n - 1);
        Label { index, clamped: false }
    }

    /// Centre of interval `k`.
    pub fn center(&self, k: usize) -> f64 {
        self.r_min + (k as f64 + 0.5) * self.width()
    }

    /// Lower edge of interval `k`.
    pub fn lower(&self, k: usize) -> f64 {
        self.r_min + k as f64 * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.center(k)).collect()
    }
}

/// Free-function form of [`Discretization::label`].
pub fn reward_label(disc: &Discretization, r: f64) -> Label {
    disc.label(r)
}

/// Row-stochastic `n x n` perturbation kernel; entry `(i, j)` is the
/// probability that true label `i` is observed as `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Config("confusion matrix must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "confusion matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        let m = Self { n, data };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let row = self.row(i);
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Config(format!(
                    "confusion matrix row {i} has entry {bad} outside [0, 1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("confusion matrix row {i} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Symmetric channel: with probability `omega` the label is redrawn
    /// uniformly over all `n` labels (the original one included).
    pub fn uniform(n: usize, omega: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("uniform GCM needs n_r >= 1".into()));
        }
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::Config(format!("omega {omega} outside [0, 1]")));
        }
        let off = omega / n as f64;
        let diag = 1.0 - omega + off;
        let mut data = vec![off; n * n];
        for i in 0..n {
            data[i * n + i] = diag;
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }

    /// True iff every row's strict unique maximum sits on the diagonal.
    pub fn is_mode_preserving(&self) -> bool {
        (0..self.n).all(|i| {
            let row = self.row(i);
            let d = row[i];
            row.iter().enumerate().all(|(j, &p)| j == i || p < d)
        })
    }

    /// Draw an observed label for true label `y`.
    pub fn sample_label<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> usize {
        sample_categorical(self.row(y), rng)
    }
}

/// Free-function form of [`ConfusionMatrix::uniform`].
pub fn uniform_gcm(n_r: usize, omega: f64) -> Result<ConfusionMatrix> {
    ConfusionMatrix::uniform(n_r, omega)
}

/// Free-function form of [`ConfusionMatrix::is_mode_preserving`].
pub fn is_mode_preserving(c: &ConfusionMatrix) -> bool {
    c.is_mode_preserving()
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
        }
        acc += p;
        if u < acc {
            return j;
        }
    }
    last_positive
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedSample {
    pub r_true: f64,
    pub r_tilde: f64,
    /// Present only for GCM perturbations.
    pub y: Option<usize>,
    pub y_tilde: Option<usize>,
}

impl PerturbedSample {
    pub fn clean(r: f64) -> Self {
        Self {
            r_true: r,
            r_tilde: r,
            y: None,
            y_tilde: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    Clean,
    Gcm {
        disc: Discretization,
        matrix: ConfusionMatrix,
    },
    /// Additive `N(0, sigma^2)`.
    Gaussian {
        sigma: f64,
    },
    /// With probability `omega` replace the reward by `U(lo, hi)`.
    UniformReplace {
        omega: f64,
        lo: f64,
        hi: f64,
    },
    /// With probability `omega` replace the reward by `U(r_min, r_max)`.
    RangeUniform {
        omega: f64,
        r_min: f64,
        r_max: f64,
    },
}

impl NoiseModel {
    pub fn gcm(disc: Discretization, matrix: ConfusionMatrix) -> Result<Self> {
        let m = NoiseModel::Gcm { disc, matrix };
        m.validate()?;
        Ok(m)
    }

    pub fn as_gcm(&self) -> Option<(&Discretization, &ConfusionMatrix)> {
        match self {
            NoiseModel::Gcm { disc, matrix } => Some((disc, matrix)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |omega: f64| {
            if (0.0..=1.0).contains(&omega) {
                Ok(())
            } else {
                Err(Error::Config(format!("omega {omega} outside [0, 1]")))
            }
        };
        match self {
            NoiseModel::Clean => Ok(()),
            NoiseModel::Gcm { disc, matrix } => {
                if disc.n() != matrix.n() {
                    Err(Error::Config(format!(
                        "GCM dimension mismatch: discretization has {} intervals, matrix is {}x{}",
                        disc.n(),
                        matrix.n(),
                        matrix.n()
                    )))
                } else {
                    Ok(())
                }
            }
            NoiseModel::Gaussian { sigma } => {
                if *sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("sigma {sigma} must be >= 0")))
                }
            }
            NoiseModel::UniformReplace { omega, lo, hi } => {
                prob(*omega)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::Config(format!("uniform noise needs lo < hi, got [{lo}, {hi})")))
                }
            }
            NoiseModel::RangeUniform { omega, r_min, r_max } => {
                prob(*omega)?;
                if r_min < r_max {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "range-uniform noise needs r_min < r_max, got [{r_min}, {r_max})"
                    )))
                }
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            NoiseModel::Gaussian { .. } | NoiseModel::UniformReplace { .. } | NoiseModel::RangeUniform { .. }
        )
    }

    /// Apply the channel to a true reward.
    pub fn apply<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> Result<PerturbedSample> {
        match self {
            NoiseModel::Clean => Ok(PerturbedSample::clean(r)),
            NoiseModel::Gcm { disc, matrix } => gcm_perturb(disc, matrix, r, rng),
            _ => Ok(PerturbedSample {
                r_true: r,
                r_tilde: continuous_perturb(self, r, rng)?,
                y: None,
                y_tilde: None,
            }),
        }
    }
}

/// Shift `r` from its own interval to interval `y_tilde`.
pub fn gcm_shift(disc: &Discretization, r: f64, y_tilde: usize) -> PerturbedSample {
    let y = disc.label(r).index;
    PerturbedSample {
        r_true: r,
        r_tilde: r + (y_tilde as f64 - y as f64) * disc.width(),
        y: Some(y),
        y_tilde: Some(y_tilde),
    }
}

pub fn gcm_perturb<R: Rng + ?Sized>(
    disc: &Discretization,
    matrix: &ConfusionMatrix,
    r: f64,
    rng: &mut R,
) -> Result<PerturbedSample> {
    if disc.n() != matrix.n() {
        return Err(Error::Config(format!(
            "GCM dimension mismatch: {} intervals vs {}x{} matrix",
            disc.n(),
            matrix.n(),
            matrix.n()
        )));
    }
    if !disc.contains(r) {
        return Err(Error::OutOfRange {
            reward: r,
            r_min: disc.r_min(),
            r_max: disc.r_max(),
        });
    }
    let y = disc.label(r).index;
    let y_tilde = matrix.sample_label(y, rng);
    Ok(gcm_shift(disc, r, y_tilde))
}

pub fn continuous_perturb<R: Rng + ?Sized>(model: &NoiseModel, r: f64, rng: &mut R) -> Result<f64> {
    match *model {
        NoiseModel::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(r);
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            Ok(r + normal.sample(rng))
        }
        NoiseModel::UniformReplace { omega, lo, hi } => Ok(replace_with_prob(r, omega, lo, hi, rng)),
        NoiseModel::RangeUniform { omega, r_min, r_max } => Ok(replace_with_prob(r, omega, r_min, r_max, rng)),
        NoiseModel::Clean => Ok(r),
        NoiseModel::Gcm { .. } => Err(Error::Config("continuous_perturb called with a GCM noise model".into())),
    }
}

fn replace_with_prob<R: Rng + ?Sized>(r: f64, omega: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    // always two draws so the stream position doesn't depend on the outcome
    let coin: f64 = rng.random();
    let u: f64 = rng.random();
    if coin < omega {
        lo + (hi - lo) * u
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RunRng, Stream};
    use proptest::prelude::*;

    fn disc(lo: f64, hi: f64, n: usize) -> Discretization {
        Discretization::new(lo, hi, n).unwrap()
    }

    #[test]
    fn label_examples() {
        let d = disc(0.0, 10.0, 10);
        assert_eq!(
            d.label(3.7),
            Label {
                index: 3,
                clamped: false
            }
        );
        assert_eq!(d.label(0.0).index, 0);
        let pendulum = disc(-17.0, 0.0, 17);
        assert_eq!(pendulum.label(-16.5).index, 0);
    }

    #[test]
    fn label_clamps_and_flags() {
        let d = disc(0.0, 10.0, 10);
        assert_eq!(
            d.label(10.0),
            Label {
                index: 9,
                clamped: true
            }
        );
        assert_eq!(
            d.label(-0.1),
            Label {
                index: 0,
                clamped: true
            }
        );
        assert_eq!(
            d.label(f64::NAN),
            Label {
                index: 0,
                clamped: true
            }
        );
        assert_eq!(
            d.label(9.999_999_999),
            Label {
                index: 9,
                clamped: false
            }
        );
    }

    #[test]
    fn bad_discretizations_rejected() {
        assert!(Discretization::new(1.0, 1.0, 3).is_err());
        assert!(Discretization::new(0.0, 1.0, 0).is_err());
        assert!(Discretization::new(0.0, f64::INFINITY, 2).is_err());
    }

    #[test]
    fn uniform_gcm_entries() {
        let c = uniform_gcm(6, 0.5).unwrap();
        // oracle: plug into the formula
        let diag = 1.0 - 0.5 + 0.5 / 6.0;
        let off = 0.5 / 6.0;
        for i in 0..6 {
            let s: f64 = c.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for j in 0..6 {
                let want = if i == j { diag } else { off };
                assert!((c.get(i, j) - want).abs() < 1e-15);
            }
        }
        assert!((diag - 0.583_333_333_333).abs() < 1e-9);
        assert!((off - 0.083_333_333_333).abs() < 1e-9);
        assert_eq!(uniform_gcm(4, 0.0).unwrap(), ConfusionMatrix::identity(4));
        let full = uniform_gcm(4, 1.0).unwrap();
        assert!(full.rows().flatten().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(uniform_gcm(4, 1.5).is_err());
    }

    #[test]
    fn mode_preserving_examples() {
        assert!(ConfusionMatrix::identity(3).is_mode_preserving());
        assert!(uniform_gcm(6, 0.5).unwrap().is_mode_preserving());
        assert!(!uniform_gcm(6, 1.0).unwrap().is_mode_preserving());
        let c = ConfusionMatrix::from_rows(vec![vec![0.3, 0.7], vec![0.0, 1.0]]).unwrap();
        assert!(!is_mode_preserving(&c));
        let tie = ConfusionMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(!tie.is_mode_preserving());
    }

    #[test]
    fn from_rows_validates() {
        assert!(ConfusionMatrix::from_rows(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(ConfusionMatrix::from_rows(vec![vec![1.5, -0.5], vec![0.0, 1.0]]).is_err());
        assert!(ConfusionMatrix::from_rows(vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn identity_channel_is_noop() {
        let d = disc(0.0, 3.0, 3);
        let c = ConfusionMatrix::identity(3);
        let mut rng = RunRng::new(1).stream(Stream::Noise);
        for &r in &[0.0, 0.4, 1.2, 2.99] {
            let s = gcm_perturb(&d, &c, r, &mut rng).unwrap();
            assert_eq!(s.r_tilde, r);
            assert_eq!(s.y, s.y_tilde);
        }
    }

    #[test]
    fn forced_shift() {
        let d = disc(0.0, 3.0, 3);
        let s = gcm_shift(&d, 1.2, 2);
        assert!((s.r_tilde - 2.2).abs() < 1e-12);
        assert_eq!((s.y, s.y_tilde), (Some(1), Some(2)));
    }

    #[test]
    fn gcm_perturb_errors() {
        let d = disc(0.0, 3.0, 3);
        let mut rng = RunRng::new(1).stream(Stream::Noise);
        let c4 = ConfusionMatrix::identity(4);
        assert!(matches!(gcm_perturb(&d, &c4, 1.0, &mut rng), Err(Error::Config(_))));
        let c3 = ConfusionMatrix::identity(3);
        assert!(matches!(
            gcm_perturb(&d, &c3, 3.0, &mut rng),
            Err(Error::OutOfRange { .. })
        ));
        assert!(NoiseModel::gcm(d, c4).is_err());
    }

    #[test]
    fn empirical_row_frequencies() {
        let d = disc(0.0, 3.0, 3);
        let c =
            ConfusionMatrix::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.2, 0.5, 0.3], vec![0.0, 0.0, 1.0]]).unwrap();
        let mut rng = RunRng::new(11).stream(Stream::Noise);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[gcm_perturb(&d, &c, 1.5, &mut rng).unwrap().y_tilde.unwrap()] += 1;
        }
        for (j, &want) in c.row(1).iter().enumerate() {
            let f = counts[j] as f64 / n as f64;
            assert!((f - want).abs() < 0.01, "label {j}: {f} vs {want}");
        }
    }

    #[test]
    fn continuous_examples() {
        let mut rng = RunRng::new(5).stream(Stream::Noise);
        let g0 = NoiseModel::Gaussian { sigma: 0.0 };
        assert_eq!(continuous_perturb(&g0, 0.37, &mut rng).unwrap(), 0.37);
        let ru0 = NoiseModel::RangeUniform {
            omega: 0.0,
            r_min: 0.0,
            r_max: 1.0,
        };
        assert_eq!(continuous_perturb(&ru0, 0.37, &mut rng).unwrap(), 0.37);

        let u = NoiseModel::UniformReplace {
            omega: 1.0,
            lo: -1.0,
            hi: 1.0,
        };
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| continuous_perturb(&u, 5.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");

        let gcm = NoiseModel::Gcm {
            disc: disc(0.0, 1.0, 2),
            matrix: ConfusionMatrix::identity(2),
        };
        assert!(continuous_perturb(&gcm, 0.2, &mut rng).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = RunRng::new(6).stream(Stream::Noise);
        let g = NoiseModel::Gaussian { sigma: 0.5 };
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| continuous_perturb(&g, 1.0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 0.01);
        assert!((var.sqrt() - 0.5).abs() < 0.01);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::Gaussian { sigma: -1.0 }.validate().is_err());
        assert!(NoiseModel::UniformReplace {
            omega: 0.5,
            lo: 1.0,
            hi: 1.0
        }
        .validate()
        .is_err());
        assert!(NoiseModel::RangeUniform {
            omega: 2.0,
            r_min: 0.0,
            r_max: 1.0
        }
        .validate()
        .is_err());
        assert!(NoiseModel::Clean.validate().is_ok());
    }

    fn row_stochastic(n: usize) -> impl Strategy<Value = ConfusionMatrix> {
        proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, n), n).prop_map(|rows| {
            let rows = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / s).collect()
                })
                .collect();
            ConfusionMatrix::from_rows(rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn uniform_rows_sum_to_one(n in 1usize..40, omega in 0.0f64..=1.0) {
            let c = uniform_gcm(n, omega).unwrap();
            for row in c.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOL);
            }
        }

        #[test]
        fn offset_identity_and_label_consistency(
            (n, c) in (2usize..12).prop_flat_map(|n| (Just(n), row_stochastic(n))),
            lo in -50.0f64..50.0,
            span in 0.1f64..100.0,
            u in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let d = Discretization::new(lo, lo + span, n).unwrap();
            let r = (lo + u * span).min(lo + span * (1.0 - 1e-12));
            prop_assume!(d.contains(r));
            let mut rng = RunRng::new(seed).stream(Stream::Noise);
            let s = gcm_perturb(&d, &c, r, &mut rng).unwrap();
            let (y, yt) = (s.y.unwrap(), s.y_tilde.unwrap());
            let offset = (yt as f64 - y as f64) * d.width();
            prop_assert!((s.r_tilde - s.r_true - offset).abs() <= 1e-9 * (1.0 + span));
            prop_assert_eq!(d.label(s.r_tilde).index, yt);
        }

        #[test]
        fn shifts_from_the_lower_edge_keep_their_label(n in 2usize..16, lo in -50.0f64..50.0, span in 0.1f64..100.0) {
            let d = Discretization::new(lo, lo + span, n).unwrap();
            for k in 0..n {
                let r = d.lower(k);
                for j in 0..n {
                    prop_assert_eq!(d.label(gcm_shift(&d, r, j).r_tilde).index, j);
                }
            }
        }

        #[test]
        fn seed_determinism(seed in any::<u64>(), omega in 0.0f64..=1.0) {
            let d = Discretization::new(0.0, 1.0, 5).unwrap();
            let c = uniform_gcm(5, omega).unwrap();
            let draw = |seed| {
                let mut rng = RunRng::new(seed).stream(Stream::Noise);
                (0..32).map(|i| gcm_perturb(&d, &c, (i as f64 + 0.5) / 32.0, &mut rng).unwrap().r_tilde).collect::<Vec<_>>()
            };
            prop_assert_eq!(draw(seed), draw(seed));
        }

        #[test]
        fn label_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let d = Discretization::new(-5.0, 5.0, 7).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(d.label(lo).index <= d.label(hi).index);
        }
    }
}

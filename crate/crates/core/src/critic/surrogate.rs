//! Surrogate rewards with a known confusion matrix: `r̂ = C⁻¹ · R`, so that
//! `E[r̂[ỹ] | y] = R[y]` for every true label.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::perturb::{ConfusionMatrix, Discretization};

/// Largest acceptable `max_i |(C · r̂ - R)_i|`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTable {
    pub matrix: ConfusionMatrix,
    pub reward_values: Vec<f64>,
    pub r_hat: Vec<f64>,
}

pub fn surrogate_rewards(matrix: &ConfusionMatrix, reward_values: &[f64]) -> Result<SurrogateTable> {
    let n = matrix.n();
    if reward_values.len() != n {
        return Err(Error::Config(format!(
            "{} reward values for a {n}x{n} matrix",
            reward_values.len()
        )));
    }
    let c = DMatrix::from_row_iterator(n, n, matrix.rows().flatten().copied());
    let b = DVector::from_column_slice(reward_values);
    let x = c.clone().lu().solve(&b).ok_or(Error::Inversion {
        residual: f64::INFINITY,
    })?;
    let residual = (&c * &x - &b).amax();
    if !residual.is_finite() || residual > SOLVE_RESIDUAL_TOL || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Inversion { residual });
    }
    Ok(SurrogateTable {
        matrix: matrix.clone(),
        reward_values: reward_values.to_vec(),
        r_hat: x.iter().copied().collect(),
    })
}

impl SurrogateTable {
    /// Surrogate table for interval-centre rewards of `disc`.
    pub fn for_centers(matrix: &ConfusionMatrix, disc: &Discretization) -> Result<Self> {
        surrogate_rewards(matrix, &disc.centers())
    }

    /// `max_i |Σ_j C(i,j) r̂[j] - R[i]|`.
    pub fn unbiasedness_residual(&self) -> f64 {
        self.matrix
            .rows()
            .zip(&self.reward_values)
            .map(|(row, &want)| (row.iter().zip(&self.r_hat).map(|(c, r)| c * r).sum::<f64>() - want).abs())
            .fold(0.0, f64::max)
    }

    /// Replace an observed reward by the surrogate of its label.
    pub fn sr_correct(&self, disc: &Discretization, r_tilde: f64) -> f64 {
        self.r_hat[disc.label(r_tilde).index]
    }
}

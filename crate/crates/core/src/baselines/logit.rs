use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;

/// Linear predictors beyond this magnitude mean fitted probabilities within
/// ~1e-11 of 0 or 1, which for a correctly classified row only happens when
/// the likelihood is pushing coefficients toward infinity.
const SEPARATION_ETA: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    IterationCap,
    /// Complete or quasi-complete separation; coefficients are not finite
    /// in the limit and the reported values are from the last iteration.
    Separation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub status: FitStatus,
    pub iterations: usize,
    /// Training rows used and rows dropped for missing predictors.
    pub n_used: usize,
    pub n_dropped: usize,
}

impl LogitModel {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// Probabilities for complete rows; `None` where any predictor is missing.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Option<f64>>> {
        let x = x.aligned_to(&self.names)?;
        Ok((0..x.n_rows())
            .map(|i| x.is_complete(i).then(|| sigmoid(self.linear_predictor(&x.row(i)))))
            .collect())
    }

    pub fn log_likelihood(&self, x: &FeatureMatrix, y: &[bool]) -> f64 {
        (0..x.n_rows())
            .map(|i| log_lik_term(self.linear_predictor(&x.row(i)), y[i]))
            .sum()
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `y * eta - log(1 + e^eta)`, stable for large |eta|.
pub(crate) fn log_lik_term(eta: f64, y: bool) -> f64 {
    let softplus = if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    };
    if y {
        eta - softplus
    } else {
        -softplus
    }
}

/// Solves the symmetric positive semi-definite system `a x = b`, falling
/// back to a pseudo-inverse when Cholesky fails.
pub(crate) fn solve_psd(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => a
            .svd(true, true)
            .solve(b, 1e-12)
            .expect("SVD with both factors computed"),
    }
}

/// Maximum-likelihood logistic regression by IRLS on the complete rows.
pub fn fit_logit(x: &FeatureMatrix, y: &[bool]) -> Result<LogitModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let rows = x.complete_rows();
    let n = rows.len();
    if n == 0 {
        return Err(Error::MissingData("no complete rows to fit".into()));
    }
    let p = x.n_cols();
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(rows[i], j - 1) });
    let target: Vec<f64> = rows.iter().map(|&r| if y[r] { 1.0 } else { 0.0 }).collect();

    let mut beta = DVector::zeros(p + 1);
    let mut status = FitStatus::IterationCap;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta = &design * &beta;
        let mut w = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let wi = (mu * (1.0 - mu)).max(1e-12);
            w[i] = wi;
            z[i] = eta[i] + (target[i] - mu) / wi;
        }
        let mut xtw = design.transpose();
        for (j, mut col) in xtw.column_iter_mut().enumerate() {
            col *= w[j];
        }
        let next = solve_psd(&xtw * &design, &(&xtw * z));
        let change = (&next - &beta).amax();
        beta = next;
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::Collinearity("logit design".into()));
        }
        if change < TOLERANCE {
            status = FitStatus::Converged;
            break;
        }
    }
    let eta = &design * &beta;
    let extreme: Vec<usize> = (0..n).filter(|&i| eta[i].abs() > SEPARATION_ETA).collect();
    if !extreme.is_empty() && extreme.iter().all(|&i| (eta[i] > 0.0) == (target[i] == 1.0)) {
        status = FitStatus::Separation;
    }
    Ok(LogitModel {
        names: x.names.clone(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        status,
        iterations,
        n_used: n,
        n_dropped: x.n_rows() - n,
    })
}

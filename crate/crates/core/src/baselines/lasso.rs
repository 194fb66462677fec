//! L1-penalized logistic regression by coordinate descent along a
//! log-spaced lambda path, with EBIC selection.

use serde::{Deserialize, Serialize};

use super::logit::{log_lik_term, sigmoid, FitStatus, LogitModel};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    /// Number of grid points from lambda_max downward.
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of lambda_max.
    pub lambda_min_ratio: f64,
    /// EBIC gamma in [0, 1].
    pub gamma: f64,
    /// Fit at this lambda instead of searching the grid.
    pub lambda: Option<f64>,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            gamma: 0.5,
            lambda: None,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Parameter(format!("EBIC gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.n_lambda < 2 {
            return Err(Error::Parameter("lambda grid needs at least two points".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::Parameter("lambda_min_ratio must lie in (0, 1)".into()));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Parameter(format!("lambda must be >= 0, got {l}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub nonzero: usize,
    pub log_likelihood: f64,
    pub ebic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    /// Coefficients on the original predictor scale.
    pub model: LogitModel,
    pub lambda: f64,
    pub selected: Vec<String>,
    pub path: Vec<PathPoint>,
}

/// Standardized complete-case design.
struct Standardized {
    /// Column-major, each column mean 0 and (population) sd 1; constant
    /// columns are all zero.
    cols: Vec<Vec<f64>>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    y: Vec<f64>,
}

impl Standardized {
    fn new(x: &FeatureMatrix, y: &[bool], rows: &[usize]) -> Self {
        let n = rows.len() as f64;
        let mut cols = Vec::with_capacity(x.n_cols());
        let mut mean = Vec::new();
        let mut sd = Vec::new();
        for col in &x.columns {
            let v: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            let m = v.iter().sum::<f64>() / n;
            let s = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n).sqrt();
            let s = if s > 0.0 { s } else { 0.0 };
            cols.push(v.iter().map(|a| if s > 0.0 { (a - m) / s } else { 0.0 }).collect());
            mean.push(m);
            sd.push(s);
        }
        Self {
            cols,
            mean,
            sd,
            y: rows.iter().map(|&r| if y[r] { 1.0 } else { 0.0 }).collect(),
        }
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    /// Smallest lambda at which every slope is zero.
    fn lambda_max(&self) -> f64 {
        let n = self.n() as f64;
        let ybar = self.y.iter().sum::<f64>() / n;
        self.cols
            .iter()
            .map(|c| c.iter().zip(&self.y).map(|(x, y)| x * (y - ybar)).sum::<f64>().abs() / n)
            .fold(0.0, f64::max)
    }
}

const OUTER_TOL: f64 = 1e-10;
const INNER_TOL: f64 = 1e-12;
const MAX_OUTER: usize = 200;
const MAX_INNER: usize = 5000;

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Minimizes `-(1/n) loglik + lambda * |beta|_1` (intercept unpenalized) by
/// proximal Newton: a quadratic approximation of the log-likelihood solved by
/// coordinate descent, repeated until coefficients settle. `b0`/`beta` are
/// warm starts and are updated in place.
fn solve(s: &Standardized, lambda: f64, b0: &mut f64, beta: &mut [f64]) -> (bool, usize) {
    let n = s.n();
    let nf = n as f64;
    let p = beta.len();
    let mut eta = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    for outer in 1..=MAX_OUTER {
        for i in 0..n {
            eta[i] = *b0 + (0..p).map(|j| beta[j] * s.cols[j][i]).sum::<f64>();
            let mu = sigmoid(eta[i]);
            w[i] = (mu * (1.0 - mu)).max(1e-6);
            z[i] = eta[i] + (s.y[i] - mu) / w[i];
        }
        let old0 = *b0;
        let old: Vec<f64> = beta.to_vec();
        // residual of the working regression
        let mut r: Vec<f64> = (0..n).map(|i| z[i] - eta[i]).collect();
        let wsum: f64 = w.iter().sum();
        let xwx: Vec<f64> = (0..p)
            .map(|j| (0..n).map(|i| w[i] * s.cols[j][i] * s.cols[j][i]).sum::<f64>() / nf)
            .collect();
        for _ in 0..MAX_INNER {
            let mut delta = 0.0f64;
            let step0 = (0..n).map(|i| w[i] * r[i]).sum::<f64>() / wsum;
            if step0 != 0.0 {
                *b0 += step0;
                for i in 0..n {
                    r[i] -= step0;
                }
                delta = delta.max(step0.abs());
            }
            for j in 0..p {
                if xwx[j] == 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let col = &s.cols[j];
                let grad = (0..n).map(|i| w[i] * col[i] * r[i]).sum::<f64>() / nf;
                let next = soft_threshold(grad + xwx[j] * beta[j], lambda) / xwx[j];
                let d = next - beta[j];
                if d != 0.0 {
                    for i in 0..n {
                        r[i] -= d * col[i];
                    }
                    beta[j] = next;
                    delta = delta.max(d.abs());
                }
            }
            if delta < INNER_TOL {
                break;
            }
        }
        let change = beta
            .iter()
            .zip(&old)
            .map(|(a, b)| (a - b).abs())
            .fold((*b0 - old0).abs(), f64::max);
        if change < OUTER_TOL {
            return (true, outer);
        }
    }
    (false, MAX_OUTER)
}

fn log_lik(s: &Standardized, b0: f64, beta: &[f64]) -> f64 {
    (0..s.n())
        .map(|i| {
            let eta = b0 + beta.iter().enumerate().map(|(j, b)| b * s.cols[j][i]).sum::<f64>();
            log_lik_term(eta, s.y[i] == 1.0)
        })
        .sum()
}

/// Extended BIC: `-2 loglik + df ln n + 2 gamma df ln p`.
pub fn ebic(log_likelihood: f64, df: usize, n: usize, p: usize, gamma: f64) -> f64 {
    let df = df as f64;
    -2.0 * log_likelihood + df * (n as f64).ln() + 2.0 * gamma * df * (p.max(1) as f64).ln()
}

/// Maps standardized coefficients back to the original predictor scale.
fn destandardize(s: &Standardized, b0: f64, beta: &[f64]) -> (f64, Vec<f64>) {
    let mut intercept = b0;
    let coefs: Vec<f64> = beta
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            if s.sd[j] > 0.0 {
                let c = b / s.sd[j];
                intercept -= c * s.mean[j];
                c
            } else {
                0.0
            }
        })
        .collect();
    (intercept, coefs)
}

pub fn lambda_grid(lambda_max: f64, config: &LassoConfig) -> Vec<f64> {
    let k = config.n_lambda;
    let lo = config.lambda_min_ratio.ln();
    (0..k)
        .map(|i| lambda_max * (lo * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Fits the lasso-logit path on the complete rows and keeps the EBIC-best
/// lambda, or fits the single lambda given in the config.
pub fn fit_lasso_logit(x: &FeatureMatrix, y: &[bool], config: &LassoConfig) -> Result<LassoFit> {
    config.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let rows = x.complete_rows();
    if rows.is_empty() {
        return Err(Error::MissingData("no complete rows to fit".into()));
    }
    let s = Standardized::new(x, y, &rows);
    let n = s.n();
    let p = x.n_cols();
    let lambdas = match config.lambda {
        Some(l) => vec![l],
        None => lambda_grid(s.lambda_max(), config),
    };

    let ybar = s.y.iter().sum::<f64>() / n as f64;
    let mut b0 = if ybar > 0.0 && ybar < 1.0 { (ybar / (1.0 - ybar)).ln() } else { 0.0 };
    let mut beta = vec![0.0; p];
    let mut path = Vec::with_capacity(lambdas.len());
    let mut best: Option<(f64, f64, Vec<f64>, bool, usize)> = None;
    let mut best_ebic = f64::INFINITY;
    for &lambda in &lambdas {
        let (converged, iters) = solve(&s, lambda, &mut b0, &mut beta);
        let ll = log_lik(&s, b0, &beta);
        let df = beta.iter().filter(|b| **b != 0.0).count();
        let score = ebic(ll, df, n, p, config.gamma);
        path.push(PathPoint {
            lambda,
            nonzero: df,
            log_likelihood: ll,
            ebic: score,
        });
        if score < best_ebic {
            best_ebic = score;
            best = Some((lambda, b0, beta.clone(), converged, iters));
        }
    }
    let (lambda, b0, beta, converged, iterations) = best.expect("non-empty lambda grid");
    let (intercept, coefficients) = destandardize(&s, b0, &beta);
    let selected = x
        .names
        .iter()
        .zip(&beta)
        .filter(|(_, b)| **b != 0.0)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(LassoFit {
        model: LogitModel {
            names: x.names.clone(),
            intercept,
            coefficients,
            status: if converged { FitStatus::Converged } else { FitStatus::IterationCap },
            iterations,
            n_used: n,
            n_dropped: x.n_rows() - n,
        },
        lambda,
        selected,
        path,
    })
}

//! Regression models feeding the covariate-adjusted estimators: logistic
//! propensity scores and proportional-odds outcome models.
//!
//! Both fitters run Newton-Raphson with step-halving on internally
//! standardized covariates and report coefficients on the original scale.
//! Log-likelihoods and analytic gradients are exposed as free functions so
//! they can be checked against finite differences.

mod logistic;
mod ordinal;

pub use logistic::{fit_logistic, logistic_gradient, logistic_log_likelihood, LogisticFit};
pub use ordinal::{
    fit_proportional_odds, proportional_odds_gradient, proportional_odds_log_likelihood,
    ProportionalOddsFit,
};

use thiserror::Error;

/// Ridge added to the Newton system; grown temporarily when a step fails to
/// improve the likelihood.
pub(crate) const BASE_RIDGE: f64 = 1e-10;

/// Relative gradient-norm convergence threshold.
pub(crate) const GRADIENT_TOLERANCE: f64 = 1e-8;

pub(crate) const MAX_ITERATIONS: usize = 100;
pub(crate) const MAX_HALVINGS: usize = 30;

/// Coefficients beyond this norm are treated as diverging to infinity.
pub(crate) const DIVERGENCE_NORM: f64 = 1e6;

/// Propensity predictions are clipped into this band before weighting.
pub const PROPENSITY_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmError {
    #[error("complete or quasi-complete separation, coefficients diverge")]
    Separation,
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("outcome takes a single observed value, nothing to fit")]
    SingleCategory,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no convergence after {0} iterations")]
    DidNotConverge(usize),
}

/// Covariate rows without an intercept column; the fitters prepend one.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
    num_covariates: usize,
}

impl DesignMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, GlmError> {
        if rows.is_empty() {
            return Err(GlmError::DimensionMismatch("no observations".into()));
        }
        let num_covariates = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_covariates {
                return Err(GlmError::DimensionMismatch(format!(
                    "row {i} has {} covariates, expected {num_covariates}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(GlmError::DimensionMismatch(format!("row {i} has a non-finite value")));
            }
        }
        Ok(Self { rows, num_covariates })
    }

    /// Intercept-only design: no covariate columns.
    pub fn intercept_only(num_rows: usize) -> Result<Self, GlmError> {
        Self::new(vec![Vec::new(); num_rows])
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.num_covariates
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Centered and scaled copy plus the transform needed to map fitted
    /// coefficients back. Constant columns cannot be scaled and would
    /// duplicate the intercept anyway.
    pub(crate) fn standardized(&self) -> Result<(Self, Vec<f64>, Vec<f64>), GlmError> {
        let n = self.num_rows() as f64;
        let p = self.num_covariates;
        let mut means = vec![0.0; p];
        for row in &self.rows {
            for (k, &v) in row.iter().enumerate() {
                means[k] += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut sds = vec![0.0; p];
        for row in &self.rows {
            for (k, &v) in row.iter().enumerate() {
                sds[k] += (v - means[k]).powi(2);
            }
        }
        for (k, s) in sds.iter_mut().enumerate() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                return Err(GlmError::DegenerateDesign(format!("covariate {k} is constant")));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, &v)| (v - means[k]) / sds[k]).collect())
            .collect();
        Ok((Self { rows, num_covariates: p }, means, sds))
    }
}

/// Solves `(neg_h + ridge I) d = g`, preferring Cholesky and falling back
/// to LU when the ridge-damped system is not positive definite.
pub(crate) fn solve_newton_step(
    neg_h: &nalgebra::DMatrix<f64>,
    g: &[f64],
    ridge: f64,
) -> Option<nalgebra::DVector<f64>> {
    let d = g.len();
    let mut lhs = neg_h.clone();
    for i in 0..d {
        lhs[(i, i)] += ridge;
    }
    let rhs = nalgebra::DVector::from_column_slice(g);
    lhs.clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| lhs.lu().solve(&rhs))
}

pub(crate) fn invlogit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(eta)) without overflow.
pub(crate) fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

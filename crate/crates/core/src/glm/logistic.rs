//! Binary logistic regression for propensity scores.

use super::{
    invlogit, softplus, solve_newton_step, DesignMatrix, GlmError, BASE_RIDGE, DIVERGENCE_NORM,
    GRADIENT_TOLERANCE, MAX_HALVINGS, MAX_ITERATIONS, PROPENSITY_CLIP,
};
use nalgebra::DMatrix;

/// Fitted logistic model `pr(Y = 1 | x) = invlogit(b0 + x . b)`.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// `[intercept, slopes...]` on the original covariate scale.
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl LogisticFit {
    /// Predicted probability, clipped away from 0 and 1 so downstream
    /// inverse weights stay finite.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let eta = self.coefficients[0]
            + x.iter().zip(&self.coefficients[1..]).map(|(a, b)| a * b).sum::<f64>();
        invlogit(eta).clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
    }
}

/// Log-likelihood at `beta = [intercept, slopes...]`.
pub fn logistic_log_likelihood(design: &DesignMatrix, y: &[u8], beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let eta = beta[0]
            + design.row(i).iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        ll += f64::from(yi) * eta - softplus(eta);
    }
    ll
}

/// Analytic score at `beta`: `sum_i (y_i - p_i) [1, x_i]`.
pub fn logistic_gradient(design: &DesignMatrix, y: &[u8], beta: &[f64]) -> Vec<f64> {
    let p = design.num_covariates();
    let mut g = vec![0.0; p + 1];
    for (i, &yi) in y.iter().enumerate() {
        let row = design.row(i);
        let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        let resid = f64::from(yi) - invlogit(eta);
        g[0] += resid;
        for (k, &x) in row.iter().enumerate() {
            g[k + 1] += resid * x;
        }
    }
    g
}

fn negative_hessian(design: &DesignMatrix, beta: &[f64]) -> DMatrix<f64> {
    let d = design.num_covariates() + 1;
    let mut h = DMatrix::zeros(d, d);
    for i in 0..design.num_rows() {
        let row = design.row(i);
        let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        let p = invlogit(eta);
        let w = p * (1.0 - p);
        let mut xt = Vec::with_capacity(d);
        xt.push(1.0);
        xt.extend_from_slice(row);
        for a in 0..d {
            for b in a..d {
                let v = w * xt[a] * xt[b];
                h[(a, b)] += v;
                if a != b {
                    h[(b, a)] += v;
                }
            }
        }
    }
    h
}

/// Maximum-likelihood logistic fit by Newton-Raphson with step-halving.
/// Diverging coefficients are reported as separation rather than returned.
pub fn fit_logistic(design: &DesignMatrix, y: &[u8]) -> Result<LogisticFit, GlmError> {
    let n = design.num_rows();
    if y.len() != n {
        return Err(GlmError::DimensionMismatch(format!(
            "{n} design rows but {} responses",
            y.len()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(GlmError::DimensionMismatch("responses must be 0 or 1".into()));
    }
    let ones: usize = y.iter().map(|&v| v as usize).sum();
    if ones == 0 || ones == n {
        return Err(GlmError::Separation);
    }

    let p = design.num_covariates();
    let (std_design, means, sds) = if p > 0 {
        design.standardized()?
    } else {
        (design.clone(), Vec::new(), Vec::new())
    };

    let mut beta = vec![0.0; p + 1];
    beta[0] = (ones as f64 / (n - ones) as f64).ln();
    let mut ll = logistic_log_likelihood(&std_design, y, &beta);
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let g = logistic_gradient(&std_design, y, &beta);
        let gnorm = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if gnorm <= GRADIENT_TOLERANCE * (1.0 + ll.abs()) {
            break;
        }
        let neg_h = negative_hessian(&std_design, &beta);

        let mut ridge = BASE_RIDGE;
        let mut improved = false;
        while ridge <= 1e2 {
            let Some(dir) = solve_newton_step(&neg_h, &g, ridge) else {
                ridge *= 1e4;
                continue;
            };
            let mut step = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let cand: Vec<f64> =
                    beta.iter().zip(dir.iter()).map(|(b, d)| b + step * d).collect();
                let cand_ll = logistic_log_likelihood(&std_design, y, &cand);
                if cand_ll > ll {
                    beta = cand;
                    ll = cand_ll;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if improved {
                break;
            }
            ridge *= 1e4;
        }
        if !improved {
            return Err(GlmError::DidNotConverge(iterations));
        }
        let norm = beta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm > DIVERGENCE_NORM {
            return Err(GlmError::Separation);
        }
    }

    let g = logistic_gradient(&std_design, y, &beta);
    let gnorm = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if gnorm > GRADIENT_TOLERANCE * (1.0 + ll.abs()) {
        return Err(GlmError::DidNotConverge(iterations));
    }

    // Polishing steps: quadratic convergence squares the remaining error,
    // landing essentially at machine precision. The likelihood change per
    // step is below rounding there, so a ULP-sized decrease is accepted.
    for _ in 0..3 {
        let g = logistic_gradient(&std_design, y, &beta);
        if g.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) <= f64::EPSILON * (1.0 + ll.abs()) {
            break;
        }
        let neg_h = negative_hessian(&std_design, &beta);
        let Some(dir) = solve_newton_step(&neg_h, &g, BASE_RIDGE) else { break };
        let cand: Vec<f64> = beta.iter().zip(dir.iter()).map(|(b, d)| b + d).collect();
        let cand_ll = logistic_log_likelihood(&std_design, y, &cand);
        if cand_ll + 8.0 * f64::EPSILON * (1.0 + ll.abs()) < ll {
            break;
        }
        beta = cand;
        ll = cand_ll;
    }

    // A perfect fit means the likelihood has no maximizer; the gradient
    // underflows to zero long before the coefficient norm blows up.
    let perfect = (0..n).all(|i| {
        let row = std_design.row(i);
        let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
        (f64::from(y[i]) - invlogit(eta)).abs() <= 1e-6
    });
    if perfect {
        return Err(GlmError::Separation);
    }

    // Map standardized-scale coefficients back to the original scale.
    let mut coefficients = vec![0.0; p + 1];
    coefficients[0] = beta[0];
    for k in 0..p {
        coefficients[k + 1] = beta[k + 1] / sds[k];
        coefficients[0] -= beta[k + 1] * means[k] / sds[k];
    }
    Ok(LogisticFit { coefficients, log_likelihood: ll, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn intercept_only_matches_closed_form() {
        let design = DesignMatrix::intercept_only(10).unwrap();
        let y = [1u8, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let fit = fit_logistic(&design, &y).unwrap();
        let expected = (0.3f64 / 0.7).ln();
        assert!((fit.coefficients[0] - expected).abs() <= 1e-10);
    }

    #[test]
    fn constant_response_is_separation() {
        let design = DesignMatrix::intercept_only(5).unwrap();
        assert!(matches!(fit_logistic(&design, &[1, 1, 1, 1, 1]), Err(GlmError::Separation)));
    }

    #[test]
    fn separated_covariate_is_detected() {
        // x < 0 always 0, x > 0 always 1: the slope diverges.
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 - 19.5]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let design = DesignMatrix::new(rows).unwrap();
        assert!(matches!(fit_logistic(&design, &y), Err(GlmError::Separation)));
    }

    #[test]
    fn recovers_known_coefficients() {
        let mut rng = CounterRng::from_key(11, 0);
        let n = 4000;
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1 = rng.next_f64() * 2.0 - 1.0;
            let x2 = rng.next_f64() * 2.0 - 1.0;
            let p = invlogit(-0.3 + 1.2 * x1 - 0.7 * x2);
            y.push(u8::from(rng.next_f64() < p));
            rows.push(vec![x1, x2]);
        }
        let design = DesignMatrix::new(rows).unwrap();
        let fit = fit_logistic(&design, &y).unwrap();
        assert!((fit.coefficients[0] + 0.3).abs() < 0.15, "{:?}", fit.coefficients);
        assert!((fit.coefficients[1] - 1.2).abs() < 0.2);
        assert!((fit.coefficients[2] + 0.7).abs() < 0.2);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from((i * 5 % 9) < 4)).collect();
        let design = DesignMatrix::new(rows).unwrap();
        let fit = fit_logistic(&design, &y).unwrap();
        let g = logistic_gradient(&design, &y, &fit.coefficients);
        let gnorm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(gnorm <= 1e-6, "gradient at optimum {gnorm}");
    }

    #[test]
    fn predictions_are_clipped() {
        let fit = LogisticFit {
            coefficients: vec![0.0, 100.0],
            log_likelihood: 0.0,
            iterations: 1,
        };
        assert!(fit.predict(&[50.0]) <= 1.0 - PROPENSITY_CLIP);
        assert!(fit.predict(&[-50.0]) >= PROPENSITY_CLIP);
    }
}

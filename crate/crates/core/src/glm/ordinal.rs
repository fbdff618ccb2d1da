//! Proportional-odds regression for ordinal outcomes,
//! `pr(Y <= c | x) = invlogit(alpha_{c+1} - x . beta)`.
//!
//! Cutpoints are optimized as a base value plus log-increments so they stay
//! ordered at every iterate: `phi = [alpha_1, t_1..t_{J-2}, beta]` with
//! `alpha_{u+1} = alpha_u + exp(t_u)`.

use super::{
    invlogit, solve_newton_step, DesignMatrix, GlmError, BASE_RIDGE, DIVERGENCE_NORM,
    GRADIENT_TOLERANCE, MAX_HALVINGS, MAX_ITERATIONS,
};
use nalgebra::DMatrix;

/// Log-increments below this are pinned; the category is effectively empty.
const MIN_LOG_INCREMENT: f64 = -30.0;
const MAX_LOG_INCREMENT: f64 = 30.0;

/// Materialized cutpoints keep at least this gap so predicted cumulative
/// probabilities stay ordered in double precision.
const MIN_INCREMENT: f64 = 1e-9;

/// Fitted proportional-odds model on the original covariate scale.
#[derive(Debug, Clone)]
pub struct ProportionalOddsFit {
    /// Strictly increasing cutpoints `alpha_1 < ... < alpha_{J-1}`.
    pub cutpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl ProportionalOddsFit {
    pub fn num_categories(&self) -> usize {
        self.cutpoints.len() + 1
    }

    /// Predicted category probabilities at `x`; nonnegative, summing to 1.
    pub fn predict_probs(&self, x: &[f64]) -> Vec<f64> {
        let xb: f64 = x.iter().zip(&self.slopes).map(|(a, b)| a * b).sum();
        let j_cats = self.num_categories();
        let mut probs = Vec::with_capacity(j_cats);
        let mut prev = 0.0;
        for c in 0..j_cats {
            let cdf = if c + 1 < j_cats { invlogit(self.cutpoints[c] - xb) } else { 1.0 };
            probs.push((cdf - prev).max(0.0));
            prev = cdf;
        }
        probs
    }
}

fn check_inputs(
    design: &DesignMatrix,
    y: &[usize],
    num_categories: usize,
) -> Result<(), GlmError> {
    if num_categories < 2 {
        return Err(GlmError::SingleCategory);
    }
    if y.len() != design.num_rows() {
        return Err(GlmError::DimensionMismatch(format!(
            "{} design rows but {} responses",
            design.num_rows(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= num_categories) {
        return Err(GlmError::DimensionMismatch(format!(
            "category {bad} out of range for {num_categories} categories"
        )));
    }
    Ok(())
}

fn phi_len(num_categories: usize, num_covariates: usize) -> usize {
    (num_categories - 1) + num_covariates
}

/// Cutpoints implied by `phi`, without the materialization floor.
fn raw_cutpoints(phi: &[f64], num_categories: usize) -> Vec<f64> {
    let mut alphas = Vec::with_capacity(num_categories - 1);
    let mut a = phi[0];
    alphas.push(a);
    for t in &phi[1..num_categories - 1] {
        a += t.exp();
        alphas.push(a);
    }
    alphas
}

/// Log-likelihood at `phi = [alpha_1, t.., beta..]` on the given design.
pub fn proportional_odds_log_likelihood(
    design: &DesignMatrix,
    y: &[usize],
    num_categories: usize,
    phi: &[f64],
) -> f64 {
    debug_assert_eq!(phi.len(), phi_len(num_categories, design.num_covariates()));
    let alphas = raw_cutpoints(phi, num_categories);
    let beta = &phi[num_categories - 1..];
    let mut ll = 0.0;
    for (i, &c) in y.iter().enumerate() {
        let xb: f64 = design.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        let upper = if c + 1 < num_categories { invlogit(alphas[c] - xb) } else { 1.0 };
        let lower = if c >= 1 { invlogit(alphas[c - 1] - xb) } else { 0.0 };
        ll += (upper - lower).max(1e-300).ln();
    }
    ll
}

/// Analytic score at `phi`, the exact derivative of
/// [`proportional_odds_log_likelihood`] including the log-increment chain
/// rule.
pub fn proportional_odds_gradient(
    design: &DesignMatrix,
    y: &[usize],
    num_categories: usize,
    phi: &[f64],
) -> Vec<f64> {
    let (grad_alpha, grad_beta, _, _) = alpha_space_derivatives(design, y, num_categories, phi);
    chain_gradient(&grad_alpha, &grad_beta, phi, num_categories)
}

/// Gradient and negative Hessian in `(alpha, beta)` space, accumulated per
/// observation from the two active cutpoints.
#[allow(clippy::type_complexity)]
fn alpha_space_derivatives(
    design: &DesignMatrix,
    y: &[usize],
    num_categories: usize,
    phi: &[f64],
) -> (Vec<f64>, Vec<f64>, DMatrix<f64>, f64) {
    let a_count = num_categories - 1;
    let p = design.num_covariates();
    let d_ab = a_count + p;
    let alphas = raw_cutpoints(phi, num_categories);
    let beta = &phi[a_count..];

    let mut grad_alpha = vec![0.0; a_count];
    let mut grad_beta = vec![0.0; p];
    let mut hess = DMatrix::zeros(d_ab, d_ab);
    let mut ll = 0.0;

    for (i, &c) in y.iter().enumerate() {
        let row = design.row(i);
        let xb: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let has_upper = c + 1 < num_categories;
        let has_lower = c >= 1;
        let g_up = if has_upper { invlogit(alphas[c] - xb) } else { 1.0 };
        let g_lo = if has_lower { invlogit(alphas[c - 1] - xb) } else { 0.0 };
        let pi = (g_up - g_lo).max(1e-300);
        ll += pi.ln();

        // pdf values and their eta-derivatives at the active cutpoints.
        let s_up = if has_upper { g_up * (1.0 - g_up) } else { 0.0 };
        let s_lo = if has_lower { g_lo * (1.0 - g_lo) } else { 0.0 };
        let ds_up = s_up * (1.0 - 2.0 * g_up);
        let ds_lo = s_lo * (1.0 - 2.0 * g_lo);

        // Score in eta space: d log pi / d eta at upper and lower.
        let sc_up = s_up / pi;
        let sc_lo = -s_lo / pi;
        if has_upper {
            grad_alpha[c] += sc_up;
        }
        if has_lower {
            grad_alpha[c - 1] += sc_lo;
        }
        let eta_score = sc_up + sc_lo;
        for (k, &x) in row.iter().enumerate() {
            grad_beta[k] -= x * eta_score;
        }

        // Second derivatives in eta space.
        let h_uu = if has_upper { ds_up / pi - sc_up * sc_up } else { 0.0 };
        let h_ll = if has_lower { -ds_lo / pi - sc_lo * sc_lo } else { 0.0 };
        let h_ul = if has_upper && has_lower { -sc_up * sc_lo } else { 0.0 };

        if has_upper {
            hess[(c, c)] += h_uu;
        }
        if has_lower {
            hess[(c - 1, c - 1)] += h_ll;
        }
        if has_upper && has_lower {
            hess[(c, c - 1)] += h_ul;
            hess[(c - 1, c)] += h_ul;
        }
        let h_total = h_uu + 2.0 * h_ul + h_ll;
        for (k, &x) in row.iter().enumerate() {
            if has_upper {
                let v = -(h_uu + h_ul) * x;
                hess[(c, a_count + k)] += v;
                hess[(a_count + k, c)] += v;
            }
            if has_lower {
                let v = -(h_ll + h_ul) * x;
                hess[(c - 1, a_count + k)] += v;
                hess[(a_count + k, c - 1)] += v;
            }
            for (k2, &x2) in row.iter().enumerate() {
                hess[(a_count + k, a_count + k2)] += h_total * x * x2;
            }
        }
    }
    (grad_alpha, grad_beta, hess, ll)
}

fn chain_gradient(
    grad_alpha: &[f64],
    grad_beta: &[f64],
    phi: &[f64],
    num_categories: usize,
) -> Vec<f64> {
    let a_count = num_categories - 1;
    let mut g = Vec::with_capacity(a_count + grad_beta.len());
    g.push(grad_alpha.iter().sum());
    // Suffix sums: t_u moves every cutpoint above u.
    let mut suffix = 0.0;
    let mut suffixes = vec![0.0; a_count];
    for u in (0..a_count).rev() {
        suffix += grad_alpha[u];
        suffixes[u] = suffix;
    }
    for (t, s) in phi[1..a_count].iter().zip(&suffixes[1..]) {
        g.push(t.exp() * s);
    }
    g.extend_from_slice(grad_beta);
    g
}

/// Transforms the `(alpha, beta)` Hessian into `phi` space:
/// `H_phi = T' H T` plus the curvature of the exp reparameterization on the
/// `t` diagonal.
fn chain_hessian(
    hess: &DMatrix<f64>,
    grad_phi: &[f64],
    phi: &[f64],
    num_categories: usize,
) -> DMatrix<f64> {
    let a_count = num_categories - 1;
    let d = hess.nrows();
    // Right-multiply by T.
    let mut right = DMatrix::zeros(d, d);
    for r in 0..d {
        let mut suffix = 0.0;
        let mut suffixes = vec![0.0; a_count];
        for u in (0..a_count).rev() {
            suffix += hess[(r, u)];
            suffixes[u] = suffix;
        }
        right[(r, 0)] = suffixes[0];
        for u in 1..a_count {
            right[(r, u)] = phi[u].exp() * suffixes[u];
        }
        for k in a_count..d {
            right[(r, k)] = hess[(r, k)];
        }
    }
    // Left-multiply by T'.
    let mut out = DMatrix::zeros(d, d);
    for q in 0..d {
        let mut suffix = 0.0;
        let mut suffixes = vec![0.0; a_count];
        for u in (0..a_count).rev() {
            suffix += right[(u, q)];
            suffixes[u] = suffix;
        }
        out[(0, q)] = suffixes[0];
        for u in 1..a_count {
            out[(u, q)] = phi[u].exp() * suffixes[u];
        }
        for k in a_count..d {
            out[(k, q)] = right[(k, q)];
        }
    }
    for u in 1..a_count {
        out[(u, u)] += grad_phi[u];
    }
    out
}

/// Gradient with clamped log-increments projected out, so a fit pinned at
/// the boundary still registers as converged.
fn projected_norm(g: &[f64], phi: &[f64], num_categories: usize) -> f64 {
    let a_count = num_categories - 1;
    let mut norm = 0.0f64;
    for (i, &gi) in g.iter().enumerate() {
        let pinned_low = i >= 1 && i < a_count && phi[i] <= MIN_LOG_INCREMENT + 1e-9 && gi < 0.0;
        let pinned_high = i >= 1 && i < a_count && phi[i] >= MAX_LOG_INCREMENT - 1e-9 && gi > 0.0;
        if !pinned_low && !pinned_high {
            norm = norm.max(gi.abs());
        }
    }
    norm
}

/// Smoothed empirical cumulative logits: a strictly ordered starting point
/// even when some categories are empty.
fn initial_phi(y: &[usize], num_categories: usize, num_covariates: usize) -> Vec<f64> {
    let n = y.len() as f64;
    let mut counts = vec![0.0f64; num_categories];
    for &c in y {
        counts[c] += 1.0;
    }
    let total = n + 0.5 * num_categories as f64;
    let mut cum = 0.0;
    let mut alphas = Vec::with_capacity(num_categories - 1);
    for (c, &count) in counts.iter().take(num_categories - 1).enumerate() {
        cum += count;
        let prop = (cum + 0.5 * (c + 1) as f64) / total;
        alphas.push((prop / (1.0 - prop)).ln());
    }
    let mut phi = Vec::with_capacity(phi_len(num_categories, num_covariates));
    phi.push(alphas[0]);
    for u in 1..num_categories - 1 {
        phi.push((alphas[u] - alphas[u - 1]).ln().clamp(MIN_LOG_INCREMENT, MAX_LOG_INCREMENT));
    }
    phi.extend(std::iter::repeat_n(0.0, num_covariates));
    phi
}

/// Maximum-likelihood proportional-odds fit by Newton-Raphson with
/// step-halving on standardized covariates.
pub fn fit_proportional_odds(
    design: &DesignMatrix,
    y: &[usize],
    num_categories: usize,
) -> Result<ProportionalOddsFit, GlmError> {
    check_inputs(design, y, num_categories)?;
    let mut seen = vec![false; num_categories];
    for &c in y {
        seen[c] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(GlmError::SingleCategory);
    }

    let p = design.num_covariates();
    let (std_design, means, sds) = if p > 0 {
        design.standardized()?
    } else {
        (design.clone(), Vec::new(), Vec::new())
    };
    let a_count = num_categories - 1;
    let mut phi = initial_phi(y, num_categories, p);
    let mut ll = proportional_odds_log_likelihood(&std_design, y, num_categories, &phi);
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let (grad_alpha, grad_beta, hess_ab, _) =
            alpha_space_derivatives(&std_design, y, num_categories, &phi);
        let g = chain_gradient(&grad_alpha, &grad_beta, &phi, num_categories);
        if projected_norm(&g, &phi, num_categories) <= GRADIENT_TOLERANCE * (1.0 + ll.abs()) {
            break;
        }
        let h = chain_hessian(&hess_ab, &g, &phi, num_categories);
        let neg_h = -h;

        let mut ridge = BASE_RIDGE;
        let mut improved = false;
        while ridge <= 1e2 {
            let Some(dir) = solve_newton_step(&neg_h, &g, ridge) else {
                ridge *= 1e4;
                continue;
            };
            let mut step = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let mut cand: Vec<f64> =
                    phi.iter().zip(dir.iter()).map(|(b, d)| b + step * d).collect();
                for t in cand.iter_mut().take(a_count).skip(1) {
                    *t = t.clamp(MIN_LOG_INCREMENT, MAX_LOG_INCREMENT);
                }
                let cand_ll =
                    proportional_odds_log_likelihood(&std_design, y, num_categories, &cand);
                if cand_ll > ll {
                    phi = cand;
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
        let alphas = raw_cutpoints(&phi, num_categories);
        let norm = phi[a_count..]
            .iter()
            .chain(alphas.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm > DIVERGENCE_NORM {
            return Err(GlmError::Separation);
        }
    }

    let g = proportional_odds_gradient(&std_design, y, num_categories, &phi);
    if projected_norm(&g, &phi, num_categories) > GRADIENT_TOLERANCE * (1.0 + ll.abs()) {
        return Err(GlmError::DidNotConverge(iterations));
    }

    // Polishing steps so the fit lands at machine precision instead of
    // stopping at the gradient tolerance. The likelihood change per step is
    // below rounding there, so a ULP-sized decrease is accepted.
    for _ in 0..3 {
        let (grad_alpha, grad_beta, hess_ab, _) =
            alpha_space_derivatives(&std_design, y, num_categories, &phi);
        let g = chain_gradient(&grad_alpha, &grad_beta, &phi, num_categories);
        if projected_norm(&g, &phi, num_categories) <= f64::EPSILON * (1.0 + ll.abs()) {
            break;
        }
        let neg_h = -chain_hessian(&hess_ab, &g, &phi, num_categories);
        let Some(dir) = solve_newton_step(&neg_h, &g, BASE_RIDGE) else { break };
        let mut cand: Vec<f64> = phi.iter().zip(dir.iter()).map(|(b, d)| b + d).collect();
        for t in cand.iter_mut().take(a_count).skip(1) {
            *t = t.clamp(MIN_LOG_INCREMENT, MAX_LOG_INCREMENT);
        }
        let cand_ll = proportional_odds_log_likelihood(&std_design, y, num_categories, &cand);
        if cand_ll + 8.0 * f64::EPSILON * (1.0 + ll.abs()) < ll {
            break;
        }
        phi = cand;
        ll = cand_ll;
    }

    // Materialize ordered cutpoints and undo the standardization.
    let shift: f64 = (0..p).map(|k| phi[a_count + k] * means[k] / sds[k]).sum();
    let mut cutpoints = Vec::with_capacity(a_count);
    let mut a = phi[0] + shift;
    cutpoints.push(a);
    for t in &phi[1..a_count] {
        a += t.exp().max(MIN_INCREMENT);
        cutpoints.push(a);
    }
    let slopes = (0..p).map(|k| phi[a_count + k] / sds[k]).collect();
    Ok(ProportionalOddsFit { cutpoints, slopes, log_likelihood: ll, iterations })
}

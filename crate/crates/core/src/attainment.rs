//! Constructs a joint coupling whose relative treatment effect attains the
//! closed-form bound, proving sharpness instance by instance.
//!
//! For the minimizing tuple `(j1, m1)` the construction splits the `J x J`
//! matrix into triangular blocks below the diagonal, a reserved column at
//! `j1 - 1` carrying the mass that forces `gamma = delta_{j1 m1}`, and one
//! leftover rectangle in the strict upper triangle. Block fills are exact in
//! one margin and capped in the other; a transportation solve stands in for
//! the greedy fill in the rare case rounding leaves a column short.

use crate::bounds::{
    delta_jm, gamma_lower, gamma_upper, BoundsError, JointMatrix, MarginalDistribution,
    TupleIndex,
};
use crate::transport::{Sense, TransportProblem};
use thiserror::Error;

/// Negative values above this magnitude are rounding dust and clamp to zero;
/// anything more negative means the inputs broke a precondition.
const DUST: f64 = 1e-12;

/// Feasibility slack for fill preconditions and the transportation fallback.
/// Residual allowed when reconciling fills against their margins.
pub const FILL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttainError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("fill vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("fill precondition violated: suffix {index} demands {deficit} more than available")]
    DominanceViolated { index: usize, deficit: f64 },
    #[error("triangular fill infeasible, residual mass {residual}")]
    FillInfeasible { residual: f64 },
    #[error("attainment construction broke an invariant: {0}")]
    ConstructionInvalid(String),
}

fn nonneg(v: f64, what: &str) -> Result<f64, AttainError> {
    if v < -DUST {
        Err(AttainError::ConstructionInvalid(format!("{what} is negative: {v}")))
    } else {
        Ok(v.max(0.0))
    }
}

/// Lower-triangular `n x n` fill with column sums exactly `y` and row sums
/// at most `x`. Feasible when every suffix of `x` dominates the matching
/// suffix of `y`, since column `c` can draw only from rows `c..n`.
pub fn fill_column_exact(x: &[f64], y: &[f64]) -> Result<Vec<Vec<f64>>, AttainError> {
    let n = x.len();
    if y.len() != n {
        return Err(AttainError::LengthMismatch(n, y.len()));
    }
    let mut x_clean = Vec::with_capacity(n);
    let mut y_clean = Vec::with_capacity(n);
    for &v in x {
        x_clean.push(nonneg(v, "fill capacity")?);
    }
    for &v in y {
        y_clean.push(nonneg(v, "fill demand")?);
    }

    let mut x_suffix = 0.0;
    let mut y_suffix = 0.0;
    for s in (0..n).rev() {
        x_suffix += x_clean[s];
        y_suffix += y_clean[s];
        if y_suffix > x_suffix + FILL_TOLERANCE {
            return Err(AttainError::DominanceViolated { index: s, deficit: y_suffix - x_suffix });
        }
    }

    let mut fill = vec![vec![0.0f64; n]; n];
    let mut cap = x_clean.clone();
    for c in 0..n {
        let mut need = y_clean[c];
        for r in c..n {
            if need <= 0.0 {
                break;
            }
            let take = cap[r].min(need);
            if take > 0.0 {
                fill[r][c] = take;
                cap[r] -= take;
                need -= take;
            }
        }
        if need > DUST {
            return fill_column_exact_lp(&x_clean, &y_clean);
        }
        if need > 0.0 {
            // Keep the column sum exact; the capacity overrun is dust.
            fill[n - 1][c] += need;
        }
    }
    Ok(fill)
}

/// Transportation fallback for [`fill_column_exact`]: forbidden cells cost 1,
/// a slack column absorbs unused capacity, and a near-zero optimum certifies
/// a feasible triangular fill.
fn fill_column_exact_lp(x: &[f64], y: &[f64]) -> Result<Vec<Vec<f64>>, AttainError> {
    let n = x.len();
    let total_x: f64 = x.iter().sum();
    let total_y: f64 = y.iter().sum();
    let slack = (total_x - total_y).max(0.0);
    let mut demand = y.to_vec();
    demand.push(slack);
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..=n).map(|c| if c == n || r >= c { 0.0 } else { 1.0 }).collect())
        .collect();
    let problem = TransportProblem { supply: x.to_vec(), demand, costs };
    let solution = problem
        .solve(Sense::Minimize)
        .map_err(|e| AttainError::ConstructionInvalid(e.to_string()))?;
    if solution.objective > FILL_TOLERANCE {
        return Err(AttainError::FillInfeasible { residual: solution.objective });
    }
    let mut fill = vec![vec![0.0f64; n]; n];
    for (r, row) in fill.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate().take(r + 1) {
            *v = solution.plan[r][c];
        }
    }
    Ok(fill)
}

/// Lower-triangular `n x n` fill with row sums exactly `x` and column sums
/// at most `y`. Realized by reversing both vectors, running
/// [`fill_column_exact`], and reflecting the result through the
/// anti-diagonal, which swaps the exact and capped margins while keeping the
/// support lower triangular.
pub fn fill_row_exact(x: &[f64], y: &[f64]) -> Result<Vec<Vec<f64>>, AttainError> {
    let n = x.len();
    if y.len() != n {
        return Err(AttainError::LengthMismatch(n, y.len()));
    }
    let x_rev: Vec<f64> = y.iter().rev().copied().collect();
    let y_rev: Vec<f64> = x.iter().rev().copied().collect();
    let core = fill_column_exact(&x_rev, &y_rev)?;
    let mut fill = vec![vec![0.0f64; n]; n];
    for (r, row) in fill.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = core[n - 1 - c][n - 1 - r];
        }
    }
    Ok(fill)
}

/// Mass that must move through the pivot column for the bound at `(j, m)`:
/// `lambda = sum_{k=j}^{j+m-1} p1_k - sum_{l=j-1}^{j+m-2} p0_l`.
fn lambda(p1: &[f64], p0: &[f64], j: usize, m: usize) -> f64 {
    let band1: f64 = p1[j..j + m].iter().sum();
    let band0: f64 = p0[j - 1..j + m - 1].iter().sum();
    band1 - band0
}

/// Builds the coupling that attains `delta_jm` at tuple `t`. The tuple must
/// minimize the delta table; otherwise the reserved masses can go negative
/// and the construction reports [`AttainError::ConstructionInvalid`].
pub fn construct_attaining_matrix(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    t: TupleIndex,
) -> Result<JointMatrix, AttainError> {
    delta_jm(p1, p0, t)?;
    let j_cats = p1.num_categories();
    let (j1, m1) = (t.j, t.m);
    let jm = j1 + m1;
    let p1s = p1.probs();
    let p0s = p0.probs();

    let lam = lambda(p1s, p0s, j1, m1);
    let mut q1 = p1s.to_vec();
    let mut q0 = p0s.to_vec();
    q1[j1 - 1] = nonneg(q1[j1 - 1] + lam.min(0.0), "adjusted treated mass")?;
    q1[jm - 1] = nonneg(q1[jm - 1] - lam.max(0.0), "adjusted treated mass")?;
    q0[jm - 1] = nonneg(q0[jm - 1] - lam.max(0.0), "adjusted control mass")?;

    let mut p = vec![vec![0.0f64; j_cats]; j_cats];

    // Comonotone block strictly below the pivot column.
    if j1 > 1 {
        let block = fill_column_exact(&q1[1..j1], &p0s[..j1 - 1])?;
        for (r, row) in block.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                p[1 + r][c] = v;
            }
        }
    }
    // Comonotone block inside the band j1..j1+m1.
    if m1 > 1 {
        let block = fill_column_exact(&q1[j1 + 1..jm], &p0s[j1..jm - 1])?;
        for (r, row) in block.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                p[j1 + 1 + r][j1 + c] = v;
            }
        }
    }
    // Comonotone block past the band; rows must empty exactly here.
    if jm < j_cats {
        let block = fill_row_exact(&p1s[jm..], &q0[jm - 1..j_cats - 1])?;
        for (r, row) in block.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                p[jm + r][jm - 1 + c] = v;
            }
        }
    }
    // Pivot diagonal cell carrying the positive part of lambda.
    p[jm - 1][jm - 1] = lam.max(0.0);
    // Empty the band rows into the reserved column j1 - 1.
    for k in j1..jm {
        let placed: f64 = p[k][j1..].iter().sum();
        p[k][j1 - 1] = nonneg(p1s[k] - placed, "reserved column mass")?;
    }
    // Top up column j1 - 1 on the diagonal.
    let reserved: f64 = (j1..jm).map(|k| p[k][j1 - 1]).sum();
    p[j1 - 1][j1 - 1] = nonneg(p0s[j1 - 1] - reserved, "pivot diagonal mass")?;
    // Leftover rectangle: rows 0..j1 against columns jm-1..J, filled with
    // the product of the residual margins so both close simultaneously.
    let mut row_residual = vec![0.0f64; j1];
    for (k, res) in row_residual.iter_mut().enumerate() {
        let placed: f64 = p[k][..jm - 1].iter().sum();
        *res = nonneg(p1s[k] - placed, "leftover row mass")?;
    }
    let mut col_residual = vec![0.0f64; j_cats - (jm - 1)];
    for (idx, res) in col_residual.iter_mut().enumerate() {
        let l = jm - 1 + idx;
        let placed: f64 = (j1..j_cats).map(|k| p[k][l]).sum();
        *res = nonneg(p0s[l] - placed, "leftover column mass")?;
    }
    let row_total: f64 = row_residual.iter().sum();
    let col_total: f64 = col_residual.iter().sum();
    if (row_total - col_total).abs() > FILL_TOLERANCE {
        return Err(AttainError::ConstructionInvalid(format!(
            "leftover margins disagree: {row_total} vs {col_total}"
        )));
    }
    let mass = 0.5 * (row_total + col_total);
    if mass > DUST {
        for (k, &a) in row_residual.iter().enumerate() {
            for (idx, &b) in col_residual.iter().enumerate() {
                p[k][jm - 1 + idx] = a * b / mass;
            }
        }
    }

    for row in &mut p {
        for v in row.iter_mut() {
            *v = nonneg(*v, "joint entry")?;
        }
    }
    JointMatrix::new(p).map_err(AttainError::from)
}

/// A bound value together with a coupling that attains it.
#[derive(Debug, Clone)]
pub struct Attainment {
    pub matrix: JointMatrix,
    pub tuple: TupleIndex,
    pub target: f64,
}

/// Coupling attaining the sharp upper bound.
pub fn attaining_matrix_upper(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
) -> Result<Attainment, AttainError> {
    let (target, tuple) = gamma_upper(p1, p0)?;
    let matrix = construct_attaining_matrix(p1, p0, tuple)?;
    Ok(Attainment { matrix, tuple, target })
}

/// Coupling attaining the sharp lower bound. Swapping the arms negates the
/// effect, so this is the transpose of the upper construction on
/// `(p0, p1)`; the maximizing tuple for `xi` minimizes the swapped delta
/// table up to rounding, which the construction tolerates.
pub fn attaining_matrix_lower(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
) -> Result<Attainment, AttainError> {
    let (target, tuple) = gamma_lower(p1, p0)?;
    let swapped = construct_attaining_matrix(p0, p1, tuple)?;
    Ok(Attainment { matrix: swapped.transpose(), tuple, target })
}

/// How far a coupling is from proving a bound: worst marginal deviation and
/// the gap between its effect and the target value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub max_row_deviation: f64,
    pub max_col_deviation: f64,
    pub gamma_deviation: f64,
    pub min_entry: f64,
    pub ok: bool,
}

pub fn validate_attainment(
    matrix: &JointMatrix,
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    target: f64,
    tolerance: f64,
) -> ValidationReport {
    let rows = matrix.row_sums();
    let cols = matrix.col_sums();
    let max_row_deviation = rows
        .iter()
        .zip(p1.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let max_col_deviation = cols
        .iter()
        .zip(p0.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let gamma_deviation = (matrix.gamma() - target).abs();
    let min_entry = matrix
        .rows()
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let ok = matrix.num_categories() == p1.num_categories()
        && p1.num_categories() == p0.num_categories()
        && max_row_deviation <= tolerance
        && max_col_deviation <= tolerance
        && gamma_deviation <= tolerance
        && min_entry >= 0.0;
    ValidationReport { max_row_deviation, max_col_deviation, gamma_deviation, min_entry, ok }
}

//! Closed-form sharp bounds on the relative treatment effect for ordinal
//! outcomes.
//!
//! The relative treatment effect of a joint coupling `P = (p_kl)` of the two
//! potential outcomes is `gamma = pr{Y(1) > Y(0)} - pr{Y(1) < Y(0)}`. Only the
//! marginals of `P` are identifiable, so `gamma` is bounded rather than point
//! identified. This module evaluates the linear functionals `delta_jm` and
//! `xi_jm` of the marginal pair whose minimum and maximum over the index set
//! `Omega = {(j, m) : 1 <= j <= J-1, 1 <= m <= J-j}` are the sharp upper and
//! lower bounds, plus the identified value under independent potential
//! outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum allowed deviation of a raw probability vector's sum from 1 before
/// it is rejected instead of renormalized.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Feasibility tolerance for joint matrices (total mass and marginal sums).
pub const JOINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("probability vector has a negative entry at position {index}: {value}")]
    NegativeMass { index: usize, value: f64 },
    #[error("entries sum to {sum}, not a probability vector")]
    NotAProbabilityVector { sum: f64 },
    #[error("need at least 2 outcome categories, got {0}")]
    TooFewCategories(usize),
    #[error("tuple index (j={j}, m={m}) is out of range for {categories} categories")]
    IndexOutOfRange { j: usize, m: usize, categories: usize },
    #[error("marginal shape mismatch: {0} vs {1} categories")]
    MarginalShapeMismatch(usize, usize),
    #[error("joint matrix must be square, row {row} has {len} entries for {categories} rows")]
    NotSquare { row: usize, len: usize, categories: usize },
}

/// Sum of `xs[lo..=hi]` with the empty-range convention: ranges with
/// `lo > hi` contribute zero. Bounds are signed so callers can pass raw
/// index arithmetic like `j - 2` without underflow.
fn range_sum(xs: &[f64], lo: i64, hi: i64) -> f64 {
    if lo > hi {
        return 0.0;
    }
    debug_assert!(lo >= 0 && (hi as usize) < xs.len());
    xs[lo as usize..=hi as usize].iter().sum()
}

/// Marginal distribution of one potential outcome over categories `0..J-1`.
///
/// Entries are nonnegative and sum to exactly 1 after construction; raw input
/// within [`PROB_SUM_TOLERANCE`] of total mass 1 is renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginalDistribution {
    probs: Vec<f64>,
}

impl MarginalDistribution {
    /// Validates and renormalizes a raw probability vector.
    pub fn new(raw: Vec<f64>) -> Result<Self, BoundsError> {
        if raw.len() < 2 {
            return Err(BoundsError::TooFewCategories(raw.len()));
        }
        for (index, &value) in raw.iter().enumerate() {
            if value < 0.0 {
                return Err(BoundsError::NegativeMass { index, value });
            }
            if !value.is_finite() {
                return Err(BoundsError::NotAProbabilityVector { sum: value });
            }
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(BoundsError::NotAProbabilityVector { sum });
        }
        let probs = raw.into_iter().map(|p| p / sum).collect();
        Ok(Self { probs })
    }

    /// Category proportions from nonnegative counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self, BoundsError> {
        if counts.len() < 2 {
            return Err(BoundsError::TooFewCategories(counts.len()));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(BoundsError::NotAProbabilityVector { sum: 0.0 });
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(probs)
    }

    /// Number of outcome categories J.
    pub fn num_categories(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Survivor mass `pr{Y >= j}`; zero when `j >= J`.
    pub fn survivor(&self, j: usize) -> f64 {
        range_sum(&self.probs, j as i64, self.probs.len() as i64 - 1)
    }
}

/// An index `(j, m)` into the tuple set `Omega`, with `1 <= j <= J-1` and
/// `1 <= m <= J-j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TupleIndex {
    pub j: usize,
    pub m: usize,
}

impl TupleIndex {
    pub fn new(j: usize, m: usize, categories: usize) -> Result<Self, BoundsError> {
        let t = Self { j, m };
        if t.valid_for(categories) {
            Ok(t)
        } else {
            Err(BoundsError::IndexOutOfRange { j, m, categories })
        }
    }

    pub fn valid_for(&self, categories: usize) -> bool {
        self.j >= 1 && self.j <= categories.saturating_sub(1) && self.m >= 1 && self.m <= categories - self.j
    }
}

/// The lexicographically ordered tuple set `Omega` for `J` categories:
/// `(1,1), ..., (1,J-1); (2,1), ..., (2,J-2); ...; (J-1,1)`.
pub fn tuple_set(categories: usize) -> Vec<TupleIndex> {
    let mut out = Vec::with_capacity(categories * (categories - 1) / 2);
    for j in 1..categories {
        for m in 1..=(categories - j) {
            out.push(TupleIndex { j, m });
        }
    }
    out
}

fn check_pair(p1: &MarginalDistribution, p0: &MarginalDistribution) -> Result<usize, BoundsError> {
    let j_cats = p1.num_categories();
    if j_cats != p0.num_categories() {
        return Err(BoundsError::MarginalShapeMismatch(j_cats, p0.num_categories()));
    }
    Ok(j_cats)
}

fn check_tuple(t: TupleIndex, categories: usize) -> Result<(), BoundsError> {
    if t.valid_for(categories) {
        Ok(())
    } else {
        Err(BoundsError::IndexOutOfRange { j: t.j, m: t.m, categories })
    }
}

fn delta_unchecked(p1: &[f64], p0: &[f64], j: usize, m: usize) -> f64 {
    let top = p1.len() as i64 - 1;
    let (j, m) = (j as i64, m as i64);
    range_sum(p1, j, top) + range_sum(p1, j + m, top) + range_sum(p0, 0, j - 2)
        - range_sum(p0, j + m - 1, top)
}

fn xi_unchecked(p1: &[f64], p0: &[f64], j: usize, m: usize) -> f64 {
    let top = p1.len() as i64 - 1;
    let (j, m) = (j as i64, m as i64);
    range_sum(p1, j + m - 1, top) - range_sum(p0, j, top) - range_sum(p0, j + m, top)
        - range_sum(p1, 0, j - 2)
}

/// The linear functional `delta_jm` of the marginal pair, an upper bound on
/// the relative treatment effect for every tuple:
///
/// `delta_jm = sum_{k>=j} p_{k+} + sum_{k>=j+m} p_{k+} + sum_{l<=j-2} p_{+l}
///             - sum_{l>=j+m-1} p_{+l}`.
pub fn delta_jm(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    t: TupleIndex,
) -> Result<f64, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    check_tuple(t, j_cats)?;
    Ok(delta_unchecked(p1.probs(), p0.probs(), t.j, t.m))
}

/// The linear functional `xi_jm` whose maximum over the tuple set is the
/// sharp lower bound. Satisfies `xi_jm(p1, p0) = -delta_jm(p0, p1)`.
pub fn xi_jm(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    t: TupleIndex,
) -> Result<f64, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    check_tuple(t, j_cats)?;
    Ok(xi_unchecked(p1.probs(), p0.probs(), t.j, t.m))
}

/// Distributional effect `Delta_j = pr{Y(1) >= j} - pr{Y(0) >= j}` for
/// `1 <= j <= J-1`.
pub fn distributional_effect(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    j: usize,
) -> Result<f64, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    if j < 1 || j > j_cats - 1 {
        return Err(BoundsError::IndexOutOfRange { j, m: 0, categories: j_cats });
    }
    Ok(p1.survivor(j) - p0.survivor(j))
}

/// `delta_jm` routed through the distributional effect:
/// `Delta_j + sum_{l<=j-2} p_{+l} + sum_{k>=j+m} p_{k+} + sum_{l=j}^{j+m-2} p_{+l}`.
///
/// Algebraically identical to [`delta_jm`]; kept as an independent route for
/// verification.
pub fn delta_jm_via_distributional_effect(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    t: TupleIndex,
) -> Result<f64, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    check_tuple(t, j_cats)?;
    let (p1s, p0s) = (p1.probs(), p0.probs());
    let top = j_cats as i64 - 1;
    let (j, m) = (t.j as i64, t.m as i64);
    let big_delta = p1.survivor(t.j) - p0.survivor(t.j);
    Ok(big_delta + range_sum(p0s, 0, j - 2) + range_sum(p1s, j + m, top)
        + range_sum(p0s, j, j + m - 2))
}

/// `xi_jm` routed through the distributional effect:
/// `Delta_j - sum_{k<=j-2} p_{k+} - sum_{l>=j+m} p_{+l} - sum_{k=j}^{j+m-2} p_{k+}`.
pub fn xi_jm_via_distributional_effect(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
    t: TupleIndex,
) -> Result<f64, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    check_tuple(t, j_cats)?;
    let (p1s, p0s) = (p1.probs(), p0.probs());
    let top = j_cats as i64 - 1;
    let (j, m) = (t.j as i64, t.m as i64);
    let big_delta = p1.survivor(t.j) - p0.survivor(t.j);
    Ok(big_delta - range_sum(p1s, 0, j - 2) - range_sum(p0s, j + m, top)
        - range_sum(p1s, j, j + m - 2))
}

/// Sharp upper bound `gamma_U = min over Omega of delta_jm`, with the
/// lexicographically first minimizing tuple.
pub fn gamma_upper(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
) -> Result<(f64, TupleIndex), BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    let mut best = f64::INFINITY;
    let mut arg = TupleIndex { j: 1, m: 1 };
    for t in tuple_set(j_cats) {
        let d = delta_unchecked(p1.probs(), p0.probs(), t.j, t.m);
        if d < best {
            best = d;
            arg = t;
        }
    }
    Ok((best, arg))
}

/// Sharp lower bound `gamma_L = max over Omega of xi_jm`, with the
/// lexicographically first maximizing tuple.
pub fn gamma_lower(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
) -> Result<(f64, TupleIndex), BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    let mut best = f64::NEG_INFINITY;
    let mut arg = TupleIndex { j: 1, m: 1 };
    for t in tuple_set(j_cats) {
        let x = xi_unchecked(p1.probs(), p0.probs(), t.j, t.m);
        if x > best {
            best = x;
            arg = t;
        }
    }
    Ok((best, arg))
}

/// Relative treatment effect under independent potential outcomes:
/// `gamma_I = sum_{k>l} p_{k+} p_{+l} - sum_{k<l} p_{k+} p_{+l}`.
pub fn gamma_independent(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
) -> Result<f64, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    let mut gamma = 0.0;
    for k in 0..j_cats {
        for l in 0..j_cats {
            if k > l {
                gamma += p1.probs()[k] * p0.probs()[l];
            } else if k < l {
                gamma -= p1.probs()[k] * p0.probs()[l];
            }
        }
    }
    Ok(gamma)
}

/// A joint coupling of the two potential outcomes: a `J x J` nonnegative
/// matrix with total mass 1, row sums the treated marginal and column sums
/// the control marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointMatrix {
    entries: Vec<Vec<f64>>,
}

impl JointMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self, BoundsError> {
        let j_cats = entries.len();
        if j_cats < 2 {
            return Err(BoundsError::TooFewCategories(j_cats));
        }
        let mut total = 0.0;
        for (row, r) in entries.iter().enumerate() {
            if r.len() != j_cats {
                return Err(BoundsError::NotSquare { row, len: r.len(), categories: j_cats });
            }
            for (col, &v) in r.iter().enumerate() {
                if v < 0.0 || !v.is_finite() {
                    return Err(BoundsError::NegativeMass { index: row * j_cats + col, value: v });
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > JOINT_TOLERANCE {
            return Err(BoundsError::NotAProbabilityVector { sum: total });
        }
        Ok(Self { entries })
    }

    /// The independent coupling `p_kl = p_{k+} p_{+l}`.
    pub fn outer_product(p1: &MarginalDistribution, p0: &MarginalDistribution) -> Result<Self, BoundsError> {
        check_pair(p1, p0)?;
        let entries = p1
            .probs()
            .iter()
            .map(|&a| p0.probs().iter().map(|&b| a * b).collect())
            .collect();
        Self::new(entries)
    }

    pub fn num_categories(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k][l]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let j_cats = self.num_categories();
        let mut sums = vec![0.0; j_cats];
        for row in &self.entries {
            for (l, &v) in row.iter().enumerate() {
                sums[l] += v;
            }
        }
        sums
    }

    pub fn row_marginal(&self) -> Result<MarginalDistribution, BoundsError> {
        MarginalDistribution::new(self.row_sums())
    }

    pub fn col_marginal(&self) -> Result<MarginalDistribution, BoundsError> {
        MarginalDistribution::new(self.col_sums())
    }

    pub fn transpose(&self) -> Self {
        let j_cats = self.num_categories();
        let entries = (0..j_cats)
            .map(|l| (0..j_cats).map(|k| self.entries[k][l]).collect())
            .collect();
        Self { entries }
    }

    /// Relative treatment effect of this coupling:
    /// `sum_{k>l} p_kl - sum_{k<l} p_kl`.
    pub fn gamma(&self) -> f64 {
        let mut gamma = 0.0;
        for (k, row) in self.entries.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                if k > l {
                    gamma += v;
                } else if k < l {
                    gamma -= v;
                }
            }
        }
        gamma
    }

    /// `(tau, eta, gamma)` where `tau = pr{Y(1) >= Y(0)}`,
    /// `eta = pr{Y(1) > Y(0)}`, and `gamma = tau + eta - 1`.
    pub fn tau_eta_gamma(&self) -> (f64, f64, f64) {
        let mut tau = 0.0;
        let mut eta = 0.0;
        for (k, row) in self.entries.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                if k >= l {
                    tau += v;
                }
                if k > l {
                    eta += v;
                }
            }
        }
        (tau, eta, self.gamma())
    }
}

/// One `(j, m)` entry of a delta or xi table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleValue {
    pub j: usize,
    pub m: usize,
    pub value: f64,
}

/// The three bound values for a marginal pair plus the full tables they came
/// from. `argmin_upper`/`argmax_lower` are the lexicographically first
/// optimizing tuples; they are absent for averaged (covariate-sharpened)
/// bounds, where no single tuple applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub gamma_lower: f64,
    pub gamma_independent: f64,
    pub gamma_upper: f64,
    pub argmin_upper: Option<TupleIndex>,
    pub argmax_lower: Option<TupleIndex>,
    pub delta_table: Vec<TupleValue>,
    pub xi_table: Vec<TupleValue>,
}

/// Evaluates all three bounds and the delta/xi tables for a marginal pair.
pub fn bounds_report(
    p1: &MarginalDistribution,
    p0: &MarginalDistribution,
) -> Result<BoundsReport, BoundsError> {
    let j_cats = check_pair(p1, p0)?;
    let mut delta_table = Vec::new();
    let mut xi_table = Vec::new();
    for t in tuple_set(j_cats) {
        delta_table.push(TupleValue {
            j: t.j,
            m: t.m,
            value: delta_unchecked(p1.probs(), p0.probs(), t.j, t.m),
        });
        xi_table.push(TupleValue {
            j: t.j,
            m: t.m,
            value: xi_unchecked(p1.probs(), p0.probs(), t.j, t.m),
        });
    }
    let (upper, argmin) = gamma_upper(p1, p0)?;
    let (lower, argmax) = gamma_lower(p1, p0)?;
    let independent = gamma_independent(p1, p0)?;
    debug_assert!(lower <= independent + 1e-12 && independent <= upper + 1e-12);
    Ok(BoundsReport {
        gamma_lower: lower,
        gamma_independent: independent,
        gamma_upper: upper,
        argmin_upper: Some(argmin),
        argmax_lower: Some(argmax),
        delta_table,
        xi_table,
    })
}

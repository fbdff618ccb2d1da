//! Exact transportation-problem solver used as an independent oracle for the
//! closed-form bounds.
//!
//! The sharp bounds are the optima of `sum sign(k - l) p_kl` over all
//! couplings with the given marginals, a transportation linear program. The
//! solver is a dense-tableau primal simplex with Bland's anti-cycling rule:
//! problem sizes here are tiny (J <= a few dozen), so an O(rows * cols)
//! tableau update per pivot is far below any performance concern and keeps
//! the implementation auditable.

use thiserror::Error;

/// Entering/leaving threshold for reduced costs and pivot elements.
const PIVOT_TOLERANCE: f64 = 1e-11;

/// Allowed imbalance between total supply and total demand.
const BALANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("transport problem is infeasible: {0}")]
    Infeasible(String),
    #[error("transport objective is unbounded")]
    Unbounded,
    #[error("cost matrix is {rows}x{cols} but marginals are {m} and {n} long")]
    ShapeMismatch { rows: usize, cols: usize, m: usize, n: usize },
    #[error("simplex exceeded the pivot budget, numerical trouble")]
    PivotLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A balanced transportation problem: ship `supply[k]` out of each row and
/// `demand[l]` into each column at unit cost `costs[k][l]`.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
}

/// Optimal plan and its objective value. The objective is recomputed from
/// the plan, not accumulated across pivots.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub objective: f64,
    pub plan: Vec<Vec<f64>>,
}

impl TransportProblem {
    fn validate(&self) -> Result<(), TransportError> {
        let (m, n) = (self.supply.len(), self.demand.len());
        if m == 0 || n == 0 {
            return Err(TransportError::Infeasible("empty marginal".into()));
        }
        if self.costs.len() != m || self.costs.iter().any(|r| r.len() != n) {
            let rows = self.costs.len();
            let cols = self.costs.first().map_or(0, |r| r.len());
            return Err(TransportError::ShapeMismatch { rows, cols, m, n });
        }
        for &s in self.supply.iter().chain(self.demand.iter()) {
            if s < 0.0 || !s.is_finite() {
                return Err(TransportError::Infeasible(format!("negative or non-finite mass {s}")));
            }
        }
        let total_supply: f64 = self.supply.iter().sum();
        let total_demand: f64 = self.demand.iter().sum();
        if (total_supply - total_demand).abs() > BALANCE_TOLERANCE {
            return Err(TransportError::Infeasible(format!(
                "supply {total_supply} and demand {total_demand} are not balanced"
            )));
        }
        Ok(())
    }

    /// Northwest-corner starting basis: exactly m + n - 1 cells forming a
    /// spanning tree, degenerate zero cells included when a supply and a
    /// demand run out together.
    fn northwest_corner(&self) -> Vec<(usize, usize)> {
        let (m, n) = (self.supply.len(), self.demand.len());
        let mut s = self.supply.clone();
        let mut d = self.demand.clone();
        let mut cells = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            cells.push((i, j));
            let x = s[i].min(d[j]);
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i < m - 1 && (s[i] <= d[j] || j == n - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(cells.len(), m + n - 1);
        cells
    }

    pub fn solve(&self, sense: Sense) -> Result<TransportSolution, TransportError> {
        self.validate()?;
        let costs: Vec<f64> = match sense {
            Sense::Minimize => self.costs.iter().flatten().copied().collect(),
            Sense::Maximize => self.costs.iter().flatten().map(|c| -c).collect(),
        };
        let plan = self.simplex_min(&costs)?;
        let mut objective = 0.0;
        for (k, row) in plan.iter().enumerate() {
            for (l, &x) in row.iter().enumerate() {
                objective += self.costs[k][l] * x;
            }
        }
        Ok(TransportSolution { objective, plan })
    }

    /// Minimizes `costs . x` over the transportation polytope. Constraint
    /// rows are the m row sums plus the first n - 1 column sums; the last
    /// column sum is implied by mass balance, dropping it makes the
    /// constraint matrix full rank.
    fn simplex_min(&self, costs: &[f64]) -> Result<Vec<Vec<f64>>, TransportError> {
        let (m, n) = (self.supply.len(), self.demand.len());
        let rows = m + n - 1;
        let vars = m * n;
        let rhs = vars;

        let mut tableau = vec![vec![0.0f64; vars + 1]; rows];
        for k in 0..m {
            for l in 0..n {
                tableau[k][k * n + l] = 1.0;
            }
            tableau[k][rhs] = self.supply[k];
        }
        for l in 0..n - 1 {
            for k in 0..m {
                tableau[m + l][k * n + l] = 1.0;
            }
            tableau[m + l][rhs] = self.demand[l];
        }

        // Reduce so each starting basic column is a unit vector.
        let start: Vec<usize> = self.northwest_corner().iter().map(|&(k, l)| k * n + l).collect();
        let mut basis = vec![usize::MAX; rows];
        let mut row_used = vec![false; rows];
        for &v in &start {
            let r = (0..rows)
                .find(|&r| !row_used[r] && tableau[r][v].abs() > PIVOT_TOLERANCE)
                .expect("northwest-corner basis is nonsingular");
            pivot(&mut tableau, r, v);
            basis[r] = v;
            row_used[r] = true;
        }

        let mut in_basis = vec![false; vars];
        for &v in &basis {
            in_basis[v] = true;
        }

        // Bland's rule caps the pivot count at the number of bases; this
        // budget only trips on numerical breakdown.
        let budget = 1000 * (rows + 1) * (vars + 1);
        for _ in 0..budget {
            // Reduced cost of nonbasic v: c_v - c_B . column_v.
            let mut entering = None;
            for v in 0..vars {
                if in_basis[v] {
                    continue;
                }
                let mut reduced = costs[v];
                for r in 0..rows {
                    let a = tableau[r][v];
                    if a != 0.0 {
                        reduced -= costs[basis[r]] * a;
                    }
                }
                if reduced < -PIVOT_TOLERANCE {
                    entering = Some(v);
                    break;
                }
            }
            let Some(v) = entering else {
                let mut plan = vec![vec![0.0f64; n]; m];
                for r in 0..rows {
                    let x = tableau[r][rhs];
                    plan[basis[r] / n][basis[r] % n] = if x < 0.0 { 0.0 } else { x };
                }
                #[cfg(debug_assertions)]
                self.check_plan(&plan);
                return Ok(plan);
            };

            // Ratio test, ties broken by smallest leaving variable index.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..rows {
                let a = tableau[r][v];
                if a > PIVOT_TOLERANCE {
                    let ratio = tableau[r][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((br, bratio)) => {
                            ratio < bratio - PIVOT_TOLERANCE
                                || (ratio < bratio + PIVOT_TOLERANCE && basis[r] < basis[br])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(TransportError::Unbounded);
            };
            in_basis[basis[r]] = false;
            in_basis[v] = true;
            pivot(&mut tableau, r, v);
            basis[r] = v;
        }
        Err(TransportError::PivotLimit)
    }

    #[cfg(debug_assertions)]
    fn check_plan(&self, plan: &[Vec<f64>]) {
        for (k, row) in plan.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            debug_assert!((sum - self.supply[k]).abs() <= 1e-8, "row {k} sum {sum}");
        }
        for l in 0..self.demand.len() {
            let sum: f64 = plan.iter().map(|r| r[l]).sum();
            debug_assert!((sum - self.demand[l]).abs() <= 1e-8, "col {l} sum {sum}");
        }
    }
}

fn pivot(tableau: &mut [Vec<f64>], r: usize, v: usize) {
    let scale = tableau[r][v];
    for x in tableau[r].iter_mut() {
        *x /= scale;
    }
    let pivot_row = tableau[r].clone();
    for (rr, row) in tableau.iter_mut().enumerate() {
        if rr == r {
            continue;
        }
        let factor = row[v];
        if factor != 0.0 {
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                *x -= factor * p;
            }
        }
    }
}

/// Cost matrix `sign(k - l)` whose transportation optima are the sharp
/// bounds on the relative treatment effect.
pub fn sign_costs(categories: usize) -> Vec<Vec<f64>> {
    (0..categories)
        .map(|k| {
            (0..categories)
                .map(|l| {
                    if k > l {
                        1.0
                    } else if k < l {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Sharp bounds `(gamma_L, gamma_U)` computed by linear programming, for
/// cross-checking the closed forms.
pub fn lp_gamma_bounds(p1: &[f64], p0: &[f64]) -> Result<(f64, f64), TransportError> {
    let problem = TransportProblem {
        supply: p1.to_vec(),
        demand: p0.to_vec(),
        costs: sign_costs(p1.len()),
    };
    let lower = problem.solve(Sense::Minimize)?.objective;
    let upper = problem.solve(Sense::Maximize)?.objective;
    Ok((lower, upper))
}

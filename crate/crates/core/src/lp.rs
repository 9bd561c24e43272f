//! Dense two-phase primal simplex for small linear programs.
//!
//! Used for feasibility and Chebyshev-center problems on portfolio domains,
//! for min/max scores over weight regions, and as an independent reference
//! solver in tests. Problems here have at most a few hundred rows.

use ndarray::{Array1, Array2};

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

/// `min cᵀx  s.t.  A_ub x ≤ b_ub,  A_eq x = b_eq,  x_j ≥ 0` unless `free[j]`.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub objective: Array1<T>,
    pub a_ub: Array2<T>,
    pub b_ub: Array1<T>,
    pub a_eq: Array2<T>,
    pub b_eq: Array1<T>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Array1<T>,
    pub objective: T,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Array1<T>) -> Self {
        let n = objective.len();
        Self {
            objective,
            a_ub: Array2::zeros((0, n)),
            b_ub: Array1::zeros(0),
            a_eq: Array2::zeros((0, n)),
            b_eq: Array1::zeros(0),
            free: vec![false; n],
        }
    }

    pub fn with_inequalities(mut self, a: Array2<T>, b: Array1<T>) -> Self {
        self.a_ub = a;
        self.b_ub = b;
        self
    }

    pub fn with_equalities(mut self, a: Array2<T>, b: Array1<T>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_free(mut self, free: Vec<bool>) -> Self {
        self.free = free;
        self
    }

    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        let n = self.objective.len();
        assert_eq!(self.a_ub.ncols(), n, "A_ub column count");
        assert_eq!(self.a_eq.ncols(), n, "A_eq column count");
        assert_eq!(self.free.len(), n, "free flag count");

        // Column layout: structural (+ negative parts of free vars), slacks, artificials.
        let mut col_of = Vec::with_capacity(n);
        let mut n_struct = 0;
        for j in 0..n {
            col_of.push(n_struct);
            n_struct += if self.free[j] { 2 } else { 1 };
        }
        let m_ub = self.a_ub.nrows();
        let m_eq = self.a_eq.nrows();
        let m = m_ub + m_eq;
        let n_slack = m_ub;
        let n_cols = n_struct + n_slack + m;
        let rhs_col = n_cols;

        let mut tab = Array2::<T>::zeros((m + 1, n_cols + 1));
        let mut basis = vec![0usize; m];
        for r in 0..m {
            let (row, rhs) = if r < m_ub {
                (self.a_ub.row(r), self.b_ub[r])
            } else {
                (self.a_eq.row(r - m_ub), self.b_eq[r - m_ub])
            };
            let sign = if rhs < T::zero() { -T::one() } else { T::one() };
            for j in 0..n {
                let v = row[j] * sign;
                tab[[r, col_of[j]]] = v;
                if self.free[j] {
                    tab[[r, col_of[j] + 1]] = -v;
                }
            }
            if r < m_ub {
                tab[[r, n_struct + r]] = sign;
            }
            tab[[r, n_struct + n_slack + r]] = T::one();
            tab[[r, rhs_col]] = rhs * sign;
            basis[r] = n_struct + n_slack + r;
        }

        let scale = self
            .a_ub
            .iter()
            .chain(self.a_eq.iter())
            .chain(self.b_ub.iter())
            .chain(self.b_eq.iter())
            .fold(T::one(), |acc, v| acc.max(v.abs()));
        let tol = T::tolerance() * scale;

        // Phase 1: minimize the sum of artificials.
        let art_start = n_struct + n_slack;
        for c in 0..=n_cols {
            let mut s = T::zero();
            for r in 0..m {
                s += tab[[r, c]];
            }
            tab[[m, c]] = if (art_start..n_cols).contains(&c) { T::zero() } else { -s };
        }
        run_simplex(&mut tab, &mut basis, n_cols, n_cols, tol)?;
        if -tab[[m, rhs_col]] > tol * T::from_usize_lossy(m.max(1)) {
            return Err(LpError::Infeasible);
        }
        // Drive artificial variables out of the basis where possible.
        for r in 0..m {
            if basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab[[r, c]].abs() > tol) {
                    pivot(&mut tab, &mut basis, r, c);
                }
            }
        }

        // Phase 2 objective row.
        for c in 0..=n_cols {
            tab[[m, c]] = T::zero();
        }
        for j in 0..n {
            tab[[m, col_of[j]]] = self.objective[j];
            if self.free[j] {
                tab[[m, col_of[j] + 1]] = -self.objective[j];
            }
        }
        for r in 0..m {
            let b = basis[r];
            let cb = tab[[m, b]];
            if cb != T::zero() {
                for c in 0..=n_cols {
                    let v = tab[[r, c]];
                    tab[[m, c]] -= cb * v;
                }
            }
        }
        run_simplex(&mut tab, &mut basis, art_start, n_cols, tol)?;

        let mut z = vec![T::zero(); n_cols];
        for r in 0..m {
            z[basis[r]] = tab[[r, rhs_col]];
        }
        let x = Array1::from_iter((0..n).map(|j| {
            if self.free[j] {
                z[col_of[j]] - z[col_of[j] + 1]
            } else {
                z[col_of[j]]
            }
        }));
        let objective = x.iter().zip(self.objective.iter()).map(|(a, b)| *a * *b).sum();
        Ok(LpSolution { x, objective })
    }
}

fn pivot<T: Scalar>(tab: &mut Array2<T>, basis: &mut [usize], r: usize, c: usize) {
    let width = tab.ncols();
    let p = tab[[r, c]];
    for k in 0..width {
        tab[[r, k]] /= p;
    }
    for i in 0..tab.nrows() {
        if i == r {
            continue;
        }
        let f = tab[[i, c]];
        if f == T::zero() {
            continue;
        }
        for k in 0..width {
            let v = tab[[r, k]];
            tab[[i, k]] -= f * v;
        }
    }
    basis[r] = c;
}

/// Runs primal simplex on the tableau; only columns `< enter_limit` may enter.
fn run_simplex<T: Scalar>(
    tab: &mut Array2<T>,
    basis: &mut [usize],
    enter_limit: usize,
    n_cols: usize,
    tol: T,
) -> Result<(), LpError> {
    let m = basis.len();
    let max_iter = 50 * (m + n_cols) + 1000;
    let mut degenerate_streak = 0usize;
    for _ in 0..max_iter {
        let bland = degenerate_streak > 20;
        let mut enter = None;
        let mut best = -tol;
        for c in 0..enter_limit {
            let rc = tab[[m, c]];
            if rc < best {
                enter = Some(c);
                if bland {
                    break;
                }
                best = rc;
            }
        }
        let Some(c) = enter else {
            return Ok(());
        };
        let mut leave = None;
        let mut best_ratio = T::infinity();
        for r in 0..m {
            let a = tab[[r, c]];
            if a > tol {
                let ratio = tab[[r, n_cols]] / a;
                let better = ratio < best_ratio - tol
                    || (ratio <= best_ratio + tol
                        && leave.is_some_and(|l: usize| basis[r] < basis[l]));
                if leave.is_none() || better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(r) = leave else {
            return Err(LpError::Unbounded);
        };
        if best_ratio <= tol {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }
        pivot(tab, basis, r, c);
    }
    Err(LpError::IterationLimit)
}

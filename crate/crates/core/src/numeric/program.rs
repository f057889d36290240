use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Convex program with a diagonal Hessian:
///
/// ```text
/// minimize    ½ xᵀ diag(quad_diag) x + linᵀx
/// subject to  ineq_g x ≤ ineq_h
///             eq_a   x = eq_b
/// ```
///
/// Variables `n_dense..n` form a *separable tail*: each inequality row may
/// touch at most one of them and equality rows may touch none. The
/// interior-point solver eliminates the tail block in closed form, which is
/// what keeps per-scenario lifting variables cheap when there are many
/// scenarios.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub quad_diag: Vec<f64>,
    pub lin: Vec<f64>,
    pub ineq_g: SparseMatrix,
    pub ineq_h: Vec<f64>,
    pub eq_a: SparseMatrix,
    pub eq_b: Vec<f64>,
    pub n_dense: usize,
}

impl ConvexProgram {
    /// Empty program over `n` variables, all dense.
    pub fn new(n: usize) -> Self {
        ConvexProgram {
            quad_diag: vec![0.0; n],
            lin: vec![0.0; n],
            ineq_g: SparseMatrix::new(n),
            ineq_h: Vec::new(),
            eq_a: SparseMatrix::new(n),
            eq_b: Vec::new(),
            n_dense: n,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.lin.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_h.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_b.len()
    }

    pub fn add_ineq<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I, rhs: f64) {
        self.ineq_g.push_row(row);
        self.ineq_h.push(rhs);
    }

    pub fn add_eq<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I, rhs: f64) {
        self.eq_a.push_row(row);
        self.eq_b.push(rhs);
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.quad_diag
            .iter()
            .zip(&self.lin)
            .zip(x)
            .map(|((p, q), v)| 0.5 * p * v * v + q * v)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let bad = |msg: String| Err(Error::InvalidProgram(msg));
        if self.quad_diag.len() != n {
            return bad(format!("quad_diag has length {} but n = {n}", self.quad_diag.len()));
        }
        if self.ineq_g.ncols() != n || self.eq_a.ncols() != n {
            return bad("constraint matrix column count differs from n".into());
        }
        if self.ineq_g.nrows() != self.ineq_h.len() || self.eq_a.nrows() != self.eq_b.len() {
            return bad("constraint row count differs from right-hand side length".into());
        }
        if self.n_dense > n {
            return bad("n_dense exceeds n".into());
        }
        if let Some(j) = self.quad_diag.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad(format!("quad_diag[{j}] is negative or not finite"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.lin) || !finite(&self.ineq_h) || !finite(&self.eq_b) {
            return bad("non-finite data".into());
        }
        for i in 0..self.ineq_g.nrows() {
            let (cols, vals) = self.ineq_g.row(i);
            if !finite(vals) {
                return bad(format!("non-finite entry in inequality row {i}"));
            }
            if cols.iter().filter(|&&c| c >= self.n_dense).count() > 1 {
                return bad(format!("inequality row {i} couples two tail variables"));
            }
        }
        for i in 0..self.eq_a.nrows() {
            let (cols, vals) = self.eq_a.row(i);
            if !finite(vals) {
                return bad(format!("non-finite entry in equality row {i}"));
            }
            if cols.iter().any(|&c| c >= self.n_dense) {
                return bad(format!("equality row {i} touches a tail variable"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

/// Primal-dual solution. Multipliers follow the Lagrangian
/// `f(x) + ineq_dualsᵀ(Gx − h) + eq_dualsᵀ(Ax − b)`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub obj: f64,
    pub ineq_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub iterations: usize,
}

impl Solution {
    /// Lagrange dual function evaluated at the returned multipliers.
    ///
    /// Minimizes the Lagrangian over `x` in closed form; coordinates with a
    /// zero Hessian entry contribute only through their (ideally zero)
    /// reduced cost, which is returned separately as `residual`.
    pub fn dual_objective(&self, prog: &ConvexProgram) -> (f64, f64) {
        let mut c = prog.lin.clone();
        prog.ineq_g.mul_t_add(&self.ineq_duals, &mut c);
        prog.eq_a.mul_t_add(&self.eq_duals, &mut c);
        let mut value = -dot(&prog.ineq_h, &self.ineq_duals) - dot(&prog.eq_b, &self.eq_duals);
        let mut residual = 0.0f64;
        for (cj, pj) in c.iter().zip(&prog.quad_diag) {
            if *pj > 0.0 {
                value -= 0.5 * cj * cj / pj;
            } else {
                residual = residual.max(cj.abs());
            }
        }
        (value, residual)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Dense LP and convex-QP machinery. Every subproblem in the crate routes
//! through here.

mod ipm;
mod program;
mod simplex;
mod sparse;

pub use ipm::{solve, solve_with, Settings};
pub use program::{ConvexProgram, Solution, SolveStatus};
pub use simplex::{solve_lp, LinearProgram, LpSolution, LpStatus};
pub use sparse::SparseMatrix;

/// Outcome of a Phase-1 feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible,
}

/// Phase-1 LP over free variables: is `{x : Gx ≤ h, Ax = b}` nonempty?
///
/// Minimizes total artificial violation with the simplex method; the set is
/// declared feasible iff that minimum is at most 1e-9 (scaled by the
/// right-hand side magnitude).
pub fn feasible(g: &SparseMatrix, h: &[f64], a: &SparseMatrix, b: &[f64]) -> Feasibility {
    let n = g.ncols().max(a.ncols());
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }
    lp.le = g.clone();
    lp.le_rhs = h.to_vec();
    lp.eq = a.clone();
    lp.eq_rhs = b.to_vec();
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Feasibility::Feasible(sol.x),
        _ => Feasibility::Infeasible,
    }
}

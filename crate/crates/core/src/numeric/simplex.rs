//! Dense bounded-variable primal simplex.
//!
//! Used for branch-and-bound relaxations of the master problem (vertex
//! solutions keep integral points integral) and for every Phase-1
//! feasibility question in the crate.

use super::sparse::SparseMatrix;

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

/// `minimize costᵀx  s.t.  le·x ≤ le_rhs,  eq·x = eq_rhs,  lower ≤ x ≤ upper`.
///
/// Bounds may be infinite.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub le: SparseMatrix,
    pub le_rhs: Vec<f64>,
    pub eq: SparseMatrix,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `n` variables with bounds `[0, ∞)` and zero cost.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            cost: vec![0.0; n],
            le: SparseMatrix::new(n),
            le_rhs: Vec::new(),
            eq: SparseMatrix::new(n),
            eq_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_le<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I, rhs: f64) {
        self.le.push_row(row);
        self.le_rhs.push(rhs);
    }

    pub fn add_eq<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I, rhs: f64) {
        self.eq.push_row(row);
        self.eq_rhs.push(rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

/// Result of [`solve_lp`]. Row duals are shadow prices `∂obj/∂rhs`, so they
/// are `≤ 0` on binding `≤` rows of a minimization.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub obj: f64,
    pub le_duals: Vec<f64>,
    pub eq_duals: Vec<f64>,
    pub iterations: usize,
}

/// How an internal (nonnegative) column maps back onto an original variable.
#[derive(Debug, Clone, Copy)]
struct ColMap {
    orig: usize,
    sign: f64,
}

struct Tableau {
    m: usize,
    ncols: usize,
    t: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    allowed: Vec<bool>,
    d: Vec<f64>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterLimit,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn reset_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + q];
        for j in 0..nc {
            self.t[r * nc + j] /= p;
        }
        self.t[r * nc + q] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        for row in before.chunks_mut(nc).chain(after.chunks_mut(nc)) {
            let f = row[q];
            if f != 0.0 {
                for (a, &b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (a, &b) in self.d.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basic_row[leaving] = None;
        self.basis[r] = q;
        self.basic_row[q] = Some(r);
    }

    fn run(&mut self, max_iter: usize) -> Outcome {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Outcome::IterLimit;
            }
            let bland = degenerate > DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if self.basic_row[j].is_some() || !self.allowed[j] {
                    continue;
                }
                let dj = self.d[j];
                let score = if self.at_upper[j] { dj } else { -dj };
                if score > DUAL_TOL {
                    if bland {
                        entering = Some((j, score));
                        break;
                    }
                    if entering.is_none_or(|(_, s)| score > s) {
                        entering = Some((j, score));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Outcome::Optimal;
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            let mut step = self.upper[q];
            let mut leave: Option<(usize, bool, f64)> = None;
            for i in 0..self.m {
                let a = dir * self.at(i, q);
                let (ratio, to_upper) = if a > PIVOT_TOL {
                    (self.xb[i].max(0.0) / a, false)
                } else if a < -PIVOT_TOL {
                    let ub = self.upper[self.basis[i]];
                    if ub.is_finite() {
                        ((ub - self.xb[i]).max(0.0) / -a, true)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let better = match leave {
                    None => ratio < step || (ratio == step && step.is_finite()),
                    Some((r, _, _)) => {
                        if ratio < step - 1e-12 {
                            true
                        } else if ratio <= step + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                a.abs() > self.at(r, q).abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = step.min(ratio);
                    leave = Some((i, to_upper, ratio));
                }
            }
            if !step.is_finite() {
                return Outcome::Unbounded;
            }
            self.iterations += 1;
            if step < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let entering_value = if self.at_upper[q] { self.upper[q] } else { 0.0 } + dir * step;
            match leave {
                Some((r, to_upper, ratio)) if ratio <= self.upper[q] => {
                    for i in 0..self.m {
                        self.xb[i] -= dir * self.at(i, q) * ratio;
                    }
                    let leaving = self.basis[r];
                    self.at_upper[leaving] = to_upper;
                    self.pivot(r, q);
                    self.xb[r] = entering_value;
                    self.at_upper[q] = false;
                }
                _ => {
                    // bound flip
                    for i in 0..self.m {
                        self.xb[i] -= dir * self.at(i, q) * step;
                    }
                    self.at_upper[q] = !self.at_upper[q];
                }
            }
        }
    }

    fn column_value(&self, j: usize) -> f64 {
        match self.basic_row[j] {
            Some(r) => self.xb[r],
            None if self.at_upper[j] => self.upper[j],
            None => 0.0,
        }
    }
}

/// Solves a linear program to a vertex optimum.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let n = lp.n_vars();
    assert_eq!(lp.lower.len(), n);
    assert_eq!(lp.upper.len(), n);
    assert_eq!(lp.le.nrows(), lp.le_rhs.len());
    assert_eq!(lp.eq.nrows(), lp.eq_rhs.len());
    let m_le = lp.le.nrows();
    let m = m_le + lp.eq.nrows();

    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        obj: f64::NAN,
        le_duals: vec![0.0; m_le],
        eq_duals: vec![0.0; m - m_le],
        iterations,
    };

    // structural columns
    let mut offset = vec![0.0; n];
    let mut cols: Vec<ColMap> = Vec::with_capacity(n);
    let mut first_col = vec![0usize; n];
    let mut col_upper: Vec<f64> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        first_col[j] = cols.len();
        if l.is_finite() {
            if u < l - PHASE1_TOL {
                return infeasible(0);
            }
            offset[j] = l;
            cols.push(ColMap { orig: j, sign: 1.0 });
            col_upper.push((u - l).max(0.0));
        } else if u.is_finite() {
            offset[j] = u;
            cols.push(ColMap { orig: j, sign: -1.0 });
            col_upper.push(f64::INFINITY);
        } else {
            cols.push(ColMap { orig: j, sign: 1.0 });
            col_upper.push(f64::INFINITY);
            cols.push(ColMap { orig: j, sign: -1.0 });
            col_upper.push(f64::INFINITY);
        }
    }
    let n_struct = cols.len();
    let slack0 = n_struct;
    let art0 = slack0 + m_le;
    let ncols = art0 + m;

    let mut t = vec![0.0; m * ncols];
    let mut rhs = vec![0.0; m];
    let mut flip = vec![1.0; m];
    for i in 0..m {
        let (mat, r, b) = if i < m_le {
            (&lp.le, i, lp.le_rhs[i])
        } else {
            (&lp.eq, i - m_le, lp.eq_rhs[i - m_le])
        };
        let (cidx, vals) = mat.row(r);
        let mut bi = b;
        let row = &mut t[i * ncols..(i + 1) * ncols];
        for (&j, &a) in cidx.iter().zip(vals) {
            bi -= a * offset[j];
            let c0 = first_col[j];
            row[c0] += a * cols[c0].sign;
            if c0 + 1 < n_struct && cols[c0 + 1].orig == j {
                row[c0 + 1] += a * cols[c0 + 1].sign;
            }
        }
        if i < m_le {
            row[slack0 + i] = 1.0;
        }
        if bi < 0.0 {
            flip[i] = -1.0;
            for v in row.iter_mut() {
                *v = -*v;
            }
            bi = -bi;
        }
        row[art0 + i] = 1.0;
        rhs[i] = bi;
    }

    let mut upper = col_upper;
    upper.extend(std::iter::repeat_n(f64::INFINITY, m_le));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));

    let mut basis = vec![0usize; m];
    let mut init_col = vec![0usize; m];
    let mut basic_row = vec![None; ncols];
    let mut allowed = vec![true; ncols];
    let mut n_art = 0usize;
    for i in 0..m {
        let c = if i < m_le && flip[i] > 0.0 {
            allowed[art0 + i] = false;
            upper[art0 + i] = 0.0;
            slack0 + i
        } else {
            n_art += 1;
            art0 + i
        };
        basis[i] = c;
        init_col[i] = c;
        basic_row[c] = Some(i);
    }

    let mut tab = Tableau {
        m,
        ncols,
        t,
        xb: rhs.clone(),
        basis,
        basic_row,
        upper,
        at_upper: vec![false; ncols],
        allowed,
        d: vec![0.0; ncols],
        iterations: 0,
    };
    let max_iter = 50 * (m + ncols) + 1000;

    if n_art > 0 {
        let mut c1 = vec![0.0; ncols];
        for i in 0..m {
            if tab.basis[i] >= art0 {
                c1[art0 + i] = 1.0;
            }
        }
        tab.reset_costs(&c1);
        if let Outcome::IterLimit = tab.run(max_iter) {
            let mut sol = infeasible(tab.iterations);
            sol.status = LpStatus::IterLimit;
            return sol;
        }
        let infeas: f64 = (0..m).map(|i| c1[art0 + i] * tab.column_value(art0 + i)).sum();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > PHASE1_TOL * scale {
            return infeasible(tab.iterations);
        }
        for i in 0..m {
            let c = art0 + i;
            tab.allowed[c] = false;
            tab.upper[c] = 0.0;
            tab.at_upper[c] = false;
            if let Some(r) = tab.basic_row[c] {
                tab.xb[r] = 0.0;
            }
        }
    }

    let mut c2 = vec![0.0; ncols];
    for (k, cm) in cols.iter().enumerate() {
        c2[k] = lp.cost[cm.orig] * cm.sign;
    }
    tab.reset_costs(&c2);
    let outcome = tab.run(max_iter);

    let mut x = offset.clone();
    for (k, cm) in cols.iter().enumerate() {
        x[cm.orig] += cm.sign * tab.column_value(k);
    }
    // snap onto finite bounds
    for j in 0..n {
        if x[j] < lp.lower[j] {
            x[j] = lp.lower[j];
        }
        if x[j] > lp.upper[j] {
            x[j] = lp.upper[j];
        }
    }
    let obj = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();

    let mut duals = vec![0.0; m];
    for i in 0..m {
        let col = init_col[i];
        let yf: f64 = (0..m).map(|k| c2[tab.basis[k]] * tab.at(k, col)).sum();
        duals[i] = flip[i] * yf;
    }
    let eq_duals = duals.split_off(m_le);
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::IterLimit => LpStatus::IterLimit,
    };
    LpSolution {
        status,
        x,
        obj,
        le_duals: duals,
        eq_duals,
        iterations: tab.iterations,
    }
}

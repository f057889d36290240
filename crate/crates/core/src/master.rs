//! Master problem: `min θ` over binary selections subject to the lower bound,
//! accumulated cuts and the cardinality limit, solved by LP-based
//! branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::SelectionVector;
use crate::numeric::{solve_lp, LinearProgram, LpStatus};

const INT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cut {
    /// `θ ≥ intercept + gradᵀ(z − origin)`.
    Optimality { intercept: f64, grad: Vec<f64>, origin: SelectionVector },
    /// `excludedᵀ(1 − z) + (1 − excluded)ᵀz ≥ 1`.
    NoGood { excluded: SelectionVector },
}

impl Cut {
    /// Right-hand side of an optimality cut at `z`; `None` for no-goods.
    pub fn value_at(&self, z: &[f64]) -> Option<f64> {
        match self {
            Cut::Optimality { intercept, grad, origin } => Some(
                intercept
                    + grad
                        .iter()
                        .zip(z)
                        .zip(origin.bits())
                        .map(|((g, z), &o)| g * (z - if o { 1.0 } else { 0.0 }))
                        .sum::<f64>(),
            ),
            Cut::NoGood { .. } => None,
        }
    }

    pub fn excludes(&self, z: &SelectionVector) -> bool {
        matches!(self, Cut::NoGood { excluded } if excluded == z)
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Cut::Optimality { intercept, grad, origin } => {
                if grad.len() != n || origin.len() != n {
                    return Err(Error::Parameter("cut dimension differs from asset count".into()));
                }
                if !intercept.is_finite() || grad.iter().any(|g| !(g.is_finite() && *g <= 0.0)) {
                    return Err(Error::Parameter("optimality cut needs a finite intercept and gradient ≤ 0".into()));
                }
            }
            Cut::NoGood { excluded } => {
                if excluded.len() != n {
                    return Err(Error::Parameter("cut dimension differs from asset count".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MasterState {
    cuts: Vec<Cut>,
    theta_lb: f64,
    n_assets: usize,
    k: usize,
    /// LP relaxations solved over the lifetime of this state.
    pub node_count: u64,
}

impl MasterState {
    pub fn new(n_assets: usize, k: usize, theta_lb: f64) -> Result<Self> {
        if !theta_lb.is_finite() {
            return Err(Error::Parameter(format!("theta_lb = {theta_lb} must be finite")));
        }
        if k < 1 || k > n_assets {
            return Err(Error::Parameter(format!("k = {k} is outside [1, {n_assets}]")));
        }
        Ok(MasterState { cuts: Vec::new(), theta_lb, n_assets, k, node_count: 0 })
    }

    pub fn add_cut(&mut self, cut: Cut) -> Result<()> {
        cut.validate(self.n_assets)?;
        self.cuts.push(cut);
        Ok(())
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn theta_lb(&self) -> f64 {
        self.theta_lb
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `max(θ_LB, every optimality cut at z)`.
    pub fn theta_at(&self, z: &SelectionVector) -> f64 {
        let zf = z.as_f64();
        self.cuts
            .iter()
            .filter_map(|c| c.value_at(&zf))
            .fold(self.theta_lb, f64::max)
    }

    pub fn is_excluded(&self, z: &SelectionVector) -> bool {
        self.cuts.iter().any(|c| c.excludes(z))
    }
}

#[derive(Debug, Clone)]
pub struct MasterOptions {
    pub node_limit: usize,
    pub deadline: Option<Instant>,
    /// Objective values closer than this count as tied; ties go to the
    /// lexicographically smallest `z`.
    pub tie_tol: f64,
}

impl Default for MasterOptions {
    fn default() -> Self {
        MasterOptions { node_limit: 1_000_000, deadline: None, tie_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MasterOutcome {
    Optimal {
        z: SelectionVector,
        theta: f64,
        /// Smallest bound over the leaves of the search tree; a valid lower
        /// bound on the master optimum even when callbacks added cuts midway.
        bound: f64,
    },
    Infeasible,
}

/// Reply of a callback invoked at integer-feasible nodes.
#[derive(Debug, Clone)]
pub enum Verdict {
    Accept,
    /// Add the cuts and re-solve the node.
    Reject(Vec<Cut>),
}

pub fn master_solve(state: &mut MasterState) -> Result<MasterOutcome> {
    master_solve_with(state, &MasterOptions::default(), None)
}

#[derive(Debug, Clone)]
struct Node {
    bound: f64,
    fixed: Vec<Option<bool>>,
    lexmin: SelectionVector,
    id: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed so the max-heap pops the smallest (bound, lexmin, id)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.lexmin.cmp(&self.lexmin))
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn lexmin(fixed: &[Option<bool>]) -> SelectionVector {
    SelectionVector::new(fixed.iter().map(|f| f.unwrap_or(false)).collect())
}

struct Incumbent {
    z: SelectionVector,
    theta: f64,
}

/// Branch-and-bound over `z`. With a callback, every integer-feasible node
/// is offered to it before being accepted (single-tree operation).
pub fn master_solve_with(
    state: &mut MasterState,
    opts: &MasterOptions,
    mut callback: Option<&mut dyn FnMut(&SelectionVector, f64, &MasterState) -> Result<Verdict>>,
) -> Result<MasterOutcome> {
    let n = state.n_assets;
    let k = state.k;
    let tol = opts.tie_tol;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    let root = vec![None; n];
    heap.push(Node { bound: f64::NEG_INFINITY, lexmin: lexmin(&root), fixed: root, id: next_id });
    next_id += 1;
    let mut incumbent: Option<Incumbent> = None;
    let mut leaf_bound = f64::INFINITY;
    let mut solved = 0usize;

    let prune = |inc: &Option<Incumbent>, bound: f64, lex: &SelectionVector| match inc {
        None => false,
        Some(i) => bound > i.theta + tol * (1.0 + i.theta.abs()) || (bound >= i.theta - tol * (1.0 + i.theta.abs()) && *lex >= i.z),
    };

    while let Some(node) = heap.pop() {
        if prune(&incumbent, node.bound, &node.lexmin) {
            leaf_bound = leaf_bound.min(node.bound);
            continue;
        }
        if let Some(d) = opts.deadline {
            if Instant::now() >= d {
                return Err(Error::TimeLimit);
            }
        }
        let mut fixed = node.fixed;
        let ones = fixed.iter().filter(|f| **f == Some(true)).count();
        if ones > k {
            continue;
        }
        if ones == k {
            for f in fixed.iter_mut() {
                f.get_or_insert(false);
            }
        }
        let lex = lexmin(&fixed);

        loop {
            if solved >= opts.node_limit {
                return Err(Error::NodeLimit {
                    limit: opts.node_limit,
                    incumbent: incumbent.map(|i| (i.z.bits().to_vec(), i.theta)),
                });
            }
            solved += 1;
            state.node_count += 1;
            let Some((bound, zval)) = solve_relaxation(state, &fixed)? else {
                break;
            };
            if prune(&incumbent, bound, &lex) {
                leaf_bound = leaf_bound.min(bound);
                break;
            }
            let integral = zval.iter().all(|v| v.min(1.0 - v) <= INT_TOL);
            if !integral {
                // most fractional, ties to the lowest index
                let mut best = (f64::NEG_INFINITY, 0);
                for (j, v) in zval.iter().enumerate() {
                    if fixed[j].is_none() {
                        let frac = v.min(1.0 - v);
                        if frac > best.0 + 1e-12 {
                            best = (frac, j);
                        }
                    }
                }
                push_children(&mut heap, &mut next_id, &fixed, best.1, bound);
                break;
            }
            let z = SelectionVector::new(zval.iter().map(|&v| v > 0.5).collect());
            let theta = state.theta_at(&z);
            if let Some(cb) = callback.as_mut() {
                match cb(&z, theta, state)? {
                    Verdict::Accept => {}
                    Verdict::Reject(cuts) => {
                        if cuts.is_empty() {
                            return Err(Error::Parameter("callback rejected a node without adding cuts".into()));
                        }
                        for c in cuts {
                            state.add_cut(c)?;
                        }
                        continue;
                    }
                }
            }
            let better = match &incumbent {
                None => true,
                Some(i) => {
                    let t = tol * (1.0 + i.theta.abs());
                    theta < i.theta - t || (theta <= i.theta + t && z < i.z)
                }
            };
            if better {
                incumbent = Some(Incumbent { z: z.clone(), theta });
            }
            // other points of this subtree may tie with z and be smaller
            match fixed.iter().position(Option::is_none) {
                Some(j) if lex < z => push_children(&mut heap, &mut next_id, &fixed, j, bound),
                _ => leaf_bound = leaf_bound.min(theta.min(bound)),
            }
            break;
        }
    }

    Ok(match incumbent {
        Some(i) => MasterOutcome::Optimal {
            theta: state.theta_at(&i.z),
            bound: leaf_bound.min(i.theta),
            z: i.z,
        },
        None => MasterOutcome::Infeasible,
    })
}

fn push_children(heap: &mut BinaryHeap<Node>, next_id: &mut u64, fixed: &[Option<bool>], j: usize, bound: f64) {
    for v in [false, true] {
        let mut f = fixed.to_vec();
        f[j] = Some(v);
        heap.push(Node { bound, lexmin: lexmin(&f), fixed: f, id: *next_id });
        *next_id += 1;
    }
}

/// LP relaxation with fixed coordinates substituted out. Returns the bound
/// and the full `z` vector, or `None` if the node is infeasible.
fn solve_relaxation(state: &MasterState, fixed: &[Option<bool>]) -> Result<Option<(f64, Vec<f64>)>> {
    let n = state.n_assets;
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let mut col = vec![usize::MAX; n];
    for (c, &j) in free.iter().enumerate() {
        col[j] = c;
    }
    let nf = free.len();
    let th = nf;
    let fixed_val = |j: usize| match fixed[j] {
        Some(true) => 1.0,
        _ => 0.0,
    };

    let mut lp = LinearProgram::new(nf + 1);
    for c in 0..nf {
        lp.set_bounds(c, 0.0, 1.0);
    }
    lp.set_bounds(th, state.theta_lb, f64::INFINITY);
    lp.cost[th] = 1.0;

    let ones = fixed.iter().filter(|f| **f == Some(true)).count();
    if nf > 0 {
        lp.add_le((0..nf).map(|c| (c, 1.0)), (state.k - ones) as f64);
    }
    for cut in &state.cuts {
        match cut {
            Cut::Optimality { intercept, grad, origin } => {
                // gᵀz − θ ≤ gᵀz₀ − f₀
                let mut rhs = -intercept;
                for j in 0..n {
                    if origin.get(j) {
                        rhs += grad[j];
                    }
                    if fixed[j].is_some() {
                        rhs -= grad[j] * fixed_val(j);
                    }
                }
                let row = free.iter().map(|&j| (col[j], grad[j])).chain([(th, -1.0)]);
                lp.add_le(row, rhs);
            }
            Cut::NoGood { excluded } => {
                // Σ_{z₀=1} z − Σ_{z₀=0} z ≤ |z₀| − 1
                let mut rhs = excluded.cardinality() as f64 - 1.0;
                for j in 0..n {
                    if fixed[j].is_some() {
                        rhs -= if excluded.get(j) { 1.0 } else { -1.0 } * fixed_val(j);
                    }
                }
                if nf == 0 {
                    if rhs < -0.5 {
                        return Ok(None);
                    }
                    continue;
                }
                let row = free.iter().map(|&j| (col[j], if excluded.get(j) { 1.0 } else { -1.0 }));
                lp.add_le(row, rhs);
            }
        }
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        s => return Err(Error::SolverFailure(format!("master relaxation ended with status {s:?}"))),
    }
    let mut z: Vec<f64> = (0..n).map(fixed_val).collect();
    for (c, &j) in free.iter().enumerate() {
        z[j] = sol.x[c].clamp(0.0, 1.0);
    }
    Ok(Some((sol.obj, z)))
}

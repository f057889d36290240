//! Outer algorithms and report assembly.
//!
//! * [`solve_bcp`]: master cuts from the cutting-plane lower solver, in
//!   multi-tree (fresh branch-and-bound per iteration) or single-tree
//!   (cuts injected from inside one tree) form.
//! * [`solve_cp`]: the same outer loop with exact lifted lower solves.
//! * [`solve_bigm`]: branch-and-bound on `z` with `0 ≤ x ≤ z` relaxations.

use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lower::{self, solve_lower_cp, solve_lower_lifted, LiftedResult, Outcome};
use crate::master::{master_solve_with, Cut, MasterOptions, MasterOutcome, MasterState, Verdict};
use crate::model::{self, Instance, Portfolio, SelectionVector};
use crate::numeric::{self, ConvexProgram, Feasibility, Settings, SolveStatus, SparseMatrix};
use crate::oracle;

pub const DEFAULT_BETA: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_DELTA: f64 = 1e-5;
pub const DEFAULT_TIME_LIMIT: f64 = 3600.0;

/// `γ = 10/√N`.
pub fn gamma_auto(n_assets: usize) -> f64 {
    10.0 / (n_assets as f64).sqrt()
}

/// Instance with the standard experimental conventions: `γ` defaults to
/// [`gamma_auto`] and the expected-return floor `μ̄` to
/// [`model::compute_mu_bar`] at the given `k`.
pub fn prepare_instance(
    scenarios: Vec<Vec<f64>>,
    probs: Vec<f64>,
    k: usize,
    beta: f64,
    gamma: Option<f64>,
    mu_bar: Option<f64>,
) -> Result<Instance> {
    let n = scenarios.first().map_or(0, Vec::len);
    let gamma = gamma.unwrap_or_else(|| gamma_auto(n));
    let inst = Instance::new(scenarios, probs, Vec::new(), Vec::new(), beta, gamma, k)?;
    let mu_bar = match mu_bar {
        Some(v) => v,
        None => model::compute_mu_bar(&inst.expected_returns(), k)?,
    };
    Ok(inst.with_return_constraint(mu_bar))
}

/// Seeded synthetic instance: factor-model moments, `s` normal scenarios,
/// `β = 0.9`, `γ = 10/√N` and the default `μ̄` rule.
pub fn synthetic_instance(n: usize, s: usize, k: usize, seed: u64) -> Result<Instance> {
    let moments = crate::ingest::synthetic_moments(n, seed);
    let scen = crate::ingest::generate_scenarios(&moments, s, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    prepare_instance(scen, model::uniform_probs(s), k, DEFAULT_BETA, None, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bcp,
    BcpSingleTree,
    Cp,
    Bigm,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    TimeLimit,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    MultiTree,
    SingleTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub delta: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    pub node_limit: usize,
    /// Outer-iteration safety cap.
    pub max_iterations: usize,
    /// Start the master with the cut generated at `z = 1` (the point whose
    /// solve provides `θ_LB`). Without it, early master iterations favor
    /// near-empty selections.
    pub seed_root_cut: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: DEFAULT_EPS,
            delta: DEFAULT_DELTA,
            time_limit: DEFAULT_TIME_LIMIT,
            node_limit: 1_000_000,
            max_iterations: 1_000_000,
            seed_root_cut: true,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) || !(self.delta >= 0.0) {
            return Err(Error::Parameter("eps and delta must be nonnegative".into()));
        }
        if !(self.time_limit >= 0.0) {
            return Err(Error::Parameter("time limit must be nonnegative".into()));
        }
        Ok(())
    }

    fn deadline(&self, start: Instant) -> Instant {
        start + Duration::try_from_secs_f64(self.time_limit).unwrap_or(Duration::MAX / 4)
    }
}

/// Bounds after one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub lb: f64,
    pub ub: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_assets: usize,
    pub n_scenarios: usize,
    pub k: usize,
    pub beta: f64,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    pub time_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub status: Status,
    /// Exact `f(ẑ)` at the returned selection.
    pub obj: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    /// `100 (UB − LB) / max(|UB|, 1e-12)`.
    pub gap_pct: Option<f64>,
    pub time_sec: f64,
    pub iterations: usize,
    pub nodes: u64,
    pub cuts: usize,
    pub no_good_cuts: usize,
    pub selection: Option<SelectionVector>,
    pub weights: Option<Vec<f64>>,
    pub var: Option<f64>,
    pub cvar: Option<f64>,
    pub expected_return: Option<f64>,
    pub trace: Vec<BoundPoint>,
    pub params: Params,
}

/// A report together with the cuts the run generated.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub report: SolveReport,
    pub cuts: Vec<Cut>,
}

fn params(instance: &Instance, cfg: &SolverConfig) -> Params {
    Params {
        n_assets: instance.n_assets(),
        n_scenarios: instance.n_scenarios(),
        k: instance.k(),
        beta: instance.beta(),
        gamma: instance.gamma(),
        eps: cfg.eps,
        delta: cfg.delta,
        time_limit: cfg.time_limit,
    }
}

pub fn gap_pct(lb: f64, ub: f64) -> f64 {
    100.0 * (ub - lb) / ub.abs().max(1e-12)
}

/// Exact portfolio at `ẑ` from the lifted formulation.
pub fn extract_portfolio(z_hat: &SelectionVector, instance: &Instance) -> Result<Outcome<(f64, Portfolio)>> {
    Ok(match solve_lower_lifted(z_hat, instance)? {
        Outcome::Feasible(r) => Outcome::Feasible((r.f, r.portfolio)),
        Outcome::Infeasible => Outcome::Infeasible,
    })
}

/// Shared bookkeeping for the outer loops.
struct Tracker<'a> {
    instance: &'a Instance,
    cfg: &'a SolverConfig,
    method: Method,
    start: Instant,
    lb: f64,
    ub: f64,
    incumbent: Option<SelectionVector>,
    trace: Vec<BoundPoint>,
    iterations: usize,
    nodes: u64,
    no_good: usize,
}

impl<'a> Tracker<'a> {
    fn new(instance: &'a Instance, cfg: &'a SolverConfig, method: Method) -> Self {
        Tracker {
            instance,
            cfg,
            method,
            start: Instant::now(),
            lb: f64::NEG_INFINITY,
            ub: f64::INFINITY,
            incumbent: None,
            trace: Vec::new(),
            iterations: 0,
            nodes: 0,
            no_good: 0,
        }
    }

    fn raise_lb(&mut self, lb: f64) {
        self.lb = self.lb.max(lb);
    }

    fn offer(&mut self, z: &SelectionVector, value: f64) {
        if value < self.ub {
            self.ub = value;
            self.incumbent = Some(z.clone());
        }
    }

    fn record(&mut self) {
        self.trace.push(BoundPoint { lb: self.lb, ub: self.ub.is_finite().then_some(self.ub) });
    }

    fn infeasible(self) -> SolveReport {
        SolveReport {
            method: self.method,
            status: Status::Infeasible,
            obj: None,
            lower_bound: None,
            upper_bound: None,
            gap_pct: None,
            time_sec: self.start.elapsed().as_secs_f64(),
            iterations: self.iterations,
            nodes: self.nodes,
            cuts: 0,
            no_good_cuts: self.no_good,
            selection: None,
            weights: None,
            var: None,
            cvar: None,
            expected_return: None,
            trace: self.trace,
            params: params(self.instance, self.cfg),
        }
    }

    fn finish(mut self, status: Status, cuts: usize) -> Result<SolveReport> {
        let instance = self.instance;
        let mut report = SolveReport {
            method: self.method,
            status,
            obj: None,
            lower_bound: self.lb.is_finite().then_some(self.lb),
            upper_bound: None,
            gap_pct: None,
            time_sec: 0.0,
            iterations: self.iterations,
            nodes: self.nodes,
            cuts,
            no_good_cuts: self.no_good,
            selection: None,
            weights: None,
            var: None,
            cvar: None,
            expected_return: None,
            trace: Vec::new(),
            params: params(instance, self.cfg),
        };
        if let Some(z) = self.incumbent.clone() {
            let Outcome::Feasible((f, portfolio)) = extract_portfolio(&z, instance)? else {
                return Err(Error::SolverFailure(format!("incumbent {z} is not feasible")));
            };
            self.ub = self.ub.min(f);
            let (var, cvar) = model::cvar(&portfolio.weights, instance);
            let mu = instance.expected_returns();
            report.obj = Some(f);
            report.var = Some(var);
            report.cvar = Some(cvar);
            report.expected_return = Some(mu.iter().zip(&portfolio.weights).map(|(m, x)| m * x).sum());
            report.weights = Some(portfolio.weights);
            report.selection = Some(z);
            report.upper_bound = Some(self.ub);
            if self.lb.is_finite() {
                report.gap_pct = Some(gap_pct(self.lb, self.ub));
            }
        }
        report.trace = self.trace;
        report.time_sec = self.start.elapsed().as_secs_f64();
        Ok(report)
    }
}

/// `θ_LB = f_δ(1) − δ`, with the lower-level result at `z = 1`.
fn theta_lb_with(instance: &Instance, delta: f64) -> Result<Outcome<(f64, lower::LowerResult)>> {
    let ones = SelectionVector::ones(instance.n_assets());
    Ok(match solve_lower_cp(&ones, instance, delta)? {
        Outcome::Feasible(r) => Outcome::Feasible((r.f_lo - delta, r)),
        Outcome::Infeasible => Outcome::Infeasible,
    })
}

/// Lower bound on the optimum from the selection of every asset.
pub fn theta_lb(instance: &Instance, delta: f64) -> Result<Outcome<f64>> {
    Ok(match theta_lb_with(instance, delta)? {
        Outcome::Feasible((v, _)) => Outcome::Feasible(v),
        Outcome::Infeasible => Outcome::Infeasible,
    })
}

fn optimality_cut(intercept: f64, grad: Vec<f64>, origin: &SelectionVector) -> Cut {
    // Squared-dual gradients are ≤ 0 by construction; clear signed zeros.
    let grad = grad.into_iter().map(|g| g.min(0.0)).collect();
    Cut::Optimality { intercept, grad, origin: origin.clone() }
}

pub fn solve_bcp(instance: &Instance, cfg: &SolverConfig, mode: Mode) -> Result<SolveReport> {
    Ok(solve_bcp_run(instance, cfg, mode)?.report)
}

pub fn solve_bcp_run(instance: &Instance, cfg: &SolverConfig, mode: Mode) -> Result<SolveRun> {
    cfg.validate()?;
    let method = match mode {
        Mode::MultiTree => Method::Bcp,
        Mode::SingleTree => Method::BcpSingleTree,
    };
    let mut tr = Tracker::new(instance, cfg, method);
    let deadline = cfg.deadline(tr.start);
    let Outcome::Feasible((lb0, root)) = theta_lb_with(instance, cfg.delta)? else {
        return Ok(SolveRun { report: tr.infeasible(), cuts: Vec::new() });
    };
    let mut state = MasterState::new(instance.n_assets(), instance.k(), lb0)?;
    if cfg.seed_root_cut {
        let g = lower::subgradient(&root.certificate, instance.gamma());
        state.add_cut(optimality_cut(root.f_lo, g, &SelectionVector::ones(instance.n_assets())))?;
    }
    tr.raise_lb(lb0);
    let mut visited: HashSet<SelectionVector> = HashSet::new();

    let status = match mode {
        Mode::MultiTree => bcp_multi_tree(&mut tr, &mut state, &mut visited, deadline)?,
        Mode::SingleTree => bcp_single_tree(&mut tr, &mut state, &mut visited, deadline)?,
    };
    if status == Status::Infeasible && tr.incumbent.is_none() {
        tr.nodes = state.node_count;
        return Ok(SolveRun { report: tr.infeasible(), cuts: state.cuts().to_vec() });
    }
    tr.nodes = state.node_count;
    let cuts = state.cuts().to_vec();
    let report = tr.finish(status, cuts.len())?;
    Ok(SolveRun { report, cuts })
}

fn master_opts(cfg: &SolverConfig, deadline: Option<Instant>) -> MasterOptions {
    MasterOptions { node_limit: cfg.node_limit, deadline, ..MasterOptions::default() }
}

/// Outcome of a master solve with the time limit mapped to `None`.
fn run_master(
    state: &mut MasterState,
    opts: &MasterOptions,
    callback: Option<&mut dyn FnMut(&SelectionVector, f64, &MasterState) -> Result<Verdict>>,
) -> Result<Option<MasterOutcome>> {
    match master_solve_with(state, opts, callback) {
        Ok(out) => Ok(Some(out)),
        Err(Error::TimeLimit) => Ok(None),
        Err(e) => Err(e),
    }
}

fn bcp_multi_tree(
    tr: &mut Tracker,
    state: &mut MasterState,
    visited: &mut HashSet<SelectionVector>,
    deadline: Instant,
) -> Result<Status> {
    let instance = tr.instance;
    let cfg = tr.cfg;
    loop {
        // the first master solve always runs to completion
        let opts = master_opts(cfg, (tr.iterations > 0).then_some(deadline));
        let Some(out) = run_master(state, &opts, None)? else {
            return Ok(Status::TimeLimit);
        };
        tr.iterations += 1;
        let (z, theta) = match out {
            MasterOutcome::Optimal { z, theta, .. } => (z, theta),
            MasterOutcome::Infeasible => {
                tr.record();
                return Ok(if tr.incumbent.is_some() { Status::Optimal } else { Status::Infeasible });
            }
        };
        tr.raise_lb(theta);
        if !visited.insert(z.clone()) {
            tr.record();
            return Ok(Status::Optimal);
        }
        match solve_lower_cp(&z, instance, cfg.delta)? {
            Outcome::Infeasible => {
                state.add_cut(Cut::NoGood { excluded: z })?;
                tr.no_good += 1;
            }
            Outcome::Feasible(r) => {
                let g = lower::subgradient(&r.certificate, instance.gamma());
                state.add_cut(optimality_cut(r.f_lo, g, &z))?;
                tr.offer(&z, r.f_hi);
            }
        }
        tr.record();
        if tr.ub - tr.lb <= cfg.eps {
            return Ok(Status::Optimal);
        }
        if Instant::now() >= deadline || tr.iterations >= cfg.max_iterations {
            return Ok(Status::TimeLimit);
        }
    }
}

fn bcp_single_tree(
    tr: &mut Tracker,
    state: &mut MasterState,
    visited: &mut HashSet<SelectionVector>,
    deadline: Instant,
) -> Result<Status> {
    let instance = tr.instance;
    let cfg = tr.cfg;
    let opts = master_opts(cfg, Some(deadline));
    let out = {
        let mut cb = |z: &SelectionVector, _theta: f64, _st: &MasterState| -> Result<Verdict> {
            if visited.contains(z) {
                return Ok(Verdict::Accept);
            }
            if tr.iterations > 0 && Instant::now() >= deadline {
                return Err(Error::TimeLimit);
            }
            visited.insert(z.clone());
            tr.iterations += 1;
            let cut = match solve_lower_cp(z, instance, cfg.delta)? {
                Outcome::Infeasible => {
                    tr.no_good += 1;
                    Cut::NoGood { excluded: z.clone() }
                }
                Outcome::Feasible(r) => {
                    tr.offer(z, r.f_hi);
                    optimality_cut(r.f_lo, lower::subgradient(&r.certificate, instance.gamma()), z)
                }
            };
            tr.record();
            Ok(Verdict::Reject(vec![cut]))
        };
        run_master(state, &opts, Some(&mut cb))?
    };
    match out {
        None => Ok(Status::TimeLimit),
        Some(MasterOutcome::Infeasible) => {
            tr.record();
            Ok(if tr.incumbent.is_some() { Status::Optimal } else { Status::Infeasible })
        }
        Some(MasterOutcome::Optimal { bound, .. }) => {
            tr.raise_lb(bound);
            tr.record();
            Ok(Status::Optimal)
        }
    }
}

pub fn solve_cp(instance: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    Ok(solve_cp_run(instance, cfg)?.report)
}

/// Outer cutting-plane loop with exact lifted lower solves.
pub fn solve_cp_run(instance: &Instance, cfg: &SolverConfig) -> Result<SolveRun> {
    cfg.validate()?;
    let mut tr = Tracker::new(instance, cfg, Method::Cp);
    let deadline = cfg.deadline(tr.start);
    let ones = SelectionVector::ones(instance.n_assets());
    let Outcome::Feasible(root) = solve_lower_lifted(&ones, instance)? else {
        return Ok(SolveRun { report: tr.infeasible(), cuts: Vec::new() });
    };
    let mut state = MasterState::new(instance.n_assets(), instance.k(), root.f)?;
    if cfg.seed_root_cut {
        state.add_cut(optimality_cut(root.f, root.subgradient(instance.gamma()), &ones))?;
    }
    tr.raise_lb(root.f);

    let status = loop {
        let opts = master_opts(cfg, (tr.iterations > 0).then_some(deadline));
        let Some(out) = run_master(&mut state, &opts, None)? else {
            break Status::TimeLimit;
        };
        tr.iterations += 1;
        let (z, theta) = match out {
            MasterOutcome::Optimal { z, theta, .. } => (z, theta),
            MasterOutcome::Infeasible => {
                tr.record();
                break if tr.incumbent.is_some() { Status::Optimal } else { Status::Infeasible };
            }
        };
        tr.raise_lb(theta);
        match solve_lower_lifted(&z, instance)? {
            Outcome::Infeasible => {
                state.add_cut(Cut::NoGood { excluded: z })?;
                tr.no_good += 1;
            }
            Outcome::Feasible(r) => {
                state.add_cut(optimality_cut(r.f, r.subgradient(instance.gamma()), &z))?;
                tr.offer(&z, r.f);
            }
        }
        tr.record();
        if tr.ub - tr.lb <= cfg.eps {
            break Status::Optimal;
        }
        if Instant::now() >= deadline || tr.iterations >= cfg.max_iterations {
            break Status::TimeLimit;
        }
    };
    tr.nodes = state.node_count;
    let cuts = state.cuts().to_vec();
    if status == Status::Infeasible {
        return Ok(SolveRun { report: tr.infeasible(), cuts });
    }
    let report = tr.finish(status, cuts.len())?;
    Ok(SolveRun { report, cuts })
}

/// Node of the big-M tree.
struct BigmNode {
    bound: f64,
    fixed: Vec<Option<bool>>,
    id: u64,
}

impl PartialEq for BigmNode {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == std::cmp::Ordering::Equal
    }
}
impl Eq for BigmNode {}
impl PartialOrd for BigmNode {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for BigmNode {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        o.bound.total_cmp(&self.bound).then_with(|| o.id.cmp(&self.id))
    }
}

/// Relaxation of a big-M node: `(bound, x, z)` over all assets.
fn bigm_relaxation(instance: &Instance, fixed: &[Option<bool>]) -> Result<Option<(f64, Vec<f64>, Vec<f64>)>> {
    let n = instance.n_assets();
    let k = instance.k();
    let active: Vec<usize> = (0..n).filter(|&j| fixed[j] != Some(false)).collect();
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let ones = fixed.iter().filter(|f| **f == Some(true)).count();
    if active.is_empty() || ones > k {
        return Ok(None);
    }
    let na = active.len();
    let nf = free.len();
    let xcol = |j: usize| active.binary_search(&j).unwrap();
    let zcol = |j: usize| na + free.binary_search(&j).unwrap();
    let ia = na + nf;
    let n_dense = ia + 1;

    // x/z rows shared by the feasibility check and the QP
    let mut g = SparseMatrix::new(n_dense);
    let mut h = Vec::new();
    for (row, &b) in instance.side_a().iter().zip(instance.side_b()) {
        g.push_row(active.iter().map(|&j| (xcol(j), row[j])));
        h.push(b);
    }
    for &j in &active {
        g.push_row([(xcol(j), -1.0)]);
        h.push(0.0);
    }
    for &j in &free {
        g.push_row([(xcol(j), 1.0), (zcol(j), -1.0)]);
        h.push(0.0);
        g.push_row([(zcol(j), 1.0)]);
        h.push(1.0);
        g.push_row([(zcol(j), -1.0)]);
        h.push(0.0);
    }
    if nf > 0 {
        g.push_row(free.iter().map(|&j| (zcol(j), 1.0)));
        h.push((k - ones) as f64);
    }
    let mut a = SparseMatrix::new(n_dense);
    a.push_row(active.iter().map(|&j| (xcol(j), 1.0)));
    if let Feasibility::Infeasible = numeric::feasible(&g, &h, &a, &[1.0]) {
        return Ok(None);
    }

    let s_count = instance.n_scenarios();
    let q0 = n_dense;
    let mut prog = ConvexProgram::new(n_dense + s_count);
    prog.n_dense = n_dense;
    for &j in &active {
        prog.quad_diag[xcol(j)] = 1.0 / instance.gamma();
    }
    prog.lin[ia] = 1.0;
    for s in 0..s_count {
        prog.lin[q0 + s] = instance.probs()[s] / (1.0 - instance.beta());
    }
    for i in 0..g.nrows() {
        let (c, v) = g.row(i);
        prog.add_ineq(c.iter().copied().zip(v.iter().copied()), h[i]);
    }
    for s in 0..s_count {
        let r = instance.scenario(s);
        let row = active
            .iter()
            .map(|&j| (xcol(j), -r[j]))
            .chain([(ia, -1.0), (q0 + s, -1.0)]);
        prog.add_ineq(row, 0.0);
    }
    for s in 0..s_count {
        prog.add_ineq([(q0 + s, -1.0)], 0.0);
    }
    let (c, v) = a.row(0);
    prog.add_eq(c.iter().copied().zip(v.iter().copied()), 1.0);
    let sol = numeric::solve_with(&prog, &Settings { phase1: false, ..Settings::default() })?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure(format!("big-M node QP ended with status {:?}", sol.status)));
    }
    let mut x = vec![0.0; n];
    let mut z: Vec<f64> = (0..n).map(|j| if fixed[j] == Some(true) { 1.0 } else { 0.0 }).collect();
    for &j in &active {
        x[j] = sol.x[xcol(j)];
    }
    for &j in &free {
        z[j] = sol.x[zcol(j)].clamp(0.0, 1.0);
    }
    Ok(Some((sol.obj, x, z)))
}

/// Branch-and-bound with the big-M linking `0 ≤ x ≤ z`.
pub fn solve_bigm(instance: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = instance.n_assets();
    let k = instance.k();
    let mut tr = Tracker::new(instance, cfg, Method::Bigm);
    let deadline = cfg.deadline(tr.start);
    let mut heap = BinaryHeap::new();
    heap.push(BigmNode { bound: f64::NEG_INFINITY, fixed: vec![None; n], id: 0 });
    let mut next_id = 1u64;
    let mut evaluated: HashSet<SelectionVector> = HashSet::new();
    let mut status = Status::Optimal;
    let mut open_bound = f64::INFINITY;

    while let Some(node) = heap.pop() {
        if node.bound >= tr.ub - cfg.eps {
            continue;
        }
        if tr.nodes > 0 && Instant::now() >= deadline {
            status = Status::TimeLimit;
            open_bound = node.bound;
            break;
        }
        if tr.nodes as usize >= cfg.node_limit {
            return Err(Error::NodeLimit {
                limit: cfg.node_limit,
                incumbent: tr.incumbent.as_ref().map(|z| (z.bits().to_vec(), tr.ub)),
            });
        }
        let mut fixed = node.fixed;
        let ones = fixed.iter().filter(|f| **f == Some(true)).count();
        if ones == k {
            for f in fixed.iter_mut() {
                f.get_or_insert(false);
            }
        }
        tr.nodes += 1;
        let Some((bound, x, zval)) = bigm_relaxation(instance, &fixed)? else {
            continue;
        };
        if bound >= tr.ub - cfg.eps {
            continue;
        }
        let support: Vec<usize> = (0..n).filter(|&j| fixed[j] == Some(true) || x[j] > 1e-6).collect();
        if support.len() <= k {
            let z = SelectionVector::from_support(n, &support);
            if evaluated.insert(z.clone()) {
                if let Outcome::Feasible(r) = solve_lower_lifted(&z, instance)? {
                    tr.offer(&z, r.f);
                }
            }
            if tr.ub <= bound + cfg.eps {
                continue;
            }
        }
        let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
        if free.is_empty() {
            continue;
        }
        let frac = |j: usize| zval[j].min(1.0 - zval[j]);
        let mut j_star = free[0];
        for &j in &free {
            if frac(j) > frac(j_star) + 1e-12 {
                j_star = j;
            }
        }
        for v in [false, true] {
            let mut f = fixed.clone();
            f[j_star] = Some(v);
            heap.push(BigmNode { bound, fixed: f, id: next_id });
            next_id += 1;
        }
        tr.iterations = tr.nodes as usize;
    }
    tr.iterations = tr.nodes as usize;
    if tr.incumbent.is_none() {
        if status == Status::TimeLimit {
            tr.raise_lb(heap.iter().map(|n| n.bound).fold(open_bound, f64::min));
            tr.record();
            return tr.finish(status, 0);
        }
        return Ok(tr.infeasible());
    }
    // every open node has bound ≥ UB − ε, or the search was cut short
    let lb = if status == Status::Optimal {
        tr.ub.min(heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min))
    } else {
        heap.iter().map(|n| n.bound).fold(open_bound, f64::min)
    };
    tr.raise_lb(lb.min(tr.ub));
    tr.record();
    tr.finish(status, 0)
}

/// Exhaustive enumeration, reported in the same format as the solvers.
pub fn solve_oracle(instance: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut tr = Tracker::new(instance, cfg, Method::Oracle);
    match oracle::brute_force(instance, instance.k())? {
        Outcome::Infeasible => Ok(tr.infeasible()),
        Outcome::Feasible(r) => {
            tr.iterations = r.evaluated;
            tr.offer(&r.best_z, r.best_f);
            tr.raise_lb(r.best_f);
            tr.record();
            tr.finish(Status::Optimal, 0)
        }
    }
}

/// Runs `method`.
pub fn solve(instance: &Instance, cfg: &SolverConfig, method: Method) -> Result<SolveReport> {
    match method {
        Method::Bcp => solve_bcp(instance, cfg, Mode::MultiTree),
        Method::BcpSingleTree => solve_bcp(instance, cfg, Mode::SingleTree),
        Method::Cp => solve_cp(instance, cfg),
        Method::Bigm => solve_bigm(instance, cfg),
        Method::Oracle => solve_oracle(instance, cfg),
    }
}

/// Lifted lower-level solve used for cut checks.
pub fn exact_value(z: &SelectionVector, instance: &Instance) -> Result<Option<LiftedResult>> {
    Ok(solve_lower_lifted(z, instance)?.feasible())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_asset(k: usize) -> Instance {
        Instance::uniform(vec![vec![0.1, 0.2]], 0.5, 1.0, k).unwrap()
    }

    #[test]
    fn two_asset_all_methods() {
        let inst = two_asset(1);
        let cfg = SolverConfig::default();
        for m in [Method::Bcp, Method::BcpSingleTree, Method::Cp, Method::Bigm, Method::Oracle] {
            let r = solve(&inst, &cfg, m).unwrap();
            assert_eq!(r.status, Status::Optimal, "{m:?}");
            assert!((r.obj.unwrap() - 0.3).abs() < 1e-6, "{m:?}: {:?}", r.obj);
            assert_eq!(r.selection.unwrap(), SelectionVector::new(vec![false, true]), "{m:?}");
            let w = r.weights.unwrap();
            assert!(w[0].abs() < 1e-8 && (w[1] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn theta_lb_examples() {
        let inst = two_asset(1);
        let lb = theta_lb(&inst, 1e-5).unwrap().feasible().unwrap();
        assert!((lb - (0.0975 - 1e-5)).abs() < 1e-7);
        let one = Instance::uniform(vec![vec![0.1], vec![-0.2]], 0.5, 1.0, 1).unwrap();
        let lb = theta_lb(&one, 1e-5).unwrap().feasible().unwrap();
        assert!((lb - (0.7 - 1e-5)).abs() < 1e-7);
    }

    #[test]
    fn extract_forced_single_asset() {
        let inst = two_asset(1);
        let (f, p) = extract_portfolio(&SelectionVector::new(vec![false, true]), &inst)
            .unwrap()
            .feasible()
            .unwrap();
        assert!((f - 0.3).abs() < 1e-7);
        assert!((p.var_level + 0.2).abs() < 1e-6);
        assert!(p.cvar_excess.abs() < 1e-7);
    }

    #[test]
    fn infeasible_instance() {
        let inst = Instance::uniform(vec![vec![0.1, 0.2]], 0.5, 1.0, 1).unwrap().with_return_constraint(0.5);
        for m in [Method::Bcp, Method::Cp, Method::Bigm, Method::Oracle] {
            let r = solve(&inst, &SolverConfig::default(), m).unwrap();
            assert_eq!(r.status, Status::Infeasible, "{m:?}");
            assert!(r.obj.is_none());
        }
    }

    #[test]
    fn gamma_rule() {
        assert!((gamma_auto(25) - 2.0).abs() < 1e-15);
        assert!((gamma_auto(100) - 1.0).abs() < 1e-15);
    }
}

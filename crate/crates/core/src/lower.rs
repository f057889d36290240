//! The lower-level problem `f(z)`: best portfolio on a fixed asset
//! selection.
//!
//! Two solvers are provided. [`solve_lower_cp`] generates aggregate scenario
//! cuts so every QP has `|supp(z)| + 2` variables regardless of the scenario
//! count; [`solve_lower_lifted`] solves the lifted formulation with one
//! auxiliary variable per scenario and serves as the exact reference.
//! Both return multipliers from which a cut in `z` is built.

use crate::error::{Error, Result};
use crate::model::{Instance, Portfolio, SelectionVector};
use crate::numeric::{self, ConvexProgram, Feasibility, Settings, SolveStatus, SparseMatrix};

/// Strictness margin for the "loss exceeds VaR" test.
const EXCESS_TOL: f64 = 1e-10;
const MAX_INNER_ITERS: usize = 500;

/// Either a solved lower-level problem or proof that `supp(z)` cannot meet
/// the feasible set.
#[derive(Debug, Clone)]
pub enum Outcome<T> {
    Feasible(T),
    Infeasible,
}

impl<T> Outcome<T> {
    pub fn feasible(self) -> Option<T> {
        match self {
            Outcome::Feasible(t) => Some(t),
            Outcome::Infeasible => None,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Outcome::Infeasible)
    }
}

/// A scenario subset `J` with its aggregates `P_J = Σ p_s` and
/// `R_J = Σ p_s r^(s)` (over all assets).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSubset {
    pub indices: Vec<usize>,
    pub prob: f64,
    pub weighted_returns: Vec<f64>,
}

impl ScenarioSubset {
    pub fn new(indices: Vec<usize>, instance: &Instance) -> Self {
        let mut prob = 0.0;
        let mut weighted_returns = vec![0.0; instance.n_assets()];
        for &s in &indices {
            let p = instance.probs()[s];
            prob += p;
            for (w, r) in weighted_returns.iter_mut().zip(instance.scenario(s)) {
                *w += p * r;
            }
        }
        ScenarioSubset { indices, prob, weighted_returns }
    }

    pub fn full(instance: &Instance) -> Self {
        Self::new((0..instance.n_scenarios()).collect(), instance)
    }
}

/// Multipliers of the reduced lower-level QP.
#[derive(Debug, Clone, PartialEq)]
pub struct QpDuals {
    /// One per subset cut that was in the QP; missing trailing entries are 0.
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub lambda: f64,
    pub omega: Vec<f64>,
}

impl DualCertificate {
    /// `−(γ/2) zᵀ(ω∘ω) − bᵀζ + λ`.
    pub fn dual_objective(&self, z: &SelectionVector, instance: &Instance) -> f64 {
        let quad: f64 = z.support().iter().map(|&n| self.omega[n] * self.omega[n]).sum();
        let bz: f64 = instance.side_b().iter().zip(&self.zeta).map(|(b, z)| b * z).sum();
        -0.5 * instance.gamma() * quad - bz + self.lambda
    }
}

#[derive(Debug, Clone)]
pub struct LowerResult {
    /// Optimal value of the final cutting-plane QP: a lower bound on `f(z)`.
    pub f_lo: f64,
    /// Objective at the final QP point with the exact CVaR excess: an upper
    /// bound on `f(z)`.
    pub f_hi: f64,
    pub portfolio: Portfolio,
    /// `S` first, then every generated subset in order.
    pub subsets: Vec<ScenarioSubset>,
    pub certificate: DualCertificate,
    pub iters: usize,
    /// Variable count of the cutting-plane QP (`|supp(z)| + 2`).
    pub qp_dim: usize,
    /// `v` values of each inner iteration.
    pub v_trace: Vec<f64>,
    /// `v'` values of each inner iteration.
    pub v_prime_trace: Vec<f64>,
    /// QP optimal values of each inner iteration.
    pub obj_trace: Vec<f64>,
}

/// Full-dimension weights `Zx` from weights on the support.
fn scatter(n: usize, support: &[usize], x_supp: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (&j, &v) in support.iter().zip(x_supp) {
        x[j] = v;
    }
    x
}

/// Is `{x ∈ X : x_n = 0 for n ∉ supp(z)}` nonempty?
pub fn support_feasible(support: &[usize], instance: &Instance) -> bool {
    let m = support.len();
    if m == 0 {
        return false;
    }
    let mut g = SparseMatrix::new(m);
    let mut h = Vec::new();
    for (row, &b) in instance.side_a().iter().zip(instance.side_b()) {
        g.push_row(support.iter().enumerate().map(|(i, &j)| (i, row[j])));
        h.push(b);
    }
    for i in 0..m {
        g.push_row([(i, -1.0)]);
        h.push(0.0);
    }
    let mut a = SparseMatrix::new(m);
    a.push_row((0..m).map(|i| (i, 1.0)));
    matches!(numeric::feasible(&g, &h, &a, &[1.0]), Feasibility::Feasible(_))
}

/// Shared rows of both lower-level programs over `(x_supp, a, …)`:
/// `A_supp x ≤ b`, `−x ≤ 0`, and `1ᵀx = 1`.
fn base_rows(prog: &mut ConvexProgram, support: &[usize], instance: &Instance) {
    for (row, &b) in instance.side_a().iter().zip(instance.side_b()) {
        prog.add_ineq(support.iter().enumerate().map(|(i, &j)| (i, row[j])), b);
    }
    for i in 0..support.len() {
        prog.add_ineq([(i, -1.0)], 0.0);
    }
    prog.add_eq((0..support.len()).map(|i| (i, 1.0)), 1.0);
}

fn inner_settings() -> Settings {
    Settings { phase1: false, ..Settings::default() }
}

fn check_status(sol: &numeric::Solution, what: &str) -> Result<()> {
    match sol.status {
        SolveStatus::Optimal => Ok(()),
        s => Err(Error::SolverFailure(format!("{what} QP ended with status {s:?}"))),
    }
}

/// `J = {s : loss_s − a > 0}` and `v' = (1/(1−β)) Σ_{s∈J} p_s (loss_s − a)`
/// for the full-length weights `x`.
pub fn scenario_cut(x: &[f64], a: f64, instance: &Instance) -> (Vec<usize>, f64) {
    let losses = instance.losses(x);
    let mut j = Vec::new();
    let mut total = 0.0;
    for (s, (&l, &p)) in losses.iter().zip(instance.probs()).enumerate() {
        if l - a > EXCESS_TOL {
            j.push(s);
            total += p * (l - a);
        }
    }
    (j, total / (1.0 - instance.beta()))
}

/// Cutting-plane solve of `f(z)` to accuracy `delta`.
pub fn solve_lower_cp(z: &SelectionVector, instance: &Instance, delta: f64) -> Result<Outcome<LowerResult>> {
    if !(delta >= 0.0) {
        return Err(Error::Parameter(format!("delta = {delta} must be nonnegative")));
    }
    z.check(instance.n_assets(), instance.n_assets())?;
    let support = z.support();
    if !support_feasible(&support, instance) {
        return Ok(Outcome::Infeasible);
    }
    let n = instance.n_assets();
    let m = support.len();
    let (ia, iv) = (m, m + 1);
    let beta = instance.beta();
    let scale = 1.0 / (1.0 - beta);

    let mut prog = ConvexProgram::new(m + 2);
    for i in 0..m {
        prog.quad_diag[i] = 1.0 / instance.gamma();
    }
    prog.lin[ia] = 1.0;
    prog.lin[iv] = 1.0;
    base_rows(&mut prog, &support, instance);
    prog.add_ineq([(iv, -1.0)], 0.0);
    let first_cut_row = prog.n_ineq();
    let push_cut = |prog: &mut ConvexProgram, subset: &ScenarioSubset| {
        let mut row: Vec<(usize, f64)> = support
            .iter()
            .enumerate()
            .map(|(i, &j)| (i, -scale * subset.weighted_returns[j]))
            .collect();
        row.push((ia, -scale * subset.prob));
        row.push((iv, -1.0));
        prog.add_ineq(row, 0.0);
    };

    let mut subsets = vec![ScenarioSubset::full(instance)];
    push_cut(&mut prog, &subsets[0]);
    let mut in_qp = 1;

    let mut v_trace = Vec::new();
    let mut v_prime_trace = Vec::new();
    let mut obj_trace = Vec::new();
    let settings = inner_settings();
    let mut iters = 0;
    loop {
        iters += 1;
        let sol = numeric::solve_with(&prog, &settings)?;
        check_status(&sol, "cutting-plane")?;
        let x = scatter(n, &support, &sol.x[..m]);
        let (a, v) = (sol.x[ia], sol.x[iv]);
        let (j, v_prime) = scenario_cut(&x, a, instance);
        v_trace.push(v);
        v_prime_trace.push(v_prime);
        obj_trace.push(sol.obj);

        let repeated = subsets.iter().any(|s| s.indices == j);
        let done = v_prime - v <= delta || repeated || iters >= MAX_INNER_ITERS;
        if iters >= MAX_INNER_ITERS && v_prime - v > delta {
            log::warn!("cutting-plane lower solve stopped after {iters} iterations");
        }
        subsets.push(ScenarioSubset::new(j, instance));
        if done {
            let f_lo = sol.obj;
            let f_hi = f_lo - v + v_prime;
            let duals = QpDuals {
                alpha: sol.ineq_duals[first_cut_row..].to_vec(),
                zeta: sol.ineq_duals[..instance.side_b().len()].to_vec(),
                lambda: -sol.eq_duals[0],
            };
            let certificate = recover_certificate(&duals, &subsets, z, instance)?;
            let dual = certificate.dual_objective(z, instance);
            if (dual - f_lo).abs() > 1e-6 * (1.0 + f_lo.abs()) {
                return Err(Error::Certificate(format!(
                    "dual objective {dual} differs from QP value {f_lo}"
                )));
            }
            if iters > 30 {
                log::debug!("cutting-plane lower solve needed {iters} iterations");
            }
            return Ok(Outcome::Feasible(LowerResult {
                f_lo,
                f_hi,
                portfolio: Portfolio { weights: x, var_level: a, cvar_excess: v_prime },
                subsets,
                certificate,
                iters,
                qp_dim: prog.n_vars(),
                v_trace,
                v_prime_trace,
                obj_trace,
            }));
        }
        push_cut(&mut prog, &subsets[in_qp]);
        in_qp += 1;
    }
}

/// Builds `(α, ζ, λ, ω)` from the multipliers of the final cutting-plane QP
/// and checks the dual constraints.
pub fn recover_certificate(
    duals: &QpDuals,
    subsets: &[ScenarioSubset],
    z: &SelectionVector,
    instance: &Instance,
) -> Result<DualCertificate> {
    let n = instance.n_assets();
    let beta = instance.beta();
    if duals.alpha.len() > subsets.len() {
        return Err(Error::Certificate("more cut multipliers than subsets".into()));
    }
    if duals.zeta.len() != instance.side_b().len() {
        return Err(Error::Certificate("side-constraint multiplier count mismatch".into()));
    }
    let mut alpha = duals.alpha.clone();
    alpha.resize(subsets.len(), 0.0);
    if let Some(a) = alpha.iter().chain(&duals.zeta).find(|&&a| a < -1e-12) {
        return Err(Error::Certificate(format!("negative multiplier {a}")));
    }
    // The QP's dual residual can leave Σα a few 1e-9 above 1; scale back
    // onto the constraint so the cut comes from a dual-feasible point.
    let raw_sum: f64 = alpha.iter().sum();
    if raw_sum > 1.0 && raw_sum <= 1.0 + 1e-6 {
        alpha.iter_mut().for_each(|a| *a /= raw_sum);
    }
    let mut c = vec![duals.lambda; n];
    for (a, subset) in alpha.iter().zip(subsets) {
        for (cj, r) in c.iter_mut().zip(&subset.weighted_returns) {
            *cj += a * r / (1.0 - beta);
        }
    }
    for (row, zeta) in instance.side_a().iter().zip(&duals.zeta) {
        for (cj, a) in c.iter_mut().zip(row) {
            *cj -= a * zeta;
        }
    }
    let omega: Vec<f64> = c.iter().map(|v| v.max(0.0)).collect();

    let sum_alpha: f64 = alpha.iter().sum();
    if sum_alpha > 1.0 + 1e-9 {
        return Err(Error::Certificate(format!("cut multipliers sum to {sum_alpha}")));
    }
    let mass: f64 = alpha.iter().zip(subsets).map(|(a, s)| a * s.prob).sum();
    if (mass - (1.0 - beta)).abs() > 1e-8 {
        return Err(Error::Certificate(format!(
            "weighted subset mass {mass} differs from 1 − β = {}",
            1.0 - beta
        )));
    }
    debug_assert!(z.len() == n);
    Ok(DualCertificate { alpha, zeta: duals.zeta.clone(), lambda: duals.lambda, omega })
}

/// `g = −(γ/2) ω∘ω`.
pub fn subgradient(cert: &DualCertificate, gamma: f64) -> Vec<f64> {
    cert.omega.iter().map(|w| -0.5 * gamma * w * w).collect()
}

/// Exact solve of the lifted formulation.
#[derive(Debug, Clone)]
pub struct LiftedResult {
    pub f: f64,
    pub portfolio: Portfolio,
    /// Per-scenario multipliers `α_s` (sum 1, each at most `p_s/(1−β)`).
    pub alpha: Vec<f64>,
    pub zeta: Vec<f64>,
    pub lambda: f64,
    /// `max(Σ α_s r^(s) − Aᵀζ + λ1, 0)` over all assets.
    pub omega: Vec<f64>,
    /// Dual objective `−(γ/2) zᵀ(ω∘ω) − bᵀζ + λ` at the multipliers above.
    pub dual_objective: f64,
    pub iterations: usize,
}

impl LiftedResult {
    pub fn subgradient(&self, gamma: f64) -> Vec<f64> {
        self.omega.iter().map(|w| -0.5 * gamma * w * w).collect()
    }
}

/// Solves `f(z)` through the lifted formulation with one excess variable
/// `q_s` per scenario. The CVaR excess `v` is eliminated
/// (`v = Σ p_s q_s / (1−β)` at the optimum).
pub fn solve_lower_lifted(z: &SelectionVector, instance: &Instance) -> Result<Outcome<LiftedResult>> {
    z.check(instance.n_assets(), instance.n_assets())?;
    let support = z.support();
    if !support_feasible(&support, instance) {
        return Ok(Outcome::Infeasible);
    }
    let n = instance.n_assets();
    let s_count = instance.n_scenarios();
    let m = support.len();
    let ia = m;
    let q0 = m + 1;
    let beta = instance.beta();

    let mut prog = ConvexProgram::new(m + 1 + s_count);
    prog.n_dense = m + 1;
    for i in 0..m {
        prog.quad_diag[i] = 1.0 / instance.gamma();
    }
    prog.lin[ia] = 1.0;
    for s in 0..s_count {
        prog.lin[q0 + s] = instance.probs()[s] / (1.0 - beta);
    }
    base_rows(&mut prog, &support, instance);
    let first_scen_row = prog.n_ineq();
    for s in 0..s_count {
        let r = instance.scenario(s);
        let mut row: Vec<(usize, f64)> = support.iter().enumerate().map(|(i, &j)| (i, -r[j])).collect();
        row.push((ia, -1.0));
        row.push((q0 + s, -1.0));
        prog.add_ineq(row, 0.0);
    }
    for s in 0..s_count {
        prog.add_ineq([(q0 + s, -1.0)], 0.0);
    }

    let sol = numeric::solve_with(&prog, &inner_settings())?;
    check_status(&sol, "lifted")?;
    let x = scatter(n, &support, &sol.x[..m]);
    let a = sol.x[ia];
    let v: f64 = (0..s_count).map(|s| instance.probs()[s] * sol.x[q0 + s]).sum::<f64>() / (1.0 - beta);

    let alpha = sol.ineq_duals[first_scen_row..first_scen_row + s_count].to_vec();
    let zeta = sol.ineq_duals[..instance.side_b().len()].to_vec();
    let lambda = -sol.eq_duals[0];
    let mut c = vec![lambda; n];
    for (s, &al) in alpha.iter().enumerate() {
        if al != 0.0 {
            for (cj, r) in c.iter_mut().zip(instance.scenario(s)) {
                *cj += al * r;
            }
        }
    }
    for (row, zt) in instance.side_a().iter().zip(&zeta) {
        for (cj, av) in c.iter_mut().zip(row) {
            *cj -= av * zt;
        }
    }
    let omega: Vec<f64> = c.iter().map(|v| v.max(0.0)).collect();
    let quad: f64 = support.iter().map(|&j| omega[j] * omega[j]).sum();
    let bz: f64 = instance.side_b().iter().zip(&zeta).map(|(b, z)| b * z).sum();
    let dual_objective = -0.5 * instance.gamma() * quad - bz + lambda;

    Ok(Outcome::Feasible(LiftedResult {
        f: sol.obj,
        portfolio: Portfolio { weights: x, var_level: a, cvar_excess: v },
        alpha,
        zeta,
        lambda,
        omega,
        dual_objective,
        iterations: sol.iterations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_asset() -> Instance {
        Instance::uniform(vec![vec![0.1, 0.2]], 0.5, 1.0, 2).unwrap()
    }

    #[test]
    fn two_asset_cutting_plane() {
        let inst = two_asset();
        let z = SelectionVector::ones(2);
        let r = solve_lower_cp(&z, &inst, 1e-5).unwrap().feasible().unwrap();
        assert_abs_diff_eq!(r.f_lo, 0.0975, epsilon = 1e-7);
        assert_abs_diff_eq!(r.portfolio.weights[0], 0.45, epsilon = 1e-6);
        assert_abs_diff_eq!(r.portfolio.weights[1], 0.55, epsilon = 1e-6);
        assert_abs_diff_eq!(r.portfolio.var_level, -0.155, epsilon = 1e-6);
        assert_abs_diff_eq!(r.portfolio.cvar_excess, 0.0, epsilon = 1e-7);
        assert_eq!(r.iters, 1);
        assert_eq!(r.qp_dim, 4);
        assert_abs_diff_eq!(r.certificate.dual_objective(&z, &inst), 0.0975, epsilon = 1e-7);
        for j in 0..2 {
            assert_abs_diff_eq!(r.certificate.omega[j], r.portfolio.weights[j] / inst.gamma(), epsilon = 1e-6);
        }
    }

    #[test]
    fn empty_selection_is_infeasible() {
        let inst = two_asset();
        let z = SelectionVector::zeros(2);
        assert!(solve_lower_cp(&z, &inst, 1e-5).unwrap().is_infeasible());
        assert!(solve_lower_lifted(&z, &inst).unwrap().is_infeasible());
    }

    #[test]
    fn lifted_examples() {
        let inst = two_asset();
        let r = solve_lower_lifted(&SelectionVector::ones(2), &inst).unwrap().feasible().unwrap();
        assert_abs_diff_eq!(r.f, 0.0975, epsilon = 1e-7);
        assert_abs_diff_eq!(r.dual_objective, r.f, epsilon = 1e-7);

        let inst = Instance::uniform(vec![vec![0.1], vec![-0.2]], 0.5, 1.0, 1).unwrap();
        let r = solve_lower_lifted(&SelectionVector::ones(1), &inst).unwrap().feasible().unwrap();
        assert_abs_diff_eq!(r.f, 0.7, epsilon = 1e-7);
        assert_abs_diff_eq!(r.dual_objective, 0.7, epsilon = 1e-7);
        let sum: f64 = r.alpha.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-8);
        for (a, p) in r.alpha.iter().zip(inst.probs()) {
            assert!(*a <= p / (1.0 - inst.beta()) + 1e-8);
        }
    }

    #[test]
    fn scenario_cut_examples() {
        let inst = Instance::uniform(vec![vec![-0.2], vec![0.1]], 0.5, 1.0, 1).unwrap();
        let (j, v) = scenario_cut(&[1.0], 0.0, &inst);
        assert_eq!(j, vec![0]);
        assert_abs_diff_eq!(v, 0.2, epsilon = 1e-15);
        let (j, v) = scenario_cut(&[1.0], 1.0, &inst);
        assert!(j.is_empty());
        assert_eq!(v, 0.0);

        let scen = (1..=10).map(|l| vec![-f64::from(l)]).collect();
        let inst = Instance::uniform(scen, 0.9, 1.0, 1).unwrap();
        let (j, v) = scenario_cut(&[1.0], 9.0, &inst);
        assert_eq!(j, vec![9]);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn subgradient_examples() {
        let cert = |omega: Vec<f64>| DualCertificate { alpha: vec![], zeta: vec![], lambda: 0.0, omega };
        assert_eq!(subgradient(&cert(vec![2.0, 0.0, -1.0]), 2.0), vec![-4.0, 0.0, -1.0]);
        assert!(subgradient(&cert(vec![0.0; 3]), 2.0).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_returns_certificate() {
        let inst = Instance::uniform(vec![vec![0.0, 0.0], vec![0.0, 0.0]], 0.5, 1.0, 2).unwrap();
        let z = SelectionVector::ones(2);
        let r = solve_lower_cp(&z, &inst, 1e-5).unwrap().feasible().unwrap();
        assert_abs_diff_eq!(r.f_lo, 0.25, epsilon = 1e-7);
        assert_abs_diff_eq!(r.certificate.dual_objective(&z, &inst), r.f_lo, epsilon = 1e-6);
    }

    #[test]
    fn certificate_rejects_bad_mass() {
        let inst = two_asset();
        let subsets = vec![ScenarioSubset::full(&inst)];
        let duals = QpDuals { alpha: vec![0.2], zeta: vec![], lambda: 0.0 };
        assert!(matches!(
            recover_certificate(&duals, &subsets, &SelectionVector::ones(2), &inst),
            Err(Error::Certificate(_))
        ));
    }
}

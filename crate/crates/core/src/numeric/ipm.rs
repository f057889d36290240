//! Primal-dual path-following interior-point method (Mehrotra
//! predictor-corrector) for [`ConvexProgram`].
//!
//! With slacks `s` and multipliers `z ≥ 0`, `y`, each iteration solves the
//! reduced Newton system
//!
//! ```text
//! (P + Gᵀ W G) Δx + Aᵀ Δy = r_x
//!              A Δx       = r_y        W = diag(z / s)
//! ```
//!
//! The separable tail of the program is eliminated first, so the dense
//! factorization only ever sees the `n_dense + n_eq` leading block.

use nalgebra::{DMatrix, DVector};

use super::program::{dot, ConvexProgram, Solution, SolveStatus};
use super::simplex::{solve_lp, LinearProgram, LpStatus};
use super::{feasible, Feasibility};
use crate::error::{Error, Result};

/// Solver knobs. Defaults: 200 iterations, KKT tolerance 1e-8, Phase-1 on.
#[derive(Debug, Clone)]
pub struct Settings {
    pub max_iter: usize,
    /// Residual level at which a solution is reported `Optimal`.
    pub tol: f64,
    /// Residual level at which iterations stop early.
    pub tight_tol: f64,
    /// Run a Phase-1 feasibility LP before the main solve.
    pub phase1: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iter: 200,
            tol: 1e-8,
            tight_tol: 1e-11,
            phase1: true,
        }
    }
}

const REG_LADDER: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];
const STEP_FRACTION: f64 = 0.99;

/// Solves with default settings.
pub fn solve(prog: &ConvexProgram) -> Result<Solution> {
    solve_with(prog, &Settings::default())
}

pub fn solve_with(prog: &ConvexProgram, settings: &Settings) -> Result<Solution> {
    prog.validate()?;
    let n = prog.n_vars();
    let m = prog.n_ineq();
    let p = prog.n_eq();

    if settings.phase1 {
        if let Feasibility::Infeasible = feasible(&prog.ineq_g, &prog.ineq_h, &prog.eq_a, &prog.eq_b) {
            return Ok(Solution {
                status: SolveStatus::Infeasible,
                x: vec![0.0; n],
                obj: f64::INFINITY,
                ineq_duals: vec![0.0; m],
                eq_duals: vec![0.0; p],
                iterations: 0,
            });
        }
    }

    let h_norm = inf_norm(&prog.ineq_h);
    let b_norm = inf_norm(&prog.eq_b);
    let q_norm = inf_norm(&prog.lin);

    // initial point: least-squares style solve with W = I
    let kkt = Kkt::factor(prog, vec![1.0; m], REG_LADDER[0])?;
    let mut rx: Vec<f64> = prog.lin.iter().map(|v| -v).collect();
    prog.ineq_g.mul_t_add(&prog.ineq_h, &mut rx);
    let (mut x, mut y) = kkt.solve(&rx, &prog.eq_b);

    if m == 0 {
        let (res_x, res_y) = kkt.residual(&x, &y, &rx, &prog.eq_b);
        let ok = inf_norm(&res_x) <= settings.tol * (1.0 + q_norm)
            && inf_norm(&res_y) <= settings.tol * (1.0 + b_norm)
            && x.iter().all(|v| v.is_finite());
        let status = if ok { SolveStatus::Optimal } else { unbounded_or_limit(prog, settings) };
        return Ok(Solution {
            status,
            obj: prog.objective(&x),
            x,
            ineq_duals: Vec::new(),
            eq_duals: y,
            iterations: 1,
        });
    }

    let gx = prog.ineq_g.mul_vec(&x);
    let mut s: Vec<f64> = prog.ineq_h.iter().zip(&gx).map(|(h, g)| h - g).collect();
    let mut z: Vec<f64> = s.iter().map(|v| -v).collect();
    initial_shift(&mut s, &mut z);

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut stall = 0;

    for it in 0..settings.max_iter {
        iterations = it + 1;
        // residuals
        let px: Vec<f64> = prog.quad_diag.iter().zip(&x).map(|(p, v)| p * v).collect();
        let mut gz = vec![0.0; n];
        prog.ineq_g.mul_t_add(&z, &mut gz);
        let mut ay = vec![0.0; n];
        prog.eq_a.mul_t_add(&y, &mut ay);
        let rd: Vec<f64> = (0..n).map(|i| px[i] + prog.lin[i] + gz[i] + ay[i]).collect();
        // dual residual relative to the size of the terms it balances
        let d_scale = q_norm.max(inf_norm(&px)).max(inf_norm(&gz)).max(inf_norm(&ay));
        let gx = prog.ineq_g.mul_vec(&x);
        let rp: Vec<f64> = gx.iter().zip(&s).zip(&prog.ineq_h).map(|((g, s), h)| g + s - h).collect();
        let ax = prog.eq_a.mul_vec(&x);
        let re: Vec<f64> = ax.iter().zip(&prog.eq_b).map(|(a, b)| a - b).collect();
        let mu = dot(&s, &z) / m as f64;

        let pobj = prog.objective(&x);
        let pres = (inf_norm(&rp) / (1.0 + h_norm)).max(inf_norm(&re) / (1.0 + b_norm));
        let dres = inf_norm(&rd) / (1.0 + d_scale);
        let gap = dot(&s, &z) / (1.0 + pobj.abs());
        let merit = pres.max(dres).max(gap);
        log::trace!("ipm it {it}: pres {pres:e} dres {dres:e} gap {gap:e}");
        if !merit.is_finite() {
            break;
        }
        match &best {
            Some((bm, ..)) if *bm <= merit => stall += 1,
            _ => {
                best = Some((merit, x.clone(), z.clone(), y.clone()));
                stall = 0;
            }
        }
        if merit <= settings.tight_tol {
            break;
        }
        if stall >= 15 {
            break;
        }
        if inf_norm(&x) > 1e12 || inf_norm(&z) > 1e16 {
            break;
        }

        let guard_mu = pres.max(dres) <= 1e-3 * gap;
        let w: Vec<f64> = z.iter().zip(&s).map(|(z, s)| z / s).collect();
        let neg_re: Vec<f64> = re.iter().map(|v| -v).collect();
        // Degenerate optima leave the Newton matrix nearly singular; when the
        // step collapses, retry with stronger regularization.
        let mut step = None;
        for reg in REG_LADDER {
            let Ok(kkt) = Kkt::factor(prog, w.clone(), reg) else {
                continue;
            };
            let (dx, dy, ds, dz, alpha) = mehrotra_step(prog, &kkt, &rd, &rp, &neg_re, &s, &z, mu, guard_mu);
            // a singular factor shows up as NaN in the direction
            let finite = [&dx, &dy, &ds, &dz].iter().all(|v| v.iter().all(|e| e.is_finite()));
            if finite && alpha >= 1e-8 {
                step = Some((dx, dy, ds, dz, alpha));
                break;
            }
        }
        let Some((dx, dy, ds, dz, alpha)) = step else {
            break;
        };
        for (v, d) in x.iter_mut().zip(&dx) {
            *v += alpha * d;
        }
        for (v, d) in y.iter_mut().zip(&dy) {
            *v += alpha * d;
        }
        for (v, d) in s.iter_mut().zip(&ds) {
            *v = (*v + alpha * d).max(1e-300);
        }
        for (v, d) in z.iter_mut().zip(&dz) {
            *v = (*v + alpha * d).max(1e-300);
        }
    }

    let (merit, bx, bz, by) = best.unwrap_or((f64::INFINITY, x, z, y));
    if merit > settings.tol {
        log::debug!("interior point stopped at merit {merit:e} after {iterations} iterations");
    }
    let status = if merit <= settings.tol {
        SolveStatus::Optimal
    } else {
        unbounded_or_limit(prog, settings)
    };
    Ok(Solution {
        status,
        obj: prog.objective(&bx),
        x: bx,
        ineq_duals: bz,
        eq_duals: by,
        iterations,
    })
}

/// Predictor-corrector direction and the step length along it, falling
/// back to a pure centering direction if the corrector is blocked.
#[allow(clippy::too_many_arguments)]
fn mehrotra_step(
    prog: &ConvexProgram,
    kkt: &Kkt,
    rd: &[f64],
    rp: &[f64],
    neg_re: &[f64],
    s: &[f64],
    z: &[f64],
    mu: f64,
    guard_mu: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let m = s.len();
    let rc: Vec<f64> = s.iter().zip(z).map(|(s, z)| -s * z).collect();
    let (_, _, ds_a, dz_a) = newton(prog, kkt, rd, rp, neg_re, &rc, s, z);
    let alpha_aff = max_step(s, &ds_a).min(max_step(z, &dz_a)).min(1.0);
    let mu_aff: f64 = (0..m)
        .map(|i| (s[i] + alpha_aff * ds_a[i]) * (z[i] + alpha_aff * dz_a[i]))
        .sum::<f64>()
        / m as f64;
    let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

    let rc: Vec<f64> = (0..m)
        .map(|i| -s[i] * z[i] - ds_a[i] * dz_a[i] + sigma * mu)
        .collect();
    let (dx, dy, ds, dz) = newton(prog, kkt, rd, rp, neg_re, &rc, s, z);
    let alpha = (STEP_FRACTION * max_step(s, &ds).min(max_step(z, &dz))).min(1.0);
    let mu_new = |ds: &[f64], dz: &[f64], alpha: f64| {
        (0..m).map(|i| (s[i] + alpha * ds[i]) * (z[i] + alpha * dz[i])).sum::<f64>() / m as f64
    };
    // Once the residuals are negligible, shorten the step until
    // complementarity drops: near a degenerate optimum the curvature term
    // ds∘dz can otherwise push μ back up and the iterates cycle.
    let shorten = |ds: &[f64], dz: &[f64], mut alpha: f64| {
        if !guard_mu {
            return alpha;
        }
        for _ in 0..30 {
            if alpha < 1e-8 || mu_new(ds, dz, alpha) < mu {
                break;
            }
            alpha *= 0.5;
        }
        alpha
    };
    let alpha = shorten(&ds, &dz, alpha);
    if alpha >= 1e-8 && mu_new(&ds, &dz, alpha) < mu {
        return (dx, dy, ds, dz, alpha);
    }
    // the second-order term overshot; take the plain centered direction
    let rc: Vec<f64> = (0..m).map(|i| -s[i] * z[i] + sigma.max(0.1) * mu).collect();
    let (dx, dy, ds, dz) = newton(prog, kkt, rd, rp, neg_re, &rc, s, z);
    let alpha = shorten(&ds, &dz, (STEP_FRACTION * max_step(s, &ds).min(max_step(z, &dz))).min(1.0));
    if alpha >= 1e-8 && (!guard_mu || mu_new(&ds, &dz, alpha) < mu) {
        return (dx, dy, ds, dz, alpha);
    }
    let rc: Vec<f64> = (0..m).map(|i| mu - s[i] * z[i]).collect();
    let (dx, dy, ds, dz) = newton(prog, kkt, rd, rp, neg_re, &rc, s, z);
    let alpha = (STEP_FRACTION * max_step(s, &ds).min(max_step(z, &dz))).min(1.0);
    (dx, dy, ds, dz, alpha)
}

/// Full Newton direction from the reduced system.
#[allow(clippy::too_many_arguments)]
fn newton(
    prog: &ConvexProgram,
    kkt: &Kkt,
    rd: &[f64],
    rp: &[f64],
    ry: &[f64],
    rc: &[f64],
    s: &[f64],
    z: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = s.len();
    // u = S⁻¹ (r_c + Z r_p)
    let u: Vec<f64> = (0..m).map(|i| (rc[i] + z[i] * rp[i]) / s[i]).collect();
    let mut rx: Vec<f64> = rd.iter().map(|v| -v).collect();
    let neg_u: Vec<f64> = u.iter().map(|v| -v).collect();
    prog.ineq_g.mul_t_add(&neg_u, &mut rx);
    let (dx, dy) = kkt.solve(&rx, ry);
    let gdx = prog.ineq_g.mul_vec(&dx);
    let dz: Vec<f64> = (0..m).map(|i| kkt.w[i] * gdx[i] + u[i]).collect();
    let ds: Vec<f64> = (0..m).map(|i| -rp[i] - gdx[i]).collect();
    (dx, dy, ds, dz)
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

/// Mehrotra's starting-point heuristic: make `s` and `z` positive, then
/// balance them so the products `s_i z_i` start on a common scale.
fn initial_shift(s: &mut [f64], z: &mut [f64]) {
    let lift = |v: &mut [f64]| {
        let d = (-1.5 * v.iter().copied().fold(f64::INFINITY, f64::min)).max(0.0);
        v.iter_mut().for_each(|e| *e += d);
    };
    lift(s);
    lift(z);
    let sz = dot(s, z);
    let (ss, zs): (f64, f64) = (s.iter().sum(), z.iter().sum());
    let (ds, dz) = if sz > 0.0 { (0.5 * sz / zs, 0.5 * sz / ss) } else { (1.0, 1.0) };
    s.iter_mut().for_each(|e| *e = (*e + ds).max(1e-8));
    z.iter_mut().for_each(|e| *e = (*e + dz).max(1e-8));
}

/// Max-abs norm; NaN entries propagate.
fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Distinguishes an unbounded program from a stalled solve: searches for a
/// recession direction `d` with `Pd = 0`, `Gd ≤ 0`, `Ad = 0`, `qᵀd < 0`.
fn unbounded_or_limit(prog: &ConvexProgram, settings: &Settings) -> SolveStatus {
    if !settings.phase1 || prog.quad_diag.iter().all(|&p| p > 0.0) {
        return SolveStatus::IterLimit;
    }
    let n = prog.n_vars();
    let mut lp = LinearProgram::new(n);
    lp.cost = prog.lin.clone();
    for j in 0..n {
        if prog.quad_diag[j] > 0.0 {
            lp.set_bounds(j, 0.0, 0.0);
        } else {
            lp.set_bounds(j, -1.0, 1.0);
        }
    }
    for i in 0..prog.n_ineq() {
        let (c, v) = prog.ineq_g.row(i);
        lp.add_le(c.iter().copied().zip(v.iter().copied()), 0.0);
    }
    for i in 0..prog.n_eq() {
        let (c, v) = prog.eq_a.row(i);
        lp.add_eq(c.iter().copied().zip(v.iter().copied()), 0.0);
    }
    let sol = solve_lp(&lp);
    if sol.status == LpStatus::Optimal && sol.obj < -1e-9 {
        SolveStatus::Unbounded
    } else {
        SolveStatus::IterLimit
    }
}

/// Factored reduced Newton matrix.
struct Kkt<'a> {
    prog: &'a ConvexProgram,
    nd: usize,
    w: Vec<f64>,
    tail_d: Vec<f64>,
    coupling: Vec<f64>,
    lu: nalgebra::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> Kkt<'a> {
    fn factor(prog: &'a ConvexProgram, w: Vec<f64>, reg: f64) -> Result<Self> {
        let n = prog.n_vars();
        let nd = prog.n_dense;
        let nt = n - nd;
        let p = prog.n_eq();

        let mut kdd = vec![0.0; nd * nd];
        for j in 0..nd {
            kdd[j * nd + j] = prog.quad_diag[j] + reg;
        }
        let mut tail_d: Vec<f64> = prog.quad_diag[nd..].iter().map(|v| v + reg).collect();
        let mut coupling = vec![0.0; nt * nd];
        // rows that touch both a tail variable and the dense block, per tail variable
        let mut mixed: Vec<Vec<usize>> = vec![Vec::new(); nt];
        let add_outer = |kdd: &mut [f64], f: f64, cols: &[usize], vals: &[f64]| {
            for (&a, &va) in cols.iter().zip(vals) {
                if a >= nd {
                    continue;
                }
                let row = &mut kdd[a * nd..(a + 1) * nd];
                for (&b, &vb) in cols.iter().zip(vals) {
                    if b < nd {
                        row[b] += f * va * vb;
                    }
                }
            }
        };
        for (i, &wi) in w.iter().enumerate() {
            let (cols, vals) = prog.ineq_g.row(i);
            let tail = cols.iter().zip(vals).find(|(c, _)| **c >= nd);
            match tail {
                None => add_outer(&mut kdd, wi, cols, vals),
                Some((&c, &v)) if cols.len() == 1 => tail_d[c - nd] += wi * v * v,
                Some((&c, _)) => mixed[c - nd].push(i),
            }
        }
        // Schur complement of the tail block. With a single mixed row the
        // update w·uuᵀ − (w v)² uuᵀ / d is formed as w·d₀/(d₀ + w v²)·uuᵀ,
        // which stays accurate when w v² dwarfs the rest of the diagonal.
        for t in 0..nt {
            let d0 = tail_d[t];
            let cp = &mut coupling[t * nd..(t + 1) * nd];
            for &i in &mixed[t] {
                let (cols, vals) = prog.ineq_g.row(i);
                let v = vals[cols.iter().position(|&c| c == nd + t).unwrap()];
                tail_d[t] += w[i] * v * v;
                for (&a, &va) in cols.iter().zip(vals) {
                    if a < nd {
                        cp[a] += w[i] * v * va;
                    }
                }
            }
            match mixed[t].as_slice() {
                [] => {}
                &[i] => {
                    let (cols, vals) = prog.ineq_g.row(i);
                    add_outer(&mut kdd, w[i] * d0 / tail_d[t], cols, vals);
                }
                rows => {
                    for &i in rows {
                        let (cols, vals) = prog.ineq_g.row(i);
                        add_outer(&mut kdd, w[i], cols, vals);
                    }
                    let inv = 1.0 / tail_d[t];
                    for a in 0..nd {
                        if cp[a] == 0.0 {
                            continue;
                        }
                        let f = cp[a] * inv;
                        let row = &mut kdd[a * nd..(a + 1) * nd];
                        for b in 0..nd {
                            row[b] -= f * cp[b];
                        }
                    }
                }
            }
        }
        let size = nd + p;
        let mut aug = DMatrix::<f64>::zeros(size, size);
        for a in 0..nd {
            for b in 0..nd {
                aug[(a, b)] = kdd[a * nd + b];
            }
        }
        for i in 0..p {
            let (cols, vals) = prog.eq_a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                aug[(nd + i, c)] = v;
                aug[(c, nd + i)] = v;
            }
            aug[(nd + i, nd + i)] = -reg;
        }
        if aug.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure("non-finite Newton matrix".into()));
        }
        Ok(Kkt {
            prog,
            nd,
            w,
            tail_d,
            coupling,
            lu: aug.full_piv_lu(),
        })
    }

    fn solve_regularized(&self, rx: &[f64], ry: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nd = self.nd;
        let nt = self.tail_d.len();
        let p = ry.len();
        let mut rhs = DVector::<f64>::zeros(nd + p);
        for a in 0..nd {
            rhs[a] = rx[a];
        }
        for t in 0..nt {
            let f = rx[nd + t] / self.tail_d[t];
            if f != 0.0 {
                let cp = &self.coupling[t * nd..(t + 1) * nd];
                for a in 0..nd {
                    rhs[a] -= cp[a] * f;
                }
            }
        }
        for i in 0..p {
            rhs[nd + i] = ry[i];
        }
        let sol = self
            .lu
            .solve(&rhs)
            .unwrap_or_else(|| DVector::from_element(nd + p, f64::NAN));
        let mut dx = vec![0.0; nd + nt];
        dx[..nd].copy_from_slice(&sol.as_slice()[..nd]);
        for t in 0..nt {
            let cp = &self.coupling[t * nd..(t + 1) * nd];
            let c: f64 = cp.iter().zip(&dx[..nd]).map(|(a, b)| a * b).sum();
            dx[nd + t] = (rx[nd + t] - c) / self.tail_d[t];
        }
        (dx, sol.as_slice()[nd..].to_vec())
    }

    /// Residual of the unregularized system at `(dx, dy)`.
    fn residual(&self, dx: &[f64], dy: &[f64], rx: &[f64], ry: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let prog = self.prog;
        let mut kx: Vec<f64> = prog.quad_diag.iter().zip(dx).map(|(p, v)| p * v).collect();
        let gdx = prog.ineq_g.mul_vec(dx);
        let wg: Vec<f64> = gdx.iter().zip(&self.w).map(|(g, w)| g * w).collect();
        prog.ineq_g.mul_t_add(&wg, &mut kx);
        prog.eq_a.mul_t_add(dy, &mut kx);
        let res_x: Vec<f64> = rx.iter().zip(&kx).map(|(r, k)| r - k).collect();
        let adx = prog.eq_a.mul_vec(dx);
        let res_y: Vec<f64> = ry.iter().zip(&adx).map(|(r, a)| r - a).collect();
        (res_x, res_y)
    }

    /// Regularized solve followed by up to eight steps of iterative
    /// refinement, each kept only if it shrinks the residual.
    fn solve(&self, rx: &[f64], ry: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dx, mut dy) = self.solve_regularized(rx, ry);
        let (mut res_x, mut res_y) = self.residual(&dx, &dy, rx, ry);
        let mut res = inf_norm(&res_x).max(inf_norm(&res_y));
        for _ in 0..8 {
            let (cx, cy) = self.solve_regularized(&res_x, &res_y);
            let nx: Vec<f64> = dx.iter().zip(&cx).map(|(a, b)| a + b).collect();
            let ny: Vec<f64> = dy.iter().zip(&cy).map(|(a, b)| a + b).collect();
            let (rx2, ry2) = self.residual(&nx, &ny, rx, ry);
            let r2 = inf_norm(&rx2).max(inf_norm(&ry2));
            if !(r2 < res) {
                break;
            }
            (dx, dy, res_x, res_y, res) = (nx, ny, rx2, ry2, r2);
        }
        (dx, dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unconstrained_quadratic() {
        // min ½x² − x
        let mut p = ConvexProgram::new(1);
        p.quad_diag[0] = 1.0;
        p.lin[0] = -1.0;
        let s = solve(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.obj, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn simplex_vertex_lp() {
        // min −x₁ s.t. x₁ + x₂ = 1, x ≥ 0
        let mut p = ConvexProgram::new(2);
        p.lin = vec![-1.0, 0.0];
        p.add_eq([(0, 1.0), (1, 1.0)], 1.0);
        p.add_ineq([(0, -1.0)], 0.0);
        p.add_ineq([(1, -1.0)], 0.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.x[1], 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.obj, -1.0, epsilon = 1e-8);
        // stationarity: −1 − π₁ + y = 0, 0 − π₂ + y = 0, π₁ = 0 → y = 1, π₂ = 1
        assert_abs_diff_eq!(s.ineq_duals[1], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn bound_constrained_quadratic_dual() {
        // min ½x² s.t. −x ≤ −0.5
        let mut p = ConvexProgram::new(1);
        p.quad_diag[0] = 1.0;
        p.add_ineq([(0, -1.0)], -0.5);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(s.ineq_duals[0], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn infeasible_and_unbounded_statuses() {
        let mut p = ConvexProgram::new(2);
        p.add_eq([(0, 1.0), (1, 1.0)], 1.0);
        p.add_ineq([(0, -1.0)], -2.0);
        p.add_ineq([(1, -1.0)], 0.0);
        assert_eq!(solve(&p).unwrap().status, SolveStatus::Infeasible);

        let mut p = ConvexProgram::new(2);
        p.quad_diag = vec![1.0, 0.0];
        p.lin = vec![0.0, -1.0];
        p.add_ineq([(1, -1.0)], 0.0);
        assert_eq!(solve(&p).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn tail_elimination_matches_dense_solve() {
        // min ½(x₀² + x₁²) + Σ q_t  s.t. q_t ≥ c_t − x₀ − 2x₁, q_t ≥ 0, x₀ + x₁ = 1
        let cs = [0.3, -0.2, 0.9, 0.5];
        let build = |n_dense: usize| {
            let mut p = ConvexProgram::new(2 + cs.len());
            p.quad_diag[0] = 1.0;
            p.quad_diag[1] = 1.0;
            for t in 0..cs.len() {
                p.lin[2 + t] = 0.25;
                p.add_ineq([(0, -1.0), (1, -2.0), (2 + t, -1.0)], -cs[t]);
                p.add_ineq([(2 + t, -1.0)], 0.0);
            }
            p.add_eq([(0, 1.0), (1, 1.0)], 1.0);
            p.n_dense = n_dense;
            p
        };
        let dense = solve(&build(6)).unwrap();
        let tail = solve(&build(2)).unwrap();
        assert_eq!(dense.status, SolveStatus::Optimal);
        assert_eq!(tail.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(dense.obj, tail.obj, epsilon = 1e-9);
        for (a, b) in dense.x.iter().zip(&tail.x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }
}

mod common;

use ccvar::lower::{solve_lower_cp, solve_lower_lifted, subgradient, LowerResult, Outcome};
use ccvar::model::{self, Instance, SelectionVector};
use common::{feasible_pairs, lifted_dual_value, random_instance, random_selection, Rng};

fn cp(z: &SelectionVector, inst: &Instance, delta: f64) -> LowerResult {
    match solve_lower_cp(z, inst, delta).unwrap() {
        Outcome::Feasible(r) => r,
        Outcome::Infeasible => panic!("cutting plane reports infeasible where the lifted solve did not"),
    }
}

fn exact(z: &SelectionVector, inst: &Instance) -> Option<f64> {
    solve_lower_lifted(z, inst).unwrap().feasible().map(|r| r.f)
}

#[test]
fn bounds_sandwich_the_exact_value() {
    for (inst, z, ex) in feasible_pairs(11, 40, 8, 80) {
        for delta in [1e-3, 1e-5] {
            let r = cp(&z, &inst, delta);
            assert!(r.f_lo <= ex.f + 1e-7, "f_lo {} above exact {}", r.f_lo, ex.f);
            assert!(ex.f <= r.f_hi + 1e-7, "exact {} above f_hi {}", ex.f, r.f_hi);
            assert!(r.f_hi <= r.f_lo + delta + 1e-9, "f_hi {} f_lo {} delta {delta}", r.f_hi, r.f_lo);
        }
    }
}

#[test]
fn lifted_value_matches_direct_evaluation() {
    for (inst, _, ex) in feasible_pairs(12, 40, 8, 80) {
        let x = &ex.portfolio.weights;
        let (_, cvar) = model::cvar(x, &inst);
        let direct = x.iter().map(|v| v * v).sum::<f64>() / (2.0 * inst.gamma()) + cvar;
        assert!((direct - ex.f).abs() < 1e-7 * (1.0 + ex.f.abs()), "{direct} vs {}", ex.f);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        for (row, b) in inst.side_a().iter().zip(inst.side_b()) {
            assert!(row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() <= b + 1e-8);
        }
    }
}

#[test]
fn lifted_solve_has_no_duality_gap() {
    for (inst, z, ex) in feasible_pairs(13, 40, 8, 120) {
        let dual = lifted_dual_value(&ex, &z, &inst);
        assert!((ex.f - dual).abs() <= 1e-7 * (1.0 + ex.f.abs()), "primal {} dual {dual}", ex.f);
        assert!((ex.dual_objective - dual).abs() <= 1e-9 * (1.0 + dual.abs()));
    }
}

#[test]
fn certificate_is_dual_feasible_and_tight() {
    for (inst, z, _) in feasible_pairs(14, 40, 8, 80) {
        let r = cp(&z, &inst, 1e-5);
        let c = &r.certificate;
        let beta = inst.beta();
        assert_eq!(c.alpha.len(), r.subsets.len());
        assert!(c.alpha.iter().all(|&a| a >= 0.0));
        assert!(c.alpha.iter().sum::<f64>() <= 1.0 + 1e-9);
        let mass: f64 = c.alpha.iter().zip(&r.subsets).map(|(a, s)| a * s.prob).sum();
        assert!((mass - (1.0 - beta)).abs() <= 1e-8, "mass {mass}");
        for j in 0..inst.n_assets() {
            let mut rhs = c.lambda;
            for (a, sub) in c.alpha.iter().zip(&r.subsets) {
                rhs += a * sub.indices.iter().map(|&s| inst.probs()[s] * inst.scenario(s)[j]).sum::<f64>() / (1.0 - beta);
            }
            for (row, zeta) in inst.side_a().iter().zip(&c.zeta) {
                rhs -= row[j] * zeta;
            }
            assert!(c.omega[j] >= rhs - 1e-8 && c.omega[j] >= 0.0);
        }
        let dual = c.dual_objective(&z, &inst);
        assert!((dual - r.f_lo).abs() <= 1e-6, "certificate {dual} vs f_lo {}", r.f_lo);
        // stationarity on the support: x_n = γ ω_n
        for j in z.support() {
            let x = r.portfolio.weights[j];
            assert!((x - inst.gamma() * c.omega[j]).abs() <= 1e-5 * (1.0 + x.abs()), "asset {j}: x {x} ω {}", c.omega[j]);
        }
    }
}

#[test]
fn inner_loop_is_monotone_and_finite() {
    for (inst, z, _) in feasible_pairs(15, 40, 8, 150) {
        let r = cp(&z, &inst, 1e-5);
        assert_eq!(r.qp_dim, z.cardinality() + 2);
        assert_eq!(r.v_trace.len(), r.iters);
        for (v, vp) in r.v_trace.iter().zip(&r.v_prime_trace) {
            assert!(vp + 1e-8 * (1.0 + v.abs()) >= *v, "v' {vp} below v {v}");
        }
        for w in r.obj_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()), "QP value fell from {} to {}", w[0], w[1]);
        }
        // each iteration but the last adds a new subset
        assert!(r.iters <= r.subsets.len());
        if r.iters > 30 {
            eprintln!("note: {} inner iterations", r.iters);
        }
    }
}

#[test]
fn cuts_underestimate_the_exact_value() {
    let mut rng = Rng::new(16);
    let mut checked = 0;
    while checked < 100 {
        let inst = random_instance(&mut rng, 7, 60);
        let z_hat = random_selection(&mut rng, inst.n_assets());
        let Outcome::Feasible(r) = solve_lower_cp(&z_hat, &inst, 1e-5).unwrap() else { continue };
        let g = subgradient(&r.certificate, inst.gamma());
        assert!(g.iter().all(|&v| v <= 0.0));
        for _ in 0..3 {
            let z = random_selection(&mut rng, inst.n_assets());
            let Some(f) = exact(&z, &inst) else { continue };
            let lin: f64 = g
                .iter()
                .zip(z.as_f64())
                .zip(z_hat.as_f64())
                .map(|((g, z), zh)| g * (z - zh))
                .sum();
            assert!(f >= r.f_lo + lin - 1e-7, "cut {} exceeds f {f}", r.f_lo + lin);
            checked += 1;
        }
    }
}

#[test]
fn larger_support_never_hurts() {
    let mut rng = Rng::new(17);
    for (inst, z, ex) in feasible_pairs(17, 40, 8, 80) {
        let mut bits = z.bits().to_vec();
        for b in bits.iter_mut() {
            *b |= rng.uniform() < 0.5;
        }
        let bigger = exact(&SelectionVector::new(bits), &inst).expect("superset of a feasible support");
        assert!(bigger <= ex.f + 1e-8, "{bigger} > {}", ex.f);
    }
}

#[test]
fn infeasible_supports_agree() {
    // the return floor rules out every single asset below it
    let mut rng = Rng::new(18);
    let mut seen = 0;
    for _ in 0..200 {
        let inst = random_instance(&mut rng, 6, 30);
        let z = random_selection(&mut rng, inst.n_assets());
        let lifted = solve_lower_lifted(&z, &inst).unwrap().is_infeasible();
        let cp = solve_lower_cp(&z, &inst, 1e-5).unwrap().is_infeasible();
        assert_eq!(lifted, cp);
        seen += lifted as usize;
    }
    assert!(seen > 0);
}


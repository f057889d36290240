#![allow(dead_code)]

use ccvar::driver::synthetic_instance;
use ccvar::lower::{solve_lower_lifted, LiftedResult, Outcome};
use ccvar::model::{Instance, SelectionVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Rng(ChaCha20Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `lo..=hi`.
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn seed(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Either a factor-model instance with the default return floor, or raw
/// uniform returns with random `β`, `γ` and no side constraint.
pub fn random_instance(rng: &mut Rng, max_n: usize, max_s: usize) -> Instance {
    let n = rng.int(2, max_n);
    let s = rng.int(3, max_s);
    let k = rng.int(1, n);
    if rng.uniform() < 0.5 {
        synthetic_instance(n, s, k, rng.seed()).unwrap()
    } else {
        let rows = (0..s).map(|_| (0..n).map(|_| rng.range(-1.0, 1.0)).collect()).collect();
        let beta = [0.5, 0.8, 0.9, 0.95][rng.int(0, 3)];
        Instance::uniform(rows, beta, rng.range(0.1, 10.0), k).unwrap()
    }
}

/// Nonempty random selection of at most `n` assets.
pub fn random_selection(rng: &mut Rng, n: usize) -> SelectionVector {
    loop {
        let p = rng.range(0.2, 0.9);
        let bits: Vec<bool> = (0..n).map(|_| rng.uniform() < p).collect();
        if bits.iter().any(|&b| b) {
            return SelectionVector::new(bits);
        }
    }
}

/// `count` random `(instance, z)` pairs whose lower level is feasible,
/// together with the exact lifted solve.
pub fn feasible_pairs(seed: u64, count: usize, max_n: usize, max_s: usize) -> Vec<(Instance, SelectionVector, LiftedResult)> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let inst = random_instance(&mut rng, max_n, max_s);
        let z = random_selection(&mut rng, inst.n_assets());
        if let Outcome::Feasible(exact) = solve_lower_lifted(&z, &inst).unwrap() {
            out.push((inst, z, exact));
        }
    }
    out
}

/// Dual objective of the lifted problem recomputed from its multipliers,
/// after checking they are dual feasible.
pub fn lifted_dual_value(res: &LiftedResult, z: &SelectionVector, inst: &Instance) -> f64 {
    let n = inst.n_assets();
    let cap = 1.0 / (1.0 - inst.beta());
    let sum: f64 = res.alpha.iter().sum();
    assert!((sum - 1.0).abs() < 1e-8, "alpha sums to {sum}");
    for (a, p) in res.alpha.iter().zip(inst.probs()) {
        assert!(*a >= -1e-12 && *a <= p * cap + 1e-9, "alpha {a} outside [0, {}]", p * cap);
    }
    assert!(res.zeta.iter().all(|&z| z >= -1e-12));
    let mut c = vec![res.lambda; n];
    for (s, a) in res.alpha.iter().enumerate() {
        for (cj, r) in c.iter_mut().zip(inst.scenario(s)) {
            *cj += a * r;
        }
    }
    for (row, zeta) in inst.side_a().iter().zip(&res.zeta) {
        for (cj, a) in c.iter_mut().zip(row) {
            *cj -= a * zeta;
        }
    }
    let quad: f64 = z.support().iter().map(|&j| c[j].max(0.0).powi(2)).sum();
    let bz: f64 = inst.side_b().iter().zip(&res.zeta).map(|(b, z)| b * z).sum();
    -0.5 * inst.gamma() * quad - bz + res.lambda
}

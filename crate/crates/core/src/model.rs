//! Problem data, CVaR evaluation and the feasible portfolio set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cardinality-constrained mean-CVaR instance.
///
/// Scenario returns are stored row-major (`S × N`); side constraints
/// `side_a · x ≤ side_b` hold the expected-return row once it has been added
/// with [`Instance::with_return_constraint`]. The simplex constraints
/// `1ᵀx = 1, x ≥ 0` are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n_assets: usize,
    n_scenarios: usize,
    returns: Vec<f64>,
    probs: Vec<f64>,
    side_a: Vec<Vec<f64>>,
    side_b: Vec<f64>,
    beta: f64,
    gamma: f64,
    k: usize,
}

impl Instance {
    /// `scenarios` is a list of `S` rows of length `N`.
    pub fn new(
        scenarios: Vec<Vec<f64>>,
        probs: Vec<f64>,
        side_a: Vec<Vec<f64>>,
        side_b: Vec<f64>,
        beta: f64,
        gamma: f64,
        k: usize,
    ) -> Result<Self> {
        let s = scenarios.len();
        let n = scenarios.first().map_or(0, Vec::len);
        let mut returns = Vec::with_capacity(s * n);
        for (i, row) in scenarios.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "scenario {i} has {} returns, expected {n}",
                    row.len()
                )));
            }
            returns.extend_from_slice(row);
        }
        Self::from_flat(n, returns, probs, side_a, side_b, beta, gamma, k)
    }

    /// Same as [`Instance::new`] with the returns already flattened row-major.
    #[allow(clippy::too_many_arguments)]
    pub fn from_flat(
        n_assets: usize,
        returns: Vec<f64>,
        probs: Vec<f64>,
        side_a: Vec<Vec<f64>>,
        side_b: Vec<f64>,
        beta: f64,
        gamma: f64,
        k: usize,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if n_assets == 0 {
            return bad("no assets".into());
        }
        if probs.is_empty() {
            return bad("no scenarios".into());
        }
        if returns.len() != n_assets * probs.len() {
            return bad(format!(
                "return matrix has {} entries, expected {} × {}",
                returns.len(),
                probs.len(),
                n_assets
            ));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return bad("non-finite scenario return".into());
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad("probabilities must be nonnegative".into());
        }
        let total = compensated_sum(&probs);
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("probabilities sum to {total}, not 1"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return bad(format!("beta = {beta} is not inside (0, 1)"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return bad(format!("gamma = {gamma} must be positive"));
        }
        if k < 1 || k > n_assets {
            return bad(format!("k = {k} is outside [1, {n_assets}]"));
        }
        if side_a.len() != side_b.len() {
            return bad(format!(
                "side constraint matrix has {} rows but rhs has {}",
                side_a.len(),
                side_b.len()
            ));
        }
        for (i, row) in side_a.iter().enumerate() {
            if row.len() != n_assets || row.iter().any(|v| !v.is_finite()) {
                return bad(format!("side constraint row {i} is malformed"));
            }
        }
        if side_b.iter().any(|v| !v.is_finite()) {
            return bad("non-finite side constraint rhs".into());
        }
        Ok(Instance {
            n_assets,
            n_scenarios: probs.len(),
            returns,
            probs,
            side_a,
            side_b,
            beta,
            gamma,
            k,
        })
    }

    /// Equiprobable scenarios (`p_s = 1/S`) and no side constraints.
    pub fn uniform(scenarios: Vec<Vec<f64>>, beta: f64, gamma: f64, k: usize) -> Result<Self> {
        let s = scenarios.len();
        let probs = uniform_probs(s);
        Self::new(scenarios, probs, Vec::new(), Vec::new(), beta, gamma, k)
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn scenario(&self, s: usize) -> &[f64] {
        &self.returns[s * self.n_assets..(s + 1) * self.n_assets]
    }

    pub fn returns_flat(&self) -> &[f64] {
        &self.returns
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn side_a(&self) -> &[Vec<f64>] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[f64] {
        &self.side_b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        if k < 1 || k > self.n_assets {
            return Err(Error::InvalidInstance(format!("k = {k} is outside [1, {}]", self.n_assets)));
        }
        out.k = k;
        Ok(out)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInstance(format!("gamma = {gamma} must be positive")));
        }
        let mut out = self.clone();
        out.gamma = gamma;
        Ok(out)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidInstance(format!("beta = {beta} is not inside (0, 1)")));
        }
        let mut out = self.clone();
        out.beta = beta;
        Ok(out)
    }

    /// Scales every scenario return by `t` (used by homogeneity checks).
    pub fn scaled_returns(&self, t: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.returns {
            *r *= t;
        }
        out
    }

    /// Copy with the row `−μᵀx ≤ −μ̄` appended to the side constraints.
    pub fn with_return_constraint(&self, mu_bar: f64) -> Self {
        let (a, b) = build_feasible_set(self, mu_bar);
        let mut out = self.clone();
        out.side_a = a;
        out.side_b = b;
        out
    }

    /// Sample mean `μ_n = Σ_s p_s r_n^(s)`.
    pub fn expected_returns(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.n_assets];
        for s in 0..self.n_scenarios {
            let p = self.probs[s];
            for (m, r) in mu.iter_mut().zip(self.scenario(s)) {
                *m += p * r;
            }
        }
        mu
    }

    /// Scenario losses `−(r^(s))ᵀx`, in scenario order.
    pub fn losses(&self, x: &[f64]) -> Vec<f64> {
        let support: Vec<usize> = (0..self.n_assets).filter(|&j| x[j] != 0.0).collect();
        (0..self.n_scenarios)
            .map(|s| {
                let r = self.scenario(s);
                -support.iter().map(|&j| r[j] * x[j]).sum::<f64>()
            })
            .collect()
    }
}

/// Neumaier summation, so long probability vectors do not drift from 1.
fn compensated_sum(v: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in v {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

pub fn uniform_probs(s: usize) -> Vec<f64> {
    vec![1.0 / s as f64; s]
}

/// Binary asset-selection vector `z`. Ordering is lexicographic with
/// `false < true` at the first differing index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionVector(Vec<bool>);

impl SelectionVector {
    pub fn new(bits: Vec<bool>) -> Self {
        SelectionVector(bits)
    }

    pub fn zeros(n: usize) -> Self {
        SelectionVector(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        SelectionVector(vec![true; n])
    }

    pub fn from_support(n: usize, support: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &j in support {
            bits[j] = true;
        }
        SelectionVector(bits)
    }

    /// Parses `0`/`1` entries; any other value is rejected.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(Error::Parameter(format!("selection entry {v} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SelectionVector)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn cardinality(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j]).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Checks membership in `Z_N^k`.
    pub fn check(&self, n: usize, k: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::Parameter(format!("selection has length {}, expected {n}", self.len())));
        }
        if self.cardinality() > k {
            return Err(Error::Parameter(format!(
                "selection has {} assets, more than k = {k}",
                self.cardinality()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for SelectionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Portfolio `(a, v, x)`: weights, VaR level and CVaR excess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    pub var_level: f64,
    pub cvar_excess: f64,
}

impl Portfolio {
    /// Simplex and sign invariants at the tolerances used throughout.
    pub fn check(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::SolverFailure(format!("weights sum to {sum}")));
        }
        if let Some(w) = self.weights.iter().find(|&&w| w < -1e-10) {
            return Err(Error::SolverFailure(format!("negative weight {w}")));
        }
        if self.cvar_excess < -1e-10 {
            return Err(Error::SolverFailure(format!("negative CVaR excess {}", self.cvar_excess)));
        }
        Ok(())
    }

    pub fn support(&self, threshold: f64) -> Vec<usize> {
        (0..self.weights.len()).filter(|&j| self.weights[j] > threshold).collect()
    }
}

/// `μ̄ = 0.3·(mean of the k smallest μ) + 0.7·(mean of the k largest μ)`.
pub fn compute_mu_bar(mu: &[f64], k: usize) -> Result<f64> {
    if k < 1 || k > mu.len() {
        return Err(Error::Parameter(format!("k = {k} is outside [1, {}]", mu.len())));
    }
    let mut sorted = mu.to_vec();
    sorted.sort_by(f64::total_cmp);
    let bottom = sorted[..k].iter().sum::<f64>() / k as f64;
    let top = sorted[sorted.len() - k..].iter().sum::<f64>() / k as f64;
    Ok(0.3 * bottom + 0.7 * top)
}

/// Side constraints augmented with the expected-return row `−μᵀx ≤ −μ̄`.
pub fn build_feasible_set(instance: &Instance, mu_bar: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mu = instance.expected_returns();
    let mut a = instance.side_a().to_vec();
    let mut b = instance.side_b().to_vec();
    a.push(mu.iter().map(|m| -m).collect());
    b.push(-mu_bar);
    (a, b)
}

/// `F_β(a, x) = a + (1/(1−β)) Σ_s p_s [−(r^(s))ᵀx − a]_+`.
pub fn cvar_function(a: f64, x: &[f64], instance: &Instance) -> f64 {
    let losses = instance.losses(x);
    let tail: f64 = losses
        .iter()
        .zip(instance.probs())
        .map(|(l, p)| p * (l - a).max(0.0))
        .sum();
    a + tail / (1.0 - instance.beta())
}

/// β-VaR (left quantile of the loss distribution) and β-CVaR of `x`.
pub fn cvar(x: &[f64], instance: &Instance) -> (f64, f64) {
    let losses = instance.losses(x);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&i, &j| losses[i].total_cmp(&losses[j]).then(i.cmp(&j)));
    let beta = instance.beta();
    let mut cum = 0.0;
    let mut a_star = losses[order[order.len() - 1]];
    for &s in &order {
        cum += instance.probs()[s];
        if cum >= beta - 1e-12 {
            a_star = losses[s];
            break;
        }
    }
    (a_star, cvar_function(a_star, x, instance))
}

/// `(1/(2γ)) xᵀx + a + v`.
pub fn objective(portfolio: &Portfolio, instance: &Instance) -> f64 {
    let sq: f64 = portfolio.weights.iter().map(|w| w * w).sum();
    sq / (2.0 * instance.gamma()) + portfolio.var_level + portfolio.cvar_excess
}

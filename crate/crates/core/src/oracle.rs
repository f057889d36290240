//! Exhaustive enumeration over asset selections, for testing.

use crate::error::{Error, Result};
use crate::lower::{solve_lower_lifted, Outcome};
use crate::model::{Instance, SelectionVector};

/// Largest number of supports [`brute_force`] will enumerate.
pub const BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_z: SelectionVector,
    pub best_f: f64,
    pub evaluated: usize,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if k > n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx)?;
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return Ok(());
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn enumerate(instance: &Instance, sizes: impl Iterator<Item = usize>) -> Result<Outcome<OracleResult>> {
    let n = instance.n_assets();
    let mut best: Option<(f64, SelectionVector)> = None;
    let mut evaluated = 0;
    for size in sizes {
        for_each_combination(n, size, |support| {
            evaluated += 1;
            let z = SelectionVector::from_support(n, support);
            if let Outcome::Feasible(r) = solve_lower_lifted(&z, instance)? {
                let better = match &best {
                    None => true,
                    Some((f, bz)) => r.f < *f || (r.f == *f && z < *bz),
                };
                if better {
                    best = Some((r.f, z));
                }
            }
            Ok(())
        })?;
    }
    Ok(match best {
        Some((best_f, best_z)) => Outcome::Feasible(OracleResult { best_z, best_f, evaluated }),
        None => Outcome::Infeasible,
    })
}

/// Minimum of `f` over all supports of size exactly `k` (enough, since
/// enlarging a support never increases `f`).
pub fn brute_force(instance: &Instance, k: usize) -> Result<Outcome<OracleResult>> {
    let n = instance.n_assets();
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("k = {k} is outside [1, {n}]")));
    }
    let count = binomial(n, k);
    if count > BUDGET {
        return Err(Error::BudgetExceeded { count, budget: BUDGET });
    }
    enumerate(instance, std::iter::once(k))
}

/// Minimum of `f` over all supports of size `1..=k`.
pub fn brute_force_at_most(instance: &Instance, k: usize) -> Result<Outcome<OracleResult>> {
    let n = instance.n_assets();
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("k = {k} is outside [1, {n}]")));
    }
    let count: u128 = (1..=k).map(|s| binomial(n, s)).sum();
    if count > BUDGET {
        return Err(Error::BudgetExceeded { count, budget: BUDGET });
    }
    enumerate(instance, 1..=k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_asset_oracle() {
        let inst = Instance::uniform(vec![vec![0.1, 0.2]], 0.5, 1.0, 1).unwrap();
        let r = brute_force(&inst, 1).unwrap().feasible().unwrap();
        assert_eq!(r.best_z, SelectionVector::new(vec![false, true]));
        assert!((r.best_f - 0.3).abs() < 1e-7);
        assert_eq!(r.evaluated, 2);
        let all = brute_force(&inst, 2).unwrap().feasible().unwrap();
        assert_eq!(all.evaluated, 1);
        assert!((all.best_f - 0.0975).abs() < 1e-7);
    }

    #[test]
    fn unreachable_return_is_infeasible() {
        let inst = Instance::uniform(vec![vec![0.1, 0.2, 0.3]], 0.5, 1.0, 1)
            .unwrap()
            .with_return_constraint(0.35);
        assert!(brute_force(&inst, 1).unwrap().is_infeasible());
    }

    #[test]
    fn budget_is_enforced() {
        let inst = Instance::uniform(vec![vec![0.0; 40]], 0.5, 1.0, 20).unwrap();
        assert!(matches!(brute_force(&inst, 20), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| {
            seen.push(c.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(225, 10) > BUDGET, true);
    }
}

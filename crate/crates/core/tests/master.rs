use ccvar::master::{master_solve, Cut, MasterOutcome, MasterState};
use ccvar::model::SelectionVector;
use proptest::prelude::*;

fn all_selections(n: usize, k: usize) -> impl Iterator<Item = SelectionVector> {
    (0u32..1 << n)
        .filter(move |m| m.count_ones() as usize <= k)
        .map(move |m| SelectionVector::new((0..n).map(|j| m & (1 << j) != 0).collect()))
}

fn selection(n: usize) -> impl Strategy<Value = SelectionVector> {
    prop::collection::vec(any::<bool>(), n).prop_map(SelectionVector::new)
}

fn cut(n: usize) -> impl Strategy<Value = Cut> {
    prop_oneof![
        3 => (-5.0..5.0f64, prop::collection::vec(-3.0..0.0f64, n), selection(n))
            .prop_map(|(intercept, grad, origin)| Cut::Optimality { intercept, grad, origin }),
        1 => selection(n).prop_map(|excluded| Cut::NoGood { excluded }),
    ]
}

fn pool() -> impl Strategy<Value = (usize, usize, f64, Vec<Cut>)> {
    (1usize..=12).prop_flat_map(|n| (Just(n), 1..=n, -10.0..0.0f64, prop::collection::vec(cut(n), 0..12)))
}

/// Minimum of the cut model over unexcluded selections, by enumeration.
fn enumerate(state: &MasterState) -> Option<f64> {
    all_selections(state.n_assets(), state.k())
        .filter(|z| !state.is_excluded(z))
        .map(|z| state.theta_at(&z))
        .min_by(f64::total_cmp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn branch_and_bound_matches_enumeration((n, k, lb, cuts) in pool()) {
        let mut state = MasterState::new(n, k, lb).unwrap();
        for c in cuts {
            state.add_cut(c).unwrap();
        }
        let expected = enumerate(&state);
        match (master_solve(&mut state).unwrap(), expected) {
            (MasterOutcome::Optimal { z, theta, bound }, Some(best)) => {
                prop_assert!((theta - best).abs() <= 1e-9 * (1.0 + best.abs()), "master {} enumeration {}", theta, best);
                prop_assert!(z.cardinality() <= k);
                prop_assert!(!state.is_excluded(&z));
                prop_assert!(theta >= lb);
                prop_assert!((theta - state.theta_at(&z)).abs() <= 1e-9 * (1.0 + theta.abs()));
                prop_assert!(bound <= theta + 1e-9 * (1.0 + theta.abs()));
            }
            (MasterOutcome::Infeasible, None) => {}
            (got, want) => prop_assert!(false, "master {:?} enumeration {:?}", got, want),
        }
    }

    #[test]
    fn optimum_rises_as_cuts_accumulate((n, k, lb, cuts) in pool()) {
        let mut state = MasterState::new(n, k, lb).unwrap();
        let mut last = f64::NEG_INFINITY;
        for c in cuts {
            state.add_cut(c).unwrap();
            match master_solve(&mut state).unwrap() {
                MasterOutcome::Optimal { theta, .. } => {
                    prop_assert!(theta >= last - 1e-9 * (1.0 + last.abs()), "{} after {}", theta, last);
                    last = theta;
                }
                MasterOutcome::Infeasible => break,
            }
        }
    }
}

#[test]
fn ties_go_to_the_smallest_selection() {
    // a flat cut model: every selection has the same value
    let mut state = MasterState::new(4, 2, 1.0).unwrap();
    state.add_cut(Cut::NoGood { excluded: SelectionVector::zeros(4) }).unwrap();
    let MasterOutcome::Optimal { z, theta, .. } = master_solve(&mut state).unwrap() else { panic!() };
    assert_eq!(theta, 1.0);
    let smallest = all_selections(4, 2).filter(|s| s.cardinality() > 0).min().unwrap();
    assert_eq!(z, smallest);
}

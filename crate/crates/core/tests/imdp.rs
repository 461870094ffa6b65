mod common;

use imdp_synth::imdp::{
    export_interval_model, import_interval_model, instantiate, lower_plus_residual,
    robust_value_iteration, worst_case_expectation, Objective, PolicyTable,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn greedy_inner_minimum_matches_lp() {
    let mut rng = common::rng(41);
    for _ in 0..1_000 {
        let k = rng.random_range(2..=20);
        let iv = common::random_intervals(&mut rng, k);
        let entries: Vec<(f64, f64, f64)> = iv
            .into_iter()
            .map(|(lo, hi)| (lo, hi, rng.random::<f64>()))
            .collect();
        let (greedy, witness) = worst_case_expectation(&entries).unwrap();
        let lp = common::worst_case_lp(&entries).unwrap();
        assert!((greedy - lp).abs() < 1e-9, "greedy {greedy} vs lp {lp}");
        let total: f64 = witness.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for (p, e) in witness.iter().zip(&entries) {
            assert!(e.0 - 1e-12 <= *p && *p <= e.1 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn values_are_probabilities(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let imdp = common::random_imdp(&mut rng, 6, 3, 5);
        let policy = robust_value_iteration(&imdp);
        for k in 0..=imdp.horizon() {
            for s in 0..imdp.num_states() {
                let v = policy.value(s, k);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn more_time_never_hurts_with_absorbing_goals(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let imdp = common::random_imdp(&mut rng, 6, 3, 6);
        prop_assume!(imdp.objective() == Objective::ReachAvoid);
        let policy = robust_value_iteration(&imdp);
        for k in 1..=imdp.horizon() {
            for s in 0..imdp.num_states() {
                prop_assert!(policy.value(s, k - 1) >= policy.value(s, k) - 1e-12);
            }
        }
    }

    #[test]
    fn solving_twice_gives_the_same_table(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let imdp = common::random_imdp(&mut rng, 5, 3, 4);
        prop_assert_eq!(robust_value_iteration(&imdp).to_csv(), robust_value_iteration(&imdp).to_csv());
    }

    #[test]
    fn every_admissible_instantiation_does_at_least_as_well(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let imdp = common::random_imdp(&mut rng, 5, 3, 4);
        let policy = robust_value_iteration(&imdp);
        let point = instantiate(&imdp, |_, _, _, t| lower_plus_residual(t)).unwrap();
        let values = point.evaluate(&policy);
        let s_count = imdp.num_states();
        for s in 0..s_count {
            prop_assert!(values[s] >= policy.value(s, 0) - 1e-9);
        }
    }
}

#[test]
fn text_format_round_trips() {
    let mut rng = common::rng(42);
    for _ in 0..20 {
        let imdp = common::random_imdp(&mut rng, 6, 3, 4);
        let mut text = Vec::new();
        export_interval_model(&imdp, &mut text).unwrap();
        let back = import_interval_model(text.as_slice()).unwrap();
        let mut again = Vec::new();
        export_interval_model(&back, &mut again).unwrap();
        assert_eq!(text, again);
        let policy = robust_value_iteration(&imdp);
        let parsed = PolicyTable::from_csv(&policy.to_csv()).unwrap();
        assert_eq!(parsed.to_csv(), policy.to_csv());
    }
}

//! Property tests tying the independent routes together: closed forms vs
//! the transportation oracle, constructions vs their targets, and the
//! algebraic identities the bound tables satisfy.

use ordibound_core::attainment::{
    attaining_matrix_lower, attaining_matrix_upper, validate_attainment,
};
use ordibound_core::bounds::{
    bounds_report, delta_jm, delta_jm_via_distributional_effect, gamma_independent, gamma_lower,
    gamma_upper, tuple_set, xi_jm, xi_jm_via_distributional_effect, MarginalDistribution,
    TupleIndex,
};
use ordibound_core::transport::lp_gamma_bounds;
use proptest::prelude::*;

fn marginal_strategy(categories: usize) -> impl Strategy<Value = MarginalDistribution> {
    prop::collection::vec(0.0..1.0f64, categories).prop_filter_map("positive mass", |raw| {
        let sum: f64 = raw.iter().sum();
        if sum < 1e-3 {
            return None;
        }
        MarginalDistribution::new(raw.into_iter().map(|v| v / sum).collect()).ok()
    })
}

fn pair_strategy() -> impl Strategy<Value = (MarginalDistribution, MarginalDistribution)> {
    (2usize..=6).prop_flat_map(|j| (marginal_strategy(j), marginal_strategy(j)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_are_ordered_and_match_the_lp_oracle((p1, p0) in pair_strategy()) {
        let (upper, _) = gamma_upper(&p1, &p0).unwrap();
        let (lower, _) = gamma_lower(&p1, &p0).unwrap();
        let independent = gamma_independent(&p1, &p0).unwrap();
        prop_assert!(lower <= independent + 1e-12);
        prop_assert!(independent <= upper + 1e-12);

        let (lp_lower, lp_upper) = lp_gamma_bounds(p1.probs(), p0.probs()).unwrap();
        prop_assert!((upper - lp_upper).abs() <= 1e-9, "upper {upper} vs lp {lp_upper}");
        prop_assert!((lower - lp_lower).abs() <= 1e-9, "lower {lower} vs lp {lp_lower}");
    }

    #[test]
    fn constructions_attain_their_bounds((p1, p0) in pair_strategy()) {
        let upper = attaining_matrix_upper(&p1, &p0).unwrap();
        let report = validate_attainment(&upper.matrix, &p1, &p0, upper.target, 1e-9);
        prop_assert!(report.ok, "upper: {report:?}");
        let lower = attaining_matrix_lower(&p1, &p0).unwrap();
        let report = validate_attainment(&lower.matrix, &p1, &p0, lower.target, 1e-9);
        prop_assert!(report.ok, "lower: {report:?}");
    }

    #[test]
    fn arm_swap_negates_and_transposes((p1, p0) in pair_strategy()) {
        let (upper_swapped, _) = gamma_upper(&p0, &p1).unwrap();
        let (lower, _) = gamma_lower(&p1, &p0).unwrap();
        prop_assert!((lower + upper_swapped).abs() <= 1e-12);
        for t in tuple_set(p1.num_categories()) {
            let xi = xi_jm(&p1, &p0, t).unwrap();
            let delta = delta_jm(&p0, &p1, t).unwrap();
            prop_assert!((xi + delta).abs() <= 1e-12);
        }
    }

    #[test]
    fn both_evaluation_routes_agree((p1, p0) in pair_strategy()) {
        for t in tuple_set(p1.num_categories()) {
            let direct = delta_jm(&p1, &p0, t).unwrap();
            let routed = delta_jm_via_distributional_effect(&p1, &p0, t).unwrap();
            prop_assert!((direct - routed).abs() <= 1e-12);
            let direct = xi_jm(&p1, &p0, t).unwrap();
            let routed = xi_jm_via_distributional_effect(&p1, &p0, t).unwrap();
            prop_assert!((direct - routed).abs() <= 1e-12);
        }
    }

    #[test]
    fn delta_table_recursions_hold((p1, p0) in pair_strategy()) {
        let j_cats = p1.num_categories();
        let d = |j, m| delta_jm(&p1, &p0, TupleIndex { j, m }).unwrap();
        // Stepping m: the next column swaps one control mass for one
        // treated mass.
        for j in 1..j_cats {
            for m in 1..j_cats - j {
                let lhs = d(j, m + 1);
                let rhs = d(j, m) + p0.probs()[j + m - 1] - p1.probs()[j + m];
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
        // Stepping j at fixed band end.
        for j in 1..j_cats - 1 {
            for m in 1..j_cats - j {
                let lhs = d(j, m + 1);
                let rhs = d(j + 1, m) + p1.probs()[j] - p0.probs()[j - 1];
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
        // Wrapping the first row onto the last diagonal.
        for j in 1..j_cats - 1 {
            let lhs = d(1, j);
            let rhs = d(j + 1, j_cats - 1 - j) + p0.probs()[j_cats - 1] - p1.probs()[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn report_argmins_point_at_the_optima((p1, p0) in pair_strategy()) {
        let report = bounds_report(&p1, &p0).unwrap();
        let arg = report.argmin_upper.unwrap();
        let at_arg = delta_jm(&p1, &p0, arg).unwrap();
        prop_assert_eq!(at_arg, report.gamma_upper);
        for entry in &report.delta_table {
            prop_assert!(entry.value >= report.gamma_upper);
        }
        for entry in &report.xi_table {
            prop_assert!(entry.value <= report.gamma_lower);
        }
    }
}

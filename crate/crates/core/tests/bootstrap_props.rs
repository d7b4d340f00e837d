use proptest::prelude::*;
use xtreval_core::uncertainty::{basic_ci, replicate_years, resample_years};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rows_independent_of_replicate_count(n in 1usize..100, b in 1usize..50, extra in 1usize..50, seed in any::<u64>()) {
        let short = resample_years(n, b, seed).unwrap();
        let long = resample_years(n, b + extra, seed).unwrap();
        prop_assert_eq!(&short[..], &long[..b]);
        prop_assert!(long.iter().flatten().all(|&i| i < n));
        prop_assert_eq!(&long[b], &replicate_years(n, seed, b));
    }

    #[test]
    fn shifting_point_and_replicates_shifts_interval(reps in prop::collection::vec(-50.0f64..50.0, 30..120), t in -10.0f64..10.0, c in -100.0f64..100.0) {
        let a = basic_ci(t, &reps, 0.95).unwrap();
        let shifted: Vec<f64> = reps.iter().map(|r| r + c).collect();
        let b = basic_ci(t + c, &shifted, 0.95).unwrap();
        prop_assert!((b.lo - a.lo - c).abs() < 1e-9 && (b.hi - a.hi - c).abs() < 1e-9);
        prop_assert!(a.lo <= a.hi);
    }
}

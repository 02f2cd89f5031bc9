use fdrlab::dist::std_normal_quantile;
use fdrlab::procedures::{bh_step_up, Level};
use fdrlab::selective::{fcr_intervals, fdr_threshold_estimate, EstimateSet};
use proptest::prelude::*;

fn estimates() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-8.0..8.0f64, n),
            prop::collection::vec(0.2..3.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn marginal_level_tracks_the_selection((est, se) in estimates(), q in 0.01..0.5f64) {
        let n = est.len();
        let set = EstimateSet::new(est, se).unwrap();
        let iv = fcr_intervals(&set, Level::new(q).unwrap());
        let r = iv.len() as f64;
        prop_assert_eq!(iv.marginal_level, 1.0 - r * q / n as f64);
        prop_assert_eq!(&iv.selected, &bh_step_up(&set.p_values(), Level::new(q).unwrap()).rejected);
        for k in 0..iv.len() {
            prop_assert!(iv.lower[k] <= iv.estimates[k] && iv.estimates[k] <= iv.upper[k]);
        }
    }

    #[test]
    fn thresholded_support_is_the_bh_set((est, se) in estimates(), q in 0.01..0.5f64) {
        let set = EstimateSet::new(est.clone(), se).unwrap();
        let level = Level::new(q).unwrap();
        let kept = fdr_threshold_estimate(&set, level);
        let rejected = bh_step_up(&set.p_values(), level).rejected;
        for i in 0..est.len() {
            let in_support = rejected.binary_search(&i).is_ok();
            prop_assert_eq!(kept[i], if in_support { est[i] } else { 0.0 });
        }
    }

    #[test]
    fn full_selection_gives_unadjusted_intervals(n in 1usize..40, q in 0.01..0.5f64) {
        let set = EstimateSet::new(vec![50.0; n], vec![1.0; n]).unwrap();
        let iv = fcr_intervals(&set, Level::new(q).unwrap());
        prop_assert_eq!(iv.len(), n);
        prop_assert!((iv.z_star - std_normal_quantile(1.0 - q / 2.0)).abs() < 1e-12);
    }
}

use fdrlab::error_rates::bonferroni;
use fdrlab::procedures::{
    adaptive_step_down, bh_adjusted, bh_step_up, by_adjusted, by_step_up, two_stage_adaptive,
    weighted_bh, BoundVariant, Level, PValueSet, RejectionResult,
};
use proptest::prelude::*;

fn level(q: f64) -> Level<f64> {
    Level::new(q).unwrap()
}

/// Mix of continuous values and a coarse grid so ties show up often.
fn p_vector(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    let value = prop_oneof![
        0.0..=1.0f64,
        (0..20u32).prop_map(|k| 0.0025 * k as f64),
        Just(1.0)
    ];
    prop::collection::vec(value, 1..=max_len)
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.binary_search(i).is_ok())
}

type Procedure = fn(&PValueSet<f64>, Level<f64>) -> RejectionResult<f64>;

fn procedures() -> Vec<(&'static str, Procedure)> {
    vec![
        ("bh", bh_step_up),
        ("by", by_step_up),
        ("adaptive_step_down", adaptive_step_down),
        ("two_stage_canonical", |p, q| {
            two_stage_adaptive(p, q, BoundVariant::Canonical)
        }),
        ("two_stage_deflated_q", |p, q| {
            two_stage_adaptive(p, q, BoundVariant::DeflatedAtQ)
        }),
        ("two_stage_deflated_stage", |p, q| {
            two_stage_adaptive(p, q, BoundVariant::DeflatedAtStageLevel)
        }),
        ("bonferroni", bonferroni),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn step_up_is_monotone_in_q(p in p_vector(40), a in 0.001..0.5f64, b in 0.001..0.5f64) {
        let (q1, q2) = if a <= b { (a, b) } else { (b, a) };
        let p = PValueSet::new(p).unwrap();
        prop_assert!(subset(&bh_step_up(&p, level(q1)).rejected, &bh_step_up(&p, level(q2)).rejected));
        prop_assert!(subset(&by_step_up(&p, level(q1)).rejected, &by_step_up(&p, level(q2)).rejected));
    }

    #[test]
    fn procedures_are_permutation_equivariant(p in p_vector(30), q in 0.01..0.3f64, seed in any::<u64>()) {
        let n = p.len();
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher–Yates driven by a tiny LCG so the shrinker keeps the seed
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let original = PValueSet::new(p.clone()).unwrap();
        let permuted = PValueSet::new(perm.iter().map(|&i| p[i]).collect()).unwrap();
        for (name, f) in procedures() {
            let a = f(&original, level(q));
            let b = f(&permuted, level(q));
            let mut mapped: Vec<usize> = b.rejected.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(&mapped, &a.rejected, "{}", name);
        }
    }

    #[test]
    fn by_rejections_are_a_subset_of_bh(p in p_vector(50), q in 0.001..0.5f64) {
        let p = PValueSet::new(p).unwrap();
        prop_assert!(subset(&by_step_up(&p, level(q)).rejected, &bh_step_up(&p, level(q)).rejected));
    }

    #[test]
    fn tied_boundary_values_share_their_fate(p in p_vector(30), q in 0.01..0.3f64) {
        let p = PValueSet::new(p).unwrap();
        let r = bh_step_up(&p, level(q));
        if let Some(max) = r.rejected.iter().map(|&i| p.values()[i]).reduce(f64::max) {
            for (i, &v) in p.values().iter().enumerate() {
                prop_assert_eq!(r.is_rejected(i), v <= max);
            }
        }
    }

    #[test]
    fn adjusted_p_values_reproduce_rejections(p in p_vector(40), q in 0.001..0.5f64) {
        let p = PValueSet::new(p).unwrap();
        let adj = bh_adjusted(&p);
        let by_adj = by_adjusted(&p);
        let bh = bh_step_up(&p, level(q));
        let by = by_step_up(&p, level(q));
        for i in 0..p.len() {
            prop_assert!(adj[i] >= p.values()[i] * (1.0 - 1e-12) && adj[i] <= 1.0);
            prop_assert_eq!(bh.is_rejected(i), adj[i] <= q, "bh {}", i);
            prop_assert_eq!(by.is_rejected(i), by_adj[i] <= q, "by {}", i);
        }
    }

    #[test]
    fn equal_values_step_down(n in 1usize..40, c in 0.0..0.02f64, q in 0.01..0.2f64) {
        let p = PValueSet::new(vec![c; n]).unwrap();
        let r = adaptive_step_down(&p, level(q));
        // thresholds i q / (n + 1 − i(1 − q)) increase in i, so the first decides
        let first = q / (n as f64 + q);
        prop_assert_eq!(r.r, if c <= first { n } else { 0 });
    }

    #[test]
    fn two_stage_short_circuits(p in p_vector(30), q in 0.01..0.3f64) {
        let p = PValueSet::new(p).unwrap();
        let qs = q / (1.0 + q);
        let r1 = bh_step_up(&p, level(qs)).r;
        for variant in [BoundVariant::Canonical, BoundVariant::DeflatedAtQ, BoundVariant::DeflatedAtStageLevel] {
            let r = two_stage_adaptive(&p, level(q), variant);
            if r1 == 0 {
                prop_assert_eq!(r.r, 0);
            } else if r1 == p.len() {
                prop_assert_eq!(r.r, p.len());
            } else {
                prop_assert!(r.r >= r1);
            }
        }
    }

    #[test]
    fn unit_weights_match_bh(p in p_vector(40), q in 0.01..0.3f64) {
        let set = PValueSet::new(p).unwrap();
        let unit = set.clone().with_weights(vec![1.0; set.len()]).unwrap();
        prop_assert_eq!(weighted_bh(&unit, level(q)).unwrap().rejected, bh_step_up(&set, level(q)).rejected);
    }

    #[test]
    fn weights_are_scale_free(p in p_vector(20), w in prop::collection::vec(0.1..5.0f64, 20), s in 0.1..10.0f64) {
        let n = p.len();
        let a = PValueSet::new(p.clone()).unwrap().with_weights(w[..n].to_vec()).unwrap();
        let b = PValueSet::new(p).unwrap().with_weights(w[..n].iter().map(|x| x * s).collect()).unwrap();
        prop_assert_eq!(weighted_bh(&a, level(0.1)).unwrap().rejected, weighted_bh(&b, level(0.1)).unwrap().rejected);
    }
}

/// Brute-force oracle: the largest `k` with `p(k) ≤ q k / n`, found by
/// scanning every `k`.
fn largest_passing_k(p: &[f64], q: f64) -> usize {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    (1..=p.len())
        .filter(|&k| sorted[k - 1] <= q * k as f64 / n)
        .max()
        .unwrap_or(0)
}

#[test]
fn bh_matches_exhaustive_scan_on_the_coarse_grid() {
    let grid: Vec<f64> = (0..20).map(|j| 0.01 + 0.05 * j as f64).collect();
    for n in 1..=5u32 {
        for code in 0..20usize.pow(n) {
            let p: Vec<f64> = (0..n).map(|j| grid[code / 20usize.pow(j) % 20]).collect();
            for q in [0.05, 0.2, 0.5] {
                let k = largest_passing_k(&p, q);
                let r = bh_step_up(&PValueSet::new(p.clone()).unwrap(), level(q));
                // with ties beyond rank k included, r is k plus values equal to p(k)
                let mut sorted = p.clone();
                sorted.sort_by(f64::total_cmp);
                let want = if k == 0 {
                    0
                } else {
                    sorted.iter().filter(|&&v| v <= sorted[k - 1]).count()
                };
                assert_eq!(r.r, want, "p = {p:?}, q = {q}");
                assert_eq!(r.r, k, "ties never extend past the largest passing rank");
            }
        }
    }
}

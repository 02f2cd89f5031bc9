//! Hand-evaluated examples, each recomputed by an independent oracle.
//! Shared by the `worked_examples` test and the acceptance runner.

use fdrlab::error_rates::{aggregate, identity_chain_gap, ReplicateOutcome};
use fdrlab::procedures::{
    adaptive_step_down, bh_adjusted, bh_step_up, by_step_up, normalize_weights, two_stage_adaptive,
    weighted_bh, BoundVariant, Level, PValueSet,
};
use fdrlab::selective::{
    fcr_intervals, fdr_threshold_estimate, threshold_risk_study, EstimateSet, SparseMeansSpec,
};
use fdrlab::simlab::{filter_then_test, ProcedureName, ProcedureSpec, Scenario, Sidedness};
use fdrlab::simlab::{
    generate_replicate, Correlation, FilterSpec, FilterStatistic, FilterThreshold,
};
use fdrlab::structured::{
    cluster_test, combine_pvalues, hierarchical_test, two_stage_screen, ClusterPartition,
    CombineMethod, HypothesisTree, TreeNode,
};
use fdrlab::two_groups::{
    diagnose_null, estimate_p0_lambda, fit_empirical_null, local_fdr_exact, p0_bound_two_stage,
    tail_fdr_exact, NormalSpec, Tail, TwoGroupsModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub type Outcome = Result<String, String>;

pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
}

fn q(x: f64) -> Level<f64> {
    Level::new(x).unwrap()
}

fn pv(v: &[f64]) -> PValueSet<f64> {
    PValueSet::new(v.to_vec()).unwrap()
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Outcome {
    if (got - want).abs() <= tol {
        Ok(format!("{what} = {got:.6} (want {want:.6} ± {tol:e})"))
    } else {
        Err(format!("{what} = {got} but want {want} ± {tol:e}"))
    }
}

fn same<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Outcome {
    if got == want {
        Ok(format!("{what} = {got:?}"))
    } else {
        Err(format!("{what} = {got:?} but want {want:?}"))
    }
}

fn all_ok(parts: Vec<Outcome>) -> Outcome {
    let mut lines = Vec::new();
    for p in parts {
        lines.push(p?);
    }
    Ok(lines.join("; "))
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn bh_three() -> Outcome {
    let r = bh_step_up(&pv(&[0.01, 0.02, 0.9]), q(0.05));
    let want: Vec<f64> = (1..=3).map(|i| 0.05 * i as f64 / 3.0).collect();
    all_ok(vec![
        same("rejected", r.rejected.clone(), vec![0, 1]),
        close(
            "max threshold gap",
            r.thresholds
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            0.0,
            1e-15,
        ),
    ])
}

fn by_three() -> Outcome {
    let r = by_step_up(&pv(&[0.01, 0.02, 0.9]), q(0.05));
    let level = 0.05 / (1.0 + 0.5 + 1.0 / 3.0);
    all_ok(vec![
        same("rejections", r.r, 0),
        close("effective level", r.thresholds[2], level, 1e-15),
        close(
            "first threshold",
            r.thresholds[0],
            0.05 * 6.0 / 11.0 / 3.0,
            1e-15,
        ),
    ])
}

fn step_down_four() -> Outcome {
    let p = [0.001, 0.01, 0.02, 0.5];
    let (n, qq) = (4.0, 0.05);
    // step down until the first p above i q / (n + 1 − i(1 − q))
    let mut k = 0;
    let mut bounds = Vec::new();
    for (idx, &pi) in p.iter().enumerate() {
        let i = idx as f64 + 1.0;
        let n0 = n + 1.0 - i * (1.0 - qq);
        bounds.push(n0);
        if pi > i * qq / n0 {
            break;
        }
        k += 1;
    }
    let r = adaptive_step_down(&pv(&p), q(qq));
    let got = r.adaptive_bounds.clone().unwrap_or_default();
    all_ok(vec![
        same("rejections", r.r, k),
        same("rejections", r.r, 3),
        close(
            "bound gap",
            got.iter()
                .zip(&bounds)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            0.0,
            1e-12,
        ),
        close("n04", bounds[3], 1.2, 1e-12),
    ])
}

fn two_stage_four() -> Outcome {
    let r = two_stage_adaptive(
        &pv(&[0.005, 0.009, 0.05, 0.8]),
        q(0.05),
        BoundVariant::Canonical,
    );
    let t = r.stage_trace.clone().ok_or("no stage trace")?;
    let qs = 0.05 / 1.05;
    all_ok(vec![
        same("rejections", r.r, 3),
        close("stage-one level", t.stage_one_level, qs, 1e-15),
        same("stage-one rejections", t.stage_one_rejections, 2),
        close(
            "null count",
            t.null_count_estimate.unwrap_or(f64::NAN),
            2.0,
            1e-15,
        ),
        close(
            "stage-two level",
            t.stage_two_level.unwrap_or(f64::NAN),
            qs * 4.0 / 2.0,
            1e-15,
        ),
    ])
}

fn weighted_two() -> Outcome {
    let p = pv(&[0.03, 0.03]).with_weights(vec![1.5, 0.5]).unwrap();
    let r = weighted_bh(&p, q(0.05)).map_err(|e| e.to_string())?;
    all_ok(vec![
        same("rejected", r.rejected.clone(), vec![0]),
        close("weighted p1", r.tested[0], 0.02, 1e-15),
        close("weighted p2", r.tested[1], 0.06, 1e-15),
    ])
}

fn three_replicates() -> Outcome {
    let o: Vec<ReplicateOutcome> = [(1, 2), (0, 0), (2, 4)]
        .iter()
        .map(|&(v, r)| ReplicateOutcome::new(v, r).unwrap())
        .collect();
    let rep = aggregate::<f64>(&o).map_err(|e| e.to_string())?;
    let (g1, g2) = identity_chain_gap(&rep).map_err(|e| e.to_string())?;
    all_ok(vec![
        close("fdr", rep.fdr_hat, (0.5 + 0.0 + 0.5) / 3.0, 1e-15),
        close("pfdr", rep.pfdr_hat.unwrap_or(f64::NAN), 0.5, 1e-15),
        close("Fdr", rep.fdr_cap_hat.unwrap_or(f64::NAN), 3.0 / 6.0, 1e-15),
        close("fwer", rep.fwer_hat, 2.0 / 3.0, 1e-15),
        close("gap 1", g1, 1.0 / 6.0, 1e-15),
        close("gap 2", g2, 0.0, 1e-15),
    ])
}

fn model() -> TwoGroupsModel<f64> {
    TwoGroupsModel::new(
        0.9,
        NormalSpec::standard(),
        NormalSpec::new(2.5, 1.0).unwrap(),
    )
    .unwrap()
}

fn local_fdr_at_2_5() -> Outcome {
    let z: f64 = 2.5;
    let want = 0.9 * phi(z) / (0.9 * phi(z) + 0.1 * phi(0.0));
    let got = local_fdr_exact(&model(), z).map_err(|e| e.to_string())?;
    all_ok(vec![
        close("fdr(2.5)", got, want, 1e-12),
        close("fdr(2.5)", got, 0.2834, 5e-5),
    ])
}

/// `|Fdr(z) − E[fdr(Z) | Z in tail]|` on the 0.9 / N(2.5, 1) mixture, with
/// the conditional expectation by Simpson quadrature.
pub fn tail_identity_gap(z: f64, tail: Tail) -> f64 {
    let m = model();
    let dens = |x: f64| 0.9 * phi(x) + 0.1 * phi(x - 2.5);
    let (a, b) = match tail {
        Tail::Right => (z, 16.0),
        Tail::Left => (-16.0, z),
    };
    let num = simpson(|x| local_fdr_exact(&m, x).unwrap() * dens(x), a, b, 40_000);
    let den = simpson(dens, a, b, 40_000);
    (tail_fdr_exact(&m, z, tail).unwrap() - num / den).abs()
}

fn tail_quadrature() -> Outcome {
    close(
        "|Fdr(2.5) − E[fdr | Z ≥ 2.5]|",
        tail_identity_gap(2.5, Tail::Right),
        0.0,
        1e-6,
    )
}

fn p0_lambda_small() -> Outcome {
    let got = estimate_p0_lambda(&pv(&[0.8, 0.9, 0.2, 0.7]), 0.5).map_err(|e| e.to_string())?;
    // raw 3 / (4 · 0.5) = 1.5
    close("p0", got, 1.0, 0.0)
}

fn p0_lambda_uniform() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let got = estimate_p0_lambda(&pv(&p), 0.5).map_err(|e| e.to_string())?;
    let se = (0.25 / n as f64).sqrt() / 0.5;
    close("p0 under uniform", got, 1.0, 3.0 * se)
}

fn p0_bounds() -> Outcome {
    all_ok(vec![
        close(
            "n=100, r1=100",
            p0_bound_two_stage(100, 100, q(0.05)).unwrap(),
            100.0 - 100.0 * 0.95,
            1e-12,
        ),
        close(
            "n=4, r1=2",
            p0_bound_two_stage(4, 2, q(0.05)).unwrap(),
            2.1,
            1e-12,
        ),
    ])
}

fn empirical_null_scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let alt = Normal::new(6.0, 1.0).unwrap();
    let z: Vec<f64> = (0..20_000)
        .map(|i| {
            if i % 20 == 0 {
                alt.sample(&mut rng)
            } else {
                StandardNormal.sample(&mut rng)
            }
        })
        .collect();
    let fit = fit_empirical_null(&z, (0.25, 0.75)).map_err(|e| e.to_string())?;
    close("fitted scale", fit.null.scale, 1.0, 0.05)
}

fn wide_null_central_fraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let z: Vec<f64> = (0..100_000)
        .map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let d = diagnose_null(&z, &NormalSpec::standard()).map_err(|e| e.to_string())?;
    // Φ(0.5) − Φ(−0.5) and Φ(1) − Φ(−1)
    all_ok(vec![
        close(
            "central fraction",
            d.central_fraction,
            0.382_924_922_548_026,
            0.01,
        ),
        close(
            "expected",
            d.expected_central_fraction,
            0.682_689_492_137_086,
            1e-12,
        ),
    ])
}

fn pure_null_dip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let z: Vec<f64> = (0..50_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let d = diagnose_null(&z, &NormalSpec::standard()).map_err(|e| e.to_string())?;
    // binomial SE of the central fraction is about 0.002
    close("dip on pure null", d.dip_statistic, 0.0, 0.01)
}

fn fisher_two_halves() -> Outcome {
    let x = 2.0 * 4.0_f64.ln();
    let want = (-x / 2.0).exp() * (1.0 + x / 2.0);
    let got = combine_pvalues(&[0.5, 0.5], CombineMethod::Fisher)
        .unwrap()
        .p_value;
    all_ok(vec![
        close("fisher", got, want, 1e-12),
        close("fisher", got, 0.5966, 1e-4),
    ])
}

fn simes_pair() -> Outcome {
    let got = combine_pvalues(&[0.02, 0.9], CombineMethod::Simes)
        .unwrap()
        .p_value;
    close("simes", got, (2.0 * 0.02_f64).min(2.0 * 0.9 / 2.0), 1e-15)
}

fn size_weighted_clusters() -> Outcome {
    // cluster a: nine members at 0.03 (Simes 0.03), cluster b: one member at 0.012
    let mut labels = vec!["a"; 9];
    labels.push("b");
    let mut p = vec![0.03; 9];
    p.push(0.012);
    let part = ClusterPartition::from_labels(&labels);
    let res = cluster_test(&pv(&p), &part, CombineMethod::Simes, q(0.05), true)
        .map_err(|e| e.to_string())?;
    // weights (1.8, 0.2): tested (0.0167, 0.06); BH over two: 0.0167 ≤ 0.025, 0.06 > 0.05
    let w = normalize_weights(res.cluster_p.weights().ok_or("no weights")?);
    all_ok(vec![
        close("weight a", w[0], 1.8, 1e-12),
        close("weight b", w[1], 0.2, 1e-12),
        close("tested a", res.rejection.tested[0], 0.03 / 1.8, 1e-12),
        same("rejected clusters", res.rejected_labels(), vec!["a"]),
    ])
}

/// Root over four clusters of five leaves.
pub fn two_level_tree() -> HypothesisTree<f64> {
    let mut nodes = vec![TreeNode::new("root", None, vec![])];
    for c in 0..4 {
        let cid = format!("c{c}");
        nodes.push(TreeNode::new(
            cid.clone(),
            Some("root"),
            (5 * c..5 * c + 5).collect(),
        ));
        for j in 0..5 {
            let i = 5 * c + j;
            nodes.push(TreeNode::new(format!("h{i}"), Some(&cid), vec![i]));
        }
    }
    HypothesisTree::new(nodes, 20).unwrap()
}

pub const TWO_LEVEL_P: [f64; 20] = [
    0.001, 0.009, 0.012, 0.3, 0.5, //
    0.004, 0.2, 0.3, 0.4, 0.9, //
    0.6, 0.7, 0.8, 0.9, 0.95, //
    0.02, 0.5, 0.6, 0.7, 0.8,
];

fn two_level() -> Outcome {
    let res = hierarchical_test(
        &two_level_tree(),
        &pv(&TWO_LEVEL_P),
        q(0.05),
        CombineMethod::Simes,
    )
    .map_err(|e| e.to_string())?;
    // Simes per cluster: min over i of 5 p(i) / i
    let simes = |c: usize| {
        let mut v = TWO_LEVEL_P[5 * c..5 * c + 5].to_vec();
        v.sort_by(f64::total_cmp);
        v.iter()
            .enumerate()
            .map(|(i, p)| 5.0 * p / (i + 1) as f64)
            .fold(1.0, f64::min)
    };
    let root = &res.per_family_traces[0];
    let gap = (0..4)
        .map(|c| (root.p_values[c] - simes(c)).abs())
        .fold(0.0, f64::max);
    all_ok(vec![
        close("cluster p gap", gap, 0.0, 1e-15),
        same("visited", res.visited, 1 + 2),
        same(
            "rejected nodes",
            res.rejected_nodes.clone(),
            ["c0", "c1", "h0", "h1", "h2", "h5"]
                .map(String::from)
                .to_vec(),
        ),
        same(
            "rejected leaves",
            res.rejected_hypotheses.clone(),
            vec![0, 1, 2, 5],
        ),
    ])
}

fn screen_four() -> Outcome {
    let s1 = pv(&[0.05, 0.5, 0.08, 0.9]);
    let s2 = pv(&[0.01, 1.0, 0.3, 1.0]);
    let res = two_stage_screen(&s1, &s2, 0.1, q(0.05)).map_err(|e| e.to_string())?;
    all_ok(vec![
        same("survivors", res.survivors.clone(), vec![0, 2]),
        close("threshold 1", res.rejection.thresholds[0], 0.025, 1e-15),
        close("threshold 2", res.rejection.thresholds[1], 0.05, 1e-15),
        same("rejected", res.rejected.clone(), vec![0]),
    ])
}

fn fcr_level() -> Outcome {
    let mut est = vec![10.0; 10];
    est.extend(vec![0.0; 90]);
    let set = EstimateSet::new(est, vec![1.0; 100]).unwrap();
    let iv = fcr_intervals(&set, q(0.05));
    all_ok(vec![
        same("selected", iv.len(), 10),
        close(
            "marginal level",
            iv.marginal_level,
            1.0 - 10.0 * 0.05 / 100.0,
            1e-15,
        ),
        // normal quantile at 0.9975
        close("z*", iv.z_star, 2.807_033_768_343_811, 1e-9),
    ])
}

fn thresholded_three() -> Outcome {
    let set = EstimateSet::new(vec![5.2, 0.3, -0.1], vec![1.0; 3]).unwrap();
    same(
        "estimate",
        fdr_threshold_estimate(&set, q(0.05)),
        vec![5.2, 0.0, 0.0],
    )
}

fn risk_comparison() -> Outcome {
    let spec = SparseMeansSpec {
        n: 1000,
        n_signals: 50,
        signal: 5.0,
        replicates: 1000,
        seed: 15,
    };
    let r = threshold_risk_study(&spec, q(0.05)).map_err(|e| e.to_string())?;
    let d = r.difference;
    let se = d.se.unwrap_or(f64::INFINITY);
    if d.mean + 3.0 * se < 0.0 {
        Ok(format!("risk difference {:.5} (SE {:.5})", d.mean, se))
    } else {
        Err(format!(
            "risk difference {} (SE {}) not below zero at 3 SE",
            d.mean, se
        ))
    }
}

fn common_control_correlation() -> Outcome {
    let sc = Scenario {
        n: 2,
        p0: 1.0,
        effect: 0.0,
        correlation: Correlation::CommonControl,
        sidedness: Sidedness::TwoSided,
        replicates: 100_000,
        seed: 16,
        procedure: ProcedureSpec {
            name: ProcedureName::Bh,
            q: 0.05,
            variant: BoundVariant::Canonical,
        },
    };
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let m = sc.replicates;
    for rep in 0..m {
        let (z, _) = generate_replicate(&sc, rep).map_err(|e| e.to_string())?;
        sx += z[0];
        sy += z[1];
        sxx += z[0] * z[0];
        syy += z[1] * z[1];
        sxy += z[0] * z[1];
    }
    let mf = m as f64;
    let cov = sxy / mf - sx * sy / mf / mf;
    let corr = cov / ((sxx / mf - (sx / mf).powi(2)) * (syy / mf - (sy / mf).powi(2))).sqrt();
    close("pairwise correlation", corr, 0.5, 0.02)
}

fn filter_distortion() -> Outcome {
    let sc = Scenario {
        n: 10_000,
        p0: 1.0,
        effect: 0.0,
        correlation: Correlation::Independent,
        sidedness: Sidedness::TwoSided,
        replicates: 1,
        seed: 17,
        procedure: ProcedureSpec {
            name: ProcedureName::Bh,
            q: 0.05,
            variant: BoundVariant::Canonical,
        },
    };
    let f = FilterSpec {
        statistic: FilterStatistic::SampleSd,
        threshold: FilterThreshold::Quantile(0.8),
        samples_per_group: 5,
        baseline_sd: 1.0,
    };
    let o = filter_then_test(&sc, &f, 0).map_err(|e| e.to_string())?;
    let (pre, post) = (o.pre_diagnostics, o.post_diagnostics);
    let detail = format!(
        "pre KS {:.4} (crit {:.4}), post KS {:.4} (crit {:.4}), post dip {:.4}",
        pre.ks_statistic,
        pre.ks_critical_5pct,
        post.ks_statistic,
        post.ks_critical_5pct,
        post.dip_statistic
    );
    if post.dip_statistic > 0.02
        && post.ks_statistic > post.ks_critical_5pct
        && pre.ks_statistic <= pre.ks_critical_5pct
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn adjusted_three() -> Outcome {
    let got = bh_adjusted(&pv(&[0.01, 0.02, 0.9]));
    // min over j ≥ i of min(1, n p(j) / j)
    let raw = [3.0 * 0.01, 3.0 * 0.02 / 2.0, 0.9_f64];
    let want = [raw[0].min(raw[1]).min(raw[2]), raw[1].min(raw[2]), raw[2]];
    close(
        "adjusted gap",
        got.iter()
            .zip(want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        0.0,
        1e-15,
    )
}

type Example = (&'static str, fn() -> Outcome);

/// Every worked example with its outcome.
pub fn all() -> Vec<Check> {
    let list: [Example; _] = [
        ("bh on three p-values", bh_three),
        ("by on three p-values", by_three),
        ("adaptive step-down recursion", step_down_four),
        ("two-stage adaptive stages", two_stage_four),
        ("weighted bh reweighting", weighted_two),
        ("three-replicate aggregate and gaps", three_replicates),
        ("exact local fdr at 2.5", local_fdr_at_2_5),
        ("tail fdr quadrature identity", tail_quadrature),
        ("p0 threshold-count clamp", p0_lambda_small),
        ("p0 under uniform p-values", p0_lambda_uniform),
        ("two-stage null-count bound", p0_bounds),
        (
            "empirical null scale with far alternatives",
            empirical_null_scale,
        ),
        (
            "central fraction under a wide null",
            wide_null_central_fraction,
        ),
        ("dip on pure null", pure_null_dip),
        ("fisher on two halves", fisher_two_halves),
        ("simes on a pair", simes_pair),
        ("size-weighted clusters", size_weighted_clusters),
        ("two-level tree", two_level),
        ("two-stage screen", screen_four),
        ("fcr marginal level", fcr_level),
        ("fdr hard thresholding", thresholded_three),
        ("threshold risk comparison", risk_comparison),
        ("common-control correlation", common_control_correlation),
        ("variance filter distortion", filter_distortion),
        ("bh adjusted p-values", adjusted_three),
    ];
    list.into_iter()
        .map(|(name, f)| Check { name, outcome: f() })
        .collect()
}

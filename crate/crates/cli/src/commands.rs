use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use fdrlab::error_rates::{account, bonferroni, fdp};
use fdrlab::io::{self as fio, InputTable};
use fdrlab::procedures::{
    adaptive_step_down, bh_adjusted, bh_step_up, by_adjusted, by_step_up, two_stage_adaptive,
    weighted_bh, BoundVariant, Level, PValueSet, RejectionResult,
};
use fdrlab::selective::{fcr_intervals, fdr_threshold_estimate};
use fdrlab::simlab::{run_scenario_file, ScenarioFile, Sidedness};
use fdrlab::structured::{cluster_test, hierarchical_test, ClusterPartition, CombineMethod};
use fdrlab::two_groups::{
    diagnose_null, estimate_local_fdr, estimate_p0_lambda, fit_empirical_null, NormalSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{create, write_flat_csv, write_json};
use crate::{
    AdjustArgs, CiArgs, DiagnoseArgs, FdrArgs, HierArgs, MethodArg, NullArg, ProcedureArg,
    SidednessArg, SimulateArgs, TableInput, VariantArg,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] fdrlab::Error),
    #[error("cannot read {path}: {source}")]
    Input {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 2 for validation failures, 3 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_validation() => 2,
            CliError::Input { .. } | CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Input {
            path: path.display().to_string(),
            source,
        })
}

fn read_table(input: &TableInput) -> Result<InputTable, CliError> {
    Ok(InputTable::from_reader(open(&input.input)?)?)
}

fn sidedness(arg: SidednessArg) -> Sidedness {
    match arg {
        SidednessArg::OneSided => Sidedness::OneSided,
        SidednessArg::TwoSided => Sidedness::TwoSided,
    }
}

fn method(arg: MethodArg) -> CombineMethod {
    match arg {
        MethodArg::Fisher => CombineMethod::Fisher,
        MethodArg::Stouffer => CombineMethod::Stouffer,
        MethodArg::Simes => CombineMethod::Simes,
    }
}

fn variant(arg: VariantArg) -> BoundVariant {
    match arg {
        VariantArg::Canonical => BoundVariant::Canonical,
        VariantArg::DeflatedAtQ => BoundVariant::DeflatedAtQ,
        VariantArg::DeflatedAtStageLevel => BoundVariant::DeflatedAtStageLevel,
    }
}

fn level(q: f64) -> Result<Level<f64>, CliError> {
    Ok(Level::new(q)?)
}

#[derive(Serialize)]
struct AdjustSummary<'a> {
    procedure: &'a str,
    q: f64,
    n: usize,
    rejections: usize,
    rejected_ids: Vec<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    false_rejections: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    false_discovery_proportion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage_trace: Option<&'a fdrlab::procedures::StageTrace<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adaptive_bounds: Option<&'a [f64]>,
}

pub fn adjust(args: &AdjustArgs, out: &Path) -> Result<(), CliError> {
    let table = read_table(&args.table)?;
    if table.is_empty() {
        eprintln!(
            "warning: {} contains no rows; writing an empty report",
            args.table.input.display()
        );
    }
    let q = level(args.q)?;
    let p = table.p_values(sidedness(args.table.sidedness))?;
    if args.procedure == ProcedureArg::Cluster {
        return adjust_clusters(args, &table, &p, q, out);
    }
    let (name, result, adjusted): (&str, RejectionResult<f64>, Option<Vec<f64>>) = match args
        .procedure
    {
        ProcedureArg::Bh => ("bh", bh_step_up(&p, q), Some(bh_adjusted(&p))),
        ProcedureArg::By => ("by", by_step_up(&p, q), Some(by_adjusted(&p))),
        ProcedureArg::AdaptiveStepDown => ("adaptive_step_down", adaptive_step_down(&p, q), None),
        ProcedureArg::TwoStage => (
            "two_stage",
            two_stage_adaptive(&p, q, variant(args.variant)),
            None,
        ),
        ProcedureArg::WeightedBh => {
            if !table.has_weight && !table.is_empty() {
                return Err(CliError::Usage("weighted-bh needs a weight column".into()));
            }
            let result = if table.is_empty() {
                bh_step_up(&p, q)
            } else {
                weighted_bh(&p, q)?
            };
            ("weighted_bh", result, None)
        }
        ProcedureArg::Bonferroni => ("bonferroni", bonferroni(&p, q), None),
        ProcedureArg::Cluster => unreachable!("handled above"),
    };
    fio::write_rejection_table(
        create(out, "rejections.csv")?,
        &p,
        &result,
        adjusted.as_deref(),
    )?;

    let outcome = table
        .truth_mask()
        .map(|mask| account(&mask, &result))
        .transpose()?;
    let summary = AdjustSummary {
        procedure: name,
        q: args.q,
        n: p.len(),
        rejections: result.r,
        rejected_ids: result
            .rejected
            .iter()
            .map(|&i| p.ids()[i].as_str())
            .collect(),
        false_rejections: outcome.map(|o| o.v),
        false_discovery_proportion: outcome.map(fdp::<f64>),
        stage_trace: result.stage_trace.as_ref(),
        adaptive_bounds: result.adaptive_bounds.as_deref(),
    };
    write_json(out, "summary.json", &summary)
}

#[derive(Serialize)]
struct ClusterRow<'a> {
    cluster: &'a str,
    size: usize,
    p_value: f64,
    tested: f64,
    rank: usize,
    threshold: f64,
    rejected: bool,
}

fn adjust_clusters(
    args: &AdjustArgs,
    table: &InputTable,
    p: &PValueSet<f64>,
    q: Level<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let labels = table
        .clusters()
        .ok_or_else(|| CliError::Usage("cluster procedure needs a cluster column".into()))?;
    let partition = ClusterPartition::from_labels(&labels);
    let res = cluster_test(p, &partition, method(args.method), q, args.size_weighting)?;
    let ranks = res.rejection.ranks();
    let sizes = partition.sizes();
    let rows: Vec<ClusterRow> = partition
        .labels()
        .iter()
        .enumerate()
        .map(|(c, label)| ClusterRow {
            cluster: label,
            size: sizes[c],
            p_value: res.cluster_p.values()[c],
            tested: res.rejection.tested[c],
            rank: ranks[c],
            threshold: res.rejection.thresholds[ranks[c] - 1],
            rejected: res.rejection.is_rejected(c),
        })
        .collect();
    fio::write_rows(create(out, "clusters.csv")?, &rows)?;
    write_json(
        out,
        "summary.json",
        &json!({
            "procedure": "cluster",
            "method": format!("{:?}", method(args.method)).to_lowercase(),
            "size_weighting": args.size_weighting,
            "q": args.q,
            "n": p.len(),
            "clusters": partition.labels().len(),
            "rejected_clusters": res.rejected_labels(),
        }),
    )
}

pub fn simulate(args: &SimulateArgs, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.scenario).map_err(|source| CliError::Input {
        path: args.scenario.display().to_string(),
        source,
    })?;
    let mut file = ScenarioFile::from_json(&text)?;
    if let Some(seed) = args.seed {
        file = file.with_seed(seed);
    }
    for output in run_scenario_file(&file)? {
        write_json(out, &format!("{}.json", output.label), &output)?;
        write_flat_csv(out, &format!("{}.csv", output.label), &output)?;
        eprintln!(
            "{}: done (scenario {})",
            output.label,
            &output.scenario_hash[..12]
        );
    }
    Ok(())
}

pub fn fdr(args: &FdrArgs, out: &Path) -> Result<(), CliError> {
    let table = read_table(&args.table)?;
    let z = table.z_values()?;
    let mut rows = Vec::new();
    let mut report = serde_json::Map::new();
    report.insert("n".into(), json!(z.len()));
    if matches!(args.null, NullArg::Theoretical | NullArg::Both) {
        let null = NormalSpec::standard();
        let p = table.p_values(Sidedness::TwoSided)?;
        let p0 = estimate_p0_lambda(&p, args.lambda)?;
        let curve = estimate_local_fdr(&z, p0, &null)?;
        rows.extend(fio::curve_rows(&curve, "theoretical"));
        report.insert(
            "theoretical".into(),
            json!({ "p0": p0, "lambda": args.lambda, "null": null, "diagnostics": diagnose_null(&z, &null)? }),
        );
    }
    if matches!(args.null, NullArg::Empirical | NullArg::Both) {
        let fit = fit_empirical_null(&z, (0.25, 0.75))?;
        let curve = estimate_local_fdr(&z, fit.p0, &fit.null)?;
        rows.extend(fio::curve_rows(&curve, "empirical"));
        report.insert(
            "empirical".into(),
            json!({
                "p0": fit.p0,
                "null": fit.null,
                "iterations": fit.iterations,
                "diagnostics": diagnose_null(&z, &fit.null)?,
            }),
        );
    }
    fio::write_rows(create(out, "curve.csv")?, &rows)?;
    let report = serde_json::Value::Object(report);
    write_json(out, "fit.json", &report)?;
    write_flat_csv(out, "fit.csv", &report)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    family: &'a str,
    node: &'a str,
    p_value: f64,
    rank: usize,
    threshold: f64,
    rejected: bool,
}

pub fn hier(args: &HierArgs, out: &Path) -> Result<(), CliError> {
    let table = read_table(&args.table)?;
    let p = table.p_values(sidedness(args.table.sidedness))?;
    let tree = fio::read_tree(open(&args.tree)?, p.ids())?;
    let res = hierarchical_test(&tree, &p, level(args.q)?, method(args.method))?;

    let mut rows = Vec::new();
    for family in &res.per_family_traces {
        let ranks = family.rejection.ranks();
        for (k, node) in family.children.iter().enumerate() {
            rows.push(TraceRow {
                family: &family.parent,
                node,
                p_value: family.p_values[k],
                rank: ranks[k],
                threshold: family.rejection.thresholds[ranks[k] - 1],
                rejected: family.rejection.is_rejected(k),
            });
        }
    }
    fio::write_rows(create(out, "hier_trace.csv")?, &rows)?;

    #[derive(Serialize)]
    struct LeafRow<'a> {
        id: &'a str,
        p: f64,
        rejected: bool,
    }
    let leaves: Vec<LeafRow> = (0..p.len())
        .map(|i| LeafRow {
            id: &p.ids()[i],
            p: p.values()[i],
            rejected: res.rejected_hypotheses.binary_search(&i).is_ok(),
        })
        .collect();
    fio::write_rows(create(out, "rejections.csv")?, &leaves)?;
    write_json(
        out,
        "hier.json",
        &json!({
            "q": args.q,
            "method": format!("{:?}", method(args.method)).to_lowercase(),
            "visited": res.visited,
            "rejected_nodes": res.rejected_nodes,
            "rejected_ids": res.rejected_hypotheses.iter().map(|&i| &p.ids()[i]).collect::<Vec<_>>(),
        }),
    )
}

pub fn ci(args: &CiArgs, out: &Path) -> Result<(), CliError> {
    let est = fio::read_estimates(open(&args.input)?)?;
    let q = level(args.q)?;
    let iv = fcr_intervals(&est, q);
    fio::write_rows(create(out, "intervals.csv")?, &fio::interval_rows(&iv))?;

    #[derive(Serialize)]
    struct ThresholdRow<'a> {
        id: &'a str,
        estimate: f64,
        thresholded: f64,
    }
    let thresholded = fdr_threshold_estimate(&est, q);
    let rows: Vec<ThresholdRow> = (0..est.len())
        .map(|i| ThresholdRow {
            id: &est.ids()[i],
            estimate: est.estimates()[i],
            thresholded: thresholded[i],
        })
        .collect();
    fio::write_rows(create(out, "thresholded.csv")?, &rows)?;
    write_json(
        out,
        "summary.json",
        &json!({
            "q": args.q,
            "n": est.len(),
            "selected": iv.len(),
            "marginal_level": iv.marginal_level,
            "z_star": iv.z_star,
        }),
    )
}

pub fn diagnose(args: &DiagnoseArgs, out: &Path) -> Result<(), CliError> {
    let table = read_table(&args.table)?;
    let z = table.z_values()?;
    let null = NormalSpec::new(args.location, args.scale)?;
    let d = diagnose_null(&z, &null)?;
    write_json(
        out,
        "diagnostics.json",
        &json!({ "null": null, "diagnostics": d, "rejects_uniformity": d.rejects_uniformity() }),
    )?;
    let refs: Vec<(&str, String)> = d.records();
    fio::write_key_values(create(out, "diagnostics.csv")?, &refs)?;
    Ok(())
}

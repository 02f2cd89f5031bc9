//! CSV ingestion and report serialization.
//!
//! Dialect: comma separated, header row required, `.` decimal point,
//! UTF-8. Line numbers in errors count the header as line 1.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{PValueSet, RejectionResult, RejectionRow};
use crate::selective::{EstimateSet, IntervalSet};
use crate::simlab::Sidedness;
use crate::structured::{HypothesisTree, TreeNode};
use crate::two_groups::{FdrCurve, NullDiagnostics};

/// Whether the value column holds p-values or z-scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    P,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRow {
    pub id: String,
    pub value: f64,
    pub weight: Option<f64>,
    pub cluster: Option<String>,
    /// `Some(true)` when the null hypothesis is known to be true.
    pub null_true: Option<bool>,
}

/// Parsed hypothesis table with columns `id`, exactly one of `p` or `z`,
/// and optional `weight`, `cluster` and `truth` (`null` or `alt`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTable {
    pub kind: ValueKind,
    pub rows: Vec<InputRow>,
    pub has_weight: bool,
    pub has_cluster: bool,
    pub has_truth: bool,
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn header_index(headers: &csv::StringRecord) -> HashMap<String, usize> {
    headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect()
}

fn parse_f64(field: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("column {column}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(
            line,
            format!("column {column}: {field:?} is not finite"),
        ));
    }
    Ok(v)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

impl InputTable {
    /// Parses a table. An input with no bytes at all yields an empty table of
    /// kind `p`.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let mut rdr = reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if headers.is_empty() {
            return Ok(Self {
                kind: ValueKind::P,
                rows: vec![],
                has_weight: false,
                has_cluster: false,
                has_truth: false,
            });
        }
        let cols = header_index(&headers);
        let id_col = *cols
            .get("id")
            .ok_or_else(|| parse_err(1, "missing id column"))?;
        let (kind, value_col) = match (cols.get("p"), cols.get("z")) {
            (Some(&c), None) => (ValueKind::P, c),
            (None, Some(&c)) => (ValueKind::Z, c),
            (Some(_), Some(_)) => {
                return Err(parse_err(
                    1,
                    "both p and z columns present; declare exactly one",
                ))
            }
            (None, None) => return Err(parse_err(1, "missing value column (p or z)")),
        };
        let weight_col = cols.get("weight").copied();
        let cluster_col = cols.get("cluster").copied();
        let truth_col = cols.get("truth").copied();

        let mut rows = Vec::new();
        let mut seen = HashMap::new();
        for (k, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(k + 2, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = record_line(&record, k + 2);
            let id = record[id_col].to_string();
            if id.is_empty() {
                return Err(parse_err(line, "empty id"));
            }
            if let Some(prev) = seen.insert(id.clone(), line) {
                return Err(parse_err(
                    line,
                    format!("duplicate id {id:?} (first on line {prev})"),
                ));
            }
            let value = parse_f64(
                &record[value_col],
                line,
                if kind == ValueKind::P { "p" } else { "z" },
            )?;
            if kind == ValueKind::P && !(0.0..=1.0).contains(&value) {
                return Err(parse_err(line, format!("p-value {value} outside [0, 1]")));
            }
            let weight = weight_col
                .map(|c| {
                    let w = parse_f64(&record[c], line, "weight")?;
                    if w <= 0.0 {
                        return Err(parse_err(
                            line,
                            format!("weight {w} is not strictly positive"),
                        ));
                    }
                    Ok(w)
                })
                .transpose()?;
            let cluster = cluster_col.map(|c| record[c].to_string());
            if cluster.as_deref() == Some("") {
                return Err(parse_err(line, "empty cluster label"));
            }
            let null_true = truth_col
                .map(|c| match record[c].to_ascii_lowercase().as_str() {
                    "null" => Ok(true),
                    "alt" => Ok(false),
                    other => Err(parse_err(
                        line,
                        format!("truth {other:?} is neither null nor alt"),
                    )),
                })
                .transpose()?;
            rows.push(InputRow {
                id,
                value,
                weight,
                cluster,
                null_true,
            });
        }
        Ok(Self {
            kind,
            rows,
            has_weight: weight_col.is_some(),
            has_cluster: cluster_col.is_some(),
            has_truth: truth_col.is_some(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.id.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// p-values, converting z-scores per `sidedness`; carries weights when
    /// the table has them.
    pub fn p_values(&self, sidedness: Sidedness) -> Result<PValueSet<f64>> {
        let p = match self.kind {
            ValueKind::P => self.values(),
            ValueKind::Z => self
                .rows
                .iter()
                .map(|r| sidedness.p_value(r.value))
                .collect(),
        };
        let set = PValueSet::with_ids(p, self.ids())?;
        if self.has_weight {
            set.with_weights(
                self.rows
                    .iter()
                    .map(|r| r.weight.expect("weight column"))
                    .collect(),
            )
        } else {
            Ok(set)
        }
    }

    pub fn z_values(&self) -> Result<Vec<f64>> {
        match self.kind {
            ValueKind::Z => Ok(self.values()),
            ValueKind::P => Err(Error::invalid(
                "table holds p-values; a z column is required",
            )),
        }
    }

    pub fn clusters(&self) -> Option<Vec<String>> {
        self.has_cluster.then(|| {
            self.rows
                .iter()
                .map(|r| r.cluster.clone().expect("cluster column"))
                .collect()
        })
    }

    pub fn truth_mask(&self) -> Option<Vec<bool>> {
        self.has_truth.then(|| {
            self.rows
                .iter()
                .map(|r| r.null_true.expect("truth column"))
                .collect()
        })
    }
}

/// Reads `id, estimate, std_error[, truth]` into an [`EstimateSet`].
pub fn read_estimates<R: Read>(input: R) -> Result<EstimateSet<f64>> {
    let mut rdr = reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols = header_index(&headers);
    let col = |name: &str| {
        cols.get(name)
            .copied()
            .ok_or_else(|| parse_err(1, format!("missing {name} column")))
    };
    let (id_c, est_c, se_c) = (col("id")?, col("estimate")?, col("std_error")?);
    let truth_c = cols.get("truth").copied();
    let (mut ids, mut est, mut se, mut truth) = (vec![], vec![], vec![], vec![]);
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(k + 2, e.to_string()))?;
        let line = record_line(&record, k + 2);
        ids.push(record[id_c].to_string());
        est.push(parse_f64(&record[est_c], line, "estimate")?);
        let s = parse_f64(&record[se_c], line, "std_error")?;
        if s <= 0.0 {
            return Err(parse_err(
                line,
                format!("std_error {s} is not strictly positive"),
            ));
        }
        se.push(s);
        if let Some(c) = truth_c {
            truth.push(parse_f64(&record[c], line, "truth")?);
        }
    }
    let set = EstimateSet::with_ids(ids, est, se)?;
    if truth_c.is_some() {
        set.with_truth(truth)
    } else {
        Ok(set)
    }
}

/// Reads an edge-list tree `node_id, parent_id, member_ids[, p_value]`.
/// `parent_id` is empty for a root; `member_ids` are hypothesis ids joined
/// by `;` and resolved against `ids`.
pub fn read_tree<R: Read>(input: R, ids: &[String]) -> Result<HypothesisTree<f64>> {
    let index: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut rdr = reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols = header_index(&headers);
    let col = |name: &str| {
        cols.get(name)
            .copied()
            .ok_or_else(|| parse_err(1, format!("missing {name} column")))
    };
    let (node_c, parent_c, members_c) = (col("node_id")?, col("parent_id")?, col("member_ids")?);
    let p_c = cols.get("p_value").copied();
    let mut nodes = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(k + 2, e.to_string()))?;
        let line = record_line(&record, k + 2);
        let id = record[node_c].to_string();
        let parent = Some(record[parent_c].to_string()).filter(|p| !p.is_empty());
        let members = record[members_c]
            .split(';')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| {
                index.get(m).copied().ok_or_else(|| Error::Tree {
                    node: id.clone(),
                    reason: format!("member {m:?} (line {line}) is not in the input table"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut node = TreeNode {
            id,
            parent,
            members,
            p_value: None,
        };
        if let Some(c) = p_c {
            if !record[c].is_empty() {
                node.p_value = Some(parse_f64(&record[c], line, "p_value")?);
            }
        }
        nodes.push(node);
    }
    HypothesisTree::new(nodes, ids.len())
}

/// Writes the rejection table, plus an `adjusted_p` column when given.
pub fn write_rejection_table<W: Write>(
    out: W,
    p: &PValueSet<f64>,
    result: &RejectionResult<f64>,
    adjusted: Option<&[f64]>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["id", "p", "weight", "rank", "threshold", "rejected"];
    if adjusted.is_some() {
        header.push("adjusted_p");
    }
    wtr.write_record(&header)?;
    for (i, row) in result.rows(p).into_iter().enumerate() {
        let mut rec = vec![
            row.id,
            row.p.to_string(),
            row.weight.map(|w| w.to_string()).unwrap_or_default(),
            row.rank.to_string(),
            row.threshold.map(|t| t.to_string()).unwrap_or_default(),
            row.rejected.to_string(),
        ];
        if let Some(adj) = adjusted {
            rec.push(adj[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rows of a rejection table and its adjusted column, when present.
pub type RejectionTable = (Vec<RejectionRow<f64>>, Option<Vec<f64>>);

/// Parses a table written by [`write_rejection_table`].
pub fn read_rejection_table<R: Read>(input: R) -> Result<RejectionTable> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let has_adj = headers.iter().any(|h| h == "adjusted_p");
    let mut rows = Vec::new();
    let mut adjusted = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let opt = |s: &str, c: &str| (!s.is_empty()).then(|| parse_f64(s, line, c)).transpose();
        rows.push(RejectionRow {
            id: record[0].to_string(),
            p: parse_f64(&record[1], line, "p")?,
            weight: opt(&record[2], "weight")?,
            rank: record[3].parse().map_err(|_| parse_err(line, "bad rank"))?,
            threshold: opt(&record[4], "threshold")?,
            rejected: record[5]
                .parse()
                .map_err(|_| parse_err(line, "bad rejected flag"))?,
        });
        if has_adj {
            adjusted.push(parse_f64(&record[6], line, "adjusted_p")?);
        }
    }
    Ok((rows, has_adj.then_some(adjusted)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub null: String,
    pub z: f64,
    pub local_fdr: f64,
    pub tail_fdr: f64,
    pub raw_ratio: f64,
    pub density: f64,
    pub bandwidth: f64,
}

/// Rows of a curve labelled by the null it was computed under.
pub fn curve_rows(curve: &FdrCurve<f64>, null_label: &str) -> Vec<CurveRow> {
    (0..curve.grid.len())
        .map(|i| CurveRow {
            null: null_label.to_string(),
            z: curve.grid[i],
            local_fdr: curve.local_fdr[i],
            tail_fdr: curve.tail_fdr[i],
            raw_ratio: curve.raw_ratio[i],
            density: curve.density[i],
            bandwidth: curve.bandwidth[i],
        })
        .collect()
}

pub fn write_rows<W: Write, S: Serialize>(out: W, rows: &[S]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, S: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<S>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Writes `key,value` pairs.
pub fn write_key_values<W: Write>(out: W, records: &[(&str, String)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["key", "value"])?;
    for (k, v) in records {
        wtr.write_record([*k, v.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn diagnostics_records(label: &str, d: &NullDiagnostics<f64>) -> Vec<(String, String)> {
    d.records()
        .into_iter()
        .map(|(k, v)| (format!("{label}.{k}"), v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub id: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub marginal_level: f64,
}

pub fn interval_rows(iv: &IntervalSet<f64>) -> Vec<IntervalRow> {
    (0..iv.len())
        .map(|k| IntervalRow {
            id: iv.ids[k].clone(),
            estimate: iv.estimates[k],
            lower: iv.lower[k],
            upper: iv.upper[k],
            marginal_level: iv.marginal_level,
        })
        .collect()
}

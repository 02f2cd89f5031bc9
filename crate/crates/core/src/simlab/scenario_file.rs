//! JSON scenario files: a list of labelled studies of different kinds.
//!
//! ```json
//! {
//!   "description": "BH under independence",
//!   "studies": [
//!     { "kind": "procedure", "label": "bh", "scenario": { "n": 200, "p0": 0.8, ... } }
//!   ]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    filter_study, fixed_threshold_study, hash_json, run_study, FilterSpec, FilterStudyReport,
    MixtureSpec, Scenario, StudyReport,
};
use crate::error::{Error, Result};
use crate::procedures::Level;
use crate::selective::{fcr_study, threshold_risk_study, FcrReport, RiskReport, SparseMeansSpec};
use crate::two_groups::{estimate_local_fdr, local_fdr_exact, NormalSpec, TwoGroupsModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub description: Option<String>,
    pub studies: Vec<StudySpec>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.studies.is_empty() {
            return Err(Error::invalid("scenario file lists no studies"));
        }
        let mut labels = std::collections::HashSet::new();
        for study in &self.studies {
            let label = study.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(Error::invalid(format!(
                    "study label {label:?} is not a plain file name"
                )));
            }
            if !labels.insert(label) {
                return Err(Error::invalid(format!("duplicate study label {label:?}")));
            }
            study.validate()?;
        }
        Ok(())
    }

    /// Returns a copy with every study seed replaced.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for study in &mut self.studies {
            study.set_seed(seed);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudySpec {
    Procedure {
        label: String,
        scenario: Scenario,
    },
    FixedThreshold {
        label: String,
        scenario: Scenario,
        z_threshold: f64,
    },
    Filter {
        label: String,
        scenario: Scenario,
        filter: FilterSpec,
    },
    Fcr {
        label: String,
        spec: SparseMeansSpec,
        q: f64,
    },
    Risk {
        label: String,
        spec: SparseMeansSpec,
        q: f64,
    },
    /// Local fdr estimate on one mixture draw against the exact curve.
    LocalFdr {
        label: String,
        mixture: MixtureSpec,
        z_min: f64,
        z_max: f64,
    },
}

impl StudySpec {
    pub fn label(&self) -> &str {
        match self {
            StudySpec::Procedure { label, .. }
            | StudySpec::FixedThreshold { label, .. }
            | StudySpec::Filter { label, .. }
            | StudySpec::Fcr { label, .. }
            | StudySpec::Risk { label, .. }
            | StudySpec::LocalFdr { label, .. } => label,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            StudySpec::Procedure { scenario, .. }
            | StudySpec::FixedThreshold { scenario, .. }
            | StudySpec::Filter { scenario, .. } => scenario.seed,
            StudySpec::Fcr { spec, .. } | StudySpec::Risk { spec, .. } => spec.seed,
            StudySpec::LocalFdr { mixture, .. } => mixture.seed,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            StudySpec::Procedure { scenario, .. }
            | StudySpec::FixedThreshold { scenario, .. }
            | StudySpec::Filter { scenario, .. } => scenario.seed = seed,
            StudySpec::Fcr { spec, .. } | StudySpec::Risk { spec, .. } => spec.seed = seed,
            StudySpec::LocalFdr { mixture, .. } => mixture.seed = seed,
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks
    pub fn validate(&self) -> Result<()> {
        match self {
            StudySpec::Procedure { scenario, .. } => scenario.validate(),
            StudySpec::FixedThreshold {
                scenario,
                z_threshold,
                ..
            } => {
                if z_threshold.is_nan() {
                    return Err(Error::invalid("z_threshold is NaN"));
                }
                scenario.validate()
            }
            StudySpec::Filter {
                scenario, filter, ..
            } => {
                scenario.validate()?;
                filter.validate()
            }
            StudySpec::Fcr { spec, q, .. } | StudySpec::Risk { spec, q, .. } => {
                Level::new(*q)?;
                spec.validate()
            }
            StudySpec::LocalFdr {
                mixture,
                z_min,
                z_max,
                ..
            } => {
                if !(z_min < z_max) {
                    return Err(Error::invalid(format!("empty z range [{z_min}, {z_max}]")));
                }
                if !(0.0..=1.0).contains(&mixture.p0) || !(mixture.alt_scale > 0.0) {
                    return Err(Error::invalid(
                        "mixture needs p0 in [0, 1] and a positive alternative scale",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Largest estimation error of the local fdr over a z range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFdrCheck {
    pub n: usize,
    pub max_abs_error: f64,
    pub at_z: f64,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyResult {
    Procedure(StudyReport),
    FixedThreshold(StudyReport),
    Filter(FilterStudyReport),
    Fcr(FcrReport),
    Risk(RiskReport),
    LocalFdr(LocalFdrCheck),
}

/// One study's report together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub label: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub result: StudyResult,
}

/// Compares [`estimate_local_fdr`] (given the true `p0` and the theoretical
/// null) with the exact curve on the grid points inside `[z_min, z_max]`.
pub fn local_fdr_check(mixture: &MixtureSpec, z_min: f64, z_max: f64) -> Result<LocalFdrCheck> {
    let z = mixture.draw();
    let model = TwoGroupsModel::new(
        mixture.p0,
        NormalSpec::standard(),
        NormalSpec::new(mixture.alt_location, mixture.alt_scale)?,
    )?;
    let curve = estimate_local_fdr(&z, mixture.p0, &NormalSpec::standard())?;
    let mut worst = (0.0, f64::NAN);
    let mut points = 0;
    for (&x, &est) in curve.grid.iter().zip(&curve.local_fdr) {
        if x < z_min || x > z_max {
            continue;
        }
        points += 1;
        let err = (est - local_fdr_exact(&model, x)?).abs();
        if err > worst.0 {
            worst = (err, x);
        }
    }
    Ok(LocalFdrCheck {
        n: z.len(),
        max_abs_error: worst.0,
        at_z: worst.1,
        grid_points: points,
    })
}

pub fn run_study_spec(study: &StudySpec) -> Result<StudyOutput> {
    study.validate()?;
    let (hash, result) = match study {
        StudySpec::Procedure { scenario, .. } => (
            scenario.hash(),
            StudyResult::Procedure(run_study(scenario)?.report),
        ),
        StudySpec::FixedThreshold {
            scenario,
            z_threshold,
            ..
        } => (
            hash_json(&(scenario, z_threshold)),
            StudyResult::FixedThreshold(fixed_threshold_study(scenario, *z_threshold)?.report),
        ),
        StudySpec::Filter {
            scenario, filter, ..
        } => {
            let report = filter_study(scenario, filter)?;
            (report.scenario_hash.clone(), StudyResult::Filter(report))
        }
        StudySpec::Fcr { spec, q, .. } => (
            hash_json(&(spec, q)),
            StudyResult::Fcr(fcr_study(spec, Level::new(*q)?)?),
        ),
        StudySpec::Risk { spec, q, .. } => (
            hash_json(&(spec, q)),
            StudyResult::Risk(threshold_risk_study(spec, Level::new(*q)?)?),
        ),
        StudySpec::LocalFdr {
            mixture,
            z_min,
            z_max,
            ..
        } => (
            hash_json(&(mixture, z_min, z_max)),
            StudyResult::LocalFdr(local_fdr_check(mixture, *z_min, *z_max)?),
        ),
    };
    Ok(StudyOutput {
        label: study.label().to_string(),
        scenario_hash: hash,
        seed: study.seed(),
        result,
    })
}

/// Runs every study in file order.
pub fn run_scenario_file(file: &ScenarioFile) -> Result<Vec<StudyOutput>> {
    file.validate()?;
    file.studies.iter().map(run_study_spec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "studies": [
            { "kind": "procedure", "label": "bh",
              "scenario": { "n": 20, "p0": 0.5, "effect": 3.0,
                            "correlation": { "type": "equicorrelated", "rho": 0.3 },
                            "sidedness": "two_sided", "replicates": 10, "seed": 1,
                            "procedure": { "name": "bh", "q": 0.1 } } },
            { "kind": "fcr", "label": "fcr",
              "spec": { "n": 20, "n_signals": 2, "signal": 4.0, "replicates": 10, "seed": 2 },
              "q": 0.05 }
        ]
    }"#;

    #[test]
    fn parses_and_runs() {
        let file = ScenarioFile::from_json(EXAMPLE).unwrap();
        let out = run_scenario_file(&file).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].label, "bh");
        assert!(matches!(out[1].result, StudyResult::Fcr(_)));
        let again = run_scenario_file(&file).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ScenarioFile::from_json(r#"{"studies": []}"#).is_err());
        let bad_rho = EXAMPLE.replace("\"rho\": 0.3", "\"rho\": 1.5");
        assert!(ScenarioFile::from_json(&bad_rho)
            .unwrap_err()
            .is_validation());
        let dup = EXAMPLE.replace("\"label\": \"fcr\"", "\"label\": \"bh\"");
        assert!(ScenarioFile::from_json(&dup).is_err());
    }

    #[test]
    fn seed_override() {
        let file = ScenarioFile::from_json(EXAMPLE).unwrap().with_seed(77);
        assert!(file.studies.iter().all(|s| s.seed() == 77));
    }
}

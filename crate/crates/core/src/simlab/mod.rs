//! Seeded Monte Carlo lab.
//!
//! A [`Scenario`] fixes the hypothesis count, null proportion, effect size,
//! dependence structure and procedure. Replicate `i` draws from the ChaCha8
//! streams keyed by `(seed, i, role)` (see [`crate::rng`]), replicates run
//! on the rayon pool, and results are collected in replicate order, so a
//! report is bit-identical for any worker count.
//!
//! The first `n − round(p0 n)` hypotheses are the alternatives; the rest
//! are true nulls. Simulation runs in `f64`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{one_sided_p, two_sided_p};
use crate::error::{Error, Result};
use crate::error_rates::{account, aggregate, bonferroni, ErrorRateReport, ReplicateOutcome};
use crate::procedures::{
    adaptive_step_down, bh_step_up, by_step_up, two_stage_adaptive, BoundVariant, Level, PValueSet,
    RejectionResult,
};
use crate::rng::{stream, StreamRole};

pub mod filter;
pub mod scenario_file;

pub use filter::{
    filter_study, filter_then_test, FilterOutcome, FilterSpec, FilterStatistic, FilterStudyReport,
    FilterThreshold,
};
pub use scenario_file::{
    local_fdr_check, run_scenario_file, run_study_spec, LocalFdrCheck, ScenarioFile, StudyOutput,
    StudyResult, StudySpec,
};

/// Dependence between the test statistics of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Correlation {
    Independent,
    /// Every pair has correlation `rho`.
    Equicorrelated {
        rho: f64,
    },
    /// `(T_i − C) / √2` with one shared control `C`; pairwise correlation ½.
    CommonControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// `p = 1 − Φ(z)`.
    OneSided,
    /// `p = 2(1 − Φ(|z|))`.
    #[default]
    TwoSided,
}

impl Sidedness {
    pub fn p_value(self, z: f64) -> f64 {
        match self {
            Sidedness::OneSided => one_sided_p(z),
            Sidedness::TwoSided => two_sided_p(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureName {
    Bh,
    By,
    AdaptiveStepDown,
    TwoStage,
    Bonferroni,
}

impl std::str::FromStr for ProcedureName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bh" => Ok(Self::Bh),
            "by" => Ok(Self::By),
            "adaptive_step_down" | "step_down" => Ok(Self::AdaptiveStepDown),
            "two_stage" | "bky" => Ok(Self::TwoStage),
            "bonferroni" => Ok(Self::Bonferroni),
            other => Err(Error::invalid(format!("unknown procedure {other:?}"))),
        }
    }
}

/// Procedure plus its level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureSpec {
    pub name: ProcedureName,
    pub q: f64,
    #[serde(default)]
    pub variant: BoundVariant,
}

impl ProcedureSpec {
    pub fn level(&self) -> Result<Level<f64>> {
        Level::new(self.q)
    }

    pub fn apply(&self, p: &PValueSet<f64>) -> Result<RejectionResult<f64>> {
        let q = self.level()?;
        Ok(match self.name {
            ProcedureName::Bh => bh_step_up(p, q),
            ProcedureName::By => by_step_up(p, q),
            ProcedureName::AdaptiveStepDown => adaptive_step_down(p, q),
            ProcedureName::TwoStage => two_stage_adaptive(p, q, self.variant),
            ProcedureName::Bonferroni => bonferroni(p, q),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub p0: f64,
    /// Mean shift of the alternatives on the z scale.
    pub effect: f64,
    pub correlation: Correlation,
    #[serde(default)]
    pub sidedness: Sidedness,
    pub replicates: usize,
    pub seed: u64,
    pub procedure: ProcedureSpec,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("scenario needs at least one hypothesis"));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid(format!("p0 = {} outside [0, 1]", self.p0)));
        }
        if !self.effect.is_finite() {
            return Err(Error::invalid("effect must be finite"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("at least one replicate required"));
        }
        if let Correlation::Equicorrelated { rho } = self.correlation {
            let lower = if self.n > 1 {
                -1.0 / (self.n as f64 - 1.0)
            } else {
                -1.0
            };
            if !(rho > lower && rho < 1.0) {
                return Err(Error::invalid(format!(
                    "rho = {rho} outside ({lower}, 1) for n = {}",
                    self.n
                )));
            }
        }
        self.procedure.level()?;
        Ok(())
    }

    /// Number of true nulls, `round(p0 n)`.
    pub fn n_null(&self) -> usize {
        ((self.p0 * self.n as f64).round() as usize).min(self.n)
    }

    /// `truth_mask[i]` is true for a true null.
    pub fn truth_mask(&self) -> Vec<bool> {
        let n1 = self.n - self.n_null();
        (0..self.n).map(|i| i >= n1).collect()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

pub(crate) fn hash_json<S: Serialize>(value: &S) -> String {
    let json = serde_json::to_vec(value).expect("scenario types serialize");
    hex::encode(Sha256::digest(&json))
}

/// Correlated standard-normal noise for one replicate.
fn noise(n: usize, correlation: Correlation, seed: u64, replicate: usize) -> Vec<f64> {
    let mut own = stream(seed, replicate as u64, StreamRole::Noise);
    let mut shared = stream(seed, replicate as u64, StreamRole::Shared);
    let mut xi: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut own)).collect();
    match correlation {
        Correlation::Independent => {}
        Correlation::Equicorrelated { rho } if rho >= 0.0 => {
            let w: f64 = StandardNormal.sample(&mut shared);
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            xi.iter_mut().for_each(|x| *x = a * w + b * *x);
        }
        Correlation::Equicorrelated { rho } => {
            // √(1 − ρ)(ξ_i − γ ξ̄) has unit variance and correlation ρ
            let nf = n as f64;
            let gamma = 1.0 - (1.0 + nf * rho / (1.0 - rho)).sqrt();
            let mean = xi.iter().sum::<f64>() / nf;
            let b = (1.0 - rho).sqrt();
            xi.iter_mut().for_each(|x| *x = b * (*x - gamma * mean));
        }
        Correlation::CommonControl => {
            let c: f64 = StandardNormal.sample(&mut shared);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            xi.iter_mut().for_each(|x| *x = (*x - c) * s);
        }
    }
    xi
}

/// Draws the z-values of replicate `index` and the truth mask.
pub fn generate_replicate(scenario: &Scenario, index: usize) -> Result<(Vec<f64>, Vec<bool>)> {
    scenario.validate()?;
    Ok(draw(scenario, index))
}

fn draw(scenario: &Scenario, index: usize) -> (Vec<f64>, Vec<bool>) {
    let truth = scenario.truth_mask();
    let mut z = noise(scenario.n, scenario.correlation, scenario.seed, index);
    for (zi, &null) in z.iter_mut().zip(&truth) {
        if !null {
            *zi += scenario.effect;
        }
    }
    (z, truth)
}

/// Rejection counts and power summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub mean_rejections: f64,
    /// Monte Carlo standard error of `mean_rejections`; `None` for one
    /// replicate.
    pub se_rejections: Option<f64>,
    /// Mean of `(R − V) / n1`; `None` when there are no alternatives.
    pub mean_true_discovery_proportion: Option<f64>,
}

impl PowerReport {
    fn from_outcomes(outcomes: &[ReplicateOutcome], n_alt: usize) -> Self {
        let n = outcomes.len() as f64;
        let rs: Vec<f64> = outcomes.iter().map(|o| o.r as f64).collect();
        let mean = rs.iter().sum::<f64>() / n;
        let se = (outcomes.len() > 1).then(|| {
            let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        let tdp = (n_alt > 0).then(|| {
            outcomes
                .iter()
                .map(|o| (o.r - o.v) as f64 / n_alt as f64)
                .sum::<f64>()
                / n
        });
        Self {
            mean_rejections: mean,
            se_rejections: se,
            mean_true_discovery_proportion: tdp,
        }
    }
}

/// Report embedded in every study output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario_hash: String,
    pub seed: u64,
    pub error_rates: ErrorRateReport<f64>,
    pub power: PowerReport,
}

/// A report plus the per-replicate outcomes it aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRun {
    pub report: StudyReport,
    pub outcomes: Vec<ReplicateOutcome>,
}

fn finish(scenario: &Scenario, outcomes: Vec<ReplicateOutcome>) -> Result<StudyRun> {
    let error_rates = aggregate(&outcomes)?;
    let power = PowerReport::from_outcomes(&outcomes, scenario.n - scenario.n_null());
    Ok(StudyRun {
        report: StudyReport {
            scenario_hash: scenario.hash(),
            seed: scenario.seed,
            error_rates,
            power,
        },
        outcomes,
    })
}

/// Runs the scenario's procedure on every replicate and aggregates.
pub fn run_study(scenario: &Scenario) -> Result<StudyRun> {
    scenario.validate()?;
    let outcomes = (0..scenario.replicates)
        .into_par_iter()
        .map(|rep| {
            let (z, truth) = draw(scenario, rep);
            let p = z.iter().map(|&zi| scenario.sidedness.p_value(zi)).collect();
            PValueSet::new(p)
                .and_then(|p| scenario.procedure.apply(&p))
                .and_then(|rej| account(&truth, &rej))
                .map_err(|e| Error::Replicate {
                    index: rep,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(scenario, outcomes)
}

/// Rejects every `z > t` (one-sided) or `|z| > t` (two-sided) in each
/// replicate; the scenario's procedure is ignored.
pub fn fixed_threshold_study(scenario: &Scenario, z_threshold: f64) -> Result<StudyRun> {
    scenario.validate()?;
    if z_threshold.is_nan() {
        return Err(Error::invalid("threshold is NaN"));
    }
    let outcomes = (0..scenario.replicates)
        .into_par_iter()
        .map(|rep| {
            let (z, truth) = draw(scenario, rep);
            let mut o = ReplicateOutcome::default();
            for (&zi, &null) in z.iter().zip(&truth) {
                let hit = match scenario.sidedness {
                    Sidedness::OneSided => zi > z_threshold,
                    Sidedness::TwoSided => zi.abs() > z_threshold,
                };
                if hit {
                    o.r += 1;
                    o.v += usize::from(null);
                }
            }
            o
        })
        .collect();
    finish(scenario, outcomes)
}

/// Mixture draw used to check the local fdr estimator against the exact
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub p0: f64,
    pub alt_location: f64,
    pub alt_scale: f64,
    pub seed: u64,
}

impl MixtureSpec {
    /// Draws `n` z-values; membership is Bernoulli(`1 − p0`).
    pub fn draw(&self) -> Vec<f64> {
        let mut noise = stream(self.seed, 0, StreamRole::Noise);
        let mut member = stream(self.seed, 0, StreamRole::Membership);
        (0..self.n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut noise);
                if member.random::<f64>() < self.p0 {
                    e
                } else {
                    self.alt_location + self.alt_scale * e
                }
            })
            .collect()
    }
}

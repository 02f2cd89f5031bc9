//! Multiple-hypothesis testing toolkit with a Monte Carlo verification lab.
//!
//! * [`procedures`]: BH, BY, adaptive step-down, two-stage adaptive and
//!   weighted BH.
//! * [`error_rates`]: per-replicate accounting and FDR / pFDR / Fdr / FWER
//!   estimators.
//! * [`two_groups`]: the two-groups mixture model, local and tail fdr,
//!   null-proportion estimation and empirical-null fitting.
//! * [`structured`]: combining tests, cluster testing, hierarchical testing
//!   and two-stage screening.
//! * [`selective`]: FCR-adjusted intervals and FDR-thresholding estimation.
//! * [`simlab`]: seeded scenario simulation and replication harness.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar type for the common cases. Simulation code
//! runs in `f64`.

pub mod dist;
pub mod error;
pub mod error_rates;
pub mod io;
pub mod procedures;
pub mod rng;
pub mod scalar;
pub mod selective;
pub mod simlab;
pub mod structured;
pub mod two_groups;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PValueSet64 = procedures::PValueSet<f64>;
pub type PValueSet32 = procedures::PValueSet<f32>;
pub type Level64 = procedures::Level<f64>;
pub type Level32 = procedures::Level<f32>;
pub type RejectionResult64 = procedures::RejectionResult<f64>;
pub type RejectionResult32 = procedures::RejectionResult<f32>;
pub type ErrorRateReport64 = error_rates::ErrorRateReport<f64>;
pub type NormalSpec64 = two_groups::NormalSpec<f64>;
pub type NormalSpec32 = two_groups::NormalSpec<f32>;
pub type TwoGroupsModel64 = two_groups::TwoGroupsModel<f64>;
pub type TwoGroupsModel32 = two_groups::TwoGroupsModel<f32>;
pub type FdrCurve64 = two_groups::FdrCurve<f64>;
pub type NullDiagnostics64 = two_groups::NullDiagnostics<f64>;
pub type HypothesisTree64 = structured::HypothesisTree<f64>;
pub type EstimateSet64 = selective::EstimateSet<f64>;
pub type IntervalSet64 = selective::IntervalSet<f64>;

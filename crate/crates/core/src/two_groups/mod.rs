//! The two-groups mixture model `f = p0 f0 + (1 − p0) f1`.
//!
//! Exact local and tail false discovery rates for normal components live
//! here; estimation from data is in [`density`] and [`null`].

use serde::{Deserialize, Serialize};

use crate::dist::{std_normal_cdf, std_normal_pdf, std_normal_sf};
use crate::error::{Error, Result};
use crate::Scalar;

pub mod density;
pub mod null;

pub use density::{
    estimate_local_fdr, estimate_local_fdr_with, BandwidthRule, DensityOptions, FdrCurve,
};
pub use null::{
    diagnose_null, estimate_p0_lambda, fit_empirical_null, p0_bound_two_stage, EmpiricalNullFit,
    NullDiagnostics,
};

/// Normal distribution given by location and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec<T> {
    pub location: T,
    pub scale: T,
}

impl<T: Scalar> NormalSpec<T> {
    pub fn new(location: T, scale: T) -> Result<Self> {
        if !location.is_finite() || !scale.is_finite() || scale <= T::zero() {
            return Err(Error::invalid(format!(
                "normal({location}, {scale}) needs finite location and positive scale"
            )));
        }
        Ok(Self { location, scale })
    }

    pub fn standard() -> Self {
        Self {
            location: T::zero(),
            scale: T::one(),
        }
    }

    fn standardize(&self, z: T) -> T {
        (z - self.location) / self.scale
    }

    pub fn pdf(&self, z: T) -> T {
        std_normal_pdf(self.standardize(z)) / self.scale
    }

    pub fn cdf(&self, z: T) -> T {
        std_normal_cdf(self.standardize(z))
    }

    pub fn sf(&self, z: T) -> T {
        std_normal_sf(self.standardize(z))
    }

    /// Mass of the selected tail beyond `z`.
    pub fn tail_mass(&self, z: T, tail: Tail) -> T {
        match tail {
            Tail::Right => self.sf(z),
            Tail::Left => self.cdf(z),
        }
    }
}

/// Which tail a threshold selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `{Z ≥ z}`.
    Right,
    /// `{Z ≤ z}`.
    Left,
}

/// Null proportion plus null and alternative components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGroupsModel<T> {
    pub p0: T,
    pub null: NormalSpec<T>,
    pub alt: NormalSpec<T>,
}

impl<T: Scalar> TwoGroupsModel<T> {
    pub fn new(p0: T, null: NormalSpec<T>, alt: NormalSpec<T>) -> Result<Self> {
        if !(p0 >= T::zero() && p0 <= T::one()) {
            return Err(Error::invalid(format!("p0 = {p0} outside [0, 1]")));
        }
        NormalSpec::new(null.location, null.scale)?;
        NormalSpec::new(alt.location, alt.scale)?;
        Ok(Self { p0, null, alt })
    }

    /// Mixture density `f(z)`.
    pub fn density(&self, z: T) -> T {
        self.p0 * self.null.pdf(z) + (T::one() - self.p0) * self.alt.pdf(z)
    }

    /// Mixture tail mass `S(z)`.
    pub fn tail_mass(&self, z: T, tail: Tail) -> T {
        self.p0 * self.null.tail_mass(z, tail) + (T::one() - self.p0) * self.alt.tail_mass(z, tail)
    }
}

/// Local false discovery rate `p0 f0(z) / f(z)`.
pub fn local_fdr_exact<T: Scalar>(model: &TwoGroupsModel<T>, z: T) -> Result<T> {
    let null_part = model.p0 * model.null.pdf(z);
    let total = null_part + (T::one() - model.p0) * model.alt.pdf(z);
    if total <= T::zero() {
        return Err(Error::Domain(format!(
            "mixture density vanishes at z = {z}"
        )));
    }
    Ok((null_part / total).min(T::one()))
}

/// Tail false discovery rate `p0 S0(z) / S(z)` for the chosen tail.
pub fn tail_fdr_exact<T: Scalar>(model: &TwoGroupsModel<T>, z: T, tail: Tail) -> Result<T> {
    let null_part = model.p0 * model.null.tail_mass(z, tail);
    let total = model.tail_mass(z, tail);
    if total <= T::zero() {
        return Err(Error::Domain(format!("tail mass vanishes beyond z = {z}")));
    }
    Ok((null_part / total).min(T::one()))
}

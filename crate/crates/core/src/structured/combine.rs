use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{chi2_even_sf, std_normal_quantile, std_normal_sf};
use crate::error::{Error, Result};
use crate::scalar::cmp_asc;
use crate::Scalar;

/// Rule for combining the p-values of a set into one p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMethod {
    /// χ²_{2k} survival at `−2 Σ ln p_i`.
    Fisher,
    /// Normal survival at `Σ Φ⁻¹(1 − p_i) / √k`.
    Stouffer,
    /// `min_i k p(i) / i`. Valid under independence and positive dependence;
    /// conservative otherwise.
    Simes,
}

impl FromStr for CombineMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fisher" => Ok(Self::Fisher),
            "stouffer" => Ok(Self::Stouffer),
            "simes" => Ok(Self::Simes),
            other => Err(Error::invalid(format!(
                "unknown combining method {other:?}"
            ))),
        }
    }
}

/// Combined p-value. `infinite_statistic` marks Fisher/Stouffer runs where
/// some member p-value was exactly 0 and the combined value is exactly 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combined<T> {
    pub p_value: T,
    pub infinite_statistic: bool,
}

pub fn combine_pvalues<T: Scalar>(p: &[T], method: CombineMethod) -> Result<Combined<T>> {
    if p.is_empty() {
        return Err(Error::invalid("cannot combine an empty set of p-values"));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
        return Err(Error::invalid(format!("p-value {v} outside [0, 1]")));
    }
    let k = p.len();
    let has_zero = p.iter().any(|v| *v == T::zero());
    let value = match method {
        CombineMethod::Fisher | CombineMethod::Stouffer if has_zero => {
            return Ok(Combined {
                p_value: T::zero(),
                infinite_statistic: true,
            });
        }
        CombineMethod::Fisher => {
            let stat: f64 = -2.0 * p.iter().map(|v| v.f64().ln()).sum::<f64>();
            T::lit(chi2_even_sf(stat, k))
        }
        CombineMethod::Stouffer => {
            // −Φ⁻¹(p) keeps precision for small p
            let sum: f64 = p.iter().map(|v| -std_normal_quantile(v.f64())).sum();
            T::lit(std_normal_sf(sum / (k as f64).sqrt()))
        }
        CombineMethod::Simes => {
            let mut sorted = p.to_vec();
            sorted.sort_by(cmp_asc);
            let k_t = T::count(k);
            sorted
                .iter()
                .enumerate()
                .map(|(i, &v)| k_t * v / T::count(i + 1))
                .fold(T::one(), T::min)
        }
    };
    Ok(Combined {
        p_value: value,
        infinite_statistic: false,
    })
}

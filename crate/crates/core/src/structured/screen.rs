use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{bh_step_up, Level, PValueSet, RejectionResult};
use crate::Scalar;

/// Outcome of a two-stage screening design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult<T> {
    /// Hypotheses passing stage one, ascending.
    pub survivors: Vec<usize>,
    /// BH over the survivors' stage-two p-values; indices refer to positions
    /// within `survivors`.
    pub rejection: RejectionResult<T>,
    /// Rejected hypotheses as indices into the original sets, ascending.
    pub rejected: Vec<usize>,
}

/// Screens at `alpha1` on stage-one p-values with no multiplicity
/// correction, then applies BH at `q` to the stage-two p-values of the
/// survivors, with the number of survivors as the family size.
///
/// Stage-two p-values must come from data independent of stage one.
/// Conditional p-values for dependent stages are not supported.
pub fn two_stage_screen<T: Scalar>(
    stage1: &PValueSet<T>,
    stage2: &PValueSet<T>,
    alpha1: T,
    q: Level<T>,
) -> Result<ScreenResult<T>> {
    if stage1.ids() != stage2.ids() {
        return Err(Error::invalid(format!(
            "stage sets index different hypotheses ({} vs {} entries, or ids differ)",
            stage1.len(),
            stage2.len()
        )));
    }
    if !(alpha1 >= T::zero() && alpha1 <= T::one()) {
        return Err(Error::invalid(format!(
            "screening level {alpha1} outside [0, 1]"
        )));
    }
    let survivors: Vec<usize> = (0..stage1.len())
        .filter(|&i| stage1.values()[i] <= alpha1)
        .collect();
    let rejection = bh_step_up(&stage2.subset(&survivors), q);
    let rejected = rejection.rejected.iter().map(|&k| survivors[k]).collect();
    Ok(ScreenResult {
        survivors,
        rejection,
        rejected,
    })
}

use super::state::argmax;
use super::{
    Case, CaseDecision, CostParams, DegenerateState, PolicyDecision, PolicyError, ProbeState,
};
use crate::model::ObservationModel;

/// Finite-regime offset added to `D(g||f)` in the case criterion:
///
/// `delta = s_ratio * (M - 2) * D(g||f) * D(f||g) / ((M - 1) * theta)`
///
/// Vanishes for `M = 2`, for zero switching cost, and as `theta` grows.
/// Infinite divergences give an infinite offset.
pub fn delta_offset(
    cost: &CostParams,
    cells: usize,
    d_gf: f64,
    d_fg: f64,
) -> Result<f64, PolicyError> {
    if cells < 2 {
        return Err(PolicyError::TooFewCells(cells));
    }
    if cells == 2 || cost.s_ratio() == 0.0 {
        return Ok(0.0);
    }
    let m = cells as f64;
    Ok(cost.s_ratio() * (m - 2.0) * d_gf * d_fg / ((m - 1.0) * cost.theta()))
}

/// Case I iff `D(g||f) + delta >= D(f||g) / (M - 1)`.
pub fn select_case(
    cost: &CostParams,
    cells: usize,
    model: &ObservationModel,
) -> Result<CaseDecision, PolicyError> {
    let (d_gf, d_fg) = (model.d_gf(), model.d_fg());
    let delta = delta_offset(cost, cells, d_gf, d_fg)?;
    let case = if d_gf + delta >= d_fg / (cells as f64 - 1.0) {
        Case::I
    } else {
        Case::II
    };
    Ok(CaseDecision { delta, case })
}

/// The `theta` at which the case criterion is met with equality.
///
/// Case I holds for `theta <= crossover`, Case II above it. Returns `None`
/// when the case does not depend on `theta` (the asymptotic criterion already
/// favours Case I, or the offset is identically zero).
pub fn case_crossover(s_ratio: f64, cells: usize, model: &ObservationModel) -> Option<f64> {
    let (d_gf, d_fg) = (model.d_gf(), model.d_fg());
    let m = cells as f64;
    let shortfall = d_fg / (m - 1.0) - d_gf;
    if cells <= 2 || s_ratio == 0.0 || !shortfall.is_finite() || shortfall <= 0.0 {
        return None;
    }
    Some(s_ratio * (m - 2.0) * d_gf * d_fg / ((m - 1.0) * shortfall))
}

/// Cells reliably determined normal: `{m : S_m < -theta}`.
pub fn b_set(state: &ProbeState, cost: &CostParams) -> Vec<usize> {
    let floor = -cost.theta();
    state
        .sums()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < floor)
        .map(|(m, _)| m)
        .collect()
}

/// One DBS step.
///
/// Case I: stop on the argmax once its sum exceeds `theta`, otherwise probe it.
/// Case II: stop once all but one cell are below `-theta` and declare the
/// remaining one; otherwise probe the smallest sum among cells not below
/// `-theta`.
pub fn dbs_decide(
    state: &ProbeState,
    case: &CaseDecision,
    cost: &CostParams,
) -> Result<PolicyDecision, DegenerateState> {
    let sums = state.sums();
    match case.case {
        Case::I => {
            let top = argmax(sums);
            if sums[top] > cost.theta() {
                Ok(PolicyDecision::Stop(top))
            } else {
                Ok(PolicyDecision::Probe(top))
            }
        }
        Case::II => {
            let floor = -cost.theta();
            let mut eliminated = 0;
            let mut candidate: Option<usize> = None;
            for (m, &s) in sums.iter().enumerate() {
                if s < floor {
                    eliminated += 1;
                } else if candidate.is_none_or(|c| s < sums[c]) {
                    candidate = Some(m);
                }
            }
            match candidate {
                None => Err(DegenerateState {
                    fallback: argmax(sums),
                }),
                Some(last) if eliminated == sums.len() - 1 => Ok(PolicyDecision::Stop(last)),
                Some(weakest) => Ok(PolicyDecision::Probe(weakest)),
            }
        }
    }
}

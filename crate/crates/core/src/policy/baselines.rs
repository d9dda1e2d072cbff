use rand::Rng;

use super::{CostParams, PolicyDecision, ProbeState};
use crate::model::ObservationModel;

/// Chernoff's maxmin action distribution in canonical order.
///
/// Entry 0 is the most likely cell, entries `1..M` are the other cells in
/// index order. The distribution maximizes
/// `min_{j != ml} [lambda_ml * D(g||f) + lambda_j * D(f||g)]` over the simplex.
/// For a single target the optimum is a point mass on the most likely cell
/// when `D(g||f) >= D(f||g) / (M - 1)`, and uniform over the others otherwise.
pub fn chernoff_lambda(model: &ObservationModel, cells: usize) -> Vec<f64> {
    let mut lambda = vec![0.0; cells];
    if model.d_gf() >= model.d_fg() / (cells as f64 - 1.0) {
        lambda[0] = 1.0;
    } else {
        let share = 1.0 / (cells as f64 - 1.0);
        lambda[1..].iter_mut().for_each(|w| *w = share);
    }
    lambda
}

/// Gap stopping rule shared by the randomized baselines and DGF:
/// stop once `S_(1) - S_(2) >= theta` and declare the argmax.
fn gap_stop(state: &ProbeState, cost: &CostParams) -> Option<usize> {
    let (first, second) = state.top_two();
    let sums = state.sums();
    (sums[first] - sums[second] >= cost.theta()).then_some(first)
}

/// Maps a canonical slot onto a cell: slot 0 is `ml`, slot `k > 0` is the
/// k-th cell other than `ml` in index order.
fn slot_to_cell(slot: usize, ml: usize) -> usize {
    match slot {
        0 => ml,
        k if k <= ml => k - 1,
        k => k,
    }
}

fn draw_action<R: Rng + ?Sized>(lambda: &[f64], ml: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (slot, &w) in lambda.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = slot;
        if u < acc {
            return slot_to_cell(slot, ml);
        }
    }
    // rounding left `acc` slightly below 1
    slot_to_cell(last_positive, ml)
}

pub fn chernoff_decide<R: Rng + ?Sized>(
    state: &ProbeState,
    cost: &CostParams,
    lambda: &[f64],
    rng: &mut R,
) -> PolicyDecision {
    if let Some(declared) = gap_stop(state, cost) {
        return PolicyDecision::Stop(declared);
    }
    PolicyDecision::Probe(draw_action(lambda, state.argmax(), rng))
}

/// Chernoff actions redrawn with probability `p`, otherwise the last action
/// repeats. The first action is always drawn.
pub fn sluggish_decide<R: Rng + ?Sized>(
    state: &ProbeState,
    cost: &CostParams,
    lambda: &[f64],
    p: f64,
    rng: &mut R,
) -> PolicyDecision {
    if let Some(declared) = gap_stop(state, cost) {
        return PolicyDecision::Stop(declared);
    }
    match state.last_action() {
        Some(last) if p < 1.0 && rng.random::<f64>() >= p => PolicyDecision::Probe(last),
        _ => PolicyDecision::Probe(draw_action(lambda, state.argmax(), rng)),
    }
}

/// Probes the cell with the second-largest sum LLR.
pub fn dgf_decide(state: &ProbeState, cost: &CostParams) -> PolicyDecision {
    let (first, second) = state.top_two();
    let sums = state.sums();
    if sums[first] - sums[second] >= cost.theta() {
        PolicyDecision::Stop(first)
    } else {
        PolicyDecision::Probe(second)
    }
}

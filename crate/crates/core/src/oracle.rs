//! Brute-force cross-checks for the closed forms used by the policies.
//!
//! These deliberately avoid the closed-form code paths they check: the
//! Chernoff action distribution is found by grid search over the simplex, and
//! SPRT lengths by simulation.

use crate::bounds::{self, SprtSample};
use crate::model::{ObservationModel, Which};

/// Per-coordinate tolerance when comparing action distributions.
pub const LAMBDA_TOLERANCE: f64 = 1e-2;
/// Relative tolerance between Wald's approximation and the simulated SPRT mean.
pub const SPRT_RELATIVE_TOLERANCE: f64 = 0.2;

/// `min_{j != ml} [lambda_ml * D(g||f) + lambda_j * D(f||g)]` for a canonical
/// (ML-first) action distribution.
pub fn maxmin_objective(lambda: &[f64], d_gf: f64, d_fg: f64) -> f64 {
    lambda[1..]
        .iter()
        .map(|&w| lambda[0] * d_gf + w * d_fg)
        .fold(f64::INFINITY, f64::min)
}

/// Grid search over `lambda_ml` in steps of `step`, with the remaining mass
/// spread uniformly over the other cells. Scans from `lambda_ml = 1` down and
/// keeps the first maximizer.
pub fn chernoff_lambda_grid(d_gf: f64, d_fg: f64, cells: usize, step: f64) -> Vec<f64> {
    let points = (1.0 / step).round() as usize;
    let rest = cells as f64 - 1.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in (0..=points).rev() {
        let head = k as f64 / points as f64;
        let mut lambda = vec![(1.0 - head) / rest; cells];
        lambda[0] = head;
        let value = maxmin_objective(&lambda, d_gf, d_fg);
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, lambda));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

/// Exhaustive search over the full simplex on a lattice with `resolution`
/// divisions per coordinate. Only practical for small `cells`.
pub fn chernoff_lambda_simplex(d_gf: f64, d_fg: f64, cells: usize, resolution: usize) -> Vec<f64> {
    fn walk(
        prefix: &mut Vec<usize>,
        remaining: usize,
        cells: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if prefix.len() == cells - 1 {
            prefix.push(remaining);
            visit(prefix);
            prefix.pop();
            return;
        }
        // high first, so ties keep the mass on the ML slot
        for k in (0..=remaining).rev() {
            prefix.push(k);
            walk(prefix, remaining - k, cells, visit);
            prefix.pop();
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let r = resolution as f64;
    walk(&mut Vec::new(), resolution, cells, &mut |counts| {
        let lambda: Vec<f64> = counts.iter().map(|&c| c as f64 / r).collect();
        let value = maxmin_objective(&lambda, d_gf, d_fg);
        if best.as_ref().is_none_or(|(v, _)| value > *v + 1e-12) {
            best = Some((value, lambda));
        }
    });
    best.map(|(_, l)| l).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaCheck {
    pub closed_form: Vec<f64>,
    pub grid: Vec<f64>,
    pub max_abs_diff: f64,
}

impl LambdaCheck {
    pub fn passed(&self) -> bool {
        self.max_abs_diff <= LAMBDA_TOLERANCE
    }
}

pub fn check_chernoff_lambda(model: &ObservationModel, cells: usize) -> LambdaCheck {
    let closed_form = crate::policy::chernoff_lambda(model, cells);
    let grid = chernoff_lambda_grid(model.d_gf(), model.d_fg(), cells, 1e-3);
    let max_abs_diff = closed_form
        .iter()
        .zip(&grid)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    LambdaCheck {
        closed_form,
        grid,
        max_abs_diff,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SprtCheck {
    /// Wald's `theta / D`.
    pub analytic: f64,
    /// `max(1, analytic)`: any test takes at least one observation.
    pub reference: f64,
    pub simulated: SprtSample,
    pub abs_diff: f64,
    pub rel_diff: f64,
}

impl SprtCheck {
    pub fn passed(&self) -> bool {
        self.rel_diff <= SPRT_RELATIVE_TOLERANCE
    }
}

pub fn check_sprt(
    model: &ObservationModel,
    theta: f64,
    which: Which,
    runs: usize,
    seed: u64,
) -> SprtCheck {
    let analytic = bounds::sprt_oracle(model, theta, which);
    let reference = analytic.max(1.0);
    let simulated = bounds::sprt_monte_carlo(model, theta, which, runs, seed);
    let abs_diff = (simulated.mean.value - reference).abs();
    SprtCheck {
        analytic,
        reference,
        simulated,
        abs_diff,
        rel_diff: abs_diff / reference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_finds_endpoints() {
        let exp1 = ObservationModel::poisson(10.0, 1.0).unwrap();
        let g = chernoff_lambda_grid(exp1.d_gf(), exp1.d_fg(), 5, 1e-3);
        assert_eq!(g, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let exp2 = ObservationModel::poisson(2.0, 0.001).unwrap();
        let g = chernoff_lambda_grid(exp2.d_gf(), exp2.d_fg(), 5, 1e-3);
        assert_eq!(g, vec![0.0, 0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn full_simplex_agrees_for_three_cells() {
        let g = chernoff_lambda_simplex(1.0, 4.0, 3, 60);
        assert!(g[0].abs() < 1e-12);
        assert!((g[1] - 0.5).abs() < 1e-12 && (g[2] - 0.5).abs() < 1e-12);
        let g = chernoff_lambda_simplex(3.0, 4.0, 3, 60);
        assert_eq!(g, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn checks_pass_on_reference_models() {
        let exp1 = ObservationModel::poisson(10.0, 1.0).unwrap();
        assert!(check_chernoff_lambda(&exp1, 5).passed());
        let sprt = check_sprt(&exp1, 100.0, Which::G, 20_000, 1);
        assert!(sprt.passed(), "{sprt:?}");
        let small = check_sprt(&exp1, 1.0, Which::G, 5_000, 2);
        assert!(small.reference >= 1.0 && small.simulated.mean.value >= 1.0);
        assert!(small.passed(), "{small:?}");
    }
}

//! Asymptotic reference quantities and Monte Carlo risk estimation.
//!
//! The Bayes risk of a policy is `P_e + c E[tau] + s E[tau_s]`. Dividing by
//! the observation cost `c = exp(-theta)` gives the scaled risk
//! `P_e e^theta + E[tau] + s_ratio E[tau_s]`, which stays representable for
//! the large `theta` values the experiments sweep. The asymptotic lower
//! bound `-c ln c / I*` scales the same way to `theta / I*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::harness::TrialResult;
use crate::model::{ObservationModel, Which};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("cannot estimate risk from an empty trial list")]
    EmptyTrials,
    #[error("no trials for hypothesis {cell} although its prior is {prior}")]
    MissingStratum { cell: usize, prior: f64 },
    #[error("trial reports true cell {cell} but only {cells} priors were given")]
    CellOutOfRange { cell: usize, cells: usize },
}

/// Effective information rate `I*(M)`, using the offset-free case partition.
pub fn i_star(model: &ObservationModel, cells: usize) -> f64 {
    let normal_rate = model.d_fg() / (cells as f64 - 1.0);
    if model.d_gf() >= normal_rate {
        model.d_gf()
    } else {
        normal_rate
    }
}

/// Asymptotic lower bound on the Bayes risk divided by `c`: `theta / I*`.
pub fn r_lb_scaled(theta: f64, i_star: f64) -> f64 {
    theta / i_star
}

/// `(risk - bound) / bound`.
pub fn relative_loss(risk_scaled: f64, r_lb_scaled: f64) -> f64 {
    (risk_scaled - r_lb_scaled) / r_lb_scaled
}

/// A point estimate with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }

    /// Interval clipped to `[0, 1]`, for probabilities.
    pub fn probability_bounds(&self) -> (f64, f64) {
        (self.lower().max(0.0), self.upper().min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskBreakdown {
    pub trials: usize,
    pub pe: Estimate,
    pub mean_tau: Estimate,
    pub mean_tau_s: Estimate,
    /// `mean(tau_s) / mean(tau)`, half-width by the delta method.
    pub switch_ratio: Estimate,
    /// `pe * e^theta`, evaluated in log space; exactly 0 when `pe == 0`.
    pub pe_term: f64,
    /// `pe * e^theta + mean_tau + s_ratio * mean_tau_s`. The half-width combines
    /// the error term and the per-trial sampling cost in quadrature.
    pub risk_scaled: Estimate,
    pub truncated_fraction: f64,
}

impl RiskBreakdown {
    pub fn relative_loss(&self, r_lb_scaled: f64) -> f64 {
        relative_loss(self.risk_scaled.value, r_lb_scaled)
    }
}

/// Running sums for one hypothesis stratum.
#[derive(Debug, Default, Clone, Copy)]
struct Stratum {
    n: f64,
    errors: f64,
    truncated: f64,
    tau: f64,
    tau2: f64,
    tau_s: f64,
    tau_s2: f64,
    cross: f64,
}

impl Stratum {
    fn push(&mut self, t: &TrialResult) {
        let (a, b) = (t.tau as f64, t.tau_s as f64);
        self.n += 1.0;
        self.errors += f64::from(u8::from(!t.correct));
        self.truncated += f64::from(u8::from(t.truncated));
        self.tau += a;
        self.tau2 += a * a;
        self.tau_s += b;
        self.tau_s2 += b * b;
        self.cross += a * b;
    }

    fn mean(&self, sum: f64) -> f64 {
        sum / self.n
    }

    /// Unbiased sample covariance from raw sums.
    fn cov(&self, sum_xy: f64, sum_x: f64, sum_y: f64) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (sum_xy - sum_x * sum_y / self.n) / (self.n - 1.0)
    }

    fn var_tau(&self) -> f64 {
        self.cov(self.tau2, self.tau, self.tau).max(0.0)
    }

    fn var_tau_s(&self) -> f64 {
        self.cov(self.tau_s2, self.tau_s, self.tau_s).max(0.0)
    }

    fn cov_tau(&self) -> f64 {
        self.cov(self.cross, self.tau, self.tau_s)
    }
}

/// Pools all trials into a single stratum (equivalent to uniform priors over
/// equally sized strata).
pub fn estimate_risk(
    trials: &[TrialResult],
    theta: f64,
    s_ratio: f64,
) -> Result<RiskBreakdown, EstimateError> {
    if trials.is_empty() {
        return Err(EstimateError::EmptyTrials);
    }
    let mut pooled = Stratum::default();
    trials.iter().for_each(|t| pooled.push(t));
    Ok(combine(&[(1.0, pooled)], theta, s_ratio))
}

/// Prior-weighted estimate over hypothesis strata (`true_cell` indexes `priors`).
pub fn estimate_risk_stratified(
    trials: &[TrialResult],
    priors: &[f64],
    theta: f64,
    s_ratio: f64,
) -> Result<RiskBreakdown, EstimateError> {
    if trials.is_empty() {
        return Err(EstimateError::EmptyTrials);
    }
    let mut strata = vec![Stratum::default(); priors.len()];
    for t in trials {
        strata
            .get_mut(t.true_cell)
            .ok_or(EstimateError::CellOutOfRange {
                cell: t.true_cell,
                cells: priors.len(),
            })?
            .push(t);
    }
    let mut weighted = Vec::with_capacity(priors.len());
    for (cell, (&prior, stratum)) in priors.iter().zip(strata).enumerate() {
        if prior == 0.0 {
            continue;
        }
        if stratum.n == 0.0 {
            return Err(EstimateError::MissingStratum { cell, prior });
        }
        weighted.push((prior, stratum));
    }
    Ok(combine(&weighted, theta, s_ratio))
}

fn combine(strata: &[(f64, Stratum)], theta: f64, s_ratio: f64) -> RiskBreakdown {
    let weighted_mean =
        |f: &dyn Fn(&Stratum) -> f64| -> f64 { strata.iter().map(|(w, s)| w * f(s)).sum() };
    let weighted_var = |f: &dyn Fn(&Stratum) -> f64| -> f64 {
        strata.iter().map(|(w, s)| w * w * f(s) / s.n).sum()
    };
    let half = |var: f64| Z95 * var.max(0.0).sqrt();

    let pe = weighted_mean(&|s| s.mean(s.errors));
    let pe_var = weighted_var(&|s| {
        let p = s.mean(s.errors);
        p * (1.0 - p)
    });
    let pe = Estimate {
        value: pe,
        half_width: half(pe_var),
    };

    let tau = weighted_mean(&|s| s.mean(s.tau));
    let tau_var = weighted_var(&|s| s.var_tau());
    let tau_s = weighted_mean(&|s| s.mean(s.tau_s));
    let tau_s_var = weighted_var(&|s| s.var_tau_s());

    let ratio = if tau > 0.0 { tau_s / tau } else { 0.0 };
    let ratio_var = if tau > 0.0 {
        weighted_var(&|s| s.var_tau_s() - 2.0 * ratio * s.cov_tau() + ratio * ratio * s.var_tau())
            / (tau * tau)
    } else {
        0.0
    };

    // Per-trial sampling cost tau + s_ratio * tau_s.
    let cost_var = weighted_var(&|s| {
        s.var_tau() + 2.0 * s_ratio * s.cov_tau() + s_ratio * s_ratio * s.var_tau_s()
    });

    let pe_term = scale_by_inverse_cost(pe.value, theta);
    let pe_term_half = scale_by_inverse_cost(pe.half_width, theta);
    let cost_half = half(cost_var);
    let risk = Estimate {
        value: pe_term + tau + s_ratio * tau_s,
        half_width: pe_term_half.hypot(cost_half),
    };

    let trials = strata.iter().map(|(_, s)| s.n).sum::<f64>();
    let truncated = weighted_mean(&|s| s.mean(s.truncated));

    RiskBreakdown {
        trials: trials as usize,
        pe,
        mean_tau: Estimate {
            value: tau,
            half_width: half(tau_var),
        },
        mean_tau_s: Estimate {
            value: tau_s,
            half_width: half(tau_s_var),
        },
        switch_ratio: Estimate {
            value: ratio,
            half_width: half(ratio_var),
        },
        pe_term,
        risk_scaled: risk,
        truncated_fraction: truncated,
    }
}

/// `x * e^theta` computed as `exp(theta + ln x)`; zero stays zero.
fn scale_by_inverse_cost(x: f64, theta: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (theta + x.ln()).exp()
    }
}

/// Wald's approximation of the expected SPRT length with boundaries `+-theta`:
/// `theta / D(g||f)` on a target cell, `theta / D(f||g)` on a normal cell.
pub fn sprt_oracle(model: &ObservationModel, theta: f64, which: Which) -> f64 {
    match which {
        Which::G => theta / model.d_gf(),
        Which::F => theta / model.d_fg(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtSample {
    pub runs: usize,
    pub mean: Estimate,
    /// Fraction of runs that ended on the wrong boundary.
    pub wrong_boundary: f64,
}

/// Runs `runs` single-cell SPRTs with boundaries `+-theta` on observations
/// drawn from `which` and reports the mean stopping time.
pub fn sprt_monte_carlo(
    model: &ObservationModel,
    theta: f64,
    which: Which,
    runs: usize,
    seed: u64,
) -> SprtSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2, mut wrong) = (0.0, 0.0, 0usize);
    for _ in 0..runs {
        let mut s: f64 = 0.0;
        let mut n = 0u64;
        while s.abs() < theta {
            let y = model.sample(which, &mut rng);
            s += model
                .llr(y)
                .expect("sampled observation lies in the support");
            n += 1;
        }
        let hit_upper = s >= theta;
        if hit_upper != (which == Which::G) {
            wrong += 1;
        }
        let n = n as f64;
        sum += n;
        sum2 += n * n;
    }
    let r = runs as f64;
    let mean = sum / r;
    let var = if runs > 1 {
        (sum2 - sum * sum / r) / (r - 1.0)
    } else {
        0.0
    };
    SprtSample {
        runs,
        mean: Estimate {
            value: mean,
            half_width: Z95 * (var.max(0.0) / r).sqrt(),
        },
        wrong_boundary: wrong as f64 / r,
    }
}

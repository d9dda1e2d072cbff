//! Reproducible Monte Carlo trials and sweeps.
//!
//! Every trial owns a ChaCha8 stream seeded by [`derive_seed`] from the
//! master seed and the trial's coordinates (policy, theta, hypothesis, trial
//! index). Trials therefore run in any order or in parallel and the sweep
//! table is bit-identical for a given configuration.
//!
//! Hypotheses are stratified: each true cell receives exactly
//! `trials_per_hypothesis` trials and aggregates are weighted by the priors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{self, EstimateError, RiskBreakdown};
use crate::model::{ModelError, Observation, ObservationModel, Which};
use crate::policy::{
    CaseDecision, CostParams, DegenerateState, Policy, PolicyDecision, PolicyError, PolicyKind,
    ProbeState,
};

/// Tolerance on the total prior mass.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-12;
/// Default multiplier in the per-trial step cap.
pub const DEFAULT_MAX_STEPS_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("`cells` must be at least 2, got {0}")]
    TooFewCells(usize),
    #[error("`theta_grid` entries must be finite and strictly positive, got {0}")]
    InvalidTheta(f64),
    #[error("`s_ratio` must be finite and nonnegative, got {0}")]
    InvalidSwitchRatio(f64),
    #[error("`trials_per_hypothesis` must be positive")]
    ZeroTrials,
    #[error("`priors` has {got} entries but there are {expected} cells")]
    PriorLength { expected: usize, got: usize },
    #[error("`priors` entries must be finite and nonnegative, got {0}")]
    NegativePrior(f64),
    #[error("`priors` must sum to 1 (within 1e-12), got {0}")]
    PriorSum(f64),
    #[error("`max_steps_factor` must be finite and strictly positive, got {0}")]
    InvalidMaxStepsFactor(f64),
    #[error("the policy roster is empty")]
    NoPolicies,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("true cell {cell} is out of range for {cells} cells")]
    CellOutOfRange { cell: usize, cells: usize },
    #[error("could not build a worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cells: usize,
    pub model: ObservationModel,
    pub theta_grid: Vec<f64>,
    pub s_ratio: f64,
    pub policies: Vec<PolicyKind>,
    pub trials_per_hypothesis: usize,
    pub priors: Vec<f64>,
    pub master_seed: u64,
    pub max_steps_factor: f64,
}

impl ExperimentConfig {
    /// A configuration with uniform priors, all four policies, no switching
    /// cost, an empty theta grid and 100 trials per hypothesis.
    pub fn new(cells: usize, model: ObservationModel) -> Self {
        Self {
            cells,
            model,
            theta_grid: Vec::new(),
            s_ratio: 0.0,
            policies: vec![
                PolicyKind::Dbs,
                PolicyKind::Chernoff,
                PolicyKind::Sluggish {
                    p: crate::policy::DEFAULT_SLUGGISH_P,
                },
                PolicyKind::Dgf,
            ],
            trials_per_hypothesis: 100,
            priors: vec![1.0 / cells.max(1) as f64; cells],
            master_seed: 0,
            max_steps_factor: DEFAULT_MAX_STEPS_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cells < 2 {
            return Err(ConfigError::TooFewCells(self.cells));
        }
        if let Some(&t) = self
            .theta_grid
            .iter()
            .find(|t| !(t.is_finite() && **t > 0.0))
        {
            return Err(ConfigError::InvalidTheta(t));
        }
        if !(self.s_ratio.is_finite() && self.s_ratio >= 0.0) {
            return Err(ConfigError::InvalidSwitchRatio(self.s_ratio));
        }
        if self.trials_per_hypothesis == 0 {
            return Err(ConfigError::ZeroTrials);
        }
        if self.priors.len() != self.cells {
            return Err(ConfigError::PriorLength {
                expected: self.cells,
                got: self.priors.len(),
            });
        }
        if let Some(&p) = self.priors.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(ConfigError::NegativePrior(p));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(ConfigError::PriorSum(total));
        }
        if !(self.max_steps_factor.is_finite() && self.max_steps_factor > 0.0) {
            return Err(ConfigError::InvalidMaxStepsFactor(self.max_steps_factor));
        }
        if self.policies.is_empty() {
            return Err(ConfigError::NoPolicies);
        }
        Ok(())
    }

    pub fn cost(&self, theta: f64) -> Result<CostParams, PolicyError> {
        CostParams::new(theta, self.s_ratio)
    }

    /// `ceil(factor * (M - 1) * theta / min(D(g||f), D(f||g)))`, at least
    /// `ceil(factor * M)`.
    pub fn max_steps(&self, theta: f64) -> u64 {
        let m = self.cells as f64;
        let slowest = self.model.d_gf().min(self.model.d_fg());
        let cap = (self.max_steps_factor * (m - 1.0) * theta / slowest).ceil();
        // Infinite divergences collapse the formula to 0.
        let floor = (self.max_steps_factor * m).ceil();
        let cap = cap.max(floor);
        if cap < u64::MAX as f64 {
            cap as u64
        } else {
            u64::MAX
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialResult {
    pub true_cell: usize,
    pub declared: usize,
    /// Number of observations.
    pub tau: u64,
    /// Number of switches between consecutive probes.
    pub tau_s: u64,
    pub correct: bool,
    /// The step cap was hit, or DBS Case II eliminated every cell.
    pub truncated: bool,
}

/// One probe in a verbose trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// 1-based step index.
    pub n: u64,
    pub cell: usize,
    pub y: Observation,
    pub llr: f64,
    /// Sum LLRs after the update.
    pub sums: Vec<f64>,
    pub switched: bool,
    /// `|{m : S_m < -theta}|` when the probe was chosen.
    pub eliminated: usize,
}

const SEED_DOMAIN: u64 = 0x6462_735f_6c61_6221;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed.
///
/// Starting from `mix64(master ^ DOMAIN)`, each coordinate is absorbed as
/// `h = mix64(h + GAMMA + mix64(x))`. Because `mix64` is a bijection the map
/// is injective in `trial_index` for fixed other inputs.
pub fn derive_seed(
    master_seed: u64,
    policy_index: u64,
    theta_index: u64,
    hypothesis: u64,
    trial_index: u64,
) -> u64 {
    [policy_index, theta_index, hypothesis, trial_index]
        .into_iter()
        .fold(mix64(master_seed ^ SEED_DOMAIN), |h, x| {
            mix64(h.wrapping_add(GOLDEN_GAMMA).wrapping_add(mix64(x)))
        })
}

/// Runs one trial of `policy` under hypothesis `true_cell`.
pub fn run_trial(
    config: &ExperimentConfig,
    policy: PolicyKind,
    theta: f64,
    true_cell: usize,
    seed: u64,
) -> Result<TrialResult, HarnessError> {
    let bound = Policy::new(policy, &config.model, config.cells, config.cost(theta)?)?;
    simulate(config, &bound, theta, true_cell, seed, None)
}

/// Like [`run_trial`], also returning one [`TraceStep`] per observation.
pub fn run_trial_traced(
    config: &ExperimentConfig,
    policy: PolicyKind,
    theta: f64,
    true_cell: usize,
    seed: u64,
) -> Result<(TrialResult, Vec<TraceStep>), HarnessError> {
    let bound = Policy::new(policy, &config.model, config.cells, config.cost(theta)?)?;
    let mut trace = Vec::new();
    let result = simulate(config, &bound, theta, true_cell, seed, Some(&mut trace))?;
    Ok((result, trace))
}

fn simulate(
    config: &ExperimentConfig,
    policy: &Policy,
    theta: f64,
    true_cell: usize,
    seed: u64,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<TrialResult, HarnessError> {
    if true_cell >= config.cells {
        return Err(HarnessError::CellOutOfRange {
            cell: true_cell,
            cells: config.cells,
        });
    }
    let max_steps = config.max_steps(theta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ProbeState::new(config.cells);
    let finish = |state: &ProbeState, declared: usize, truncated: bool| TrialResult {
        true_cell,
        declared,
        tau: state.steps(),
        tau_s: state.switches(),
        correct: declared == true_cell,
        truncated,
    };
    loop {
        let cell = match policy.decide(&state, &mut rng) {
            Ok(PolicyDecision::Stop(declared)) => return Ok(finish(&state, declared, false)),
            Err(DegenerateState { fallback }) => return Ok(finish(&state, fallback, true)),
            Ok(PolicyDecision::Probe(cell)) => cell,
        };
        if state.steps() >= max_steps {
            return Ok(finish(&state, state.argmax(), true));
        }
        let which = if cell == true_cell {
            Which::G
        } else {
            Which::F
        };
        let y = config.model.sample(which, &mut rng);
        match trace.as_deref_mut() {
            None => {
                state.update(cell, y, &config.model)?;
            }
            Some(steps) => {
                let floor = -theta;
                let eliminated = state.sums().iter().filter(|&&s| s < floor).count();
                let switched = state.last_action().is_some_and(|last| last != cell);
                let llr = state.update(cell, y, &config.model)?;
                steps.push(TraceStep {
                    n: state.steps(),
                    cell,
                    y,
                    llr,
                    sums: state.sums().to_vec(),
                    switched,
                    eliminated,
                });
            }
        }
    }
}

/// Aggregated results for one `(policy, theta)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: PolicyKind,
    pub theta: f64,
    /// The DBS case at this theta (same for every policy).
    pub case: CaseDecision,
    pub risk: RiskBreakdown,
    pub r_lb_scaled: f64,
    pub relative_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    /// Policy roster order, theta ascending within each policy.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, policy: PolicyKind, theta: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.theta == theta)
    }

    pub fn for_policy(&self, policy: PolicyKind) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.policy == policy)
    }
}

/// Runs every `(policy, theta, hypothesis, trial)` on the current rayon pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable, HarnessError> {
    config.validate()?;
    let mut thetas: Vec<(usize, f64)> = config.theta_grid.iter().copied().enumerate().collect();
    thetas.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let i_star = bounds::i_star(&config.model, config.cells);
    let per_cell = config.trials_per_hypothesis;
    let mut rows = Vec::with_capacity(config.policies.len() * thetas.len());

    for (p_idx, &kind) in config.policies.iter().enumerate() {
        for &(t_idx, theta) in &thetas {
            let policy = Policy::new(kind, &config.model, config.cells, config.cost(theta)?)?;
            let trials = (0..config.cells * per_cell)
                .into_par_iter()
                .map(|job| {
                    let (cell, trial) = (job / per_cell, job % per_cell);
                    let seed = derive_seed(
                        config.master_seed,
                        p_idx as u64,
                        t_idx as u64,
                        cell as u64,
                        trial as u64,
                    );
                    simulate(config, &policy, theta, cell, seed, None)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let risk =
                bounds::estimate_risk_stratified(&trials, &config.priors, theta, config.s_ratio)?;
            let r_lb = bounds::r_lb_scaled(theta, i_star);
            rows.push(SweepRow {
                policy: kind,
                theta,
                case: policy.case(),
                relative_loss: risk.relative_loss(r_lb),
                risk,
                r_lb_scaled: r_lb,
            });
        }
    }
    Ok(SweepTable { rows })
}

/// [`run_sweep`] on a dedicated pool with `threads` workers (0 = rayon default).
pub fn run_sweep_with_threads(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<SweepTable, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    pool.install(|| run_sweep(config))
}

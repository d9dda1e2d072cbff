//! Selection, stopping and decision rules.
//!
//! Four policies share one [`ProbeState`]:
//!
//! - **DBS** (deterministic bounded switching): picks one of two regimes from
//!   the divergences, the cell count and the costs. In Case I it keeps probing
//!   the cell with the largest sum LLR until that sum exceeds `theta`. In
//!   Case II it probes the smallest sum LLR among cells not yet declared
//!   normal and eliminates normal cells one at a time.
//! - **Chernoff**: randomized actions drawn from the maxmin action
//!   distribution relative to the current most likely cell.
//! - **Sluggish**: Chernoff actions that are only redrawn with probability `p`;
//!   otherwise the previous action is repeated.
//! - **DGF**: always probes the cell with the second-largest sum LLR.
//!
//! Costs are carried on the log scale: `theta = -ln c` and `s_ratio = s / c`.
//! Every threshold compares sums against `+theta` or `-theta`, so very small
//! observation costs never underflow. Ties in argmax/argmin resolve to the
//! lowest cell index. Cells are 0-based throughout the library.

mod baselines;
mod dbs;
mod state;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::model::ObservationModel;

pub use baselines::{chernoff_decide, chernoff_lambda, dgf_decide, sluggish_decide};
pub use dbs::{b_set, case_crossover, dbs_decide, delta_offset, select_case};
pub use state::ProbeState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("at least two cells are required, got {0}")]
    TooFewCells(usize),
    #[error("theta = -ln c must be finite and strictly positive, got {0}")]
    InvalidTheta(f64),
    #[error("s_ratio = s/c must be finite and nonnegative, got {0}")]
    InvalidSwitchRatio(f64),
    #[error("sluggish switching probability must lie in (0, 1], got {0}")]
    InvalidSwitchProbability(f64),
    #[error("unknown policy `{0}` (expected dbs, chernoff, sluggish[:p] or dgf)")]
    UnknownPolicy(String),
}

/// Observation and switching costs on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    theta: f64,
    s_ratio: f64,
}

impl CostParams {
    pub fn new(theta: f64, s_ratio: f64) -> Result<Self, PolicyError> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(PolicyError::InvalidTheta(theta));
        }
        if !(s_ratio.is_finite() && s_ratio >= 0.0) {
            return Err(PolicyError::InvalidSwitchRatio(s_ratio));
        }
        Ok(Self { theta, s_ratio })
    }

    /// `-ln c`
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `s / c`
    pub fn s_ratio(&self) -> f64 {
        self.s_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Confirm the most likely target directly.
    I,
    /// Eliminate the normal cells one by one.
    II,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::I => f.write_str("I"),
            Case::II => f.write_str("II"),
        }
    }
}

/// The DBS regime together with the offset that selected it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseDecision {
    pub delta: f64,
    pub case: Case,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyDecision {
    Probe(usize),
    Stop(usize),
}

/// DBS Case II reached a state where every cell sits below `-theta`.
///
/// The caller stops, declares `fallback` (the argmax) and flags the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("every cell is below -theta; falling back to cell {fallback}")]
pub struct DegenerateState {
    pub fallback: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Dbs,
    Chernoff,
    Sluggish { p: f64 },
    Dgf,
}

/// Switching probability used when `sluggish` is named without one.
pub const DEFAULT_SLUGGISH_P: f64 = 0.1;

impl PolicyKind {
    pub fn sluggish(p: f64) -> Result<Self, PolicyError> {
        if p.is_finite() && p > 0.0 && p <= 1.0 {
            Ok(PolicyKind::Sluggish { p })
        } else {
            Err(PolicyError::InvalidSwitchProbability(p))
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Dbs => f.write_str("dbs"),
            PolicyKind::Chernoff => f.write_str("chernoff"),
            PolicyKind::Sluggish { p } => write!(f, "sluggish:{p}"),
            PolicyKind::Dgf => f.write_str("dgf"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    /// Accepts `dbs`, `chernoff`, `dgf`, `sluggish` and `sluggish:<p>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "dbs" => Ok(PolicyKind::Dbs),
            "chernoff" => Ok(PolicyKind::Chernoff),
            "dgf" => Ok(PolicyKind::Dgf),
            "sluggish" => PolicyKind::sluggish(DEFAULT_SLUGGISH_P),
            other => match other.strip_prefix("sluggish:") {
                Some(p) => {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| PolicyError::UnknownPolicy(s.into()))?;
                    PolicyKind::sluggish(p)
                }
                None => Err(PolicyError::UnknownPolicy(s.into())),
            },
        }
    }
}

/// A policy bound to a model, cell count and cost point.
///
/// Holds whatever the rule needs precomputed: the DBS case, or the canonical
/// Chernoff action distribution.
#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    cost: CostParams,
    case: CaseDecision,
    lambda: Vec<f64>,
}

impl Policy {
    pub fn new(
        kind: PolicyKind,
        model: &ObservationModel,
        cells: usize,
        cost: CostParams,
    ) -> Result<Self, PolicyError> {
        if let PolicyKind::Sluggish { p } = kind {
            PolicyKind::sluggish(p)?;
        }
        let case = select_case(&cost, cells, model)?;
        let lambda = match kind {
            PolicyKind::Chernoff | PolicyKind::Sluggish { .. } => chernoff_lambda(model, cells),
            PolicyKind::Dbs | PolicyKind::Dgf => Vec::new(),
        };
        Ok(Self {
            kind,
            cost,
            case,
            lambda,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn cost(&self) -> &CostParams {
        &self.cost
    }

    /// The DBS case at this cost point (reported for every policy).
    pub fn case(&self) -> CaseDecision {
        self.case
    }

    pub fn decide<R: Rng + ?Sized>(
        &self,
        state: &ProbeState,
        rng: &mut R,
    ) -> Result<PolicyDecision, DegenerateState> {
        match self.kind {
            PolicyKind::Dbs => dbs_decide(state, &self.case, &self.cost),
            PolicyKind::Chernoff => Ok(chernoff_decide(state, &self.cost, &self.lambda, rng)),
            PolicyKind::Sluggish { p } => {
                Ok(sluggish_decide(state, &self.cost, &self.lambda, p, rng))
            }
            PolicyKind::Dgf => Ok(dgf_decide(state, &self.cost)),
        }
    }
}

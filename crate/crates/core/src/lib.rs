//! Sequential search for a single anomalous cell among `M` cells when every
//! observation and every switch between cells carries a cost.
//!
//! - [`model`]: the normal/target observation distributions, LLRs and KL
//!   divergences.
//! - [`policy`]: the deterministic bounded switching policy and the Chernoff,
//!   Sluggish and DGF baselines.
//! - [`bounds`]: the asymptotic lower bound, relative loss and Monte Carlo
//!   risk estimates.
//! - [`harness`]: seeded, parallel trials and sweeps.
//! - [`config`], [`report`]: experiment files and CSV/text output.
//! - [`oracle`]: brute-force cross-checks of the closed forms.

pub mod bounds;
pub mod config;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod report;

pub use harness::{ExperimentConfig, SweepRow, SweepTable, TrialResult};
pub use model::{Direction, Observation, ObservationModel, Which};
pub use policy::{Case, CostParams, PolicyDecision, PolicyKind, ProbeState};

//! Observation distributions for normal cells (`f`) and the target cell (`g`).
//!
//! Two families are supported: Poisson counts with rates `lambda_f` and
//! `lambda_g`, and finite discrete pmfs over `{0, .., K}`. The finite family
//! is mostly useful for exact oracles on tiny supports; it allows disjoint
//! supports, in which case divergences and log-likelihood ratios are
//! infinite.
//!
//! All logarithms are natural.

use std::fmt;

use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Poisson};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

/// Tolerance on the total mass of a finite pmf.
pub const PMF_SUM_TOLERANCE: f64 = 1e-12;

/// Errors raised while building or evaluating an [`ObservationModel`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("poisson rate `{name}` must be finite and strictly positive, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("pmf `{name}` is invalid: {reason}")]
    InvalidPmf { name: &'static str, reason: String },
    #[error("pmf_f and pmf_g have different support lengths ({f} vs {g})")]
    SupportMismatch { f: usize, g: usize },
    #[error("f and g must differ (both divergences must be strictly positive)")]
    IdenticalDistributions,
    #[error("observation {y} is outside the support {{0..{max}}}")]
    OutOfSupport { y: u64, max: usize },
    #[error("observation {y} has zero mass under both f and g")]
    ZeroLikelihood { y: u64 },
    #[error("divergence {direction} is infinite (zero-mass mismatch)")]
    InfiniteDivergence { direction: Direction },
}

/// Which of the two observation distributions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    /// Normal-cell distribution `f`.
    F,
    /// Target-cell distribution `g`.
    G,
}

/// Direction of a KL divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `D(f||g)`
    FToG,
    /// `D(g||f)`
    GToF,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::FToG => f.write_str("D(f||g)"),
            Direction::GToF => f.write_str("D(g||f)"),
        }
    }
}

/// A single count observation `y_m(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation(pub u64);

impl Observation {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The distribution family, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Poisson { lambda_f: f64, lambda_g: f64 },
    FiniteDiscrete { pmf_f: Vec<f64>, pmf_g: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Sampler {
    Poisson {
        f: Poisson<f64>,
        g: Poisson<f64>,
    },
    Finite {
        f: WeightedIndex<f64>,
        g: WeightedIndex<f64>,
    },
}

/// A validated `(f, g)` pair. Immutable once built.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    family: Family,
    sampler: Sampler,
    d_fg: f64,
    d_gf: f64,
    // Poisson: llr(y) = y * llr_slope + llr_offset.
    llr_slope: f64,
    llr_offset: f64,
    // Finite: precomputed llr per support point (NaN where both masses vanish).
    llr_table: Vec<f64>,
}

impl PartialEq for ObservationModel {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

impl ObservationModel {
    pub fn poisson(lambda_f: f64, lambda_g: f64) -> Result<Self, ModelError> {
        check_rate("lambda_f", lambda_f)?;
        check_rate("lambda_g", lambda_g)?;
        let d_fg = poisson_kl(lambda_f, lambda_g);
        let d_gf = poisson_kl(lambda_g, lambda_f);
        if !(d_fg > 0.0 && d_gf > 0.0) {
            return Err(ModelError::IdenticalDistributions);
        }
        let sampler = Sampler::Poisson {
            f: Poisson::new(lambda_f).map_err(|_| ModelError::InvalidRate {
                name: "lambda_f",
                value: lambda_f,
            })?,
            g: Poisson::new(lambda_g).map_err(|_| ModelError::InvalidRate {
                name: "lambda_g",
                value: lambda_g,
            })?,
        };
        Ok(Self {
            family: Family::Poisson { lambda_f, lambda_g },
            sampler,
            d_fg,
            d_gf,
            llr_slope: (lambda_g / lambda_f).ln(),
            llr_offset: lambda_f - lambda_g,
            llr_table: Vec::new(),
        })
    }

    pub fn finite(pmf_f: Vec<f64>, pmf_g: Vec<f64>) -> Result<Self, ModelError> {
        check_pmf("pmf_f", &pmf_f)?;
        check_pmf("pmf_g", &pmf_g)?;
        if pmf_f.len() != pmf_g.len() {
            return Err(ModelError::SupportMismatch {
                f: pmf_f.len(),
                g: pmf_g.len(),
            });
        }
        let d_fg = finite_kl(&pmf_f, &pmf_g);
        let d_gf = finite_kl(&pmf_g, &pmf_f);
        if !(d_fg > 0.0 && d_gf > 0.0) {
            return Err(ModelError::IdenticalDistributions);
        }
        let llr_table = pmf_f
            .iter()
            .zip(&pmf_g)
            .map(|(&pf, &pg)| {
                if pf == 0.0 && pg == 0.0 {
                    f64::NAN
                } else {
                    pg.ln() - pf.ln()
                }
            })
            .collect();
        let weights = |name, pmf: &[f64]| {
            WeightedIndex::new(pmf.iter().copied()).map_err(|e| ModelError::InvalidPmf {
                name,
                reason: e.to_string(),
            })
        };
        let sampler = Sampler::Finite {
            f: weights("pmf_f", &pmf_f)?,
            g: weights("pmf_g", &pmf_g)?,
        };
        Ok(Self {
            family: Family::FiniteDiscrete { pmf_f, pmf_g },
            sampler,
            d_fg,
            d_gf,
            llr_slope: 0.0,
            llr_offset: 0.0,
            llr_table,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Natural-log probability mass of `y` under `f` or `g`.
    ///
    /// Returns `-inf` for a support point with zero mass.
    pub fn log_pmf(&self, which: Which, y: Observation) -> Result<f64, ModelError> {
        match &self.family {
            Family::Poisson { lambda_f, lambda_g } => {
                let lambda = match which {
                    Which::F => *lambda_f,
                    Which::G => *lambda_g,
                };
                let k = y.0;
                Ok(k as f64 * lambda.ln() - lambda - ln_factorial(k))
            }
            Family::FiniteDiscrete { pmf_f, pmf_g } => {
                let pmf = match which {
                    Which::F => pmf_f,
                    Which::G => pmf_g,
                };
                let p = pmf.get(y.0 as usize).ok_or(ModelError::OutOfSupport {
                    y: y.0,
                    max: pmf.len() - 1,
                })?;
                Ok(p.ln())
            }
        }
    }

    /// Draws one observation from `f` or `g`. Only the caller's stream is mutated.
    pub fn sample<R: Rng + ?Sized>(&self, which: Which, rng: &mut R) -> Observation {
        match (&self.sampler, which) {
            (Sampler::Poisson { f, .. }, Which::F) => Observation(f.sample(rng) as u64),
            (Sampler::Poisson { g, .. }, Which::G) => Observation(g.sample(rng) as u64),
            (Sampler::Finite { f, .. }, Which::F) => Observation(f.sample(rng) as u64),
            (Sampler::Finite { g, .. }, Which::G) => Observation(g.sample(rng) as u64),
        }
    }

    /// Log-likelihood ratio `log g(y) - log f(y)`.
    pub fn llr(&self, y: Observation) -> Result<f64, ModelError> {
        match &self.family {
            Family::Poisson { .. } => Ok(y.0 as f64 * self.llr_slope + self.llr_offset),
            Family::FiniteDiscrete { .. } => {
                let v = *self
                    .llr_table
                    .get(y.0 as usize)
                    .ok_or(ModelError::OutOfSupport {
                        y: y.0,
                        max: self.llr_table.len() - 1,
                    })?;
                if v.is_nan() {
                    Err(ModelError::ZeroLikelihood { y: y.0 })
                } else {
                    Ok(v)
                }
            }
        }
    }

    /// KL divergence in the requested direction. Infinite divergences are an error.
    pub fn kl(&self, direction: Direction) -> Result<f64, ModelError> {
        let d = self.divergence(direction);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(ModelError::InfiniteDivergence { direction })
        }
    }

    /// KL divergence on the extended reals: `+inf` on a zero-mass mismatch.
    pub fn divergence(&self, direction: Direction) -> f64 {
        match direction {
            Direction::FToG => self.d_fg,
            Direction::GToF => self.d_gf,
        }
    }

    /// `D(g||f)`, the per-sample drift of a probed target cell.
    pub fn d_gf(&self) -> f64 {
        self.d_gf
    }

    /// `D(f||g)`, the per-sample negative drift of a probed normal cell.
    pub fn d_fg(&self) -> f64 {
        self.d_fg
    }
}

/// Closed-form `D(Pois(a) || Pois(b)) = a ln(a/b) + b - a`.
pub fn poisson_kl(a: f64, b: f64) -> f64 {
    a * (a / b).ln() + b - a
}

fn finite_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            if qi == 0.0 {
                f64::INFINITY
            } else {
                pi * (pi / qi).ln()
            }
        })
        .sum()
}

fn check_rate(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidRate { name, value })
    }
}

fn check_pmf(name: &'static str, pmf: &[f64]) -> Result<(), ModelError> {
    let invalid = |reason: String| Err(ModelError::InvalidPmf { name, reason });
    if pmf.is_empty() {
        return invalid("empty support".into());
    }
    if let Some(p) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return invalid(format!("entry {p} is not a finite nonnegative number"));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
        return invalid(format!("masses sum to {total}, expected 1"));
    }
    Ok(())
}

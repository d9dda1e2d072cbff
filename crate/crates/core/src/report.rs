//! Text and CSV renderings of sweeps, case checks and trial traces.
//!
//! Floats are printed with Rust's `Display`, which is the shortest decimal
//! string that round-trips to the same `f64`.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::harness::{ExperimentConfig, SweepTable, TraceStep, TrialResult};
use crate::policy::{self, Case, CostParams, PolicyError};

pub const SWEEP_CSV_HEADER: &str = "policy,theta,case,trials,pe,pe_ci95,mean_tau,tau_ci95,\
mean_tau_s,switch_ratio,risk_scaled,r_lb_scaled,relative_loss,truncated_frac";

/// Writes the sweep table in long format, one row per `(policy, theta)`.
pub fn write_sweep_csv<W: Write>(table: &SweepTable, out: &mut W) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in &table.rows {
        let r = &row.risk;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.policy,
            row.theta,
            row.case.case,
            r.trials,
            r.pe.value,
            r.pe.half_width,
            r.mean_tau.value,
            r.mean_tau.half_width,
            r.mean_tau_s.value,
            r.switch_ratio.value,
            r.risk_scaled.value,
            row.r_lb_scaled,
            row.relative_loss,
            r.truncated_fraction,
        )?;
    }
    Ok(())
}

pub fn sweep_csv_string(table: &SweepTable) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(table, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Per-theta ranking of the policies by relative loss (best first).
pub fn ranking_summary(table: &SweepTable) -> String {
    let mut thetas: Vec<f64> = table.rows.iter().map(|r| r.theta).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let mut s = String::new();
    for theta in thetas {
        let mut rows: Vec<_> = table.rows.iter().filter(|r| r.theta == theta).collect();
        rows.sort_by(|a, b| a.relative_loss.total_cmp(&b.relative_loss));
        let case = rows
            .first()
            .map(|r| r.case.case.to_string())
            .unwrap_or_default();
        let _ = write!(s, "theta={theta} (case {case}):");
        for (rank, row) in rows.iter().enumerate() {
            let _ = write!(
                s,
                " {}. {} L={:.4} tau={:.2} ratio={:.4};",
                rank + 1,
                row.policy,
                row.relative_loss,
                row.risk.mean_tau.value,
                row.risk.switch_ratio.value
            );
        }
        s.pop();
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseCheckRow {
    pub theta: f64,
    pub delta: f64,
    /// `D(g||f) + delta`
    pub target_rate: f64,
    /// `D(f||g) / (M - 1)`
    pub normal_rate: f64,
    pub case: Case,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseCheck {
    pub rows: Vec<CaseCheckRow>,
    /// Adjacent grid points `(last Case I, first Case II)` where the case flips.
    pub flips: Vec<(f64, f64)>,
    /// Exact crossover theta when the case depends on theta at all.
    pub theta_star: Option<f64>,
}

/// Evaluates the DBS case criterion over `thetas` (sorted ascending).
pub fn case_check(config: &ExperimentConfig, thetas: &[f64]) -> Result<CaseCheck, PolicyError> {
    let mut thetas = thetas.to_vec();
    thetas.sort_by(f64::total_cmp);
    let normal_rate = config.model.d_fg() / (config.cells as f64 - 1.0);
    let mut rows = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let cost = CostParams::new(theta, config.s_ratio)?;
        let d = policy::select_case(&cost, config.cells, &config.model)?;
        rows.push(CaseCheckRow {
            theta,
            delta: d.delta,
            target_rate: config.model.d_gf() + d.delta,
            normal_rate,
            case: d.case,
        });
    }
    let flips = rows
        .windows(2)
        .filter(|w| w[0].case != w[1].case)
        .map(|w| (w[0].theta, w[1].theta))
        .collect();
    Ok(CaseCheck {
        rows,
        flips,
        theta_star: policy::case_crossover(config.s_ratio, config.cells, &config.model),
    })
}

pub fn format_case_check(check: &CaseCheck) -> String {
    let mut s = String::from("theta,delta,d_gf_plus_delta,d_fg_per_normal,case\n");
    for r in &check.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.theta, r.delta, r.target_rate, r.normal_rate, r.case
        );
    }
    for (a, b) in &check.flips {
        let _ = writeln!(s, "# case flips between theta={a} and theta={b}");
    }
    match check.theta_star {
        Some(t) => {
            let _ = writeln!(s, "# crossover theta*={t} (case I for theta <= theta*)");
        }
        None => s.push_str("# case does not depend on theta\n"),
    }
    s
}

/// Per-step trace, cells printed 1-based.
///
/// `n,probed_cell,y,llr,S_1..S_M,switched,b_size` where the sums are taken
/// after the update and `b_size` counts cells below `-theta` when the probe
/// was chosen.
pub fn format_trace(cells: usize, steps: &[TraceStep], result: &TrialResult) -> String {
    let mut s = String::from("n,probed_cell,y,llr");
    for m in 1..=cells {
        let _ = write!(s, ",S_{m}");
    }
    s.push_str(",switched,b_size\n");
    for step in steps {
        let _ = write!(s, "{},{},{},{}", step.n, step.cell + 1, step.y, step.llr);
        for v in &step.sums {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{},{}", u8::from(step.switched), step.eliminated);
    }
    let _ = writeln!(
        s,
        "# decision={} true_cell={} correct={} tau={} tau_s={} truncated={}",
        result.declared + 1,
        result.true_cell + 1,
        result.correct,
        result.tau,
        result.tau_s,
        result.truncated
    );
    s
}

//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Runs without the libtest harness: `cargo test --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use dbs_lab::config::parse_config;
use dbs_lab::harness::{run_sweep, ExperimentConfig, SweepTable};
use dbs_lab::oracle::{chernoff_lambda_grid, chernoff_lambda_simplex, LAMBDA_TOLERANCE};
use dbs_lab::policy::{self, dbs_decide, Case, CaseDecision, DegenerateState};
use dbs_lab::{CostParams, ObservationModel, PolicyDecision, PolicyKind, ProbeState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn experiments_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn load(name: &str) -> ExperimentConfig {
    let path = experiments_dir().join(name);
    parse_config(&path).unwrap_or_else(|e| panic!("{e}"))
}

/// `D(Pois(a) || Pois(b)) = a ln(a/b) + b - a`, written out independently of
/// the library.
fn poisson_divergence(a: f64, b: f64) -> f64 {
    a * (a / b).ln() + b - a
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn kl_reproduction() -> Outcome {
    let cases = [(10.0, 1.0, 6.697, 3.507), (2.0, 0.001, 1.991, 3.301)];
    let mut parts = Vec::new();
    for (lf, lg, want_gf, want_fg) in cases {
        let model = ObservationModel::poisson(lf, lg).map_err(|e| e.to_string())?;
        let (gf, fg) = (model.d_gf(), model.d_fg() / 4.0);
        let (ref_gf, ref_fg) = (poisson_divergence(lg, lf), poisson_divergence(lf, lg) / 4.0);
        parts.push(format!(
            "lf={lf} lg={lg}: D(g||f)={gf:.4} D(f||g)/4={fg:.4}"
        ));
        if !within(gf, want_gf, 0.05) || !within(fg, want_fg, 0.05) {
            return Err(parts.join("; "));
        }
        if !within(gf, ref_gf, 1e-12) || !within(fg, ref_fg, 1e-12) {
            return Err(format!("closed form disagrees: {}", parts.join("; ")));
        }
    }
    Ok(parts.join("; "))
}

fn case_switch(exp2: &ExperimentConfig) -> Outcome {
    let at = |theta: f64| -> Result<CaseDecision, String> {
        let cost = CostParams::new(theta, exp2.s_ratio).map_err(|e| e.to_string())?;
        policy::select_case(&cost, exp2.cells, &exp2.model).map_err(|e| e.to_string())
    };
    let (a, b) = (at(150.0)?, at(151.0)?);
    let star = policy::case_crossover(exp2.s_ratio, exp2.cells, &exp2.model);
    let msg = format!(
        "theta=150 -> {}, theta=151 -> {}, theta*={}",
        a.case,
        b.case,
        star.map_or("none".to_string(), |t| format!("{t:.3}"))
    );
    if a.case == Case::I && b.case == Case::II {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn single_policy(
    base: &ExperimentConfig,
    kind: PolicyKind,
    thetas: &[f64],
    trials: usize,
) -> ExperimentConfig {
    let mut c = base.clone();
    c.policies = vec![kind];
    c.theta_grid = thetas.to_vec();
    c.trials_per_hypothesis = trials;
    c
}

fn error_bound(exp1: &ExperimentConfig, rows: &mut Vec<SweepTable>) -> Outcome {
    let theta = 5.0;
    let config = single_policy(exp1, PolicyKind::Dbs, &[theta], 2000);
    let table = run_sweep(&config).map_err(|e| e.to_string())?;
    let pe = table.rows[0].risk.pe;
    let bound = 2.0 * (exp1.cells as f64 - 1.0) * (-theta).exp();
    rows.push(table);
    let msg = format!(
        "Pe={:.5} (+/-{:.5}) bound={bound:.5}, 10000 trials",
        pe.value, pe.half_width
    );
    if pe.value <= bound {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn detection_time(
    config: &ExperimentConfig,
    theta: f64,
    floor: f64,
    band: (f64, f64),
    rows: &mut Vec<SweepTable>,
) -> Outcome {
    let config = single_policy(config, PolicyKind::Dbs, &[theta], 1000);
    let table = run_sweep(&config).map_err(|e| e.to_string())?;
    let tau = table.rows[0].risk.mean_tau.value;
    rows.push(table);
    let ratio = tau / floor;
    let msg = format!(
        "mean tau={tau:.3}, reference={floor:.3}, ratio={ratio:.4} in [{}, {}]",
        band.0, band.1
    );
    if (band.0..=band.1).contains(&ratio) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn switch_ordering(table: &SweepTable) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for theta in [200.0, 250.0, 300.0] {
        let get = |k| table.get(k, theta).map(|r| r.risk.switch_ratio);
        let (Some(d), Some(c), Some(g)) = (
            get(PolicyKind::Dbs),
            get(PolicyKind::Chernoff),
            get(PolicyKind::Dgf),
        ) else {
            return Err(format!("missing rows at theta={theta}"));
        };
        let beats = |o: dbs_lab::bounds::Estimate| o.value - d.value > o.half_width + d.half_width;
        ok &= beats(c) && beats(g);
        parts.push(format!(
            "theta={theta}: dbs={:.4} chernoff={:.4} dgf={:.4}",
            d.value, c.value, g.value
        ));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sluggish_ratio(table: &SweepTable) -> Outcome {
    let ratios: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| matches!(r.policy, PolicyKind::Sluggish { .. }))
        .map(|r| r.risk.switch_ratio.value)
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let msg = format!(
        "{} thetas, ratio range [{lo:.4}, {hi:.4}] within [0.05, 0.11]",
        ratios.len()
    );
    if !ratios.is_empty() && lo >= 0.05 && hi <= 0.11 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn risk_dominance(table: &SweepTable) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for theta in [50.0, 100.0, 200.0, 300.0] {
        let rows: Vec<_> = table.rows.iter().filter(|r| r.theta == theta).collect();
        let Some(dbs) = rows.iter().find(|r| r.policy == PolicyKind::Dbs) else {
            return Err(format!("missing DBS row at theta={theta}"));
        };
        let runner_up = rows
            .iter()
            .filter(|r| r.policy != PolicyKind::Dbs)
            .map(|r| r.relative_loss)
            .fold(f64::INFINITY, f64::min);
        ok &= rows.len() == 4 && dbs.relative_loss < runner_up;
        parts.push(format!(
            "theta={theta}: dbs L={:.3} best other L={runner_up:.3}",
            dbs.relative_loss
        ));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lower_bound(tables: &[SweepTable]) -> Outcome {
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for row in tables.iter().flat_map(|t| &t.rows) {
        let r = &row.risk.risk_scaled;
        let slack = r.value - (row.r_lb_scaled - 3.0 * r.half_width);
        worst = worst.min(slack / row.r_lb_scaled);
        checked += 1;
        if slack < 0.0 {
            return Err(format!(
                "{} theta={}: risk={} < r_lb={} - 3*{}",
                row.policy, row.theta, r.value, row.r_lb_scaled, r.half_width
            ));
        }
    }
    Ok(format!(
        "{checked} rows, smallest relative margin {worst:.3}"
    ))
}

/// Expected DBS decision on a state whose sums are each -inf, 0 or +inf,
/// spelled out from the rule definitions rather than from the library.
fn hand_dbs(sums: &[f64; 3], case: Case) -> Result<PolicyDecision, DegenerateState> {
    match case {
        Case::I => {
            if let Some(m) = sums.iter().position(|&s| s == f64::INFINITY) {
                return Ok(PolicyDecision::Stop(m));
            }
            // no +inf: the largest value is 0 if any cell is at 0, else all are -inf
            let m = sums.iter().position(|&s| s == 0.0).unwrap_or(0);
            Ok(PolicyDecision::Probe(m))
        }
        Case::II => {
            let alive: Vec<usize> = (0..3).filter(|&m| sums[m] != f64::NEG_INFINITY).collect();
            match alive.as_slice() {
                [] => {
                    let fallback = sums.iter().position(|&s| s == f64::INFINITY).unwrap_or(0);
                    Err(DegenerateState { fallback })
                }
                [only] => Ok(PolicyDecision::Stop(*only)),
                _ => {
                    let weakest = alive
                        .iter()
                        .copied()
                        .find(|&m| sums[m] == 0.0)
                        .unwrap_or(alive[0]);
                    Ok(PolicyDecision::Probe(weakest))
                }
            }
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let cells = rng.random_range(2..=6usize);
        let lf = rng.random_range(0.05..20.0);
        let lg = rng.random_range(0.05..20.0);
        let Ok(model) = ObservationModel::poisson(lf, lg) else {
            return Err(format!("config {i}: rejected lf={lf} lg={lg}"));
        };
        let closed = policy::chernoff_lambda(&model, cells);
        let search = if cells <= 4 {
            chernoff_lambda_simplex(model.d_gf(), model.d_fg(), cells, 60)
        } else {
            chernoff_lambda_grid(model.d_gf(), model.d_fg(), cells, 1e-3)
        };
        let diff = closed
            .iter()
            .zip(&search)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if closed.len() != cells || diff > LAMBDA_TOLERANCE {
            return Err(format!(
                "config {i} (M={cells}, lf={lf:.3}, lg={lg:.3}): closed={closed:?} search={search:?}"
            ));
        }
        worst = worst.max(diff);
    }

    let disjoint =
        ObservationModel::finite(vec![1.0, 0.0], vec![0.0, 1.0]).map_err(|e| e.to_string())?;
    let cost = CostParams::new(1.0, 0.0).map_err(|e| e.to_string())?;
    let selected = policy::select_case(&cost, 3, &disjoint).map_err(|e| e.to_string())?;
    let values = [f64::NEG_INFINITY, 0.0, f64::INFINITY];
    let mut states = 0;
    for case in [Case::I, Case::II] {
        let decision = CaseDecision {
            delta: selected.delta,
            case,
        };
        for a in values {
            for b in values {
                for c in values {
                    let sums = [a, b, c];
                    let got = dbs_decide(&ProbeState::from_sums(sums.to_vec()), &decision, &cost);
                    let want = hand_dbs(&sums, case);
                    if got != want {
                        return Err(format!(
                            "case {case} sums {sums:?}: got {got:?}, want {want:?}"
                        ));
                    }
                    states += 1;
                }
            }
        }
    }
    Ok(format!(
        "20 configs, max lambda diff {worst:.2e}; {states} disjoint-support DBS states match"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = experiments_dir().join("exp2.toml");
    let mut outputs = Vec::new();
    for (run, threads) in [1, 1, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_dbs-lab"))
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .args(["--seed", "42", "--threads", &threads.to_string()])
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "sweep exited with {}: {}",
                status.status,
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let msg = format!("3 runs (threads 1, 1, 4), {} bytes each", outputs[0].len());
    if outputs.iter().all(|o| *o == outputs[0]) && !outputs[0].is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let exp1 = load("exp1.toml");
    let exp2 = load("exp2.toml");
    let mut tables = Vec::new();

    let mut exp2_sweep = exp2.clone();
    exp2_sweep.theta_grid = vec![50.0, 100.0, 150.0, 200.0, 250.0, 300.0];
    exp2_sweep.trials_per_hypothesis = 1000;
    let exp2_table = run_sweep(&exp2_sweep);

    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("KL reproduction", kl_reproduction()));
    results.push(("case switch between theta=150 and 151", case_switch(&exp2)));
    results.push((
        "DBS error probability bound",
        error_bound(&exp1, &mut tables),
    ));
    let floor1 = 100.0 / exp1.model.d_gf();
    results.push((
        "Case I detection time",
        detection_time(&exp1, 100.0, floor1, (1.0, 1.4), &mut tables),
    ));
    let floor2 = (exp2.cells as f64 - 1.0) * 250.0 / exp2.model.d_fg();
    results.push((
        "Case II detection time",
        detection_time(&exp2, 250.0, floor2, (1.0, 1.35), &mut tables),
    ));
    match exp2_table {
        Ok(table) => {
            results.push((
                "DBS switch ratio below Chernoff and DGF",
                switch_ordering(&table),
            ));
            results.push(("Sluggish switch ratio near p", sluggish_ratio(&table)));
            results.push(("DBS smallest relative loss", risk_dominance(&table)));
            tables.push(table);
        }
        Err(e) => {
            for name in [
                "DBS switch ratio below Chernoff and DGF",
                "Sluggish switch ratio near p",
                "DBS smallest relative loss",
            ] {
                results.push((name, Err(e.to_string())));
            }
        }
    }
    results.push(("risk above lower bound", lower_bound(&tables)));
    results.push(("oracle equivalence", oracle_equivalence()));
    results.push(("deterministic sweep CSV", determinism()));

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2} {name}: {detail}", i + 1);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use rwrs_core::diagnostics::{
    alpha_mixing_surrogate, default_sequences, dk_ladder, dprime_sum_rwrs, dprime_sum_scenery, epsilon_bounds,
    extremal_index_estimators, obrien_product, DiagnosticReport, InnerMethod,
};
use rwrs_core::evt_norming::norming;
use rwrs_core::exceedance::{build_pattern, write_jsonl, PatternRecord};
use rwrs_core::poisson_tests::{
    is_power_verdict, run_experiment, standard_verdicts, write_verdicts_csv, ReplicationRecord, TestVerdict,
};
use rwrs_core::scenery::ScenerySpec;
use rwrs_core::simkit::{scenery_key, walk_key, Execution, McEstimate, RngKey};
use rwrs_core::stable_walk::{escape_probability, generate_walk_with, q_report, return_mass, QPlan, StepLaw};

use crate::config::{self, QSource, RunConfig};
use crate::manifest::{now, RunManifest};
use crate::{CliError, EstimateQArgs, LawKind, RunArgs, WalkArgs, EXIT_TEST_FAILURE};

const EXEC: Execution = Execution::Parallel;
const DEFAULT_SEED: u64 = 1;

/// Root key of the q̂ estimate; experiments use stream 0, diagnostics 2.
fn q_key(seed: u64) -> RngKey {
    RngKey::new(seed, 1, 0)
}

fn diag_key(seed: u64, n: u64, functional: u64) -> RngKey {
    RngKey::new(seed, 2, 0).child(n, 0).child(functional, 0)
}

fn law_from(kind: LawKind, alpha: Option<f64>) -> Result<StepLaw, CliError> {
    match kind {
        LawKind::Unit => Ok(StepLaw::unit()),
        LawKind::Zipf => {
            let a = alpha.ok_or_else(|| CliError::Usage("--alpha is required with --law zipf".into()))?;
            StepLaw::symmetric_zipf(a).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimatorRow<'a> {
    estimator: &'a str,
    estimate: f64,
    stderr: f64,
    bias_bound: f64,
    horizon: u64,
    replications: u64,
}

pub fn estimate_q(a: &EstimateQArgs) -> Result<i32, CliError> {
    let started = now();
    let law = law_from(a.law, a.alpha)?;
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let plan = QPlan {
        horizon: a.horizon,
        reps: a.reps,
        range_n: a.range_n.unwrap_or(a.horizon.saturating_mul(10)),
        range_reps: a.range_reps,
    };
    let rep = q_report(&law, &plan, &q_key(seed), EXEC)?;
    let rb = &rep.return_based;
    println!(
        "return-based q̂ = {:.6} ± {:.6} (horizon {}, {} reps, truncation bias ≤ {:.6})",
        rb.q_hat, rb.mc_stderr, rb.horizon, rb.replications, rb.bias_bound
    );
    println!(
        "range slope R_n/n = {:.6} ± {:.6} (n = {}, {} reps)",
        rep.range_slope.mean, rep.range_slope.stderr, rep.range_horizon, rep.range_slope.replications
    );
    println!(
        "difference = {:+.6}, tolerance = {:.6} -> {}",
        rep.difference(),
        rep.agreement_tolerance(),
        if rep.agree() { "agree" } else { "DISAGREE" }
    );
    prepare_dir(&a.common.out_dir)?;
    let csv_path = a.common.out_dir.join("q_report.csv");
    write_rows(
        &csv_path,
        &[
            EstimatorRow {
                estimator: "return_based",
                estimate: rb.q_hat,
                stderr: rb.mc_stderr,
                bias_bound: rb.bias_bound,
                horizon: rb.horizon,
                replications: rb.replications,
            },
            EstimatorRow {
                estimator: "range_slope",
                estimate: rep.range_slope.mean,
                stderr: rep.range_slope.stderr,
                bias_bound: 0.0,
                horizon: rep.range_horizon,
                replications: rep.range_slope.replications,
            },
            EstimatorRow {
                estimator: "difference",
                estimate: rep.difference(),
                stderr: rb.mc_stderr.hypot(rep.range_slope.stderr),
                bias_bound: rb.bias_bound,
                horizon: rb.horizon,
                replications: rb.replications,
            },
        ],
    )?;
    let manifest_path = a.common.out_dir.join("manifest.json");
    RunManifest::new("estimate-q", None, seed, started, vec![csv_path])?.write(&manifest_path)?;
    Ok(0)
}

/// Loads the config and applies command-line overrides.
fn load_run(a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = config::load(&a.config)?;
    if let Some(s) = a.common.seed {
        c.master_seed = s;
    }
    if let Some(r) = a.reps {
        c.reps = r;
    }
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct QRow {
    source: &'static str,
    q_hat: f64,
    stderr: f64,
    mc_stderr: f64,
    bias_bound: f64,
}

/// q̂ from the config, estimated when requested.
fn resolve_q(c: &RunConfig, law: &StepLaw) -> Result<(McEstimate, QRow), CliError> {
    match c.q_hat {
        QSource::Fixed { .. } => {
            let q = c.fixed_q().expect("fixed q");
            Ok((
                q,
                QRow {
                    source: "fixed",
                    q_hat: q.mean,
                    stderr: q.stderr,
                    mc_stderr: q.stderr,
                    bias_bound: 0.0,
                },
            ))
        }
        QSource::Estimate { horizon, reps } => {
            let e = escape_probability(law, horizon, reps, &q_key(c.master_seed), EXEC)?;
            let q = e.as_estimate();
            Ok((
                q,
                QRow {
                    source: "return_based",
                    q_hat: q.mean,
                    stderr: q.stderr,
                    mc_stderr: e.mc_stderr,
                    bias_bound: e.bias_bound,
                },
            ))
        }
    }
}

fn print_verdicts(verdicts: &[TestVerdict]) {
    println!(
        "{:<22} {:>11} {:>11} {:>10} {:>10}  result",
        "test", "statistic", "target", "tolerance", "stderr"
    );
    for v in verdicts {
        println!(
            "{:<22} {:>11.5} {:>11.5} {:>10.5} {:>10.5}  {}",
            v.name,
            v.statistic,
            v.target,
            v.tolerance,
            v.stderr,
            if v.pass { "PASS" } else { "FAIL" }
        );
    }
}

#[derive(Serialize)]
struct ThetaRow {
    x: f64,
    tau: f64,
    estimator: &'static str,
    estimate: f64,
    stderr: f64,
}

fn theta_rows(c: &RunConfig, records: &[ReplicationRecord]) -> Result<Vec<ThetaRow>, CliError> {
    let measure = rwrs_core::evt_norming::TailMeasure::for_family(&c.scenery);
    let mut rows = Vec::new();
    for (i, &x) in c.levels.iter().enumerate() {
        let tau = measure.tail(x)?;
        let ind: Vec<bool> = records.iter().map(|r| r.levels[i].max_below_horizon).collect();
        let blk: Vec<_> = records.iter().map(|r| r.levels[i].exceedances).collect();
        match extremal_index_estimators(&ind, &blk, tau) {
            Ok(t) => {
                rows.push(ThetaRow { x, tau, estimator: "blocks", estimate: t.theta_blocks.mean, stderr: t.theta_blocks.stderr });
                rows.push(ThetaRow { x, tau, estimator: "logs", estimate: t.theta_logs.mean, stderr: t.theta_logs.stderr });
            }
            Err(rwrs_core::Error::LevelTooHigh) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rows)
}

pub fn poisson(a: &RunArgs) -> Result<i32, CliError> {
    let started = now();
    let c = load_run(a)?;
    let law = c.step_law()?;
    c.experiment(McEstimate::exact(1.0))?.require_verdict_reps()?;
    let (q, q_row) = resolve_q(&c, &law)?;
    let exp = c.experiment(q)?;
    let records = run_experiment(&exp, EXEC)?;
    let verdicts = standard_verdicts(&exp, &records)?;

    let dir = &a.common.out_dir;
    prepare_dir(dir)?;
    let rec_path = dir.join("records.jsonl");
    let mut w = create(&rec_path)?;
    write_jsonl(&mut w, &records)?;
    w.flush()?;
    let verdict_path = dir.join("verdicts.csv");
    let mut w = create(&verdict_path)?;
    write_verdicts_csv(&mut w, &verdicts)?;
    w.flush()?;
    let q_path = dir.join("q_hat.csv");
    write_rows(&q_path, &[q_row])?;
    let theta_path = dir.join("extremal_index.csv");
    write_rows(&theta_path, &theta_rows(&c, &records)?)?;

    println!("q̂ = {:.6} ± {:.6}, n = {}, m_n = {}, {} replications", q.mean, q.stderr, c.n, exp.m_n(), c.reps);
    print_verdicts(&verdicts);
    let code = if c.negative_control {
        let caught: Vec<&str> = verdicts
            .iter()
            .filter(|v| !v.pass && is_power_verdict(&v.name))
            .map(|v| v.name.as_str())
            .collect();
        if caught.is_empty() {
            println!("negative control: no dispersion or void verdict failed; tests lack power");
            EXIT_TEST_FAILURE
        } else {
            println!("negative control: expected failures in {}", caught.join(", "));
            0
        }
    } else if verdicts.iter().all(|v| v.pass) {
        println!("all {} verdicts pass", verdicts.len());
        0
    } else {
        println!("{} of {} verdicts FAIL", verdicts.iter().filter(|v| !v.pass).count(), verdicts.len());
        EXIT_TEST_FAILURE
    };

    let outputs = vec![rec_path, verdict_path, q_path, theta_path];
    RunManifest::new("poisson", Some(&c), c.master_seed, started, outputs)?.write(&dir.join("manifest.json"))?;
    Ok(code)
}

/// True when the RWRS D' sum at the largest n clears both the revisit lower
/// bound and twice the scenery-only sum by three standard errors.
pub fn dprime_violated(rwrs: &McEstimate, lower_bound: f64, scenery: f64) -> bool {
    rwrs.mean - 3.0 * rwrs.stderr > lower_bound.max(2.0 * scenery)
}

pub fn diagnostics(a: &RunArgs) -> Result<i32, CliError> {
    let started = now();
    let c = load_run(a)?;
    let plan = c
        .diagnostics
        .clone()
        .ok_or_else(|| CliError::Config("config has no `diagnostics` section".into()))?;
    let law = c.step_law()?;
    let (q, _) = resolve_q(&c, &law)?;
    let measure = rwrs_core::evt_norming::TailMeasure::for_family(&c.scenery);
    let tau = measure.tail(plan.x)?;
    let spec = ScenerySpec::new(c.scenery.clone(), RngKey::new(c.master_seed, 3, 0))?;
    let method = InnerMethod::auto(&spec, plan.inner_reps);
    let seed = c.master_seed;
    let mut report = DiagnosticReport::default();
    let mut last = None;

    for &n in &plan.n_grid {
        let (k_n, ell_n) = default_sequences(n);
        let u_n = norming(&c.scenery, n)?.level(plan.x);
        report.push(n, "q_hat", q);

        let scen = dprime_sum_scenery(&spec, n, u_n, k_n);
        report.push(n, "dprime_scenery", McEstimate::exact(scen));
        let rwrs = dprime_sum_rwrs(&law, &spec, n, plan.x, q.mean, k_n, plan.reps, &diag_key(seed, n, 1), EXEC)?;
        report.push(n, "dprime_rwrs", rwrs);
        let mass = return_mass(&law, (n / k_n).max(1), plan.reps, &diag_key(seed, n, 2), EXEC)?;
        report.push(n, "return_mass", mass);
        let bound = McEstimate {
            mean: 0.5 * tau * mass.mean,
            stderr: 0.5 * tau * mass.stderr,
            ..mass
        };
        report.push(n, "dprime_lower_bound", bound);

        let ladder = dk_ladder(&law, &spec, n, &plan.k_ladder, plan.x, k_n, plan.reps, &diag_key(seed, n, 3), method, EXEC)?;
        for (k, e) in ladder.ks.iter().zip(&ladder.estimates) {
            report.push(n, format!("dk[k={k}]"), *e);
        }
        let first = ladder.estimates[0];
        let lastk = ladder.estimates[ladder.estimates.len() - 1];
        let ratio = lastk.mean / first.mean;
        report.push(
            n,
            "dk_ratio",
            McEstimate {
                mean: ratio,
                stderr: ratio * (first.stderr / first.mean).hypot(lastk.stderr / lastk.mean),
                ..first
            },
        );
        report.push(
            n,
            "dk_monotone_fraction",
            McEstimate::exact(ladder.monotone_runs as f64 / ladder.replications as f64),
        );

        let ob = obrien_product(&law, &spec, n, plan.x, k_n, plan.reps, &diag_key(seed, n, 4), method, EXEC)?;
        report.push(n, "obrien_lhs", ob.lhs);
        report.push(n, "obrien_rhs", ob.rhs);
        report.push(n, "obrien_diff", ob.difference);

        let mut exp = c.experiment(q)?;
        exp.n = n;
        exp.reps = plan.reps;
        exp.levels = vec![plan.x];
        exp.master_seed = diag_key(seed, n, 5).digest();
        let records = run_experiment(&exp, EXEC)?;
        let ind: Vec<bool> = records.iter().map(|r| r.levels[0].max_below_horizon).collect();
        let blk: Vec<_> = records.iter().map(|r| r.levels[0].exceedances).collect();
        match extremal_index_estimators(&ind, &blk, tau) {
            Ok(t) => {
                report.push(n, "theta_blocks", t.theta_blocks);
                report.push(n, "theta_logs", t.theta_logs);
            }
            Err(rwrs_core::Error::LevelTooHigh) => {}
            Err(e) => return Err(e.into()),
        }

        let ell = plan.mixing.ell.unwrap_or(ell_n);
        let mix = alpha_mixing_surrogate(&spec, n, ell, u_n, plan.mixing.max_p, plan.mixing.reps, &diag_key(seed, n, 6), EXEC)?;
        report.push(
            n,
            "alpha_mix",
            McEstimate {
                stderr: mix.stderr,
                ..McEstimate::exact(mix.defect)
            },
        );
        let eps = epsilon_bounds(n, k_n, ell_n, mix.defect, scen, plan.epsilon_c)?;
        report.push(n, "eps1", McEstimate::exact(eps.eps1));
        report.push(n, "eps2", McEstimate::exact(eps.eps2));
        last = Some((n, rwrs, bound.mean, scen));
    }

    let dir = &a.common.out_dir;
    prepare_dir(dir)?;
    let csv_path = dir.join("diagnostics.csv");
    let mut w = create(&csv_path)?;
    report.write_csv(&mut w)?;
    w.flush()?;

    println!("{:>8} {:<22} {:>12} {:>12}", "n", "functional", "estimate", "stderr");
    for r in &report.rows {
        println!("{:>8} {:<22} {:>12.6} {:>12.6}", r.n, r.functional, r.estimate, r.stderr);
    }
    if let Some((n, rwrs, bound, scen)) = last {
        let yes = dprime_violated(&rwrs, bound, scen);
        println!("D-prime violated: {} (n = {n})", if yes { "YES" } else { "NO" });
    }
    let mono = report
        .rows
        .iter()
        .filter(|r| r.functional == "dk_monotone_fraction")
        .all(|r| r.estimate == 1.0);
    println!("D^(k) ladder nonincreasing in every run: {}", if mono { "YES" } else { "NO" });

    RunManifest::new("diagnostics", Some(&c), seed, started, vec![csv_path.clone()])?.write(&dir.join("manifest.json"))?;
    Ok(0)
}

#[derive(Serialize)]
struct PathRow {
    step: u64,
    position: i64,
    range: u64,
    new_site: bool,
}

pub fn simulate_walk(a: &WalkArgs) -> Result<i32, CliError> {
    let started = now();
    let seed = a.common.seed.unwrap_or(DEFAULT_SEED);
    let dir = &a.common.out_dir;
    prepare_dir(dir)?;
    let mut outputs: Vec<PathBuf> = Vec::new();
    let cfg = match &a.config {
        Some(p) => {
            let mut c = config::load(p)?;
            c.master_seed = a.common.seed.unwrap_or(c.master_seed);
            c.validate()?;
            Some(c)
        }
        None => None,
    };
    let law = match &cfg {
        Some(c) => c.step_law()?,
        None => law_from(a.law, a.alpha)?,
    };
    let root = RngKey::new(cfg.as_ref().map_or(seed, |c| c.master_seed), 0, 0);
    let walk = generate_walk_with(&law, a.n, &walk_key(&root, 0), true)?;
    let positions = walk.positions.as_deref().unwrap_or_default();
    let rows: Vec<PathRow> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let step = i as u64 + 1;
            PathRow {
                step,
                position: p,
                range: walk.range[i],
                new_site: walk.tau.binary_search(&step).is_ok(),
            }
        })
        .collect();
    let path_csv = dir.join("path.csv");
    write_rows(&path_csv, &rows)?;
    outputs.push(path_csv);
    println!("n = {}, R_n = {}, R_n/n = {:.6}", a.n, walk.final_range(), walk.final_range() as f64 / a.n as f64);

    if let Some(c) = &cfg {
        let (q, _) = resolve_q(c, &law)?;
        let key = c.experiment(q)?.master_key();
        let mut patterns = Vec::new();
        for r in 0..a.reps {
            let w = generate_walk_with(&law, c.n, &walk_key(&key, r), false)?;
            let spec = ScenerySpec::new(c.scenery.clone(), scenery_key(&key, r))?;
            let p = build_pattern(&w, &spec, q.mean, c.n)?;
            patterns.push(PatternRecord::new(r, c.master_seed, &p));
        }
        let pat = dir.join("patterns.jsonl");
        let mut w = create(&pat)?;
        write_jsonl(&mut w, &patterns)?;
        w.flush()?;
        outputs.push(pat);
    }
    RunManifest::new("simulate-walk", cfg.as_ref(), seed, started, outputs)?.write(&dir.join("manifest.json"))?;
    Ok(0)
}

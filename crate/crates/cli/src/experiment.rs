//! Multi-replica experiment execution.
//!
//! Replica `i` is seeded with `replica_seed(master_seed, i)`: the SplitMix64
//! finaliser applied to `master_seed + (i + 1)·0x9E3779B97F4A7C15`. The
//! derivation is part of the output contract and will not change.
//! Replicas run on a thread pool; every aggregate is reduced in replica order.

use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scorelaw::analytic::{c_recurrence, expected_histogram_oracle, mass_identity_check};
use scorelaw::graph::{derived_params, run_graph, GraphRun};
use scorelaw::model_s::{run_detailed, RunOutput};
use scorelaw::seed::replica_seed;
use scorelaw::stats::{
    as_masses, ccdf_w_max, compare_to_limit, concentration_scan, fit_tail, fits_agree, FitMethod,
    FitOptions, FitReport,
};
use scorelaw::Histogram;

use crate::artifacts::{ArtifactWriter, Manifest};
use crate::config::{Check, CheckOptions, ExperimentConfig, Kind, Params};
use crate::error::{CliError, CliResult};

pub const CHECKS_FILE: &str = "checks.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(check: Check, pass: bool, detail: String) -> Self {
        CheckResult { check: check.name().to_string(), pass, detail }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub checks: Vec<CheckResult>,
    pub manifest: Manifest,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> CliResult<Outcome> {
    let mut out = ArtifactWriter::create(&cfg.output_dir)?;
    out.write_json("config.json", "config", &cfg.canonical())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let checks = pool.install(|| match cfg.kind {
        Kind::ModelS => model_s(cfg, &mut out),
        Kind::NInteractions => n_interactions(cfg, &mut out),
        Kind::AnalyticOnly => analytic_only(cfg, &mut out),
    })?;
    out.write_json(CHECKS_FILE, "checks", &checks)?;
    let manifest = out.finish(cfg.hash())?;
    Ok(Outcome { checks, manifest })
}

fn replica_dir(i: usize) -> String {
    format!("replica_{i:04}")
}

fn model_s(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> CliResult<Vec<CheckResult>> {
    let base = cfg.sim_params(0).unwrap();
    base.validate()?;
    let runs: Vec<RunOutput> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| {
            let params = cfg.sim_params(replica_seed(cfg.master_seed, i as u64)).unwrap();
            run_detailed(params, cfg.n_max, &cfg.snapshots)
        })
        .collect::<scorelaw::Result<_>>()?;

    let mut stats = String::from("replica,seed,clamp_events,cap_violations,final_population\n");
    for (i, r) in runs.iter().enumerate() {
        for h in &r.snapshots {
            out.write(&format!("{}/hist_n{}.csv", replica_dir(i), h.n), "histogram", h.to_csv().as_bytes())?;
        }
        let seed = replica_seed(cfg.master_seed, i as u64);
        writeln!(
            stats,
            "{i},{seed},{},{},{}",
            r.clamp_events, r.cap_violations, r.final_population
        )
        .unwrap();
    }
    out.write("aggregate/run_stats.csv", "run_stats", stats.as_bytes())?;

    let by_snapshot: Vec<Vec<&Histogram>> = (0..cfg.snapshots.len())
        .map(|k| runs.iter().map(|r| &r.snapshots[k]).collect())
        .collect();
    for (k, &n) in cfg.snapshots.iter().enumerate() {
        let (mean, se) = cross_run_moments(&by_snapshot[k]);
        let mut csv = String::from("s,mean,stderr\n");
        for (s, m) in &mean {
            writeln!(csv, "{s},{m},{}", se[s]).unwrap();
        }
        out.write(&format!("aggregate/mean_n{n}.csv"), "aggregate", csv.as_bytes())?;
    }

    let opts = &cfg.check_options;
    let final_runs: Vec<&Histogram> = by_snapshot.last().unwrap().clone();
    let n = cfg.n_max;
    let mut results = Vec::new();
    for &check in &cfg.checks {
        let result = match check {
            Check::LimitCompare => {
                let (mean, _) = cross_run_moments(&final_runs);
                // The snapshot labelled n holds the state at time n + 1.
                let t = (n + 1) as f64;
                let dist: BTreeMap<u64, f64> = mean.iter().map(|(&s, &m)| (s, m / t)).collect();
                let limit = c_recurrence(base.u, opts.limit_s_cut.max(base.u), base.a, base.b, base.m)?;
                let cmp = compare_to_limit(&dist, &limit, n, limit.s_max(), opts.limit_tolerance)?;
                out.write("aggregate/limit_compare.csv", "limit_compare", cmp.to_csv().as_bytes())?;
                let checked = cmp.rows.iter().filter(|r| r.checked).count();
                CheckResult::new(
                    check,
                    cmp.pass && checked > 0,
                    format!(
                        "max relative error {:.4} over {checked} scores (tolerance {})",
                        cmp.max_checked_error(),
                        opts.limit_tolerance
                    ),
                )
            }
            Check::TailFit => {
                let target = 1.0 + 1.0 / base.a;
                let mut all = true;
                let mut lines = Vec::new();
                for (i, h) in final_runs.iter().enumerate() {
                    let (pass, summary, reports) = tail_fit(&as_masses(h), target, opts);
                    out.write_json(&format!("fits/replica_{i:04}.json"), "fit_report", &reports)?;
                    all &= pass;
                    lines.push(format!("replica {i}: {summary}"));
                }
                CheckResult::new(check, all, lines.join("; "))
            }
            Check::Concentration => {
                let owned: Vec<Histogram> = final_runs.iter().map(|&h| h.clone()).collect();
                let [lo, hi] = opts.concentration_s;
                match concentration_scan(&owned, lo..=hi) {
                    Ok(rep) => {
                        out.write_json("aggregate/concentration.json", "concentration_report", &rep)?;
                        CheckResult::new(
                            check,
                            rep.violations == 0,
                            format!("{} violations in {} events", rep.violations, rep.total_events),
                        )
                    }
                    Err(e) => CheckResult::new(check, false, e.to_string()),
                }
            }
            Check::OracleCompare => oracle_compare(cfg, &by_snapshot, out)?,
            Check::MassIdentity => unreachable!("rejected at config time"),
        };
        results.push(result);
    }
    let clamps: u64 = runs.iter().map(|r| r.clamp_events).sum();
    let caps: u64 = runs.iter().map(|r| r.cap_violations).sum();
    if clamps > 0 || caps > 0 {
        results.push(CheckResult {
            check: "structure".into(),
            pass: false,
            detail: format!("{clamps} clamp events, {caps} cap violations"),
        });
    }
    Ok(results)
}

/// Per-score mean and standard error of the mean across runs, reduced in run order.
fn cross_run_moments(runs: &[&Histogram]) -> (BTreeMap<u64, f64>, BTreeMap<u64, f64>) {
    let r = runs.len() as f64;
    let keys: std::collections::BTreeSet<u64> =
        runs.iter().flat_map(|h| h.counts.keys().copied()).collect();
    let mut mean = BTreeMap::new();
    let mut se = BTreeMap::new();
    for s in keys {
        let xs: Vec<f64> = runs.iter().map(|h| h.get(s) as f64).collect();
        let m = xs.iter().sum::<f64>() / r;
        let var = if runs.len() > 1 {
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        mean.insert(s, m);
        se.insert(s, (var / r).sqrt());
    }
    (mean, se)
}

fn tail_fit(
    data: &BTreeMap<u64, f64>,
    target: f64,
    opts: &CheckOptions,
) -> (bool, String, Vec<FitReport>) {
    let mut reports = Vec::new();
    for method in [FitMethod::CcdfRegression, FitMethod::DiscreteMle] {
        let fo = FitOptions::new(method)
            .w_min(opts.fit_w_min)
            .w_max(ccdf_w_max(data, opts.fit_w_min))
            .target(target, opts.fit_tolerance);
        match fit_tail(data, fo) {
            Ok(r) => reports.push(r),
            Err(e) => return (false, e.to_string(), reports),
        }
    }
    let (c, m) = (&reports[0], &reports[1]);
    let agree = fits_agree(c, m, opts.fit_agreement);
    let pass = agree && reports.iter().all(|r| r.verdict.is_some_and(|v| v.pass));
    let summary = format!(
        "target {target:.4}, ccdf {:.4} +- {:.4}, mle {:.4} +- {:.4}, agree {agree}",
        c.exponent_hat, c.stderr, m.exponent_hat, m.stderr
    );
    (pass, summary, reports)
}

fn oracle_compare(
    cfg: &ExperimentConfig,
    by_snapshot: &[Vec<&Histogram>],
    out: &mut ArtifactWriter,
) -> CliResult<CheckResult> {
    let check = Check::OracleCompare;
    let opts = &cfg.check_options;
    if cfg.replicas < 2 {
        return Ok(CheckResult::new(check, false, "needs at least 2 replicas".into()));
    }
    let params = cfg.sim_params(0).unwrap();
    let grid_s_max = opts.oracle_grid_s_max.max(opts.oracle_s_max);
    let grid = expected_histogram_oracle(params, cfg.n_max + 1, grid_s_max, false)?;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (k, &n) in cfg.snapshots.iter().enumerate() {
        let (mean, se) = cross_run_moments(&by_snapshot[k]);
        let mut csv = String::from("s,mean,stderr,expected,z\n");
        for s in params.u..=opts.oracle_s_max {
            let m = mean.get(&s).copied().unwrap_or(0.0);
            let e = se.get(&s).copied().unwrap_or(0.0);
            let expected = grid.expectation(n + 1, s).unwrap();
            let z = if e > 0.0 {
                (m - expected).abs() / e
            } else if m == expected {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
            pass &= z <= opts.oracle_z;
            writeln!(csv, "{s},{m},{e},{expected},{z}").unwrap();
        }
        out.write(&format!("aggregate/oracle_compare_n{n}.csv"), "oracle_compare", csv.as_bytes())?;
    }
    Ok(CheckResult::new(
        check,
        pass,
        format!("max |mean - oracle| / se = {worst:.3} (limit {})", opts.oracle_z),
    ))
}

fn n_interactions(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> CliResult<Vec<CheckResult>> {
    let base = cfg.graph_params(0).unwrap();
    base.validate()?;
    let runs: Vec<GraphRun> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| run_graph(cfg.graph_params(replica_seed(cfg.master_seed, i as u64)).unwrap()))
        .collect::<scorelaw::Result<_>>()?;

    let Params::Graph(g) = &cfg.params else { unreachable!() };
    let mut newcomers = String::from("replica,M,steps,mean,stderr,mu\n");
    let mut pooled: BTreeMap<usize, Histogram> = BTreeMap::new();
    for (i, r) in runs.iter().enumerate() {
        out.write(&format!("{}/cliques.csv", replica_dir(i)), "histogram", r.histograms_csv().as_bytes())?;
        out.write(&format!("{}/vertices.csv", replica_dir(i)), "vertex_trace", r.v_trace_csv().as_bytes())?;
        for (&m, st) in &r.newcomers {
            let mu = derived_params(g.n, m, g.p, g.r, g.q)?.mu;
            writeln!(newcomers, "{i},{m},{},{},{},{mu}", st.steps, st.mean(), st.stderr()).unwrap();
        }
        for (&m, h) in &r.histograms {
            let acc = pooled.entry(m).or_insert_with(|| Histogram::new(h.n));
            for (&w, &c) in &h.counts {
                *acc.counts.entry(w).or_insert(0) += c;
            }
        }
    }
    out.write("aggregate/newcomers.csv", "newcomers", newcomers.as_bytes())?;
    let mut pooled_csv = String::from(scorelaw::histogram::CLIQUE_CSV_HEADER);
    for (&m, h) in &pooled {
        h.to_clique_csv_rows(m, &mut pooled_csv);
    }
    out.write("aggregate/cliques.csv", "aggregate", pooled_csv.as_bytes())?;

    let mut results = Vec::new();
    for &check in &cfg.checks {
        match check {
            Check::TailFit => {
                let mut all = !g.tracked_m.is_empty();
                let mut lines = Vec::new();
                for &m in &g.tracked_m {
                    let d = derived_params(g.n, m, g.p, g.r, g.q)?;
                    if d.a <= 0.0 {
                        all = false;
                        lines.push(format!("M={m}: a = 0, no power-law tail to fit"));
                        continue;
                    }
                    for (i, r) in runs.iter().enumerate() {
                        let data = as_masses(&r.histograms[&m]);
                        let (pass, summary, reports) =
                            tail_fit(&data, d.exponent, &cfg.check_options);
                        out.write_json(&format!("fits/M{m}_replica_{i:04}.json"), "fit_report", &reports)?;
                        all &= pass;
                        lines.push(format!("M={m} replica {i}: {summary}"));
                    }
                }
                if g.tracked_m.is_empty() {
                    lines.push("no tracked clique sizes".into());
                }
                results.push(CheckResult::new(check, all, lines.join("; ")));
            }
            _ => unreachable!("rejected at config time"),
        }
    }
    let violations: u64 = runs.iter().map(|r| r.invariant_violations).sum();
    if violations > 0 {
        results.push(CheckResult {
            check: "structure".into(),
            pass: false,
            detail: format!("{violations} per-step invariant failures"),
        });
    }
    Ok(results)
}

fn analytic_only(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> CliResult<Vec<CheckResult>> {
    let Params::Analytic(p) = cfg.params else { unreachable!() };
    let limit = c_recurrence(p.u, p.s_max, p.a, p.b, p.m)?;
    out.write("limit.csv", "limit", limit.to_csv().as_bytes())?;
    let mut results = Vec::new();
    for &check in &cfg.checks {
        match check {
            Check::MassIdentity => {
                let residual = mass_identity_check(p.u, p.a, p.b, p.m, p.s_max)?;
                let tol = cfg.check_options.mass_tolerance;
                let pass = residual > 0.0 && residual < tol;
                #[derive(Serialize)]
                struct MassIdentity {
                    s_max: u64,
                    residual: f64,
                    tolerance: f64,
                    pass: bool,
                }
                out.write_json(
                    "mass_identity.json",
                    "mass_identity",
                    &MassIdentity { s_max: p.s_max, residual, tolerance: tol, pass },
                )?;
                results.push(CheckResult::new(
                    check,
                    pass,
                    format!("m - sum c = {residual:e} (want in (0, {tol}))"),
                ));
            }
            _ => unreachable!("rejected at config time"),
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_identical_runs() {
        let h = Histogram::from_values(5, [1, 1, 2]);
        let (m, se) = cross_run_moments(&[&h, &h, &h]);
        assert_eq!(m[&1], 2.0);
        assert_eq!(se[&2], 0.0);
    }
}

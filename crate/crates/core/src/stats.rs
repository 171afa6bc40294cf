//! Normalisation, power-law tail fitting, comparison with the limit law and
//! concentration-event counting.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::analytic::{deviation_threshold, LimitDistribution};
use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::special::hurwitz_zeta_ds;

/// `X_n(s) / n` for every populated `s`.
pub fn normalize(hist: &Histogram, n: u64) -> BTreeMap<u64, f64> {
    assert!(n >= 1, "normalisation needs n >= 1");
    let n = n as f64;
    hist.counts.iter().map(|(&s, &c)| (s, c as f64 / n)).collect()
}

/// Histogram counts as floating-point masses.
pub fn as_masses(hist: &Histogram) -> BTreeMap<u64, f64> {
    hist.counts.iter().map(|(&s, &c)| (s, c as f64)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    CcdfRegression,
    DiscreteMle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// Tolerance minus the absolute deviation; negative on failure.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub exponent_hat: f64,
    pub stderr: f64,
    pub fit_range: [u64; 2],
    pub method: FitMethod,
    pub n_tail_points: usize,
    /// Total mass at or above `w_min`; the sample size for count data.
    pub tail_mass: f64,
    pub target_exponent: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Option<Verdict>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub w_min: u64,
    /// Upper end of the regression window; defaults to the largest `w`
    /// whose count is at least [`MIN_BIN_COUNT`].
    pub w_max: Option<u64>,
    pub method: FitMethod,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
}

pub const DEFAULT_W_MIN: u64 = 10;
pub const MIN_BIN_COUNT: f64 = 5.0;
/// Observations required at or above the last point of [`ccdf_w_max`].
pub const MIN_CCDF_COUNT: f64 = 10.0;
pub const MIN_TAIL_POINTS: usize = 10;
/// Density of the log-spaced CCDF sample used by the regression.
pub const CCDF_POINTS_PER_DECADE: f64 = 20.0;

impl FitOptions {
    pub fn new(method: FitMethod) -> Self {
        FitOptions { w_min: DEFAULT_W_MIN, w_max: None, method, target: None, tolerance: None }
    }

    pub fn w_min(mut self, w_min: u64) -> Self {
        self.w_min = w_min;
        self
    }

    pub fn w_max(mut self, w_max: u64) -> Self {
        self.w_max = Some(w_max);
        self
    }

    pub fn target(mut self, exponent: f64, tolerance: f64) -> Self {
        self.target = Some(exponent);
        self.tolerance = Some(tolerance);
        self
    }
}

/// Estimates the exponent `α` of a tail `P(w) ∝ w^{-α}`.
///
/// `dist` maps a value to its (possibly scaled) count. The CCDF method
/// regresses `ln P(W ≥ w)` on `ln w` over `[w_min, w_max]` and reports
/// `1 - slope`, with a standard error from the multinomial covariance of the
/// empirical CCDF (the points are cumulative, so residual-based OLS errors
/// would be far too small). The MLE method maximises the discrete power-law likelihood
/// normalised by the Hurwitz zeta function over all data at or above `w_min`.
pub fn fit_tail(dist: &BTreeMap<u64, f64>, opts: FitOptions) -> Result<FitReport> {
    if opts.w_min == 0 {
        return Err(Error::Fit("w_min must be at least 1".into()));
    }
    let tail: Vec<(u64, f64)> =
        dist.range(opts.w_min..).filter(|(_, &c)| c > 0.0).map(|(&w, &c)| (w, c)).collect();
    if tail.len() < MIN_TAIL_POINTS {
        return Err(Error::Fit(format!(
            "only {} support points at or above w_min = {}; need {MIN_TAIL_POINTS}",
            tail.len(),
            opts.w_min
        )));
    }
    let tail_mass: f64 = tail.iter().map(|(_, c)| c).sum();
    let (exponent_hat, stderr, fit_range, n_points) = match opts.method {
        FitMethod::CcdfRegression => {
            let w_max = opts.w_max.unwrap_or_else(|| {
                tail.iter().rev().find(|(_, c)| *c >= MIN_BIN_COUNT).map_or(opts.w_min, |(w, _)| *w)
            });
            let (e, se, n) = ccdf_regression(&tail, tail_mass, w_max)?;
            (e, se, [opts.w_min, w_max], n)
        }
        FitMethod::DiscreteMle => {
            let (e, se) = discrete_mle(&tail, opts.w_min, tail_mass)?;
            (e, se, [opts.w_min, tail.last().unwrap().0], tail.len())
        }
    };
    let verdict = match (opts.target, opts.tolerance) {
        (Some(t), Some(tol)) => {
            let margin = tol - (exponent_hat - t).abs();
            Some(Verdict { pass: margin >= 0.0, margin })
        }
        _ => None,
    };
    Ok(FitReport {
        exponent_hat,
        stderr,
        fit_range,
        method: opts.method,
        n_tail_points: n_points,
        tail_mass,
        target_exponent: opts.target,
        tolerance: opts.tolerance,
        verdict,
    })
}

/// Largest `w ≥ w_min` with at least [`MIN_CCDF_COUNT`] observations at or
/// above it. On sparse tails this keeps more of the CCDF than the per-bin
/// default while still stopping before the last few observations.
pub fn ccdf_w_max(dist: &BTreeMap<u64, f64>, w_min: u64) -> u64 {
    let mut above = 0.0;
    for (&w, &c) in dist.range(w_min..).rev() {
        above += c;
        if above >= MIN_CCDF_COUNT {
            return w;
        }
    }
    w_min
}

fn ccdf_regression(tail: &[(u64, f64)], tail_mass: f64, w_max: u64) -> Result<(f64, f64, usize)> {
    // Points thinned to an even spacing in ln w, so the densely populated
    // upper decades do not dominate the regression.
    let spacing = std::f64::consts::LN_10 / CCDF_POINTS_PER_DECADE;
    // Suffix sums accumulated from the top keep small tail masses accurate.
    let mut suffix = vec![0.0; tail.len()];
    let mut acc = 0.0;
    for (i, &(_, c)) in tail.iter().enumerate().rev() {
        acc += c;
        suffix[i] = acc;
    }
    let mut xs = Vec::new();
    let mut ccdf = Vec::new();
    for (&(w, _), &above) in tail.iter().zip(&suffix) {
        if w > w_max {
            break;
        }
        let x = (w as f64).ln();
        if xs.last().is_none_or(|&last| x - last >= spacing) {
            xs.push(x);
            ccdf.push(above / tail_mass);
        }
    }
    if xs.len() < MIN_TAIL_POINTS {
        return Err(Error::Fit(format!(
            "only {} support points in [w_min, {w_max}]; need {MIN_TAIL_POINTS}",
            xs.len()
        )));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    // slope = Σ c_i y_i with OLS weights c_i = (x_i - x̄)/Sxx
    let coeffs: Vec<f64> = xs.iter().map(|x| (x - mx) / sxx).collect();
    let slope: f64 = coeffs.iter().zip(&ccdf).map(|(c, f)| c * f.ln()).sum();
    // Multinomial sampling: for w_i ≤ w_j, Cov(ln F_i, ln F_j) = (1 - F_i)/(N F_i).
    let mut var = 0.0;
    for i in 0..coeffs.len() {
        let cov_ii = (1.0 - ccdf[i]) / (tail_mass * ccdf[i]);
        var += coeffs[i] * coeffs[i] * cov_ii;
        let later: f64 = coeffs[i + 1..].iter().sum();
        var += 2.0 * coeffs[i] * later * cov_ii;
    }
    Ok((1.0 - slope, var.max(0.0).sqrt(), xs.len()))
}

const MLE_ALPHA_RANGE: (f64, f64) = (1.0 + 1e-6, 30.0);

/// Derivative of the per-observation negative log-likelihood in `α`:
/// `mean ln w + ∂_α ln ζ(α, w_min)`. Increasing in `α`.
fn mle_score(alpha: f64, w_min: f64, mean_ln: f64) -> f64 {
    let (z, dz) = hurwitz_zeta_ds(alpha, w_min);
    mean_ln + dz / z
}

fn discrete_mle(tail: &[(u64, f64)], w_min: u64, mass: f64) -> Result<(f64, f64)> {
    let mean_ln = tail.iter().map(|&(w, c)| c * (w as f64).ln()).sum::<f64>() / mass;
    let w0 = w_min as f64;
    let g = |a: f64| mle_score(a, w0, mean_ln);
    let (mut lo, mut hi) = MLE_ALPHA_RANGE;
    if g(lo) >= 0.0 || g(hi) <= 0.0 {
        return Err(Error::Fit("likelihood has no interior maximum".into()));
    }
    // Bisection on the score; it is monotone because ln ζ is convex in α.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    // Fisher information per observation: d²/dα² ln ζ(α, w_min).
    let h = 1e-4;
    let info = (g(alpha + h) - g(alpha - h)) / (2.0 * h);
    if !(info > 0.0) {
        return Err(Error::Fit("degenerate likelihood curvature".into()));
    }
    Ok((alpha, 1.0 / (mass * info).sqrt()))
}

/// Whether two fits agree within `k` joint standard errors.
pub fn fits_agree(a: &FitReport, b: &FitReport, k: f64) -> bool {
    let joint = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    (a.exponent_hat - b.exponent_hat).abs() <= k * joint
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub s: u64,
    pub empirical: f64,
    pub analytic: f64,
    pub rel_err: f64,
    /// Whether `c(u,s)·n` is large enough for the row to count.
    pub checked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub tol_rel: f64,
    pub min_expected_count: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn max_checked_error(&self) -> f64 {
        self.rows.iter().filter(|r| r.checked).map(|r| r.rel_err).fold(0.0, f64::max)
    }

    pub fn median_error(&self, s_hi: u64) -> f64 {
        let mut e: Vec<f64> = self.rows.iter().filter(|r| r.s <= s_hi).map(|r| r.rel_err).collect();
        e.sort_by(f64::total_cmp);
        if e.is_empty() {
            return f64::NAN;
        }
        let mid = e.len() / 2;
        if e.len() % 2 == 1 {
            e[mid]
        } else {
            0.5 * (e[mid - 1] + e[mid])
        }
    }

    /// `s,empirical,analytic,rel_err` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,empirical,analytic,rel_err\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.s, r.empirical, r.analytic, r.rel_err).unwrap();
        }
        out
    }
}

/// Rows only count toward the verdict when `c(u,s)·n` reaches this.
pub const MIN_EXPECTED_COUNT: f64 = 1000.0;

/// Relative error of a normalised distribution against `c(u,s)` for
/// `u ≤ s ≤ s_cut`. Passes iff every row with `c(u,s)·n ≥ 1000` is within
/// `tol_rel`.
pub fn compare_to_limit(
    dist: &BTreeMap<u64, f64>,
    limit: &LimitDistribution,
    n: u64,
    s_cut: u64,
    tol_rel: f64,
) -> Result<Comparison> {
    if s_cut < limit.u || s_cut > limit.s_max() {
        return Err(Error::Usage(format!(
            "s_cut {s_cut} outside the limit support [{}, {}]",
            limit.u,
            limit.s_max()
        )));
    }
    let mut rows = Vec::new();
    let mut pass = true;
    for s in limit.u..=s_cut {
        let analytic = limit.get(s).unwrap();
        let empirical = dist.get(&s).copied().unwrap_or(0.0);
        let rel_err = (empirical - analytic).abs() / analytic;
        let checked = analytic * n as f64 >= MIN_EXPECTED_COUNT;
        if checked && !(rel_err <= tol_rel) {
            pass = false;
        }
        rows.push(ComparisonRow { s, empirical, analytic, rel_err, checked });
    }
    Ok(Comparison { rows, tol_rel, min_expected_count: MIN_EXPECTED_COUNT, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub runs: usize,
    pub n: u64,
    pub s_range: [u64; 2],
    pub violations: u64,
    pub total_events: u64,
    /// Largest `|X_n(s) - mean| / threshold(s, n)` seen.
    pub max_ratio: f64,
}

pub const MIN_CONCENTRATION_RUNS: usize = 100;

/// Counts events `|X_n(s) - mean_R X_n(s)| ≥ s·√n·ln n` over all runs and
/// all `s` in `s_range`, with the cross-run mean standing in for `E X_n(s)`.
pub fn concentration_scan(
    runs: &[Histogram],
    s_range: RangeInclusive<u64>,
) -> Result<ConcentrationReport> {
    if runs.len() < MIN_CONCENTRATION_RUNS {
        return Err(Error::Usage(format!(
            "need at least {MIN_CONCENTRATION_RUNS} runs, got {}",
            runs.len()
        )));
    }
    let n = runs[0].n;
    if let Some(bad) = runs.iter().find(|h| h.n != n) {
        return Err(Error::Usage(format!("runs taken at different steps ({n} and {})", bad.n)));
    }
    if n < 2 {
        return Err(Error::Usage("concentration needs n >= 2".into()));
    }
    let r = runs.len() as f64;
    let mut violations = 0;
    let mut total = 0;
    let mut max_ratio: f64 = 0.0;
    for s in s_range.clone() {
        let mean = runs.iter().map(|h| h.get(s) as f64).sum::<f64>() / r;
        let threshold = deviation_threshold(s as f64, n as f64);
        for h in runs {
            let dev = (h.get(s) as f64 - mean).abs();
            max_ratio = max_ratio.max(dev / threshold);
            if dev >= threshold {
                violations += 1;
            }
            total += 1;
        }
    }
    Ok(ConcentrationReport {
        runs: runs.len(),
        n,
        s_range: [*s_range.start(), *s_range.end()],
        violations,
        total_events: total,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::c_recurrence;

    fn zipf(alpha: f64, lo: u64, hi: u64, scale: f64) -> BTreeMap<u64, f64> {
        (lo..=hi).map(|w| (w, scale * (w as f64).powf(-alpha))).collect()
    }

    #[test]
    fn normalize_examples() {
        let mut h = Histogram::new(10);
        h.counts.insert(1, 22);
        let d = normalize(&h, 10);
        assert_eq!(d.get(&1), Some(&2.2));
        assert!(normalize(&Histogram::new(3), 3).is_empty());
    }

    #[test]
    fn too_few_points_is_an_error() {
        let d: BTreeMap<u64, f64> = [(10, 5.0), (11, 4.0), (12, 3.0)].into_iter().collect();
        for method in [FitMethod::CcdfRegression, FitMethod::DiscreteMle] {
            assert!(matches!(fit_tail(&d, FitOptions::new(method)), Err(Error::Fit(_))));
        }
    }

    #[test]
    fn exact_zipf_recovers_exponent() {
        let d = zipf(3.0, 1, 100_000, 1e12);
        for method in [FitMethod::CcdfRegression, FitMethod::DiscreteMle] {
            let r = fit_tail(&d, FitOptions::new(method).w_min(10).w_max(10_000)).unwrap();
            assert!((r.exponent_hat - 3.0).abs() < 0.05, "{method:?}: {r:?}");
        }
    }

    #[test]
    fn analytic_limit_recovers_exponent() {
        let limit = c_recurrence(1, 100_000, 1.0 / 3.0, 0.0, 2.0).unwrap();
        let d: BTreeMap<u64, f64> = limit.iter().map(|(s, c)| (s, c * 1e6)).collect();
        let r = fit_tail(
            &d,
            FitOptions::new(FitMethod::CcdfRegression).w_min(20).w_max(10_000).target(4.0, 0.05),
        )
        .unwrap();
        assert!(r.verdict.unwrap().pass, "{r:?}");
        // The limit law behaves like (s + 3/2)^-4, which a pure zeta model
        // only matches once w_min is well above the shift.
        let r = fit_tail(&d, FitOptions::new(FitMethod::DiscreteMle).w_min(100).target(4.0, 0.05))
            .unwrap();
        assert!(r.verdict.unwrap().pass, "{r:?}");
    }

    #[test]
    fn analytic_limits_within_two_stderr() {
        let scale = 1e6;
        for a in [1.0 / 3.0, 0.375, 0.5, 1.0] {
            let limit = c_recurrence(1, 200_000, a, 0.0, 1.0).unwrap();
            let d: BTreeMap<u64, f64> = limit.iter().map(|(s, c)| (s, c * scale)).collect();
            // The zeta model is biased by the finite-w shift of the limit law,
            // so the likelihood fit starts further out.
            for (method, w_min) in [(FitMethod::CcdfRegression, 20), (FitMethod::DiscreteMle, 40)] {
                let opts = FitOptions::new(method).w_min(w_min).w_max(ccdf_w_max(&d, w_min));
                let r = fit_tail(&d, opts).unwrap();
                let z = (r.exponent_hat - limit.exponent).abs() / r.stderr;
                assert!(z < 2.0, "a={a} {method:?}: {r:?}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn fit_is_scale_invariant(scale in 1e-3f64..1e3, alpha in 1.8f64..4.5) {
            let d = zipf(alpha, 1, 5000, 1e9);
            let scaled: BTreeMap<u64, f64> = d.iter().map(|(&w, &c)| (w, c * scale)).collect();
            for method in [FitMethod::CcdfRegression, FitMethod::DiscreteMle] {
                let opts = FitOptions::new(method).w_min(5).w_max(1000);
                let a = fit_tail(&d, opts).unwrap().exponent_hat;
                let b = fit_tail(&scaled, opts).unwrap().exponent_hat;
                let tol = if method == FitMethod::CcdfRegression { 1e-12 } else { 1e-9 };
                proptest::prop_assert!((a - b).abs() <= tol * a, "{:?}: {} vs {}", method, a, b);
            }
        }
    }

    #[test]
    fn verdict_margin_sign() {
        let d = zipf(2.5, 1, 10_000, 1e9);
        let r = fit_tail(&d, FitOptions::new(FitMethod::DiscreteMle).target(3.0, 0.1)).unwrap();
        let v = r.verdict.unwrap();
        assert!(!v.pass && v.margin < 0.0);
    }

    #[test]
    fn default_w_max_uses_min_bin_count() {
        let mut d = zipf(2.0, 10, 40, 1e4);
        d.insert(500, 1.0);
        let r = fit_tail(&d, FitOptions::new(FitMethod::CcdfRegression)).unwrap();
        assert_eq!(r.fit_range, [10, 40]);
    }

    #[test]
    fn ccdf_w_max_keeps_ten_observations_above() {
        let mut d: BTreeMap<u64, f64> = (10..=40).map(|w| (w, 100.0)).collect();
        d.insert(41, 6.0);
        d.insert(500, 3.0);
        d.insert(900, 1.0);
        assert_eq!(ccdf_w_max(&d, 10), 41);
        assert_eq!(ccdf_w_max(&d, 600), 600);
    }

    #[test]
    fn compare_identity_passes_at_zero_tolerance() {
        let limit = c_recurrence(1, 50, 0.5, 0.0, 2.0).unwrap();
        let d: BTreeMap<u64, f64> = limit.iter().collect();
        let c = compare_to_limit(&d, &limit, 1_000_000, 20, 0.0).unwrap();
        assert!(c.pass);
        assert_eq!(c.max_checked_error(), 0.0);
        assert!(c.to_csv().starts_with("s,empirical,analytic,rel_err\n1,"));
    }

    #[test]
    fn compare_flags_errors_only_on_well_populated_rows() {
        let limit = c_recurrence(1, 50, 0.5, 0.0, 2.0).unwrap();
        let mut d: BTreeMap<u64, f64> = limit.iter().collect();
        // c(1,40)·10^4 is far below 1000, so a wrong value there is ignored.
        *d.get_mut(&40).unwrap() *= 3.0;
        assert!(compare_to_limit(&d, &limit, 10_000, 50, 0.01).unwrap().pass);
        *d.get_mut(&1).unwrap() *= 1.05;
        assert!(!compare_to_limit(&d, &limit, 10_000, 50, 0.01).unwrap().pass);
        assert!(compare_to_limit(&d, &limit, 10_000, 51, 0.01).is_err());
    }

    fn flat_runs(count: usize, n: u64) -> Vec<Histogram> {
        (0..count)
            .map(|_| {
                let mut h = Histogram::new(n);
                for s in 1..=5 {
                    h.counts.insert(s, 1000 / s);
                }
                h
            })
            .collect()
    }

    #[test]
    fn identical_runs_have_no_violations() {
        let r = concentration_scan(&flat_runs(200, 10_000), 1..=5).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.total_events, 1000);
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn planted_deviation_is_caught() {
        let mut runs = flat_runs(200, 10_000);
        *runs[17].counts.get_mut(&1).unwrap() += 10_000;
        let r = concentration_scan(&runs, 1..=5).unwrap();
        assert!(r.violations >= 1);
        assert!(r.violations <= r.total_events);
    }

    #[test]
    fn concentration_usage_errors() {
        assert!(matches!(concentration_scan(&flat_runs(50, 100), 1..=5), Err(Error::Usage(_))));
        let mut runs = flat_runs(120, 100);
        runs[3].n = 101;
        assert!(matches!(concentration_scan(&runs, 1..=5), Err(Error::Usage(_))));
    }
}

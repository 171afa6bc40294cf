//! Limit distribution of scores and exact expectation recursions.
//!
//! With `a > 0` the fraction of individuals at score `s` converges to
//!
//! ```text
//! c(u,s) = (m/a) · Γ(s + b/a) Γ(u + (b+1)/a) / (Γ(s + (b+a+1)/a) Γ(u + b/a))
//! ```
//!
//! which satisfies `c(u,u) = m/(a·u+b+1)` and
//! `c(u,s)/c(u,s-1) = (a·s - a + b)/(a·s + b + 1)`, and decays like
//! `K · s^{-(1+1/a)}`.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_s::SimParams;
use crate::special::ln_gamma_ratio;

fn check_domain(u: u64, a: f64, b: f64, m: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::Domain(format!("b must be non-negative, got {b}")));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!("m must be positive, got {m}")));
    }
    if u == 0 {
        return Err(Error::Domain("u must be at least 1".into()));
    }
    Ok(())
}

/// `c(u,s)` through log-gamma differences.
pub fn c_gamma(u: u64, s: u64, a: f64, b: f64, m: f64) -> Result<f64> {
    check_domain(u, a, b, m)?;
    if s < u {
        return Err(Error::Domain(format!("s = {s} is below u = {u}")));
    }
    let (s, u) = (s as f64, u as f64);
    let ba = b / a;
    let ln = ln_gamma_ratio(s + ba, s + ba + 1.0 + 1.0 / a) + ln_gamma_ratio(u + (b + 1.0) / a, u + ba);
    Ok(m / a * ln.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitDistribution {
    pub u: u64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    /// `values[k]` is `c(u, u + k)`.
    pub values: Vec<f64>,
    pub tail_coefficient: f64,
    pub exponent: f64,
}

impl LimitDistribution {
    pub fn s_max(&self) -> u64 {
        self.u + self.values.len() as u64 - 1
    }

    pub fn get(&self, s: u64) -> Option<f64> {
        s.checked_sub(self.u).and_then(|k| self.values.get(k as usize)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &c)| (self.u + k as u64, c))
    }

    /// `s,c` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,c\n");
        for (s, c) in self.iter() {
            writeln!(out, "{s},{c}").unwrap();
        }
        out
    }
}

/// `c(u,s)` for `s` in `u..=s_max` via the ratio recurrence.
pub fn c_recurrence(u: u64, s_max: u64, a: f64, b: f64, m: f64) -> Result<LimitDistribution> {
    check_domain(u, a, b, m)?;
    if s_max < u {
        return Err(Error::Domain(format!("s_max = {s_max} is below u = {u}")));
    }
    let len = (s_max - u + 1) as usize;
    let mut values = Vec::with_capacity(len);
    let mut c = m / (a * u as f64 + b + 1.0);
    values.push(c);
    for s in (u + 1)..=s_max {
        let s = s as f64;
        c *= (a * s - a + b) / (a * s + b + 1.0);
        values.push(c);
    }
    let (tail_coefficient, exponent) = tail_coefficient(u, a, b, m)?;
    Ok(LimitDistribution { u, a, b, m, values, tail_coefficient, exponent })
}

/// `c(u,s)` for `s` in `u..=s_max`, each point evaluated independently
/// through [`c_gamma`].
pub fn c_gamma_table(u: u64, s_max: u64, a: f64, b: f64, m: f64) -> Result<LimitDistribution> {
    check_domain(u, a, b, m)?;
    if s_max < u {
        return Err(Error::Domain(format!("s_max = {s_max} is below u = {u}")));
    }
    let values = (u..=s_max).map(|s| c_gamma(u, s, a, b, m)).collect::<Result<Vec<_>>>()?;
    let (tail_coefficient, exponent) = tail_coefficient(u, a, b, m)?;
    Ok(LimitDistribution { u, a, b, m, values, tail_coefficient, exponent })
}

/// Constant and exponent of the power-law asymptote `c(u,s) ~ K s^{-(1+1/a)}`.
pub fn tail_coefficient(u: u64, a: f64, b: f64, m: f64) -> Result<(f64, f64)> {
    check_domain(u, a, b, m)?;
    let u = u as f64;
    let k = m / a * ln_gamma_ratio(u + (b + 1.0) / a, u + b / a).exp();
    Ok((k, 1.0 + 1.0 / a))
}

/// `m - Σ_{s=u}^{s_max} c(u,s)`, summed with Neumaier compensation so that
/// residuals far below the unit roundoff of `m` stay meaningful.
pub fn mass_identity_check(u: u64, a: f64, b: f64, m: f64, s_max: u64) -> Result<f64> {
    let dist = c_recurrence(u, s_max.max(u), a, b, m)?;
    let mut sum = m;
    let mut comp = 0.0;
    for &c in &dist.values {
        let x = -c;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// Concentration radius `s·√n·ln n` for `X_n(s)` around its mean.
pub fn deviation_threshold(s: f64, n: f64) -> f64 {
    s * n.sqrt() * n.ln()
}

/// Exact `E X_n(s)` for the frozen-weight binomial kernel.
#[derive(Clone, Debug)]
pub struct ExpectationGrid {
    pub params: SimParams,
    pub s_max: u64,
    /// Time index of the first row.
    pub n0: u64,
    rows: Vec<Vec<f64>>,
    /// Expected mass that has moved above `s_max` by each row.
    escaped: Vec<f64>,
    /// Number of (row, score) pairs whose trial probability had to be capped at 1.
    pub clamp_count: u64,
}

impl ExpectationGrid {
    pub fn n_max(&self) -> u64 {
        self.n0 + self.rows.len() as u64 - 1
    }

    /// `E X_n(s)` at time `n`; zero above `s_max` is not implied, see [`Self::escaped`].
    pub fn expectation(&self, n: u64, s: u64) -> Option<f64> {
        let row = self.rows.get(n.checked_sub(self.n0)? as usize)?;
        row.get(s.checked_sub(self.params.u)? as usize).copied()
    }

    pub fn row(&self, n: u64) -> Option<&[f64]> {
        self.rows.get(n.checked_sub(self.n0)? as usize).map(|r| r.as_slice())
    }

    pub fn escaped(&self, n: u64) -> Option<f64> {
        self.escaped.get(n.checked_sub(self.n0)? as usize).copied()
    }

    /// Σ_s E X_n(s) including the escaped mass.
    pub fn row_sum(&self, n: u64) -> Option<f64> {
        Some(self.row(n)?.iter().sum::<f64>() + self.escaped(n)?)
    }

    /// `n,s,expectation` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,s,expectation\n");
        for (k, row) in self.rows.iter().enumerate() {
            let n = self.n0 + k as u64;
            for (j, e) in row.iter().enumerate() {
                writeln!(out, "{n},{},{e}", self.params.u + j as u64).unwrap();
            }
        }
        out
    }
}

fn binomial_pmf(t: u32, p: f64, out: &mut Vec<f64>) {
    out.clear();
    let q = 1.0 - p;
    let mut coeff = 1.0;
    for j in 0..=t {
        if j > 0 {
            coeff = coeff * (t - j + 1) as f64 / j as f64;
        }
        out.push(coeff * p.powi(j as i32) * q.powi((t - j) as i32));
    }
}

/// Builds rows `n0..=n_max` of `E X_n(s)` for `s` in `u..=s_max`.
///
/// Row `n+1` is `Σ_j E X_n(s-j) · P(Bin(t, (a(s-j)+b)/(t n)) = j)` plus `m`
/// newcomers at `u`. Scores never decrease, so truncating at `s_max` leaves
/// every retained entry exact; the mass that leaves is tracked separately.
/// A trial probability above one is an error unless `allow_clamp` is set.
pub fn expected_histogram_oracle(
    params: SimParams,
    n_max: u64,
    s_max: u64,
    allow_clamp: bool,
) -> Result<ExpectationGrid> {
    params.validate()?;
    if n_max < params.n0 {
        return Err(Error::Usage(format!("n_max {n_max} is below n0 {}", params.n0)));
    }
    if s_max < params.u {
        return Err(Error::Domain(format!("s_max {s_max} is below u {}", params.u)));
    }
    let u = params.u;
    let width = (s_max - u + 1) as usize;
    let t = params.t;
    let mut first = vec![0.0; width];
    first[0] = params.initial_size() as f64;
    let mut rows = Vec::with_capacity((n_max - params.n0 + 1) as usize);
    let mut escaped = Vec::with_capacity(rows.capacity());
    rows.push(first);
    escaped.push(0.0);
    let mut pmf = Vec::with_capacity(t as usize + 1);
    let mut clamp_count = 0;

    for n in params.n0..n_max {
        let prev = rows.last().unwrap();
        let mut next = vec![0.0; width];
        let mut lost = *escaped.last().unwrap();
        let denom = t as f64 * n as f64;
        for (k, &mass) in prev.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let w = (u + k as u64) as f64;
            let mut p = (params.a * w + params.b) / denom;
            if p > 1.0 {
                if !allow_clamp {
                    return Err(Error::Consistency(format!(
                        "trial probability {p} > 1 at n = {n}, s = {w}"
                    )));
                }
                clamp_count += 1;
                p = 1.0;
            }
            binomial_pmf(t, p, &mut pmf);
            for (j, &pj) in pmf.iter().enumerate() {
                let dest = k + j;
                if dest < width {
                    next[dest] += mass * pj;
                } else {
                    lost += mass * pj;
                }
            }
        }
        next[0] += params.m;
        rows.push(next);
        escaped.push(lost);
    }
    Ok(ExpectationGrid { params, s_max, n0: params.n0, rows, escaped, clamp_count })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn c_gamma_examples() {
        assert!(rel(c_gamma(1, 1, 1.0 / 3.0, 0.0, 2.0).unwrap(), 1.5) < 1e-13);
        assert!(rel(c_gamma(1, 2, 1.0 / 3.0, 0.0, 2.0).unwrap(), 0.3) < 1e-13);
        assert!(rel(c_gamma(3, 3, 0.5, 1.0, 1.0).unwrap(), 1.0 / 3.5) < 1e-13);
    }

    #[test]
    fn c_gamma_domain_errors() {
        assert!(matches!(c_gamma(1, 1, 0.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(c_gamma(1, 1, -1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(c_gamma(3, 2, 0.5, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(c_recurrence(3, 2, 0.5, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn c_gamma_handles_huge_scores() {
        // a = 1/3, b = 0, u = 1: c(1,s) = 36 / (s(s+1)(s+2)(s+3))
        let s = 1_000_000u64;
        let sf = s as f64;
        let exact = 36.0 / (sf * (sf + 1.0) * (sf + 2.0) * (sf + 3.0));
        assert!(rel(c_gamma(1, s, 1.0 / 3.0, 0.0, 2.0).unwrap(), exact) < 1e-12);
    }

    #[test]
    fn recurrence_examples() {
        let d = c_recurrence(1, 2, 1.0 / 3.0, 0.0, 2.0).unwrap();
        assert!(rel(d.values[0], 1.5) < 1e-15);
        assert!(rel(d.values[1], 0.3) < 1e-15);
        let single = c_recurrence(2, 2, 0.7, 0.4, 1.3).unwrap();
        assert_eq!(single.values.len(), 1);
        assert!(rel(single.values[0], 1.3 / (1.4 + 0.4 + 1.0)) < 1e-15);
    }

    #[test]
    fn recurrence_tail_reaches_coefficient() {
        let d = c_recurrence(1, 10_000, 1.0 / 3.0, 0.0, 2.0).unwrap();
        let scaled = d.get(10_000).unwrap() * 1.0e16;
        assert!(rel(scaled, 36.0) < 0.01);
    }

    #[test]
    fn tail_coefficient_examples() {
        let (k, e) = tail_coefficient(1, 1.0 / 3.0, 0.0, 2.0).unwrap();
        assert!(rel(k, 36.0) < 1e-13);
        assert!(rel(e, 4.0) < 1e-15);
        let (k, e) = tail_coefficient(1, 1.0, 0.0, 1.0).unwrap();
        assert!(rel(k, 1.0) < 1e-14);
        assert_eq!(e, 2.0);
        let (_, e) = tail_coefficient(1, 0.375, 0.0, 1.875).unwrap();
        assert!((e - 3.666_666_666_666_667).abs() < 1e-12);
    }

    #[test]
    fn mass_identity_examples() {
        let r = mass_identity_check(1, 1.0, 0.0, 1.0, 1).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        let r = mass_identity_check(2, 0.4, 0.3, 1.7, 2).unwrap();
        assert!(rel(r, 1.7 - 1.7 / (0.8 + 0.3 + 1.0)) < 1e-14);
        let r = mass_identity_check(1, 1.0 / 3.0, 0.0, 2.0, 100_000).unwrap();
        assert!(r > 0.0 && r < 2e-4);
    }

    #[test]
    fn mass_residual_matches_telescoped_form() {
        // Σ_{s>S} c(u,s) = (a·S + b)·c(u,S) by telescoping the ratio recurrence.
        for &(u, a, b, m) in &[(1, 1.0 / 3.0, 0.0, 2.0), (2, 0.5, 1.0, 1.0), (3, 1.0, 0.5, 0.7)] {
            for &s_max in &[10u64, 100, 1000] {
                let r = mass_identity_check(u, a, b, m, s_max).unwrap();
                let closed = (a * s_max as f64 + b) * c_gamma(u, s_max, a, b, m).unwrap();
                assert!(rel(r, closed) < 1e-6, "u={u} a={a} s_max={s_max}: {r} vs {closed}");
            }
        }
    }

    #[test]
    fn deviation_threshold_examples() {
        assert!((deviation_threshold(2.0, 1e4) - 1842.068_074_395_237).abs() < 1e-9);
        let e2 = std::f64::consts::E.powi(2);
        assert!((deviation_threshold(1.0, e2) - 2.0 * std::f64::consts::E).abs() < 1e-12);
        assert!((deviation_threshold(5.0, 1e6) - 69_077.552_789_821_37).abs() < 1e-6);
    }

    #[test]
    fn oracle_first_step() {
        let p = SimParams::new(0.5, 0.0, 2.0, 4, 1);
        let g = expected_histogram_oracle(p, 2, 10, false).unwrap();
        assert_eq!(g.expectation(1, 1), Some(2.0));
        let expect = 2.0 * 0.875f64.powi(4) + 2.0;
        assert!((g.expectation(2, 1).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 3.172_363_281_25).abs() < 1e-12);
    }

    #[test]
    fn oracle_conserves_mass() {
        let p = SimParams::new(0.5, 0.0, 2.0, 4, 1);
        let g = expected_histogram_oracle(p, 10, 50, false).unwrap();
        assert!((g.row_sum(10).unwrap() - 20.0).abs() < 1e-12);
        let p = SimParams::new(0.4, 0.6, 1.5, 3, 2);
        let g = expected_histogram_oracle(p, 300, 12, false).unwrap();
        for n in [1u64, 50, 300] {
            let expect = 2.0 + 1.5 * (n - 1) as f64;
            assert!(rel(g.row_sum(n).unwrap(), expect) < 1e-12, "n={n}");
        }
        assert!(g.escaped(300).unwrap() > 0.0);
    }

    #[test]
    fn oracle_rejects_unclamped_overflow() {
        let mut p = SimParams::new(10.0, 0.0, 1.0, 2, 5);
        assert!(matches!(
            expected_histogram_oracle(p, 5, 20, false),
            Err(Error::Consistency(_))
        ));
        let g = expected_histogram_oracle(p, 5, 20, true).unwrap();
        assert!(g.clamp_count > 0);
        p.a = 0.1;
        assert!(expected_histogram_oracle(p, 5, 20, false).is_ok());
    }

    #[test]
    fn csv_shapes() {
        let d = c_recurrence(1, 2, 1.0 / 3.0, 0.0, 2.0).unwrap();
        assert!(d.to_csv().starts_with("s,c\n1,1.5"));
        let g = expected_histogram_oracle(SimParams::new(0.5, 0.0, 2.0, 4, 1), 2, 2, false).unwrap();
        assert!(g.to_csv().starts_with("n,s,expectation\n1,1,2\n1,2,0\n2,1,"));
    }
}

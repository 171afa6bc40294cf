//! Properties of the limit distribution and the expectation recursion.

use scorelaw::analytic::{
    c_gamma, c_recurrence, expected_histogram_oracle, mass_identity_check, tail_coefficient,
};
use scorelaw::model_s::SimParams;

#[test]
fn scaled_tail_converges_monotonically() {
    for (a, b, u) in [(1.0 / 3.0, 0.0, 1), (0.5, 0.5, 2), (1.0, 1.0, 3), (0.4, 0.0, 1)] {
        let (k, exponent) = tail_coefficient(u, a, b, 1.0).unwrap();
        let scaled = |s: u64| c_gamma(u, s, a, b, 1.0).unwrap() * (s as f64).powf(exponent);
        let mut prev_gap = f64::INFINITY;
        for s in [10u64, 100, 1000, 10_000] {
            let gap = (scaled(s) - k).abs() / k;
            assert!(gap < prev_gap, "a={a} b={b} u={u} s={s}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.01, "a={a}: gap {prev_gap} at 1e4");
    }
}

#[test]
fn mass_residual_scales_like_inverse_power() {
    for (a, b, u, m) in [(1.0 / 3.0, 0.0, 1, 2.0), (0.5, 1.0, 2, 1.0), (1.0, 0.5, 1, 3.0)] {
        for s_max in [100u64, 1000] {
            let r1 = mass_identity_check(u, a, b, m, s_max).unwrap();
            let r2 = mass_identity_check(u, a, b, m, 10 * s_max).unwrap();
            let want = 10f64.powf(1.0 / a);
            let ratio = r1 / r2;
            assert!(ratio > want / 2.0 && ratio < want * 2.0, "a={a} S={s_max}: {ratio} vs {want}");
        }
    }
}

/// E X_n(u) obeys its own one-line recursion because scores never decrease:
/// only newcomers enter score u, and each stays with probability (1-p)^t.
#[test]
fn oracle_base_score_matches_direct_recursion() {
    let params = SimParams::new(0.5, 0.5, 1.5, 3, 2);
    let grid = expected_histogram_oracle(params, 300, 40, false).unwrap();
    let mut e = params.initial_size() as f64;
    for n in 1..300u64 {
        let p = params.weight_of(params.u) / (params.t as f64 * n as f64);
        e = e * (1.0 - p).powi(params.t as i32) + params.m;
        let got = grid.expectation(n + 1, params.u).unwrap();
        assert!((got - e).abs() <= 1e-12 * e, "n={n}: {got} vs {e}");
    }
}

#[test]
fn oracle_row_sums_with_fractional_m() {
    let params = SimParams::new(1.0 / 3.0, 1.0, 2.5, 3, 1);
    let grid = expected_histogram_oracle(params, 500, 30, false).unwrap();
    for n in [1u64, 10, 100, 500] {
        let want = params.initial_size() as f64 + params.m * (n - params.n0) as f64;
        let got = grid.row_sum(n).unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "n={n}: {got} vs {want}");
    }
}

/// sup_{s ≤ 20} |E X_n(s) - n c(u,s)| / (c(u,s) s^{2+1/a}) stays bounded as n grows.
#[test]
fn oracle_error_against_limit_is_bounded() {
    let params = SimParams::new(0.5, 0.0, 2.0, 4, 1);
    let grid = expected_histogram_oracle(params, 100_000, 120, false).unwrap();
    let limit = c_recurrence(1, 20, 0.5, 0.0, 2.0).unwrap();
    let scaled_error = |n: u64| {
        (1..=20u64)
            .map(|s| {
                let c = limit.get(s).unwrap();
                let e = grid.expectation(n, s).unwrap();
                (e - n as f64 * c).abs() / (c * (s as f64).powf(2.0 + 1.0 / 0.5))
            })
            .fold(0.0, f64::max)
    };
    let values: Vec<f64> = [1000u64, 10_000, 100_000].iter().map(|&n| scaled_error(n)).collect();
    let first = values[0];
    for v in &values {
        assert!(v.is_finite() && *v <= 1.5 * first, "{values:?}");
    }
}

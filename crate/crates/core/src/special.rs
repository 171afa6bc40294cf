//! Log-gamma and Hurwitz zeta evaluation.
//!
//! The limit laws are ratios of gamma functions whose arguments reach 10^6,
//! where `ln Γ` itself is ~10^7 and a plain difference of two such values
//! loses most of its significant digits. [`ln_gamma_ratio`] evaluates the
//! difference directly from the Stirling series so that the cancellation
//! happens analytically.

use std::f64::consts::PI;

/// Arguments below this are shifted upward before the Stirling series is used.
const STIRLING_MIN: f64 = 15.0;

/// `B_{2k} / (2k (2k-1))` for k = 1..=8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Correction part of the Stirling series, `Σ B_{2k} / (2k(2k-1) z^{2k-1})`.
fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING_COEFFS.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn shift_for(x: f64) -> usize {
    if x >= STIRLING_MIN {
        0
    } else {
        (STIRLING_MIN - x).ceil() as usize
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    let k = shift_for(x);
    let z = x + k as f64;
    let mut shift = 0.0;
    for j in 0..k {
        shift += (x + j as f64).ln();
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + stirling_tail(z) - shift
}

/// `ln Γ(x) - ln Γ(y)` for `x, y > 0`, accurate to a few ulps of the result
/// even when both arguments are large.
pub fn ln_gamma_ratio(x: f64, y: f64) -> f64 {
    assert!(x > 0.0 && y > 0.0, "ln_gamma_ratio requires positive arguments");
    let k = shift_for(x.min(y));
    // ln Γ(x) = ln Γ(x+k) - Σ ln(x+j)
    let mut shift = 0.0;
    for j in 0..k {
        let j = j as f64;
        shift += ((x + j) / (y + j)).ln();
    }
    let xs = x + k as f64;
    let ys = y + k as f64;
    let d = xs - ys;
    // (X-1/2) ln X - (Y-1/2) ln Y - (X - Y), rearranged to avoid cancellation.
    let main = (xs - 0.5) * (d / ys).ln_1p() + d * ys.ln() - d;
    main + stirling_tail(xs) - stirling_tail(ys) - shift
}

/// `Γ(x) / Γ(y)`.
pub fn gamma_ratio(x: f64, y: f64) -> f64 {
    ln_gamma_ratio(x, y).exp()
}

/// Bernoulli numbers `B_{2j}` for j = 1..=8.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Number of leading terms summed directly before Euler-Maclaurin takes over.
const ZETA_DIRECT_TERMS: usize = 24;

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (k+q)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(q > 0.0, "hurwitz_zeta requires q > 0, got {q}");
    let mut sum = 0.0;
    for k in 0..ZETA_DIRECT_TERMS {
        sum += (k as f64 + q).powf(-s);
    }
    let x = ZETA_DIRECT_TERMS as f64 + q;
    let fx = x.powf(-s);
    sum += x * fx / (s - 1.0) + 0.5 * fx;
    // Σ B_{2j}/(2j)! · s(s+1)...(s+2j-2) · x^{-s-2j+1}
    let mut rising = s; // s(s+1)...(s+2j-2)
    let mut factorial = 2.0; // (2j)!
    let mut power = fx / x; // x^{-s-2j+1}
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / factorial * rising * power;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2);
        factorial *= (j2 + 1.0) * (j2 + 2.0);
        power /= x * x;
    }
    sum
}

/// `ζ(s, q)` together with its derivative in `s`, `-Σ ln(k+q) (k+q)^{-s}`.
pub fn hurwitz_zeta_ds(s: f64, q: f64) -> (f64, f64) {
    assert!(s > 1.0, "hurwitz_zeta_ds requires s > 1, got {s}");
    assert!(q > 0.0, "hurwitz_zeta_ds requires q > 0, got {q}");
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for k in 0..ZETA_DIRECT_TERMS {
        let x = k as f64 + q;
        let f = x.powf(-s);
        sum += f;
        dsum -= x.ln() * f;
    }
    let x = ZETA_DIRECT_TERMS as f64 + q;
    let lx = x.ln();
    let fx = x.powf(-s);
    let integral = x * fx / (s - 1.0);
    sum += integral + 0.5 * fx;
    dsum += -lx * integral - integral / (s - 1.0) - 0.5 * lx * fx;
    let mut rising = s;
    let mut rising_log_ds = 1.0 / s; // d/ds ln(rising)
    let mut factorial = 2.0;
    let mut power = fx / x;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / factorial * rising * power;
        sum += term;
        dsum += term * (rising_log_ds - lx);
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2);
        rising_log_ds += 1.0 / (s + j2 - 1.0) + 1.0 / (s + j2);
        factorial *= (j2 + 1.0) * (j2 + 2.0);
        power /= x * x;
    }
    (sum, dsum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: u32) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..=40u32 {
            let expect = ln_factorial(n - 1);
            let got = ln_gamma(n as f64);
            assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn ln_gamma_half_integer() {
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(1.5) - (0.5 * PI.sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn ratio_of_integers_is_rational() {
        // Γ(2)Γ(4)/(Γ(6)Γ(1)) = 6/120
        let r = gamma_ratio(2.0, 6.0) * gamma_ratio(4.0, 1.0);
        assert!((r - 0.05).abs() < 1e-15);
        // Γ(s)/Γ(s+4) = 1/(s(s+1)(s+2)(s+3)) at large s
        let s = 1.0e6;
        let exact = 1.0 / (s * (s + 1.0) * (s + 2.0) * (s + 3.0));
        let got = gamma_ratio(s, s + 4.0);
        assert!(((got - exact) / exact).abs() < 1e-13, "{got} vs {exact}");
    }

    #[test]
    fn ratio_is_antisymmetric() {
        for &(x, y) in &[(0.3, 7.9), (12.5, 3.25), (1.0e4 + 0.5, 1.0e4 + 3.0)] {
            assert!((ln_gamma_ratio(x, y) + ln_gamma_ratio(y, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn riemann_zeta_values() {
        let z2 = hurwitz_zeta(2.0, 1.0);
        assert!((z2 - PI * PI / 6.0).abs() < 1e-14);
        let z4 = hurwitz_zeta(4.0, 1.0);
        assert!((z4 - PI.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn zeta_derivative_matches_finite_difference() {
        for &(s, q) in &[(1.5, 1.0), (2.5, 10.0), (3.6667, 20.0), (6.0, 3.0)] {
            let (z, dz) = hurwitz_zeta_ds(s, q);
            assert!(((z - hurwitz_zeta(s, q)) / z).abs() < 1e-14);
            let h = 1e-5;
            let fd = (hurwitz_zeta(s + h, q) - hurwitz_zeta(s - h, q)) / (2.0 * h);
            assert!(((dz - fd) / dz).abs() < 1e-7, "s={s} q={q}: {dz} vs {fd}");
        }
        // ζ'(2) = -Σ ln k / k^2
        let (_, dz) = hurwitz_zeta_ds(2.0, 1.0);
        assert!((dz + 0.937_548_254_315_843_8).abs() < 1e-13, "{dz}");
    }

    #[test]
    fn hurwitz_shift_identity() {
        // ζ(s, q) = q^{-s} + ζ(s, q+1)
        for &(s, q) in &[(1.5, 0.7), (3.0, 10.0), (3.6667, 20.0), (1.1, 2.0)] {
            let lhs = hurwitz_zeta(s, q);
            let rhs = q.powf(-s) + hurwitz_zeta(s, q + 1.0);
            assert!(((lhs - rhs) / lhs).abs() < 1e-13, "s={s} q={q}");
        }
    }
}

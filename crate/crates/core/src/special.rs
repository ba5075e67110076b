//! Special functions used by the likelihood.

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// Below this the argument is shifted up before applying the asymptotic series.
const STIRLING_MIN: f64 = 8.0;

// Rising factorials with at most this many factors are formed as a product.
const RISING_PRODUCT_MAX: u32 = 12;

/// Natural log of the gamma function for `x > 0`.
///
/// Uses the Stirling series with Bernoulli terms through 1/x^13 after shifting
/// the argument to at least 8, which keeps the truncation error near 1e-15.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma domain: {x}");
    if x >= STIRLING_MIN {
        return stirling(x);
    }
    let mut shift = 1.0;
    let mut z = x;
    while z < STIRLING_MIN {
        shift *= z;
        z += 1.0;
    }
    stirling(z) - shift.ln()
}

#[inline]
fn stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// `ln Γ(a + n) - ln Γ(a)` for integer `n >= 0` and `a > 0`.
pub fn ln_rising(a: f64, n: u32) -> f64 {
    match n {
        0 => 0.0,
        1 => a.ln(),
        n if n <= RISING_PRODUCT_MAX => {
            let mut prod = a;
            let mut x = a;
            for _ in 1..n {
                x += 1.0;
                prod *= x;
            }
            prod.ln()
        }
        n => ln_gamma(a + n as f64) - ln_gamma(a),
    }
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Numerically stable `ln(sum(exp(x)))`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log density of a zero-truncated Poisson at `k >= 1`.
pub fn ln_zero_truncated_poisson(k: u32, rate: f64) -> f64 {
    assert!(k >= 1 && rate > 0.0);
    let k = k as f64;
    k * rate.ln() - rate - ln_gamma(k + 1.0) - (-(-rate).exp_m1()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    // Γ(x)Γ(1-x) = π / sin(πx)
    fn gamma_reflection_check(x: f64) -> f64 {
        ln_gamma(x) + ln_gamma(1.0 - x) - (PI / (PI * x).sin()).ln()
    }

    #[test]
    fn matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..=30u32 {
            assert_relative_eq!(ln_gamma(n as f64), fact.ln(), max_relative = 1e-14, epsilon = 1e-14);
            fact *= n as f64;
        }
    }

    #[test]
    fn matches_statrs_over_wide_range() {
        let mut x = 1e-7;
        while x < 1e6 {
            let ours = ln_gamma(x);
            let theirs = statrs::function::gamma::ln_gamma(x);
            assert!(
                (ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0),
                "x={x} ours={ours} statrs={theirs}"
            );
            x *= 1.37;
        }
    }

    #[test]
    fn reflection_identity() {
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!(gamma_reflection_check(x).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn rising_matches_gamma_difference() {
        for &a in &[1e-6, 0.01, 0.37, 1.0, 4.2, 9.9, 55.0] {
            for n in 0..40u32 {
                let want = statrs::function::gamma::ln_gamma(a + n as f64) - statrs::function::gamma::ln_gamma(a);
                let got = ln_rising(a, n);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "a={a} n={n} {got} {want}");
            }
        }
    }

    #[test]
    fn half_integer() {
        assert_relative_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-14);
    }

    #[test]
    fn choose_small() {
        assert_relative_eq!(ln_choose(10, 3), 120f64.ln(), epsilon = 1e-13);
        assert_eq!(ln_choose(7, 0), 0.0);
        assert_eq!(ln_choose(7, 7), 0.0);
    }

    #[test]
    fn lse_basic() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(log_sum_exp(&[-1000.0, -1000.0]), -1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(log_sum_exp(&[1000.0, 0.0]), 1000.0, epsilon = 1e-12);
    }

    #[test]
    fn truncated_poisson_normalizes() {
        let total: f64 = (1..60).map(|k| ln_zero_truncated_poisson(k, 2.0).exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }
}

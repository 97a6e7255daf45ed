//! Special functions backing the χ² tail probabilities, prior CDFs and the
//! F quantile used by the Gelman-Rubin upper bound.
//!
//! Everything here goes through `libm` so results are identical with and
//! without `std`.

use libm::{erfc, exp, fabs, lgamma, log};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
///
/// Evaluated directly in the tail so that tiny probabilities keep their
/// relative precision.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    exp(a * log(x) - x - lgamma(a))
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if fabs(term) < fabs(sum) * EPS {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if fabs(delta - 1.0) < EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if fabs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / core::f64::consts::SQRT_2)
}

/// `P(χ²_k > x)`.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    gamma_q(dof / 2.0, x / 2.0)
}

/// CDF of the F distribution with `(d1, d2)` degrees of freedom. An
/// infinite `d2` gives the `χ²_{d1} / d1` limit.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if !d2.is_finite() {
        return gamma_p(d1 / 2.0, d1 * x / 2.0);
    }
    beta_inc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
}

/// Quantile of the F distribution, found by bracketing and bisection on
/// [`f_cdf`].
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&p));
    if p <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f_cdf(hi, d1, d2) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

pub(crate) fn ln_sqrt_two_pi() -> f64 {
    0.5 * log(2.0 * core::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Gamma};

    #[test]
    fn incomplete_gamma_matches_statrs() {
        for &(a, x) in &[
            (0.5, 0.1),
            (1.0, 1.0),
            (3.0, 2.5),
            (15.5, 10.0),
            (15.5, 61.0),
            (40.0, 35.0),
        ] {
            let g = Gamma::new(a, 1.0).unwrap();
            assert_abs_diff_eq!(gamma_p(a, x), g.cdf(x), epsilon = 1e-12);
            assert_abs_diff_eq!(gamma_q(a, x) + gamma_p(a, x), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn chi_square_tail_matches_statrs() {
        let chi = ChiSquared::new(31.0).unwrap();
        for &x in &[0.5, 10.0, 20.0, 31.0, 45.0, 80.0] {
            assert_abs_diff_eq!(chi_square_sf(x, 31.0), 1.0 - chi.cdf(x), epsilon = 1e-10);
        }
    }

    #[test]
    fn f_quantile_inverts_statrs_cdf() {
        for &(d1, d2) in &[(2.0, 10.0), (2.0, 3.5), (4.0, 200.0), (1.0, 50.0)] {
            let f = FisherSnedecor::new(d1, d2).unwrap();
            let q = f_quantile(0.975, d1, d2);
            assert_abs_diff_eq!(f.cdf(q), 0.975, epsilon = 1e-9);
        }
    }

    #[test]
    fn f_with_infinite_denominator_is_scaled_chi_square() {
        let q = f_quantile(0.975, 2.0, f64::INFINITY);
        // χ²₂ quantile at 0.975 is −2 ln(0.025); divide by d1 = 2.
        assert_abs_diff_eq!(q, -libm::log(0.025), epsilon = 1e-9);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(1.3) + normal_cdf(-1.3), 1.0, epsilon = 1e-15);
    }
}

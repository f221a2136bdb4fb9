//! Student-t distribution functions.
//!
//! Two parameterisations are used throughout the crate: the classical t with
//! `nu` degrees of freedom (variance `nu / (nu - 2)`), which drives the copula,
//! and the standardized t with unit variance, which is the innovation law of the
//! marginal models.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

pub fn ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

pub fn pdf(x: f64, nu: f64) -> f64 {
    ln_pdf(x, nu).exp()
}

pub fn cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == 0.0 {
        return 0.5;
    }
    let x2 = x * x;
    if x2 < nu {
        // Central region: I_{x²/(ν+x²)}(1/2, ν/2) keeps full precision near 0.
        let half_mass = 0.5 * beta_reg(0.5, 0.5 * nu, x2 / (nu + x2));
        if x > 0.0 {
            0.5 + half_mass
        } else {
            0.5 - half_mass
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x2));
        if x > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Inverse CDF by safeguarded Newton iteration from a Cornish–Fisher start.
pub fn quantile(p: f64, nu: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    // Solve in the lower half and reflect, so the tail is resolved with full
    // relative precision.
    if p > 0.5 {
        return -quantile(1.0 - p, nu);
    }

    let z = normal_quantile(p);
    let z3 = z * z * z;
    let mut x = z + (z3 + z) / (4.0 * nu) + (5.0 * z3 * z * z + 16.0 * z3 + 3.0 * z) / (96.0 * nu * nu);
    if !x.is_finite() || x >= 0.0 {
        x = z.min(-1e-3);
    }

    // Bracket [lo, hi] with F(lo) <= p <= F(hi); hi = 0 works since p < 0.5.
    let mut hi = 0.0_f64;
    let mut lo = x.min(-1.0);
    while cdf(lo, nu) > p {
        hi = lo;
        lo *= 2.0;
        if lo < -1e300 {
            return lo;
        }
    }
    if x < lo || x > hi {
        x = 0.5 * (lo + hi);
    }

    for _ in 0..200 {
        let f = cdf(x, nu) - p;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = pdf(x, nu);
        let mut next = x - f / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 1e-15 * lo.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Scale mapping the classical t onto the unit-variance standardized t.
pub fn standardizing_scale(nu: f64) -> f64 {
    ((nu - 2.0) / nu).sqrt()
}

pub fn std_ln_pdf(e: f64, nu: f64) -> f64 {
    let s = standardizing_scale(nu);
    ln_pdf(e / s, nu) - s.ln()
}

pub fn std_pdf(e: f64, nu: f64) -> f64 {
    std_ln_pdf(e, nu).exp()
}

pub fn std_cdf(e: f64, nu: f64) -> f64 {
    cdf(e / standardizing_scale(nu), nu)
}

pub fn std_quantile(p: f64, nu: f64) -> f64 {
    standardizing_scale(nu) * quantile(p, nu)
}

/// E|ε| for the unit-variance standardized t:
/// `2·√(ν−2)·Γ((ν+1)/2) / (√π·(ν−1)·Γ(ν/2))`.
pub fn std_abs_mean(nu: f64) -> f64 {
    let log_ratio = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu);
    2.0 * (nu - 2.0).sqrt() * log_ratio.exp() / (PI.sqrt() * (nu - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_centered() {
        for &nu in &[2.5, 4.0, 10.0, 80.0] {
            assert_eq!(cdf(0.0, nu), 0.5);
            for &x in &[0.1, 1.0, 3.0, 30.0] {
                assert!((cdf(x, nu) + cdf(-x, nu) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn known_values() {
        // t_1 is Cauchy: F(1) = 3/4.
        assert!((cdf(1.0, 1.0) - 0.75).abs() < 1e-14);
        // t_2 has closed form F(x) = 1/2 + x / (2 sqrt(2 + x^2)).
        for &x in &[-3.0, -0.5, 0.7, 4.0] {
            let exact = 0.5 + x / (2.0 * (2.0 + x * x as f64).sqrt());
            assert!((cdf(x, 2.0) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &nu in &[2.1, 3.0, 5.0, 12.5, 200.0] {
            for &p in &[1e-10, 1e-4, 0.0025, 0.05, 0.3, 0.5, 0.77, 0.95, 0.999] {
                let x = quantile(p, nu);
                let back = cdf(x, nu);
                assert!((back - p).abs() <= 1e-13 * p.max(1e-3), "nu={nu} p={p} back={back}");
            }
        }
    }

    #[test]
    fn large_dof_approaches_normal() {
        assert!((quantile(0.05, 1e6) + 1.6448536269514729).abs() < 1e-5);
    }

    #[test]
    fn standardized_has_unit_variance_scale() {
        let nu = 6.0;
        assert!((std_quantile(0.5, nu)).abs() < 1e-15);
        let e = 0.8;
        assert!((std_cdf(e, nu) - cdf(e / (4.0f64 / 6.0).sqrt(), nu)).abs() < 1e-15);
    }

    #[test]
    fn abs_mean_limits() {
        assert!((std_abs_mean(1e7) - (2.0 / PI).sqrt()).abs() < 1e-6);
        // ν = 3: E|T| = 2√3/π for the classical t, scaled by 1/√3.
        assert!((std_abs_mean(3.0) - 2.0 / PI).abs() < 1e-14);
    }
}

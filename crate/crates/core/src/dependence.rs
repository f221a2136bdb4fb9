//! DCC conditional correlations and the Student-t copula.
//!
//! The correlation recursion runs on the standardized residuals ε_t of the
//! marginal models:
//!
//! ```text
//! Q_t = (1 − Σc − Σd) Q̄ + Σ_j c_j ε_{t−j} ε'_{t−j} + Σ_j d_j Q_{t−j}
//! R_t = diag(Q_t)^{−1/2} Q_t diag(Q_t)^{−1/2}
//! ```
//!
//! with every out-of-sample lag (outer products and Q alike) replaced by Q̄, so
//! that Q_0 = Q̄. The copula density is evaluated on the probability-integral
//! transforms mapped through the t quantile with the copula's own degrees of
//! freedom.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::optim::{golden_section, nelder_mead, NelderMeadOptions};
use crate::quadrature::integrate;
use crate::rng::SimRng;
use crate::stats::correlation_matrix;
use crate::student_t;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DccOrders {
    /// Number of lagged shock outer products.
    pub m: usize,
    /// Number of lagged Q matrices.
    pub n: usize,
}

impl Default for DccOrders {
    fn default() -> Self {
        Self { m: 1, n: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccParams {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub qbar: DMatrix<f64>,
    pub nu_copula: f64,
}

impl DccParams {
    pub fn validate(&self) -> Result<()> {
        if self.c.iter().chain(&self.d).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("DCC coefficients must be finite and non-negative".into()));
        }
        let total: f64 = self.c.iter().chain(&self.d).sum();
        if total >= 1.0 {
            return Err(Error::Domain(format!("DCC persistence {total} must be below 1")));
        }
        if !self.qbar.is_square() {
            return Err(Error::Domain("Q̄ must be square".into()));
        }
        let k = self.qbar.nrows();
        for i in 0..k {
            if !(self.qbar[(i, i)] > 0.0) {
                return Err(Error::Domain("Q̄ must have a positive diagonal".into()));
            }
            for j in 0..i {
                if (self.qbar[(i, j)] - self.qbar[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Domain("Q̄ must be symmetric".into()));
                }
            }
        }
        if !(self.nu_copula > 2.0) {
            return Err(Error::Domain(format!("copula nu {} must exceed 2", self.nu_copula)));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.qbar.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DccState {
    pub params: DccParams,
    pub r_series: Vec<DMatrix<f64>>,
    pub q_series: Option<Vec<DMatrix<f64>>>,
}

impl DccState {
    /// Conditional covariance H_t = D_t R_t D_t for given conditional variances.
    pub fn covariance(&self, t: usize, cond_var: &[f64]) -> DMatrix<f64> {
        let r = &self.r_series[t];
        DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * (cond_var[i] * cond_var[j]).sqrt())
    }
}

pub fn dcc_filter(params: &DccParams, shocks: &DMatrix<f64>) -> Result<DccState> {
    dcc_filter_with(params, shocks, false)
}

/// Runs the Q_t/R_t recursion over a T×k shock matrix.
pub fn dcc_filter_with(params: &DccParams, shocks: &DMatrix<f64>, keep_q: bool) -> Result<DccState> {
    params.validate()?;
    let (t_len, k) = shocks.shape();
    if k < 2 {
        return Err(Error::Domain("DCC needs at least two series".into()));
    }
    if k != params.k() {
        return Err(Error::Domain(format!("shock matrix has {k} columns but Q̄ is {}×{}", params.k(), params.k())));
    }
    if shocks.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("shocks must be finite".into()));
    }
    let weight_bar = 1.0 - params.c.iter().sum::<f64>() - params.d.iter().sum::<f64>();
    let mut q_series: Vec<DMatrix<f64>> = Vec::with_capacity(t_len);
    let mut r_series = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut q = &params.qbar * weight_bar;
        for (j, c) in params.c.iter().enumerate() {
            if t > j {
                let e = shocks.row(t - j - 1);
                for a in 0..k {
                    for b in 0..k {
                        q[(a, b)] += c * e[a] * e[b];
                    }
                }
            } else {
                q += &params.qbar * *c;
            }
        }
        for (j, d) in params.d.iter().enumerate() {
            if t > j {
                q += &q_series[t - j - 1] * *d;
            } else {
                q += &params.qbar * *d;
            }
        }
        r_series.push(normalize(&q, t)?);
        q_series.push(q);
    }
    Ok(DccState {
        params: params.clone(),
        r_series,
        q_series: keep_q.then_some(q_series),
    })
}

fn normalize(q: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>> {
    let k = q.nrows();
    let mut inv_sd = Vec::with_capacity(k);
    for i in 0..k {
        let v = q[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Numerical {
                index: t,
                message: format!("Q diagonal entry {i} is {v}"),
            });
        }
        inv_sd.push(1.0 / v.sqrt());
    }
    Ok(DMatrix::from_fn(k, k, |a, b| {
        if a == b {
            1.0
        } else {
            (q[(a, b)] * inv_sd[a] * inv_sd[b]).clamp(-1.0, 1.0)
        }
    }))
}

/// Maps a T×k matrix of uniforms onto t(ν) scores.
pub fn t_scores(uniforms: &DMatrix<f64>, nu: f64) -> DMatrix<f64> {
    uniforms.map(|u| student_t::quantile(u, nu))
}

/// Student-t copula log-likelihood of `scores` (already t(ν) quantiles of the
/// uniforms) given the correlation path.
pub fn copula_loglik_scores(r_series: &[DMatrix<f64>], scores: &DMatrix<f64>, nu: f64) -> f64 {
    let k = scores.ncols();
    let kf = k as f64;
    let joint_const = ln_gamma(0.5 * (nu + kf)) - ln_gamma(0.5 * nu) - 0.5 * kf * (nu * std::f64::consts::PI).ln();
    let margin_const = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln();
    let mut chol = vec![0.0; k * k];
    let mut z = vec![0.0; k];
    let mut total = 0.0;
    for (t, r) in r_series.iter().enumerate() {
        let Some(log_det) = cholesky_into(r, &mut chol) else {
            return f64::NEG_INFINITY;
        };
        // Forward substitution L z = x.
        let mut quad = 0.0;
        let mut margins = 0.0;
        for i in 0..k {
            let x = scores[(t, i)];
            let mut s = x;
            for j in 0..i {
                s -= chol[i * k + j] * z[j];
            }
            z[i] = s / chol[i * k + i];
            quad += z[i] * z[i];
            margins += margin_const - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p();
        }
        total += joint_const - 0.5 * log_det - 0.5 * (nu + kf) * (quad / nu).ln_1p() - margins;
    }
    total
}

pub fn copula_loglik(r_series: &[DMatrix<f64>], uniforms: &DMatrix<f64>, nu: f64) -> f64 {
    copula_loglik_scores(r_series, &t_scores(uniforms, nu), nu)
}

/// Lower Cholesky factor into a row-major buffer; returns ln det or `None` if
/// the matrix is not positive definite.
fn cholesky_into(m: &DMatrix<f64>, out: &mut [f64]) -> Option<f64> {
    let k = m.nrows();
    let mut log_det = 0.0;
    for i in 0..k {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= out[i * k + p] * out[j * k + p];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                let l = s.sqrt();
                out[i * k + i] = l;
                log_det += 2.0 * l.ln();
            } else {
                out[i * k + j] = s / out[j * k + j];
            }
        }
    }
    Some(log_det)
}

#[derive(Debug, Clone)]
pub struct DccFitOptions {
    pub min_length: usize,
    pub nu_bounds: (f64, f64),
    /// Golden-section tolerance on ln(ν − 2).
    pub nu_tolerance: f64,
    pub optimizer: NelderMeadOptions,
}

impl Default for DccFitOptions {
    fn default() -> Self {
        Self {
            min_length: 200,
            nu_bounds: (2.1, 100.0),
            nu_tolerance: 1e-3,
            optimizer: NelderMeadOptions {
                max_evaluations: 4_000,
                f_tolerance: 1e-9,
                x_tolerance: 1e-7,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccFitDiagnostics {
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccFit {
    pub params: DccParams,
    pub loglik: f64,
    pub diagnostics: DccFitDiagnostics,
}

/// Softmax-style map onto {c, d ≥ 0, Σc + Σd < 1}; the implicit last slot is
/// the weight on Q̄.
fn decode_weights(x: &[f64], orders: DccOrders) -> (Vec<f64>, Vec<f64>) {
    let m = x.iter().copied().fold(0.0f64, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let denom = (-m).exp() + exps.iter().sum::<f64>();
    let w: Vec<f64> = exps.iter().map(|e| e / denom).collect();
    (w[..orders.m].to_vec(), w[orders.m..].to_vec())
}

fn encode_weights(c: &[f64], d: &[f64]) -> Vec<f64> {
    let slack = 1.0 - c.iter().sum::<f64>() - d.iter().sum::<f64>();
    c.iter().chain(d).map(|v| (v / slack).ln()).collect()
}

/// Second-stage estimation: correlation targeting for Q̄, then (c, d, ν)
/// maximizing the t-copula likelihood. ν is profiled out by golden-section
/// search over ln(ν − 2); (c, d) are found by simplex search at each ν.
pub fn fit_dcc(
    shocks: &DMatrix<f64>,
    uniforms: &DMatrix<f64>,
    orders: DccOrders,
    options: &DccFitOptions,
) -> Result<DccFit> {
    let (t_len, k) = shocks.shape();
    if t_len < options.min_length {
        return Err(Error::Estimation {
            message: format!("{t_len} observations below the minimum of {}", options.min_length),
            best_params: vec![],
            best_loglik: f64::NAN,
            converged: false,
        });
    }
    if k < 2 || uniforms.shape() != shocks.shape() {
        return Err(Error::Domain("need matching T×k shock and uniform matrices with k ≥ 2".into()));
    }
    if orders.m + orders.n == 0 || orders.m > 3 || orders.n > 3 {
        return Err(Error::Config("DCC orders must satisfy 1 ≤ m + n and m, n ≤ 3".into()));
    }
    let qbar = correlation_matrix(shocks);
    let objective = |x: &[f64], scores: &DMatrix<f64>, nu: f64| -> f64 {
        let (c, d) = decode_weights(x, orders);
        let params = DccParams {
            c,
            d,
            qbar: qbar.clone(),
            nu_copula: nu,
        };
        match dcc_filter(&params, shocks) {
            Ok(state) => -copula_loglik_scores(&state.r_series, scores, nu),
            Err(_) => f64::INFINITY,
        }
    };

    let c0: Vec<f64> = (0..orders.m).map(|j| if j == 0 { 0.05 } else { 0.01 }).collect();
    let d0: Vec<f64> = (0..orders.n).map(|j| if j == 0 { 0.85 } else { 0.01 }).collect();
    let start = encode_weights(&c0, &d0);
    let steps = vec![1.0; start.len()];
    let warm = std::cell::RefCell::new((start, 0usize, true));

    let inner = |nu: f64| -> (Vec<f64>, f64, bool) {
        let scores = t_scores(uniforms, nu);
        let x0 = warm.borrow().0.clone();
        let m = nelder_mead(|x| objective(x, &scores, nu), &x0, &steps, &options.optimizer);
        let mut w = warm.borrow_mut();
        w.0 = m.x.clone();
        w.1 += m.evaluations;
        (m.x, m.value, m.converged)
    };

    let (lo, hi) = options.nu_bounds;
    let (best_y, _) = golden_section(
        |y| inner(2.0 + y.exp()).1,
        (lo - 2.0).ln(),
        (hi - 2.0).ln(),
        options.nu_tolerance,
    );
    let nu = 2.0 + best_y.exp();
    let (x, value, converged) = inner(nu);
    let (c, d) = decode_weights(&x, orders);
    let evaluations = warm.borrow().1;
    Ok(DccFit {
        params: DccParams {
            c,
            d,
            qbar,
            nu_copula: nu,
        },
        loglik: -value,
        diagnostics: DccFitDiagnostics {
            converged,
            evaluations,
        },
    })
}

/// A bivariate copula C(u, v).
pub trait BivariateCopula {
    fn cdf(&self, u: f64, v: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Independence;

impl BivariateCopula for Independence {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        u * v
    }
}

/// Upper Fréchet bound.
#[derive(Debug, Clone, Copy)]
pub struct Comonotone;

impl BivariateCopula for Comonotone {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        u.min(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTCopula {
    pub rho: f64,
    pub nu: f64,
}

impl StudentTCopula {
    pub fn new(rho: f64, nu: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::Domain(format!("|rho| = {} must be below 1", rho.abs())));
        }
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(Error::Domain(format!("nu = {nu} must exceed 2")));
        }
        Ok(Self { rho, nu })
    }
}

impl BivariateCopula for StudentTCopula {
    fn cdf(&self, u: f64, v: f64) -> f64 {
        t_cdf_unchecked(u, v, self.rho, self.nu)
    }
}

/// Bivariate Student-t copula CDF.
pub fn t_copula_cdf(u: f64, v: f64, rho: f64, nu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("copula arguments ({u}, {v}) outside [0, 1]")));
    }
    Ok(StudentTCopula::new(rho, nu)?.cdf(u, v))
}

const CDF_TOLERANCE: f64 = 1e-11;

/// P(X ≤ a, Y ≤ b) for a standard bivariate t reduces to a single integral
/// over the first coordinate of the conditional t(ν+1) CDF of the second:
/// Y | X = x ~ ρx + √((ν + x²)(1 − ρ²)/(ν + 1)) · t(ν+1).
/// The integral runs over the smaller of the two margins, which makes the
/// result exactly symmetric in (u, v).
fn t_cdf_unchecked(u: f64, v: f64, rho: f64, nu: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return v;
    }
    if v >= 1.0 {
        return u;
    }
    let (outer, inner) = if u <= v { (u, v) } else { (v, u) };
    let a = student_t::quantile(outer, nu);
    let b = student_t::quantile(inner, nu);
    let one_minus = 1.0 - rho * rho;
    let conditional = |x: f64| {
        let scale = ((nu + x * x) * one_minus / (nu + 1.0)).sqrt();
        student_t::cdf((b - rho * x) / scale, nu + 1.0)
    };
    // x = a − L (1 − s)/s maps s ∈ (0, 1] onto (−∞, a].
    let length = a.abs().max(1.0);
    let integrand = |s: f64| {
        let x = a - length * (1.0 - s) / s;
        let jac = length / (s * s);
        let f = student_t::pdf(x, nu) * jac;
        if f == 0.0 {
            0.0
        } else {
            f * conditional(x)
        }
    };
    let value = integrate(integrand, 0.0, 1.0, CDF_TOLERANCE, 400).value;
    value.clamp((u + v - 1.0).max(0.0), outer)
}

/// Draws `count` pairs from the bivariate t copula.
pub fn t_copula_sample(rho: f64, nu: f64, count: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    StudentTCopula::new(rho, nu)?;
    let mut rng = SimRng::new(seed);
    let s = (1.0 - rho * rho).sqrt();
    Ok((0..count)
        .map(|_| {
            let (x, y) = bivariate_t_draw(&mut rng, rho, s, nu);
            (student_t::cdf(x, nu), student_t::cdf(y, nu))
        })
        .collect())
}

/// One draw from the standard bivariate t in score space.
pub fn bivariate_t_draw(rng: &mut SimRng, rho: f64, sqrt_one_minus_rho2: f64, nu: f64) -> (f64, f64) {
    let z1 = rng.standard_normal();
    let z2 = rng.standard_normal();
    let w = (rng.chi_square(nu) / nu).sqrt();
    (z1 / w, (rho * z1 + sqrt_one_minus_rho2 * z2) / w)
}

/// Cholesky factor of a correlation matrix; if rounding has made it
/// indefinite, eigenvalues are clipped at 1e-10 and the unit diagonal restored.
pub fn psd_cholesky(corr: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = corr.clone().cholesky() {
        return ch.l();
    }
    log::warn!("correlation matrix not positive definite; clipping eigenvalues at 1e-10");
    let eig = SymmetricEigen::new(corr.clone());
    let clipped = eig.eigenvalues.map(|v| v.max(1e-10));
    let mut repaired = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let k = repaired.nrows();
    let sd: Vec<f64> = (0..k).map(|i| repaired[(i, i)].sqrt()).collect();
    for i in 0..k {
        for j in 0..k {
            repaired[(i, j)] /= sd[i] * sd[j];
        }
    }
    repaired
        .cholesky()
        .expect("clipped matrix is positive definite")
        .l()
}

/// One k-variate t-copula draw given the Cholesky factor of the correlation.
pub fn t_copula_draw_k(chol: &DMatrix<f64>, nu: f64, rng: &mut SimRng) -> Vec<f64> {
    let k = chol.nrows();
    let z: Vec<f64> = (0..k).map(|_| rng.standard_normal()).collect();
    let w = (rng.chi_square(nu) / nu).sqrt();
    (0..k)
        .map(|i| {
            let x: f64 = (0..=i).map(|j| chol[(i, j)] * z[j]).sum();
            student_t::cdf(x / w, nu).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        })
        .collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, d: f64, qbar: DMatrix<f64>) -> DccParams {
        DccParams {
            c: vec![c],
            d: vec![d],
            qbar,
            nu_copula: 8.0,
        }
    }

    #[test]
    fn zero_dynamics_returns_normalized_qbar() {
        let qbar = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let shocks = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 2.0, -0.3, 0.1]);
        let state = dcc_filter(&params(0.0, 0.0, qbar), &shocks).unwrap();
        for r in &state.r_series {
            assert!((r[(0, 1)] - 0.6 / 1.0f64.sqrt()).abs() < 1e-15);
            assert_eq!(r[(0, 0)], 1.0);
        }
    }

    #[test]
    fn identical_columns_are_perfectly_correlated() {
        let col = [0.3, -1.2, 0.8, 1.5, -0.4, 0.0, 2.1];
        let shocks = DMatrix::from_fn(col.len(), 2, |t, _| col[t]);
        let qbar = correlation_matrix(&shocks);
        let state = dcc_filter(&params(0.05, 0.9, qbar), &shocks).unwrap();
        for r in &state.r_series {
            assert!((r[(0, 1)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_qbar_diagonal_rejected() {
        let qbar = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let mut p = params(0.0, 0.0, qbar);
        p.qbar[(1, 1)] = -1.0;
        assert!(matches!(
            dcc_filter(&p, &DMatrix::zeros(3, 2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        let qbar = DMatrix::identity(2, 2);
        assert!(params(0.5, 0.6, qbar.clone()).validate().is_err());
        assert!(params(-0.1, 0.6, qbar).validate().is_err());
    }

    #[test]
    fn weights_round_trip() {
        let orders = DccOrders { m: 1, n: 2 };
        let x = encode_weights(&[0.04], &[0.7, 0.1]);
        let (c, d) = decode_weights(&x, orders);
        assert!((c[0] - 0.04).abs() < 1e-14);
        assert!((d[0] - 0.7).abs() < 1e-14 && (d[1] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn copula_boundaries_and_rejections() {
        assert_eq!(t_copula_cdf(0.3, 1.0, 0.5, 4.0).unwrap(), 0.3);
        assert_eq!(t_copula_cdf(1.0, 0.7, 0.5, 4.0).unwrap(), 0.7);
        assert_eq!(t_copula_cdf(0.0, 0.7, 0.5, 4.0).unwrap(), 0.0);
        assert!(t_copula_cdf(0.3, 0.3, 1.0, 4.0).is_err());
        assert!(t_copula_cdf(0.3, 0.3, 0.2, 2.0).is_err());
    }

    #[test]
    fn copula_is_exchangeable() {
        for &(u, v) in &[(0.05, 0.4), (0.9, 0.2), (0.001, 0.999)] {
            assert_eq!(
                t_copula_cdf(u, v, 0.6, 5.0).unwrap(),
                t_copula_cdf(v, u, 0.6, 5.0).unwrap()
            );
        }
    }

    #[test]
    fn large_nu_and_zero_rho_approach_independence() {
        let c = t_copula_cdf(0.3, 0.6, 0.0, 1e5).unwrap();
        assert!((c - 0.18).abs() < 1e-4);
    }

    #[test]
    fn median_orthant_closed_form() {
        // For elliptical laws P(X ≤ 0, Y ≤ 0) = 1/4 + arcsin(ρ)/(2π).
        for &rho in &[-0.7, -0.2, 0.0, 0.4, 0.95] {
            let exact = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            let c = t_copula_cdf(0.5, 0.5, rho, 4.5).unwrap();
            assert!((c - exact).abs() < 1e-9, "rho={rho} c={c} exact={exact}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = t_copula_sample(0.4, 6.0, 100, 9).unwrap();
        let b = t_copula_sample(0.4, 6.0, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|(u, v)| *u > 0.0 && *u < 1.0 && *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn clipping_repairs_indefinite_matrix() {
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(bad.clone().cholesky().is_none());
        let l = psd_cholesky(&bad);
        let rebuilt = &l * l.transpose();
        for i in 0..3 {
            assert!((rebuilt[(i, i)] - 1.0).abs() < 1e-9);
        }
    }
}

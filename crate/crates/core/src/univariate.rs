//! ARMA conditional mean with eGARCH conditional variance and standardized
//! Student-t innovations, fitted by maximum likelihood per entity.
//!
//! Mean:      μ_t = μ0 + Σ φ_j r_{t−j} + Σ θ_j y_{t−j},   y_t = r_t − μ_t
//! Variance:  ln h_t = ω + Σ (α_j ε_{t−j} + γ_j (|ε_{t−j}| − E|ε|)) + Σ β_j ln h_{t−j}
//! Shocks:    ε_t = y_t / √h_t  ~ standardized t(ν)
//!
//! Pre-sample values: lagged returns equal the sample mean, lagged innovations
//! are zero, lagged log-variances equal the log sample variance of the
//! innovations, and lagged shocks contribute nothing (ε = 0, |ε| = E|ε|).

use serde::{Deserialize, Serialize};

use crate::optim::{nelder_mead, newton_polish, NelderMeadOptions, NewtonOptions};
use crate::stats::{mean, variance};
use crate::student_t;
use crate::{Error, Result};

const NU_MIN: f64 = 2.1;
const NU_MAX: f64 = 100.0;
/// ln h beyond this overflows `exp` to a useless scale.
const MAX_LOG_VARIANCE: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    pub mu0: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl ArmaParams {
    pub fn white_noise(mu0: f64) -> Self {
        Self {
            mu0,
            ar: vec![],
            ma: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() || self.ar.iter().chain(&self.ma).any(|v| !v.is_finite()) {
            return Err(Error::Domain("ARMA parameters must be finite".into()));
        }
        if !is_stationary(&self.ar) {
            return Err(Error::Domain(format!("AR polynomial {:?} is not stationary", self.ar)));
        }
        let neg_ma: Vec<f64> = self.ma.iter().map(|t| -t).collect();
        if !is_stationary(&neg_ma) {
            return Err(Error::Domain(format!("MA polynomial {:?} is not invertible", self.ma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgarchParams {
    pub omega: f64,
    /// Sign (leverage) coefficients on ε_{t−j}.
    pub alpha: Vec<f64>,
    /// Magnitude coefficients on |ε_{t−j}| − E|ε|.
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub nu: f64,
}

impl EgarchParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.gamma.len() {
            return Err(Error::Domain("alpha and gamma must have the same length".into()));
        }
        let all = std::iter::once(&self.omega)
            .chain(&self.alpha)
            .chain(&self.gamma)
            .chain(&self.beta);
        if all.clone().any(|v| !v.is_finite()) || !self.nu.is_finite() {
            return Err(Error::Domain("eGARCH parameters must be finite".into()));
        }
        let persistence: f64 = self.beta.iter().sum();
        if persistence.abs() >= 1.0 {
            return Err(Error::Domain(format!("sum of beta {persistence} outside (-1, 1)")));
        }
        if self.nu <= 2.0 {
            return Err(Error::Domain(format!("nu = {} must exceed 2", self.nu)));
        }
        Ok(())
    }
}

/// ARMA(p, q) mean and eGARCH(r, s) variance orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalOrders {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
}

impl Default for MarginalOrders {
    fn default() -> Self {
        Self { p: 1, q: 0, r: 1, s: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub evaluations: usize,
    pub restarts: usize,
    /// Σβ, reported for convenience.
    pub persistence: f64,
    /// The optimum lies on the invertibility boundary of the variance filter.
    #[serde(default)]
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub orders: MarginalOrders,
    pub arma: ArmaParams,
    pub egarch: EgarchParams,
    #[serde(skip)]
    pub cond_mean: Vec<f64>,
    #[serde(skip)]
    pub cond_var: Vec<f64>,
    #[serde(skip)]
    pub std_resid: Vec<f64>,
    pub loglik: f64,
    pub diagnostics: FitDiagnostics,
}

impl MarginalModel {
    pub fn len(&self) -> usize {
        self.cond_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cond_mean.is_empty()
    }

    /// Return-space quantile at `level` for week `t`.
    pub fn quantile(&self, t: usize, level: f64) -> f64 {
        self.cond_mean[t] + self.cond_var[t].sqrt() * student_t::std_quantile(level, self.egarch.nu)
    }

    /// Parameters in the order `[mu0, ar.., ma.., omega, alpha.., gamma.., beta.., nu]`.
    pub fn natural_params(&self) -> Vec<f64> {
        flatten(&self.arma, &self.egarch)
    }
}

/// Sequences fed to the filters before the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Presample {
    pub lagged_return: f64,
    pub log_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmaPath {
    pub cond_mean: Vec<f64>,
    pub innovations: Vec<f64>,
}

pub fn arma_filter(params: &ArmaParams, returns: &[f64]) -> Result<ArmaPath> {
    arma_filter_with(params, returns, mean(returns))
}

pub fn arma_filter_with(params: &ArmaParams, returns: &[f64], lagged_return: f64) -> Result<ArmaPath> {
    params.validate()?;
    let order = params.ar.len().max(params.ma.len());
    if returns.len() <= order {
        return Err(Error::Domain(format!(
            "series of length {} too short for ARMA order {order}",
            returns.len()
        )));
    }
    Ok(arma_recursion(params, returns, lagged_return))
}

fn arma_recursion(params: &ArmaParams, returns: &[f64], lagged_return: f64) -> ArmaPath {
    let n = returns.len();
    let mut cond_mean = Vec::with_capacity(n);
    let mut innovations = Vec::with_capacity(n);
    for t in 0..n {
        let mut mu = params.mu0;
        for (j, phi) in params.ar.iter().enumerate() {
            mu += phi * if t > j { returns[t - j - 1] } else { lagged_return };
        }
        for (j, theta) in params.ma.iter().enumerate() {
            if t > j {
                mu += theta * innovations[t - j - 1];
            }
        }
        cond_mean.push(mu);
        innovations.push(returns[t] - mu);
    }
    ArmaPath {
        cond_mean,
        innovations,
    }
}

pub fn egarch_filter(params: &EgarchParams, innovations: &[f64]) -> Result<Vec<f64>> {
    egarch_filter_with(params, innovations, variance(innovations).ln())
}

pub fn egarch_filter_with(params: &EgarchParams, innovations: &[f64], presample_log_var: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if let Some(i) = innovations.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            index: i,
            message: "non-finite innovation".into(),
        });
    }
    let abs_mean = student_t::std_abs_mean(params.nu);
    let (log_h, _) = egarch_recursion(params, innovations, presample_log_var, abs_mean)?;
    Ok(log_h.into_iter().map(f64::exp).collect())
}

/// Returns (ln h_t, ε_t).
fn egarch_recursion(
    params: &EgarchParams,
    innovations: &[f64],
    presample_log_var: f64,
    abs_mean: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = innovations.len();
    let mut log_h = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n);
    for t in 0..n {
        let mut lh = params.omega;
        for (j, (a, g)) in params.alpha.iter().zip(&params.gamma).enumerate() {
            if t > j {
                let e = eps[t - j - 1];
                lh += a * e + g * (f64::abs(e) - abs_mean);
            }
        }
        for (j, b) in params.beta.iter().enumerate() {
            lh += b * if t > j { log_h[t - j - 1] } else { presample_log_var };
        }
        if !lh.is_finite() || lh.abs() > MAX_LOG_VARIANCE {
            return Err(Error::Numerical {
                index: t,
                message: format!("log-variance {lh} overflows"),
            });
        }
        log_h.push(lh);
        eps.push(innovations[t] / (0.5 * lh).exp());
    }
    Ok((log_h, eps))
}

/// Student-t log-likelihood of a return series under the given parameters,
/// using the data-derived pre-sample values.
pub fn marginal_loglik(returns: &[f64], arma: &ArmaParams, egarch: &EgarchParams) -> Result<f64> {
    arma.validate()?;
    egarch.validate()?;
    let path = arma_recursion(arma, returns, mean(returns));
    let presample = variance(&path.innovations).ln();
    let abs_mean = student_t::std_abs_mean(egarch.nu);
    let (log_h, eps) = egarch_recursion(egarch, &path.innovations, presample, abs_mean)?;
    Ok(loglik_terms(&log_h, &eps, egarch.nu))
}

/// True if some coordinate step of 1e-6 leaves the feasible region.
fn near_infeasible<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> bool {
    let mut work = x.to_vec();
    (0..x.len()).any(|i| {
        [1e-6, -1e-6].iter().any(|d| {
            work[i] = x[i] + d;
            let v = f(&work);
            work[i] = x[i];
            !v.is_finite()
        })
    })
}

/// Logistic coordinate of ν for a position `frac` within (NU_MIN, NU_MAX).
fn nu_coordinate(frac: f64) -> f64 {
    (frac / (1.0 - frac)).ln()
}

struct Polished {
    best: crate::optim::Minimum,
    converged: bool,
    on_boundary: bool,
    evaluations: usize,
    restarts: usize,
}

/// The likelihood often has a long curved ridge along which the simplex
/// crawls; Newton steps follow it and certify smooth interior optima. Optima
/// on the invertibility boundary, or on a crease where an innovation is
/// exactly zero, are certified instead by a converged simplex restart that
/// cannot improve on them.
fn polish<F: Fn(&[f64]) -> f64>(
    objective: &F,
    mut best: crate::optim::Minimum,
    steps: &[f64],
    options: &MarginalFitOptions,
) -> Polished {
    let mut out = Polished {
        best: best.clone(),
        converged: false,
        on_boundary: false,
        evaluations: 0,
        restarts: 0,
    };
    for _ in 0..options.polish_restarts {
        out.restarts += 1;
        let q = newton_polish(objective, &best.x, &NewtonOptions::default());
        out.evaluations += q.evaluations;
        if q.value < best.value {
            best = q.clone();
        }
        if q.converged {
            out.converged = true;
            break;
        }
        let small: Vec<f64> = steps.iter().map(|s| 0.05 * s).collect();
        let m = nelder_mead(objective, &best.x, &small, &options.optimizer);
        out.evaluations += m.evaluations;
        let improvement = best.value - m.value;
        let settled = m.converged;
        if m.value < best.value {
            best = m;
        }
        if improvement <= 1e-9 * (1.0 + best.value.abs()) {
            out.on_boundary = near_infeasible(objective, &best.x);
            out.converged = settled || out.on_boundary;
            break;
        }
    }
    out.best = best;
    out
}

/// Corner optimum in ν. When ν has run to an end of its range the likelihood
/// is flat in the logistic coordinate and no interior certificate exists, so
/// ν is pinned at the bound, the other coordinates are polished, and the pin
/// is accepted only if moving ν inward does not improve the fit.
fn pinned_nu_polish<F: Fn(&[f64]) -> f64>(
    objective: &F,
    x: &[f64],
    steps: &[f64],
    options: &MarginalFitOptions,
) -> Option<Polished> {
    let last = x.len() - 1;
    let frac = 1.0 / (1.0 + (-x[last]).exp());
    let (pin, inward) = if frac > 1.0 - 1e-3 {
        (1.0 - 1e-6, 1.0 - 1e-2)
    } else if frac < 1e-3 {
        (1e-6, 1e-2)
    } else {
        return None;
    };
    let with_nu = |y: &[f64], nu_x: f64| {
        let mut z = y.to_vec();
        z.push(nu_x);
        z
    };
    let reduced = |y: &[f64]| objective(&with_nu(y, nu_coordinate(pin)));
    let start = crate::optim::Minimum {
        x: x[..last].to_vec(),
        value: reduced(&x[..last]),
        evaluations: 1,
        converged: false,
    };
    let mut p = polish(&reduced, start, &steps[..last], options);
    if !p.converged || objective(&with_nu(&p.best.x, nu_coordinate(inward))) < p.best.value {
        return None;
    }
    p.best.x = with_nu(&p.best.x, nu_coordinate(pin));
    p.evaluations += 2;
    Some(p)
}

/// Log-likelihood restricted to parameters whose variance filter is
/// empirically invertible: the average of ln|∂ ln h_t / ∂ ln h_{t−1}|,
/// approximated by ln|Σβ − Σ(α_j ε_{t−j} + γ_j |ε_{t−j}|)/2|, must be negative.
/// The approximation is exact for first-order variance dynamics.
fn invertible_loglik(returns: &[f64], arma: &ArmaParams, egarch: &EgarchParams) -> Option<f64> {
    arma.validate().ok()?;
    egarch.validate().ok()?;
    let path = arma_recursion(arma, returns, mean(returns));
    let presample = variance(&path.innovations).ln();
    let abs_mean = student_t::std_abs_mean(egarch.nu);
    let (log_h, eps) = egarch_recursion(egarch, &path.innovations, presample, abs_mean).ok()?;
    let persistence: f64 = egarch.beta.iter().sum();
    let mut lyapunov = 0.0;
    for t in 0..eps.len() {
        let mut slope = persistence;
        for (j, (a, g)) in egarch.alpha.iter().zip(&egarch.gamma).enumerate() {
            if t > j {
                let e = eps[t - j - 1];
                slope -= 0.5 * (a * e + g * e.abs());
            }
        }
        lyapunov += slope.abs().ln();
    }
    if lyapunov >= 0.0 {
        return None;
    }
    let ll = loglik_terms(&log_h, &eps, egarch.nu);
    ll.is_finite().then_some(ll)
}

fn loglik_terms(log_h: &[f64], eps: &[f64], nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let constant = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
    let k = 0.5 * (nu + 1.0);
    let inv = 1.0 / (nu - 2.0);
    let mut sum = 0.0;
    for (lh, e) in log_h.iter().zip(eps) {
        sum += constant - k * (e * e * inv).ln_1p() - 0.5 * lh;
    }
    sum
}

/// Stationarity of `1 − Σ a_j z^j` via the Durbin–Levinson step-down: every
/// implied partial autocorrelation must lie strictly inside (−1, 1).
pub fn is_stationary(coeffs: &[f64]) -> bool {
    partials_from_coeffs(coeffs).is_some()
}

fn partials_from_coeffs(coeffs: &[f64]) -> Option<Vec<f64>> {
    let mut a = coeffs.to_vec();
    let mut partials = vec![0.0; a.len()];
    for k in (0..a.len()).rev() {
        let pk = a[k];
        if !(pk.abs() < 1.0) {
            return None;
        }
        partials[k] = pk;
        let denom = 1.0 - pk * pk;
        let prev: Vec<f64> = (0..k).map(|j| (a[j] + pk * a[k - 1 - j]) / denom).collect();
        a.truncate(k);
        a.copy_from_slice(&prev);
    }
    Some(partials)
}

fn coeffs_from_partials(partials: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(partials.len());
    for (k, &pk) in partials.iter().enumerate() {
        let next: Vec<f64> = (0..k).map(|j| a[j] - pk * a[k - 1 - j]).collect();
        a = next;
        a.push(pk);
    }
    a
}

#[derive(Debug, Clone)]
pub struct MarginalFitOptions {
    pub min_length: usize,
    pub optimizer: NelderMeadOptions,
    /// Rounds of Newton plus simplex refinement after the multi-start pass.
    pub polish_restarts: usize,
}

impl Default for MarginalFitOptions {
    fn default() -> Self {
        Self {
            min_length: 200,
            optimizer: NelderMeadOptions {
                max_evaluations: 40_000,
                f_tolerance: 1e-13,
                x_tolerance: 1e-7,
            },
            polish_restarts: 30,
        }
    }
}

struct Codec {
    orders: MarginalOrders,
}

impl Codec {
    fn decode(&self, x: &[f64]) -> (ArmaParams, EgarchParams) {
        let o = self.orders;
        let mut it = x.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (0..n).map(|_| it.next().unwrap()).collect() };
        let mu0 = take(1)[0];
        let ar = coeffs_from_partials(&take(o.p).into_iter().map(f64::tanh).collect::<Vec<_>>());
        let ma: Vec<f64> = coeffs_from_partials(&take(o.q).into_iter().map(f64::tanh).collect::<Vec<_>>())
            .into_iter()
            .map(|v| -v)
            .collect();
        let omega = take(1)[0];
        let alpha = take(o.r);
        let gamma = take(o.r);
        let beta = coeffs_from_partials(&take(o.s).into_iter().map(f64::tanh).collect::<Vec<_>>());
        let nu = NU_MIN + (NU_MAX - NU_MIN) / (1.0 + (-take(1)[0]).exp());
        (
            ArmaParams { mu0, ar, ma },
            EgarchParams {
                omega,
                alpha,
                gamma,
                beta,
                nu,
            },
        )
    }

    fn encode(&self, arma: &ArmaParams, egarch: &EgarchParams) -> Vec<f64> {
        let atanh_all = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|p| p.clamp(-0.999, 0.999).atanh()).collect() };
        let mut x = vec![arma.mu0];
        x.extend(atanh_all(partials_from_coeffs(&arma.ar).expect("stationary start")));
        let neg_ma: Vec<f64> = arma.ma.iter().map(|t| -t).collect();
        x.extend(atanh_all(partials_from_coeffs(&neg_ma).expect("invertible start")));
        x.push(egarch.omega);
        x.extend(&egarch.alpha);
        x.extend(&egarch.gamma);
        x.extend(atanh_all(partials_from_coeffs(&egarch.beta).expect("stationary start")));
        let frac = ((egarch.nu - NU_MIN) / (NU_MAX - NU_MIN)).clamp(1e-6, 1.0 - 1e-6);
        x.push((frac / (1.0 - frac)).ln());
        x
    }

    fn steps(&self) -> Vec<f64> {
        let o = self.orders;
        let mut s = vec![0.05];
        s.extend(std::iter::repeat_n(0.15, o.p + o.q));
        s.push(0.1);
        s.extend(std::iter::repeat_n(0.05, 2 * o.r));
        s.extend(std::iter::repeat_n(0.3, o.s));
        s.push(0.5);
        s
    }
}

fn flatten(arma: &ArmaParams, egarch: &EgarchParams) -> Vec<f64> {
    let mut v = vec![arma.mu0];
    v.extend(&arma.ar);
    v.extend(&arma.ma);
    v.push(egarch.omega);
    v.extend(&egarch.alpha);
    v.extend(&egarch.gamma);
    v.extend(&egarch.beta);
    v.push(egarch.nu);
    v
}

/// Inverse of [`MarginalModel::natural_params`].
pub fn unflatten(orders: MarginalOrders, v: &[f64]) -> (ArmaParams, EgarchParams) {
    let mut it = v.iter().copied();
    let mut take = |n: usize| -> Vec<f64> { (0..n).map(|_| it.next().unwrap()).collect() };
    let mu0 = take(1)[0];
    let ar = take(orders.p);
    let ma = take(orders.q);
    let omega = take(1)[0];
    let alpha = take(orders.r);
    let gamma = take(orders.r);
    let beta = take(orders.s);
    let nu = take(1)[0];
    (
        ArmaParams { mu0, ar, ma },
        EgarchParams {
            omega,
            alpha,
            gamma,
            beta,
            nu,
        },
    )
}

/// Maps parameters fitted on `returns / scale` back to the original units.
fn unscale(arma: &ArmaParams, egarch: &EgarchParams, scale: f64) -> (ArmaParams, EgarchParams) {
    let persistence: f64 = egarch.beta.iter().sum();
    (
        ArmaParams {
            mu0: arma.mu0 * scale,
            ..arma.clone()
        },
        EgarchParams {
            omega: egarch.omega + 2.0 * scale.ln() * (1.0 - persistence),
            ..egarch.clone()
        },
    )
}

fn start_points(orders: MarginalOrders, scaled: &[f64]) -> Vec<(ArmaParams, EgarchParams)> {
    let m = mean(scaled);
    let log_var = variance(scaled).ln();
    // (beta_1, gamma_1, alpha_1, nu) triples for the three fixed restarts.
    let jitters = [(0.85, 0.15, 0.0, 8.0), (0.5, 0.25, -0.05, 5.0), (0.95, 0.05, 0.05, 15.0)];
    jitters
        .iter()
        .map(|&(b1, g1, a1, nu)| {
            let beta: Vec<f64> = (0..orders.s).map(|j| if j == 0 { b1 } else { 0.0 }).collect();
            let persistence: f64 = beta.iter().sum();
            (
                ArmaParams {
                    mu0: m,
                    ar: vec![0.0; orders.p],
                    ma: vec![0.0; orders.q],
                },
                EgarchParams {
                    omega: (1.0 - persistence) * log_var,
                    alpha: (0..orders.r).map(|j| if j == 0 { a1 } else { 0.0 }).collect(),
                    gamma: (0..orders.r).map(|j| if j == 0 { g1 } else { 0.0 }).collect(),
                    beta,
                    nu,
                },
            )
        })
        .collect()
}

/// Maximum-likelihood fit by simplex search over transformed parameters.
pub fn fit_marginal(returns: &[f64], orders: MarginalOrders, options: &MarginalFitOptions) -> Result<MarginalModel> {
    let estimation_error = |message: String| Error::Estimation {
        message,
        best_params: vec![],
        best_loglik: f64::NAN,
        converged: false,
    };
    if returns.len() < options.min_length {
        return Err(estimation_error(format!(
            "series length {} below the minimum of {}",
            returns.len(),
            options.min_length
        )));
    }
    if orders.p.max(orders.q).max(orders.r).max(orders.s) > 3 {
        return Err(Error::Config("model orders above 3 are not supported".into()));
    }
    let scale = variance(returns).sqrt();
    if !(scale > 1e-12 && scale.is_finite()) {
        return Err(estimation_error("series has no variation".into()));
    }
    let scaled: Vec<f64> = returns.iter().map(|r| r / scale).collect();
    let codec = Codec { orders };
    let objective = |x: &[f64]| -> f64 {
        let (arma, egarch) = codec.decode(x);
        if egarch.beta.iter().sum::<f64>() <= -1.0 {
            return f64::INFINITY;
        }
        match invertible_loglik(&scaled, &arma, &egarch) {
            Some(ll) => -ll,
            None => f64::INFINITY,
        }
    };

    let steps = codec.steps();
    let mut evaluations = 0;
    let mut best: Option<crate::optim::Minimum> = None;
    for (arma, egarch) in start_points(orders, &scaled) {
        let start = codec.encode(&arma, &egarch);
        let m = nelder_mead(objective, &start, &steps, &options.optimizer);
        evaluations += m.evaluations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let first = polish(&objective, best.expect("at least one start point"), &steps, options);
    evaluations += first.evaluations;
    let mut restarts = first.restarts;
    let (mut best, mut converged, mut on_boundary) = (first.best, first.converged, first.on_boundary);
    if !converged {
        if let Some(p) = pinned_nu_polish(&objective, &best.x, &steps, options) {
            evaluations += p.evaluations;
            restarts += p.restarts;
            best = p.best;
            converged = true;
            on_boundary = true;
        }
    }

    let (arma_s, egarch_s) = codec.decode(&best.x);
    let (arma, egarch) = unscale(&arma_s, &egarch_s, scale);
    let mut model = assemble(returns, orders, arma, egarch, converged, evaluations, restarts);
    if let Ok(m) = model.as_mut() {
        m.diagnostics.on_boundary = on_boundary;
    }
    match model {
        Ok(m) if m.diagnostics.converged => Ok(m),
        Ok(m) => Err(Error::Estimation {
            message: "optimizer did not converge within the evaluation budget".into(),
            best_params: m.natural_params(),
            best_loglik: m.loglik,
            converged: false,
        }),
        Err(e) => Err(estimation_error(format!("fitted parameters are unusable: {e}"))),
    }
}

fn assemble(
    returns: &[f64],
    orders: MarginalOrders,
    arma: ArmaParams,
    egarch: EgarchParams,
    converged: bool,
    evaluations: usize,
    restarts: usize,
) -> Result<MarginalModel> {
    let path = arma_filter(&arma, returns)?;
    let cond_var = egarch_filter(&egarch, &path.innovations)?;
    let std_resid: Vec<f64> = path
        .innovations
        .iter()
        .zip(&cond_var)
        .map(|(y, h)| y / h.sqrt())
        .collect();
    let loglik = marginal_loglik(returns, &arma, &egarch)?;
    let persistence = egarch.beta.iter().sum();
    Ok(MarginalModel {
        orders,
        arma,
        egarch,
        cond_mean: path.cond_mean,
        cond_var,
        std_resid,
        loglik,
        diagnostics: FitDiagnostics {
            converged,
            evaluations,
            restarts,
            persistence,
            on_boundary: false,
        },
    })
}

/// Rebuilds a model's paths from known parameters (no estimation).
pub fn model_from_params(
    returns: &[f64],
    orders: MarginalOrders,
    arma: ArmaParams,
    egarch: EgarchParams,
) -> Result<MarginalModel> {
    assemble(returns, orders, arma, egarch, true, 0, 0)
}

/// Probability-integral transform of the standardized residuals.
pub fn standardize(model: &MarginalModel) -> Vec<f64> {
    model
        .std_resid
        .iter()
        .map(|&e| pit(e, model.egarch.nu))
        .collect()
}

/// Standardized-t CDF kept strictly inside (0, 1).
pub fn pit(e: f64, nu: f64) -> f64 {
    student_t::std_cdf(e, nu).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

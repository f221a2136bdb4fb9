//! Properties every fitted marginal must satisfy, checked on simulated panels.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;
use sysrisk_core::data_panel::to_log_returns;
use sysrisk_core::dependence::DccParams;
use sysrisk_core::optim::numerical_hessian;
use sysrisk_core::synthetic::{simulate_panel, EntitySpec, SimulationSpec};
use sysrisk_core::univariate::{
    fit_marginal, marginal_loglik, pit, unflatten, ArmaParams, EgarchParams, MarginalFitOptions, MarginalModel,
    MarginalOrders,
};

fn panel_spec(entity: EntitySpec, k: usize, weeks: usize, seed: u64) -> SimulationSpec {
    SimulationSpec {
        entities: (0..k).map(|i| EntitySpec { name: format!("S{i}"), ..entity.clone() }).collect(),
        weeks,
        dcc: DccParams { c: vec![0.05], d: vec![0.9], qbar: DMatrix::identity(k, k), nu_copula: 8.0 },
        loadings: None,
        seed,
        start_date: chrono::NaiveDate::from_ymd_opt(2000, 1, 7).unwrap(),
    }
}

fn egarch_entity() -> EntitySpec {
    EntitySpec {
        name: String::new(),
        arma: ArmaParams { mu0: 0.001, ar: vec![0.2], ma: vec![] },
        egarch: EgarchParams { omega: -0.4, alpha: vec![-0.06], gamma: vec![0.18], beta: vec![0.93], nu: 6.0 },
    }
}

fn iid_entity() -> EntitySpec {
    EntitySpec {
        name: String::new(),
        arma: ArmaParams::white_noise(0.002),
        egarch: EgarchParams { omega: (0.02f64 * 0.02).ln(), alpha: vec![], gamma: vec![], beta: vec![], nu: 5.0 },
    }
}

fn fits(spec: &SimulationSpec) -> Vec<(Vec<f64>, MarginalModel)> {
    let (panel, _) = simulate_panel(spec).unwrap();
    let returns = to_log_returns(&panel);
    (0..spec.k())
        .map(|i| {
            let r = returns.column(i);
            let m = fit_marginal(&r, MarginalOrders::default(), &MarginalFitOptions::default()).unwrap();
            (r, m)
        })
        .collect()
}

/// Forward and backward difference slopes along each coordinate, each with
/// one Richardson step cancelling the O(h) term. The likelihood curvature in
/// β is of order 1e6, so plain differences are too coarse.
fn one_sided_slopes<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<(f64, f64)> {
    let f0 = f(x);
    let mut work = x.to_vec();
    let mut slope = |i: usize, h: f64| {
        work[i] = x[i] + h;
        let v = f(&work);
        work[i] = x[i];
        (v - f0) / h
    };
    (0..x.len())
        .map(|i| {
            let h = 2e-6 * x[i].abs().max(1e-2);
            let forward = 2.0 * slope(i, h / 2.0) - slope(i, h);
            let backward = 2.0 * slope(i, -h / 2.0) - slope(i, -h);
            (forward, backward)
        })
        .collect()
}

/// Adaptive Simpson on [a, b].
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(lm) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(rm) + f(b));
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, tol / 2.0, depth - 1) + simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

#[test]
fn pit_matches_quadrature_of_density() {
    for nu in [2.5f64, 4.0, 10.0, 50.0] {
        let s = ((nu - 2.0) / nu).sqrt();
        let log_c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
        let density = |x: f64| (log_c - (nu + 1.0) / 2.0 * (1.0 + (x / s).powi(2) / nu).ln()).exp() / s;
        for i in -40..=40 {
            let e = i as f64 * 0.2;
            let half = simpson(&density, 0.0, e.abs(), 1e-13, 40);
            let oracle = if e >= 0.0 { 0.5 + half } else { 0.5 - half };
            assert!((pit(e, nu) - oracle).abs() < 1e-8, "nu {nu} e {e}: {} vs {oracle}", pit(e, nu));
        }
    }
}

#[test]
fn reported_loglik_matches_recomputed_filters() {
    for (r, m) in fits(&panel_spec(egarch_entity(), 3, 1000, 21)) {
        let again = marginal_loglik(&r, &m.arma, &m.egarch).unwrap();
        assert!((m.loglik - again).abs() < 1e-8, "{} vs {again}", m.loglik);
    }
}

#[test]
fn interior_optimum_satisfies_first_order_conditions() {
    let (mut smooth, mut creased) = (0, 0);
    for (r, m) in fits(&panel_spec(egarch_entity(), 4, 1000, 22)) {
        if m.diagnostics.on_boundary {
            continue;
        }
        let x = m.natural_params();
        let ll = |x: &[f64]| {
            let (arma, egarch) = unflatten(m.orders, x);
            marginal_loglik(&r, &arma, &egarch).unwrap_or(f64::NAN)
        };
        let slopes = one_sided_slopes(ll, &x);
        // |ε_t| makes the likelihood non-differentiable in the mean
        // coordinates wherever an innovation is exactly zero, and maxima can
        // sit on such a crease.
        let scale = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let crease = r.iter().zip(&m.cond_mean).any(|(a, b)| (a - b).abs() < 1e-9 * scale);
        if !crease {
            smooth += 1;
            for (i, &(fwd, bwd)) in slopes.iter().enumerate() {
                let g = 0.5 * (fwd + bwd);
                assert!(g.abs() < 1e-3, "coordinate {i}: gradient {g}");
            }
            continue;
        }
        creased += 1;
        let mean_dims = 1 + m.orders.p + m.orders.q;
        for (i, &(fwd, bwd)) in slopes[..mean_dims].iter().enumerate() {
            assert!(fwd < 1e-3 && bwd > -1e-3, "mean coordinate {i} ascends: {fwd} / {bwd}");
        }
        // The variance block is smooth across the crease but its curvature
        // reaches 1e6, so optimality is judged by the achievable gain
        // ½ gᵀ(−H)⁻¹g; a 1e-3 gradient at curvature T allows 5e-10.
        let head = x[..mean_dims].to_vec();
        let block = |v: &[f64]| ll(&[head.as_slice(), v].concat());
        let g: Vec<f64> = slopes[mean_dims..].iter().map(|(f, b)| 0.5 * (f + b)).collect();
        let g = nalgebra::DVector::from_vec(g);
        let h = -numerical_hessian(block, &x[mean_dims..]);
        let gain = 0.5 * g.dot(&h.cholesky().expect("negative definite block").solve(&g));
        assert!(gain < 0.5e-6 / r.len() as f64, "variance block can still gain {gain}");
    }
    assert!(smooth > 0 && creased > 0, "smooth {smooth}, creased {creased}");
}

#[test]
fn standardized_residuals_have_unit_scale() {
    for (_, m) in fits(&panel_spec(egarch_entity(), 3, 1500, 23)) {
        let n = m.std_resid.len() as f64;
        let mean = m.std_resid.iter().sum::<f64>() / n;
        let var = m.std_resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!(var > 0.85 && var < 1.15, "variance {var}");
    }
}

#[test]
fn iid_t_under_default_orders() {
    for (_, m) in fits(&panel_spec(iid_entity(), 3, 3000, 24)) {
        assert!(m.egarch.alpha[0].abs() < 0.1, "alpha {}", m.egarch.alpha[0]);
        assert!(m.egarch.gamma[0].abs() < 0.1, "gamma {}", m.egarch.gamma[0]);
        assert!((m.egarch.nu - 5.0).abs() < 1.5, "nu {}", m.egarch.nu);
        // β is not identified once α = γ = 0. The variance level is: the log
        // sample variance of t(5) data has SE √((κ−1)/T) with kurtosis κ = 9.
        let n = m.cond_var.len() as f64;
        let level = m.cond_var.iter().map(|h| h.ln()).sum::<f64>() / n;
        let se = (8.0 / n).sqrt();
        assert!((level - (0.02f64 * 0.02).ln()).abs() < 3.0 * se, "log-variance level {level}");
    }
}

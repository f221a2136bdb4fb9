//! Filters against plain scalar-loop recursions written from the model
//! equations, plus generator/filter duality.

use nalgebra::DMatrix;
use sysrisk_core::dependence::{dcc_filter, DccParams};
use sysrisk_core::rng::SimRng;
use sysrisk_core::synthetic::{hub_market_spec, simulate_panel, EntitySpec, SimulationSpec};
use sysrisk_core::univariate::{arma_filter_with, egarch_filter_with, ArmaParams, EgarchParams};
use sysrisk_core::data_panel::to_log_returns;

/// E|ε| for unit-variance t(ν), from the closed-form antiderivative of x f(x).
fn abs_mean_oracle(nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let s = ((nu - 2.0) / nu).sqrt();
    let c = (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp() / (nu * std::f64::consts::PI).sqrt();
    // ε = s·X with X ~ t(ν): E|ε| = 2 s ∫_0^∞ x f(x) dx, and ∫_0^∞ x f(x) dx has antiderivative
    // −c ν/(ν−1) (1 + x²/ν)^{−(ν−1)/2}.
    2.0 * s * c * nu / (nu - 1.0)
}

fn arma_oracle(mu0: f64, ar: &[f64], ma: &[f64], r: &[f64], r_pre: f64) -> (Vec<f64>, Vec<f64>) {
    let mut mu = vec![0.0; r.len()];
    let mut y = vec![0.0; r.len()];
    for t in 0..r.len() {
        let mut m = mu0;
        for j in 1..=ar.len() {
            let lag = if t >= j { r[t - j] } else { r_pre };
            m += ar[j - 1] * lag;
        }
        for j in 1..=ma.len() {
            let lag = if t >= j { y[t - j] } else { 0.0 };
            m += ma[j - 1] * lag;
        }
        mu[t] = m;
        y[t] = r[t] - m;
    }
    (mu, y)
}

fn egarch_oracle(p: &EgarchParams, y: &[f64], lh_pre: f64) -> Vec<f64> {
    let em = abs_mean_oracle(p.nu);
    let mut lh = vec![0.0; y.len()];
    let mut e = vec![0.0; y.len()];
    for t in 0..y.len() {
        let mut v = p.omega;
        for j in 1..=p.alpha.len() {
            if t >= j {
                v += p.alpha[j - 1] * e[t - j] + p.gamma[j - 1] * (e[t - j].abs() - em);
            }
        }
        for j in 1..=p.beta.len() {
            v += p.beta[j - 1] * if t >= j { lh[t - j] } else { lh_pre };
        }
        lh[t] = v;
        e[t] = y[t] / (v / 2.0).exp();
    }
    lh.iter().map(|v| v.exp()).collect()
}

fn dcc_oracle(c: &[f64], d: &[f64], qbar: &DMatrix<f64>, eps: &DMatrix<f64>) -> Vec<Vec<Vec<f64>>> {
    let (n, k) = eps.shape();
    let w = 1.0 - c.iter().sum::<f64>() - d.iter().sum::<f64>();
    let mut qs: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut rs = Vec::new();
    for t in 0..n {
        let mut q = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                let mut v = w * qbar[(a, b)];
                for j in 1..=c.len() {
                    v += c[j - 1]
                        * if t >= j {
                            eps[(t - j, a)] * eps[(t - j, b)]
                        } else {
                            qbar[(a, b)]
                        };
                }
                for j in 1..=d.len() {
                    v += d[j - 1] * if t >= j { qs[t - j][a][b] } else { qbar[(a, b)] };
                }
                q[a][b] = v;
            }
        }
        let r: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| q[a][b] / (q[a][a] * q[b][b]).sqrt()).collect())
            .collect();
        qs.push(q);
        rs.push(r);
    }
    rs
}

fn random_corr(rng: &mut SimRng, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(k, k + 2, |_, _| rng.standard_normal());
    let cov = &m * m.transpose();
    DMatrix::from_fn(k, k, |i, j| cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt())
}

#[test]
fn abs_mean_oracle_matches_library() {
    for nu in [2.5, 4.0, 8.0, 30.0] {
        let lib = sysrisk_core::student_t::std_abs_mean(nu);
        assert!((lib - abs_mean_oracle(nu)).abs() < 1e-13, "nu={nu}");
    }
}

#[test]
fn randomized_filters_match_scalar_oracles() {
    let mut rng = SimRng::new(2024);
    for case in 0..50 {
        let t_len = 20 + (rng.next_u64() % 81) as usize;
        let k = 2 + (rng.next_u64() % 3) as usize;
        let p = (rng.next_u64() % 3) as usize;
        let q = (rng.next_u64() % 3) as usize;
        let ar: Vec<f64> = (0..p).map(|_| 0.3 * (rng.uniform() - 0.5)).collect();
        let ma: Vec<f64> = (0..q).map(|_| 0.3 * (rng.uniform() - 0.5)).collect();
        let arma = ArmaParams { mu0: 0.01 * rng.standard_normal(), ar, ma };
        let r: Vec<f64> = (0..t_len).map(|_| 0.02 * rng.student_t(5.0)).collect();
        let r_pre = 0.001 * rng.standard_normal();
        let path = arma_filter_with(&arma, &r, r_pre).unwrap();
        let (mu, y) = arma_oracle(arma.mu0, &arma.ar, &arma.ma, &r, r_pre);
        for t in 0..t_len {
            assert!((path.cond_mean[t] - mu[t]).abs() < 1e-12, "case {case} arma t={t}");
            assert!((path.innovations[t] - y[t]).abs() < 1e-12);
        }

        let order = 1 + (rng.next_u64() % 2) as usize;
        let eg = EgarchParams {
            omega: -0.5 + 0.2 * rng.standard_normal(),
            alpha: (0..order).map(|_| 0.1 * rng.standard_normal()).collect(),
            gamma: (0..order).map(|_| 0.1 + 0.1 * rng.uniform()).collect(),
            beta: (0..order).map(|_| 0.8 / order as f64 * rng.uniform()).collect(),
            nu: 3.0 + 20.0 * rng.uniform(),
        };
        let lh_pre = -7.0 + rng.standard_normal();
        let h = egarch_filter_with(&eg, &y, lh_pre).unwrap();
        let h_oracle = egarch_oracle(&eg, &y, lh_pre);
        for t in 0..t_len {
            assert!(((h[t] - h_oracle[t]) / h_oracle[t]).abs() < 1e-12, "case {case} egarch t={t}");
        }

        let eps = DMatrix::from_fn(t_len, k, |_, _| rng.standard_normal());
        let m = 1 + (rng.next_u64() % 2) as usize;
        let n = 1 + (rng.next_u64() % 2) as usize;
        let c: Vec<f64> = (0..m).map(|_| 0.08 * rng.uniform()).collect();
        let d: Vec<f64> = (0..n).map(|_| 0.85 / n as f64 * rng.uniform()).collect();
        let qbar = random_corr(&mut rng, k);
        let params = DccParams { c: c.clone(), d: d.clone(), qbar: qbar.clone(), nu_copula: 6.0 };
        let state = dcc_filter(&params, &eps).unwrap();
        let oracle = dcc_oracle(&c, &d, &qbar, &eps);
        for t in 0..t_len {
            for a in 0..k {
                for b in 0..k {
                    assert!((state.r_series[t][(a, b)] - oracle[t][a][b]).abs() < 1e-12, "case {case} dcc");
                }
            }
        }
    }
}

#[test]
fn constant_variance_examples() {
    let eg = EgarchParams { omega: 0.1, alpha: vec![], gamma: vec![], beta: vec![], nu: 6.0 };
    let h = egarch_filter_with(&eg, &[0.3, -2.0, 1.0], 0.0).unwrap();
    assert!(h.iter().all(|v| (v - 0.1f64.exp()).abs() < 1e-15));
}

#[test]
fn generator_and_filters_are_dual() {
    let spec = hub_market_spec(5, 0.85, 0.4, 99).unwrap();
    let mut spec = SimulationSpec { weeks: 300, ..spec };
    // Exercise MA and higher orders in one entity.
    spec.entities[1] = EntitySpec {
        name: "MIX".into(),
        arma: ArmaParams { mu0: 0.0005, ar: vec![0.2, -0.1], ma: vec![0.3] },
        egarch: EgarchParams {
            omega: -1.0,
            alpha: vec![-0.05, 0.02],
            gamma: vec![0.15, 0.05],
            beta: vec![0.6, 0.25],
            nu: 5.0,
        },
    };
    let (panel, truth) = simulate_panel(&spec).unwrap();
    let returns = to_log_returns(&panel);
    let k = spec.k();
    let mut eps = DMatrix::zeros(spec.weeks, k);
    for (i, ent) in spec.entities.iter().enumerate() {
        let r = returns.column(i);
        for t in 0..spec.weeks {
            assert!((r[t] - truth.returns[(t, i)]).abs() < 1e-10);
        }
        let pre = truth.presample[i];
        let path = arma_filter_with(&ent.arma, &r, pre.lagged_return).unwrap();
        let h = egarch_filter_with(&ent.egarch, &path.innovations, pre.log_variance).unwrap();
        for t in 0..spec.weeks {
            assert!((path.cond_mean[t] - truth.cond_mean[(t, i)]).abs() < 1e-10);
            assert!(((h[t] - truth.cond_var[(t, i)]) / truth.cond_var[(t, i)]).abs() < 1e-10);
            eps[(t, i)] = path.innovations[t] / h[t].sqrt();
            assert!((eps[(t, i)] - truth.std_resid[(t, i)]).abs() < 1e-8);
        }
    }
    let state = dcc_filter(&spec.effective_dcc(), &eps).unwrap();
    for t in 0..spec.weeks {
        assert!((&state.r_series[t] - &truth.r_series[t]).amax() < 1e-10, "week {t}");
    }
}

#[test]
fn generator_consistent_with_own_correlation_path() {
    let spec = hub_market_spec(5, 0.8, 0.5, 5).unwrap();
    let entities = spec.entities[..4].to_vec();
    let spec = SimulationSpec {
        entities,
        weeks: 3000,
        dcc: DccParams {
            c: vec![0.05],
            d: vec![0.90],
            qbar: DMatrix::from_row_slice(4, 4, &[
                1.0, 0.5, 0.3, 0.2, 0.5, 1.0, 0.4, 0.1, 0.3, 0.4, 1.0, 0.3, 0.2, 0.1, 0.3, 1.0,
            ]),
            nu_copula: 8.0,
        },
        loadings: None,
        ..spec
    };
    let (_, truth) = simulate_panel(&spec).unwrap();
    let sample = sysrisk_core::stats::correlation_matrix(&truth.std_resid);
    let mut avg = DMatrix::zeros(4, 4);
    for r in &truth.r_series {
        avg += r;
    }
    avg /= truth.r_series.len() as f64;
    assert!((sample - avg).amax() < 0.05);
}

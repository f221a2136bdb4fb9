//! Forward simulation of ARMA-eGARCH-t marginals coupled by a DCC t-copula.
//!
//! Each week t the generator builds Q_t and R_t from the previous standardized
//! shocks, draws copula uniforms under R_t, maps them to standardized-t shocks
//! ε_t, then advances the eGARCH and ARMA recursions. Pre-sample values are
//! explicit and recorded so that the filters, fed the same values, reproduce
//! every latent path.

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data_panel::PricePanel;
use crate::dependence::{psd_cholesky, t_copula_draw_k, DccParams};
use crate::rng::SimRng;
use crate::student_t;
use crate::univariate::{ArmaParams, EgarchParams, Presample};
use crate::{Error, Result};

pub const BASE_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub name: String,
    pub arma: ArmaParams,
    pub egarch: EgarchParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub entities: Vec<EntitySpec>,
    /// Number of weekly returns; the price panel has one more row.
    pub weeks: usize,
    pub dcc: DccParams,
    /// One-factor loadings; when present they replace `dcc.qbar` with
    /// ρ_ij = l_i·l_j off the diagonal.
    #[serde(default)]
    pub loadings: Option<Vec<f64>>,
    pub seed: u64,
    pub start_date: NaiveDate,
}

/// Correlation matrix implied by one-factor loadings.
pub fn factor_correlation(loadings: &[f64]) -> DMatrix<f64> {
    let k = loadings.len();
    DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { loadings[i] * loadings[j] })
}

impl SimulationSpec {
    pub fn k(&self) -> usize {
        self.entities.len()
    }

    /// DCC parameters with Q̄ resolved from the loadings when given.
    pub fn effective_dcc(&self) -> DccParams {
        let mut dcc = self.dcc.clone();
        if let Some(l) = &self.loadings {
            dcc.qbar = factor_correlation(l);
        }
        dcc
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.weeks == 0 {
            return Err(Error::Config("simulation needs at least one entity and one week".into()));
        }
        for e in &self.entities {
            e.arma.validate()?;
            e.egarch.validate()?;
        }
        if let Some(l) = &self.loadings {
            if l.len() != k || l.iter().any(|v| !(v.abs() < 1.0)) {
                return Err(Error::Config("loadings must be one per entity with |l| < 1".into()));
            }
        }
        let dcc = self.effective_dcc();
        dcc.validate()?;
        if dcc.k() != k {
            return Err(Error::Config(format!("Q̄ is {}×{} for {k} entities", dcc.k(), dcc.k())));
        }
        Ok(())
    }

    /// Pre-sample values: unconditional mean return and log-variance.
    pub fn presample(&self) -> Vec<Presample> {
        self.entities
            .iter()
            .map(|e| Presample {
                lagged_return: e.arma.mu0 / (1.0 - e.arma.ar.iter().sum::<f64>()),
                log_variance: e.egarch.omega / (1.0 - e.egarch.beta.iter().sum::<f64>()),
            })
            .collect()
    }

    /// Fridays from `start_date`, one per price row.
    pub fn price_dates(&self) -> Vec<NaiveDate> {
        (0..=self.weeks)
            .map(|w| self.start_date + Duration::weeks(w as i64))
            .collect()
    }
}

/// Every latent path of a simulation. Matrices are T×k and indexed by return week.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub returns: DMatrix<f64>,
    pub cond_mean: DMatrix<f64>,
    pub cond_var: DMatrix<f64>,
    pub std_resid: DMatrix<f64>,
    pub uniforms: DMatrix<f64>,
    pub r_series: Vec<DMatrix<f64>>,
    pub presample: Vec<Presample>,
}

pub fn simulate_panel(spec: &SimulationSpec) -> Result<(PricePanel, GroundTruth)> {
    spec.validate()?;
    let k = spec.k();
    let t_len = spec.weeks;
    let dcc = spec.effective_dcc();
    let presample = spec.presample();
    let abs_means: Vec<f64> = spec
        .entities
        .iter()
        .map(|e| student_t::std_abs_mean(e.egarch.nu))
        .collect();
    let mut rng = SimRng::new(spec.seed);

    let mut returns = DMatrix::zeros(t_len, k);
    let mut cond_mean = DMatrix::zeros(t_len, k);
    let mut log_h = DMatrix::zeros(t_len, k);
    let mut eps = DMatrix::zeros(t_len, k);
    let mut innov = DMatrix::zeros(t_len, k);
    let mut uniforms = DMatrix::zeros(t_len, k);
    let mut q_series: Vec<DMatrix<f64>> = Vec::with_capacity(t_len);
    let mut r_series = Vec::with_capacity(t_len);
    let weight_bar = 1.0 - dcc.c.iter().sum::<f64>() - dcc.d.iter().sum::<f64>();

    for t in 0..t_len {
        let mut q = &dcc.qbar * weight_bar;
        for (j, c) in dcc.c.iter().enumerate() {
            if t > j {
                let e = eps.row(t - j - 1);
                for a in 0..k {
                    for b in 0..k {
                        q[(a, b)] += c * e[a] * e[b];
                    }
                }
            } else {
                q += &dcc.qbar * *c;
            }
        }
        for (j, d) in dcc.d.iter().enumerate() {
            q += if t > j { &q_series[t - j - 1] } else { &dcc.qbar } * *d;
        }
        let r = DMatrix::from_fn(k, k, |a, b| {
            if a == b {
                1.0
            } else {
                q[(a, b)] / (q[(a, a)] * q[(b, b)]).sqrt()
            }
        });
        let u = t_copula_draw_k(&psd_cholesky(&r), dcc.nu_copula, &mut rng);

        for (i, ent) in spec.entities.iter().enumerate() {
            let eg = &ent.egarch;
            let mut lh = eg.omega;
            for (j, (a, g)) in eg.alpha.iter().zip(&eg.gamma).enumerate() {
                if t > j {
                    let e = eps[(t - j - 1, i)];
                    lh += a * e + g * (f64::abs(e) - abs_means[i]);
                }
            }
            for (j, b) in eg.beta.iter().enumerate() {
                lh += b * if t > j { log_h[(t - j - 1, i)] } else { presample[i].log_variance };
            }
            let mut mu = ent.arma.mu0;
            for (j, phi) in ent.arma.ar.iter().enumerate() {
                mu += phi * if t > j { returns[(t - j - 1, i)] } else { presample[i].lagged_return };
            }
            for (j, theta) in ent.arma.ma.iter().enumerate() {
                if t > j {
                    mu += theta * innov[(t - j - 1, i)];
                }
            }
            if !lh.is_finite() || lh.abs() > 700.0 {
                return Err(Error::Numerical {
                    index: t,
                    message: format!("simulated log-variance {lh} for {}", ent.name),
                });
            }
            let e = student_t::std_quantile(u[i], eg.nu);
            let a = (0.5 * lh).exp() * e;
            uniforms[(t, i)] = u[i];
            eps[(t, i)] = e;
            log_h[(t, i)] = lh;
            cond_mean[(t, i)] = mu;
            innov[(t, i)] = a;
            returns[(t, i)] = mu + a;
        }
        q_series.push(q);
        r_series.push(r);
    }

    let mut prices = DMatrix::zeros(t_len + 1, k);
    for i in 0..k {
        let mut log_p = BASE_PRICE.ln();
        prices[(0, i)] = BASE_PRICE;
        for t in 0..t_len {
            log_p += returns[(t, i)];
            prices[(t + 1, i)] = log_p.exp();
        }
    }
    let names = spec.entities.iter().map(|e| e.name.clone()).collect();
    let panel = PricePanel::new(names, spec.price_dates(), prices)?;
    Ok((
        panel,
        GroundTruth {
            returns,
            cond_mean,
            cond_var: log_h.map(f64::exp),
            std_resid: eps,
            uniforms,
            r_series,
            presample,
        },
    ))
}

/// Marginal dynamics shared by every entity of the demo market.
fn demo_marginal(name: String) -> EntitySpec {
    EntitySpec {
        name,
        arma: ArmaParams {
            mu0: 0.001,
            ar: vec![0.05],
            ma: vec![],
        },
        egarch: EgarchParams {
            // Unconditional ln h = −7.4, i.e. weekly volatility near 2.5%.
            omega: -0.74,
            alpha: vec![-0.04],
            gamma: vec![0.12],
            beta: vec![0.9],
            nu: 8.0,
        },
    }
}

/// Hub-and-periphery market: entity `HUB` loads `hub_loading` on a common
/// factor, the others `periphery_loading`.
pub fn hub_market_spec(k: usize, hub_loading: f64, periphery_loading: f64, seed: u64) -> Result<SimulationSpec> {
    let loadings: Vec<f64> = (0..k)
        .map(|i| if i == 0 { hub_loading } else { periphery_loading })
        .collect();
    graded_market_spec(&loadings, seed)
}

/// Market with an arbitrary loading vector; entity 0 must carry the largest loading.
pub fn graded_market_spec(loadings: &[f64], seed: u64) -> Result<SimulationSpec> {
    let k = loadings.len();
    if k < 5 {
        return Err(Error::Config(format!("hub market needs k ≥ 5, got {k}")));
    }
    let hub = loadings[0];
    if !(hub < 1.0) || loadings[1..].iter().any(|&l| !(l > 0.0 && l < hub)) {
        return Err(Error::Config("loadings must satisfy 0 < periphery < hub < 1".into()));
    }
    let entities = (0..k)
        .map(|i| demo_marginal(if i == 0 { "HUB".to_string() } else { format!("P{i:02}") }))
        .collect();
    let spec = SimulationSpec {
        entities,
        weeks: 753,
        dcc: DccParams {
            c: vec![0.03],
            d: vec![0.94],
            qbar: factor_correlation(loadings),
            nu_copula: 7.0,
        },
        loadings: Some(loadings.to_vec()),
        seed,
        start_date: NaiveDate::from_ymd_opt(2005, 1, 7).expect("valid date"),
    };
    spec.validate()?;
    Ok(spec)
}

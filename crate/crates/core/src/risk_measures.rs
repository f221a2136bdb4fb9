//! VaR, copula CoVaR and ΔCoVaR.
//!
//! CoVaR of the sector j given entity i at tail level a solves
//! C(F_j(CoVaR), a) = a·β for the week's copula, so the root is found in
//! probability space and mapped back through the sector's conditional
//! marginal. Stress conditioning uses a = α and median conditioning a = 0.5;
//! ΔCoVaR is their difference and is negative under positive dependence.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_panel::ReturnPanel;
use crate::dependence::{fit_dcc, dcc_filter, BivariateCopula, DccFitOptions, DccOrders, StudentTCopula};
use crate::optim::brent_root;
use crate::student_t;
use crate::univariate::{fit_marginal, pit, MarginalFitOptions, MarginalModel, MarginalOrders};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileLevels {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self { alpha: 0.05, beta: 0.05 }
    }
}

impl QuantileLevels {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 0.5) {
                return Err(Error::Config(format!("{name} = {v} outside (0, 0.5]")));
            }
        }
        Ok(())
    }
}

/// μ + √h · q_level of the standardized t.
pub fn conditional_quantile(mu: f64, h: f64, nu: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("quantile level {level} outside (0, 1)")));
    }
    Ok(mu + h.sqrt() * student_t::std_quantile(level, nu))
}

pub fn var_quantile(model: &MarginalModel, level: f64, week: usize) -> Result<f64> {
    if week >= model.len() {
        return Err(Error::Domain(format!("week {week} beyond fitted length {}", model.len())));
    }
    conditional_quantile(model.cond_mean[week], model.cond_var[week], model.egarch.nu, level)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaRoot {
    /// Probability-space CoVaR, u* with C(u*, a) ≈ a·β.
    pub u: f64,
    pub residual: f64,
    pub iterations: usize,
}

const U_FLOOR: f64 = 1e-12;

/// Solves C(u, cond_level) = cond_level·beta for u by bracketed root search.
pub fn covar_solve<C: BivariateCopula + ?Sized>(copula: &C, cond_level: f64, beta: f64) -> Result<CopulaRoot> {
    if !(cond_level > 0.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!(
            "levels (cond_level {cond_level}, beta {beta}) out of range"
        )));
    }
    if cond_level >= 1.0 {
        // C(u, 1) = u for every copula.
        return Ok(CopulaRoot {
            u: beta,
            residual: 0.0,
            iterations: 0,
        });
    }
    let target = cond_level * beta;
    let f = |u: f64| copula.cdf(u, cond_level) - target;
    let mut hi = cond_level.min(1.0 - U_FLOOR);
    let mut f_hi = f(hi);
    while f_hi < 0.0 {
        if hi >= 1.0 - U_FLOOR {
            return Err(Error::Solver(format!(
                "no bracket: C(1, {cond_level}) − target = {f_hi}"
            )));
        }
        hi = (2.0 * hi).min(1.0 - U_FLOOR);
        f_hi = f(hi);
    }
    let root = brent_root(f, U_FLOOR, hi, 1e-14, 1e-14, 200).ok_or_else(|| {
        Error::Solver(format!(
            "root not bracketed on [{U_FLOOR}, {hi}] for cond_level {cond_level}, beta {beta}"
        ))
    })?;
    Ok(CopulaRoot {
        u: root.x,
        residual: root.residual,
        iterations: root.iterations,
    })
}

/// CoVaR in return space for the sector marginal at `week`.
pub fn covar_value<C: BivariateCopula + ?Sized>(
    copula: &C,
    sector: &MarginalModel,
    week: usize,
    cond_level: f64,
    beta: f64,
) -> Result<f64> {
    let root = covar_solve(copula, cond_level, beta)?;
    var_quantile(sector, root.u, week)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCovar {
    pub stress: f64,
    pub median: f64,
    pub delta: f64,
}

pub fn delta_covar<C: BivariateCopula + ?Sized>(
    copula: &C,
    sector: &MarginalModel,
    week: usize,
    levels: QuantileLevels,
) -> Result<DeltaCovar> {
    let stress = covar_value(copula, sector, week, levels.alpha, levels.beta)?;
    let median = covar_value(copula, sector, week, 0.5, levels.beta)?;
    Ok(DeltaCovar {
        stress,
        median,
        delta: stress - median,
    })
}

/// Mean log-return of every entity except `exclude`, equally weighted unless
/// `weights` (one per entity in panel order) is given; weights are
/// renormalized over the remaining entities.
pub fn sector_index_returns(panel: &ReturnPanel, exclude: &str, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let skip = panel.entity_index(exclude)?;
    let k = panel.k();
    if k < 2 {
        return Err(Error::Validation("sector index needs at least two entities".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != k => {
            return Err(Error::Config(format!("{} weights for {k} entities", w.len())));
        }
        Some(w) if w.iter().any(|v| !(*v >= 0.0)) => {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; k],
    };
    let total: f64 = (0..k).filter(|&i| i != skip).map(|i| w[i]).sum();
    if !(total > 0.0) {
        return Err(Error::Config("weights of the remaining entities sum to zero".into()));
    }
    let r = panel.returns();
    Ok((0..panel.weeks())
        .map(|t| (0..k).filter(|&i| i != skip).map(|i| w[i] * r[(t, i)]).sum::<f64>() / total)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSeries {
    pub entity: String,
    pub dates: Vec<NaiveDate>,
    pub var_i: Vec<f64>,
    pub covar_stress: Vec<f64>,
    pub covar_median: Vec<f64>,
    pub delta_covar: Vec<f64>,
    /// Copula correlation path between the entity and its sector index.
    pub rho: Vec<f64>,
    pub nu_copula: f64,
}

impl RiskSeries {
    pub fn mean_delta_covar(&self) -> f64 {
        self.delta_covar.iter().sum::<f64>() / self.delta_covar.len() as f64
    }
}

#[derive(Debug, Clone, Default)]
pub struct RiskOptions {
    pub levels: QuantileLevels,
    pub marginal_orders: MarginalOrders,
    pub marginal: MarginalFitOptions,
    pub dcc_orders: DccOrders,
    pub dcc: DccFitOptions,
    pub sector_weights: Option<Vec<f64>>,
}

/// Full ΔCoVaR path for one entity given its fitted marginal. The sector index
/// excludes the entity and gets its own marginal and bivariate DCC-t fit.
pub fn risk_series_for(
    panel: &ReturnPanel,
    entity: &str,
    entity_model: &MarginalModel,
    options: &RiskOptions,
) -> Result<RiskSeries> {
    options.levels.validate()?;
    let sector_returns = sector_index_returns(panel, entity, options.sector_weights.as_deref())?;
    let sector = fit_marginal(&sector_returns, options.marginal_orders, &options.marginal)?;
    let t_len = panel.weeks();
    if entity_model.len() != t_len {
        return Err(Error::Validation(format!(
            "marginal for {entity} covers {} weeks, panel has {t_len}",
            entity_model.len()
        )));
    }
    let shocks = DMatrix::from_fn(t_len, 2, |t, c| {
        if c == 0 {
            sector.std_resid[t]
        } else {
            entity_model.std_resid[t]
        }
    });
    let nus = [sector.egarch.nu, entity_model.egarch.nu];
    let uniforms = DMatrix::from_fn(t_len, 2, |t, c| pit(shocks[(t, c)], nus[c]));
    let fit = fit_dcc(&shocks, &uniforms, options.dcc_orders, &options.dcc)?;
    let state = dcc_filter(&fit.params, &shocks)?;
    let nu = fit.params.nu_copula;

    let mut out = RiskSeries {
        entity: entity.to_string(),
        dates: panel.dates().to_vec(),
        var_i: Vec::with_capacity(t_len),
        covar_stress: Vec::with_capacity(t_len),
        covar_median: Vec::with_capacity(t_len),
        delta_covar: Vec::with_capacity(t_len),
        rho: Vec::with_capacity(t_len),
        nu_copula: nu,
    };
    for (t, r) in state.r_series.iter().enumerate() {
        let rho = r[(0, 1)];
        let copula = StudentTCopula::new(rho, nu)?;
        let dc = delta_covar(&copula, &sector, t, options.levels)?;
        out.var_i.push(var_quantile(entity_model, options.levels.alpha, t)?);
        out.covar_stress.push(dc.stress);
        out.covar_median.push(dc.median);
        out.delta_covar.push(dc.delta);
        out.rho.push(rho);
    }
    Ok(out)
}

/// Risk series for every entity; one entity's failure does not abort the others.
pub fn risk_series_all(
    panel: &ReturnPanel,
    models: &[Result<MarginalModel>],
    options: &RiskOptions,
) -> Vec<(String, Result<RiskSeries>)> {
    panel
        .entities()
        .par_iter()
        .zip(models.par_iter())
        .map(|(name, model)| {
            let series = match model {
                Ok(m) => risk_series_for(panel, name, m, options),
                Err(e) => Err(Error::Estimation {
                    message: format!("marginal fit for {name} failed: {e}"),
                    best_params: vec![],
                    best_loglik: f64::NAN,
                    converged: false,
                }),
            };
            (name.clone(), series)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{Comonotone, Independence};

    #[test]
    fn normal_limit_var() {
        let q = conditional_quantile(0.0, 1.0, 200.0, 0.05).unwrap();
        assert!((q + 1.645).abs() < 0.01);
        assert_eq!(conditional_quantile(0.3, 2.0, 5.0, 0.5).unwrap(), 0.3);
        assert!(conditional_quantile(0.0, 1.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn independence_reduces_to_beta() {
        let root = covar_solve(&Independence, 0.05, 0.05).unwrap();
        assert!((root.u - 0.05).abs() < 1e-12);
        let root = covar_solve(&Independence, 0.5, 0.01).unwrap();
        assert!((root.u - 0.01).abs() < 1e-12);
    }

    #[test]
    fn comonotone_reduces_to_product() {
        let root = covar_solve(&Comonotone, 0.05, 0.05).unwrap();
        assert!((root.u - 0.0025).abs() < 1e-12);
    }

    #[test]
    fn unconditioned_level_is_exact() {
        let c = StudentTCopula::new(0.7, 4.0).unwrap();
        assert_eq!(covar_solve(&c, 1.0, 0.05).unwrap().u, 0.05);
    }

    #[test]
    fn residual_within_tolerance() {
        let c = StudentTCopula::new(0.5, 4.0).unwrap();
        for &a in &[0.01, 0.05, 0.5] {
            let root = covar_solve(&c, a, 0.05).unwrap();
            assert!((c.cdf(root.u, a) - a * 0.05).abs() < 1e-8);
        }
    }

    #[test]
    fn levels_validated() {
        assert!(QuantileLevels { alpha: 0.6, beta: 0.05 }.validate().is_err());
        assert!(QuantileLevels { alpha: 0.0, beta: 0.05 }.validate().is_err());
        assert!(QuantileLevels::default().validate().is_ok());
    }
}

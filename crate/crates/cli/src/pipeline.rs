//! Estimation stages shared by the subcommands.

use nalgebra::DMatrix;
use sysrisk_core::data_panel::{label_dates, load_price_csv, to_log_returns, MarketState, MarketStateCalendar, ReturnPanel};
use sysrisk_core::dependence::{dcc_filter, fit_dcc, DccFit, DccFitOptions, DccState};
use sysrisk_core::graph_metrics::{tree_indicator_series, WeeklyTree};
use sysrisk_core::risk_measures::{risk_series_all, RiskOptions, RiskSeries};
use sysrisk_core::univariate::{fit_marginal, standardize, MarginalFitOptions, MarginalModel};

use crate::config::RunConfig;

pub struct Inputs {
    pub returns: ReturnPanel,
    pub labels: Vec<MarketState>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, String> {
    let path = cfg.input.as_ref().ok_or("no input file given (use --input or the config `input` field)")?;
    let mut schema = cfg.csv.clone();
    if cfg.entities.is_some() {
        schema.entity_columns = cfg.entities.clone();
    }
    let prices = load_price_csv(path, &schema).map_err(|e| e.to_string())?;
    let returns = to_log_returns(&prices);
    let calendar = match &cfg.calendar {
        Some(p) => MarketStateCalendar::from_json_file(p).map_err(|e| e.to_string())?,
        None => MarketStateCalendar::default_crisis(),
    };
    let labels = label_dates(returns.dates(), &calendar);
    Ok(Inputs { returns, labels })
}

/// Per-entity marginal fits; failed entities drop out of later stages.
pub struct Marginals {
    pub attempts: Vec<(String, Result<MarginalModel, String>)>,
    /// Returns restricted to the successfully fitted entities.
    pub panel: ReturnPanel,
    pub models: Vec<MarginalModel>,
}

impl Marginals {
    pub fn failures(&self) -> Vec<(String, String)> {
        self.attempts
            .iter()
            .filter_map(|(n, r)| r.as_ref().err().map(|e| (n.clone(), e.clone())))
            .collect()
    }
}

pub fn fit_marginals(inputs: &Inputs, cfg: &RunConfig) -> Result<Marginals, String> {
    use rayon::prelude::*;
    let r = &inputs.returns;
    let options = MarginalFitOptions::default();
    let attempts: Vec<(String, Result<MarginalModel, String>)> = (0..r.k())
        .into_par_iter()
        .map(|i| {
            let fit = fit_marginal(&r.column(i), cfg.marginal_orders, &options).map_err(|e| e.to_string());
            (r.entities()[i].clone(), fit)
        })
        .collect();
    let kept: Vec<String> = attempts.iter().filter(|(_, f)| f.is_ok()).map(|(n, _)| n.clone()).collect();
    let models: Vec<MarginalModel> = attempts.iter().filter_map(|(_, f)| f.as_ref().ok().cloned()).collect();
    let panel = r.select(&kept).map_err(|e| e.to_string())?;
    Ok(Marginals { attempts, panel, models })
}

pub struct Joint {
    pub fit: DccFit,
    pub state: DccState,
}

/// k-variate DCC-t copula over every fitted entity.
pub fn fit_joint(m: &Marginals, cfg: &RunConfig) -> Result<Joint, String> {
    let k = m.models.len();
    if k < 2 {
        return Err(format!("joint dependence needs at least two fitted entities, have {k}"));
    }
    let t_len = m.panel.weeks();
    let shocks = DMatrix::from_fn(t_len, k, |t, i| m.models[i].std_resid[t]);
    let pits: Vec<Vec<f64>> = m.models.iter().map(standardize).collect();
    let uniforms = DMatrix::from_fn(t_len, k, |t, i| pits[i][t]);
    let fit = fit_dcc(&shocks, &uniforms, cfg.dcc_orders, &DccFitOptions::default()).map_err(|e| e.to_string())?;
    let state = dcc_filter(&fit.params, &shocks).map_err(|e| e.to_string())?;
    Ok(Joint { fit, state })
}

pub fn weekly_trees(m: &Marginals, joint: &Joint) -> Result<Vec<WeeklyTree>, String> {
    tree_indicator_series(&joint.state.r_series, m.panel.dates(), m.panel.entities()).map_err(|e| e.to_string())
}

pub fn risk_options(cfg: &RunConfig, m: &Marginals) -> Result<RiskOptions, String> {
    let sector_weights = match &cfg.sector_weights {
        None => None,
        Some(w) => {
            let all = m.attempts.len();
            if w.len() != all {
                return Err(format!("{} sector weights for {all} entities", w.len()));
            }
            // Keep the weights of the fitted entities only.
            Some(
                m.attempts
                    .iter()
                    .zip(w)
                    .filter(|((_, f), _)| f.is_ok())
                    .map(|(_, &v)| v)
                    .collect(),
            )
        }
    };
    Ok(RiskOptions {
        levels: cfg.levels,
        marginal_orders: cfg.marginal_orders,
        sector_weights,
        ..RiskOptions::default()
    })
}

pub fn risk_series(m: &Marginals, cfg: &RunConfig) -> Result<Vec<(String, Result<RiskSeries, String>)>, String> {
    if m.models.len() < 2 {
        return Err(format!("CoVaR needs at least two fitted entities, have {}", m.models.len()));
    }
    let options = risk_options(cfg, m)?;
    let models: Vec<_> = m.models.iter().cloned().map(Ok).collect();
    Ok(risk_series_all(&m.panel, &models, &options)
        .into_iter()
        .map(|(n, r)| (n, r.map_err(|e| e.to_string())))
        .collect())
}

//! Run configuration: JSON file, then the output-directory environment
//! variable, then command-line flags, each layer overriding the previous.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sysrisk_core::data_panel::CsvSchema;
use sysrisk_core::dependence::DccOrders;
use sysrisk_core::risk_measures::QuantileLevels;
use sysrisk_core::univariate::MarginalOrders;

pub const OUTPUT_DIR_ENV: &str = "SYSRISK_OUTPUT_DIR";
const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV.
    pub input: Option<PathBuf>,
    /// Entities to keep, in output order; all columns when absent.
    pub entities: Option<Vec<String>>,
    pub marginal_orders: MarginalOrders,
    pub dcc_orders: DccOrders,
    pub levels: QuantileLevels,
    /// Market-state calendar JSON; the bundled crisis calendar when absent.
    pub calendar: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub seed: u64,
    /// Also write SVG line charts.
    pub charts: bool,
    /// Sector-index weights, one per selected entity; equal when absent.
    pub sector_weights: Option<Vec<f64>>,
    pub csv: CsvSchema,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            entities: None,
            marginal_orders: MarginalOrders::default(),
            dcc_orders: DccOrders::default(),
            levels: QuantileLevels::default(),
            calendar: None,
            output_dir: PathBuf::from("sysrisk-out"),
            threads: 0,
            seed: 7,
            charts: false,
            sector_weights: None,
            csv: CsvSchema::default(),
        }
    }
}

/// Command-line values; `None` leaves the configured value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub entities: Option<Vec<String>>,
    pub marginal_orders: Option<MarginalOrders>,
    pub dcc_orders: Option<DccOrders>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub calendar: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub charts: bool,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.input.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.calendar.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn resolve(file: Option<&Path>, env_output: Option<PathBuf>, cli: Overrides) -> Result<Self, String> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(dir) = env_output {
            cfg.output_dir = dir;
        }
        cfg.apply(cli);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: Overrides) {
        if o.input.is_some() {
            self.input = o.input;
        }
        if o.entities.is_some() {
            self.entities = o.entities;
        }
        if let Some(v) = o.marginal_orders {
            self.marginal_orders = v;
        }
        if let Some(v) = o.dcc_orders {
            self.dcc_orders = v;
        }
        if let Some(v) = o.alpha {
            self.levels.alpha = v;
        }
        if let Some(v) = o.beta {
            self.levels.beta = v;
        }
        if o.calendar.is_some() {
            self.calendar = o.calendar;
        }
        if let Some(v) = o.output_dir {
            self.output_dir = v;
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        self.charts |= o.charts;
    }

    pub fn validate(&self) -> Result<(), String> {
        self.levels.validate().map_err(|e| e.to_string())?;
        let m = self.marginal_orders;
        if [m.p, m.q, m.r, m.s].iter().any(|&o| o > MAX_ORDER) {
            return Err(format!("ARMA/eGARCH orders must not exceed {MAX_ORDER}"));
        }
        let d = self.dcc_orders;
        if d.m > MAX_ORDER || d.n > MAX_ORDER || d.m + d.n == 0 {
            return Err(format!("DCC orders must be at most {MAX_ORDER} and not both zero"));
        }
        if let Some(w) = &self.sector_weights {
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err("sector weights must be finite and non-negative".into());
            }
        }
        Ok(())
    }
}

/// Parses "p,q,r,s".
pub fn parse_marginal_orders(s: &str) -> Result<MarginalOrders, String> {
    let v = parse_list(s, 4)?;
    Ok(MarginalOrders { p: v[0], q: v[1], r: v[2], s: v[3] })
}

/// Parses "m,n".
pub fn parse_dcc_orders(s: &str) -> Result<DccOrders, String> {
    let v = parse_list(s, 2)?;
    Ok(DccOrders { m: v[0], n: v[1] })
}

fn parse_list(s: &str, n: usize) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad order `{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated orders, got {}", v.len()));
    }
    Ok(v)
}

//! Subcommand bodies. Each returns the per-entity failures it tolerated, or
//! an error when nothing useful could be produced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sysrisk_core::data_panel::MarketState;
use sysrisk_core::graph_metrics::WeeklyTree;
use sysrisk_core::risk_measures::RiskSeries;
use sysrisk_core::stats::spearman;
use sysrisk_core::synthetic::{factor_correlation, hub_market_spec, simulate_panel, SimulationSpec};
use sysrisk_core::univariate::MarginalModel;

use crate::config::RunConfig;
use crate::output::{col, file_stem, num, opt_num, TableSchema, Writer};
use crate::pipeline::{self, Inputs, Joint, Marginals};
use crate::svg::{line_chart, Series};

/// Entities that failed without stopping the run.
pub type Failures = Vec<(String, String)>;

fn date(d: &chrono::NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub spec: Option<std::path::PathBuf>,
    pub k: usize,
    pub hub_loading: f64,
    pub periphery_loading: f64,
    pub weeks: Option<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    price_file: &'a str,
    price_rows: usize,
    /// Entity with the largest factor loading, when loadings are given.
    hub: Option<&'a str>,
    /// Unconditional correlation target of the DCC recursion.
    implied_correlation: Vec<Vec<f64>>,
    spec: &'a SimulationSpec,
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<Failures, String> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str::<SimulationSpec>(&text).map_err(|e| format!("invalid simulation spec: {e}"))?
        }
        None => hub_market_spec(args.k, args.hub_loading, args.periphery_loading, cfg.seed).map_err(|e| e.to_string())?,
    };
    if let Some(w) = args.weeks {
        spec.weeks = w;
    }
    let (panel, _) = simulate_panel(&spec).map_err(|e| e.to_string())?;
    let mut w = Writer::new(&cfg.output_dir)?;
    let mut columns = vec![col("date", "date", "observation date (YYYY-MM-DD)")];
    columns.extend(panel.entities().iter().map(|e| col(e.clone(), "float", "price level")));
    let schema = TableSchema { table: "prices", columns, notes: Some("simulated weekly prices, base 100".into()) };
    let rows: Vec<Vec<String>> = panel
        .dates()
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let mut row = vec![date(d)];
            row.extend((0..panel.entities().len()).map(|i| format!("{:.10}", panel.prices()[(t, i)])));
            row
        })
        .collect();
    w.table("prices.csv", &schema, &rows)?;
    let hub = spec.loadings.as_ref().and_then(|l| {
        let (i, _) = l.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        Some(spec.entities[i].name.as_str())
    });
    let q = match &spec.loadings {
        Some(l) => factor_correlation(l),
        None => spec.dcc.qbar.clone(),
    };
    let manifest = Manifest {
        schema_version: crate::output::SCHEMA_VERSION,
        price_file: "prices.csv",
        price_rows: panel.len(),
        hub,
        implied_correlation: q.row_iter().map(|r| r.iter().copied().collect()).collect(),
        spec: &spec,
    };
    w.json("manifest.json", &manifest)?;
    Ok(vec![])
}

// --------------------------------------------------------------------- fit

#[derive(Serialize)]
struct ModelFile<'a> {
    entity: &'a str,
    model: &'a MarginalModel,
}

#[derive(Serialize)]
struct DccFile<'a> {
    entities: &'a [String],
    orders: sysrisk_core::dependence::DccOrders,
    c: &'a [f64],
    d: &'a [f64],
    nu_copula: f64,
    qbar: Vec<Vec<f64>>,
    loglik: f64,
    converged: bool,
    evaluations: usize,
}

pub fn write_fit(w: &mut Writer, cfg: &RunConfig, m: &Marginals, joint: Option<&Joint>) -> Result<(), String> {
    let mut rows = Vec::new();
    for (name, fit) in &m.attempts {
        match fit {
            Ok(model) => {
                w.json(&format!("models/{}.json", file_stem(name)), &ModelFile { entity: name, model })?;
                let d = &model.diagnostics;
                rows.push(vec![
                    name.clone(),
                    "ok".into(),
                    d.converged.to_string(),
                    d.on_boundary.to_string(),
                    num(model.loglik),
                    num(model.egarch.nu),
                    num(d.persistence),
                    String::new(),
                ]);
            }
            Err(e) => rows.push(vec![
                name.clone(),
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
            ]),
        }
    }
    let schema = TableSchema {
        table: "fit_summary",
        columns: vec![
            col("entity", "string", "entity identifier"),
            col("status", "string", "ok or failed"),
            col("converged", "bool", "optimizer convergence certificate"),
            col("on_boundary", "bool", "optimum on the variance-filter invertibility boundary"),
            col("loglik", "float", "maximized log-likelihood"),
            col("nu", "float", "Student-t degrees of freedom"),
            col("persistence", "float", "sum of eGARCH beta coefficients"),
            col("message", "string", "failure reason"),
        ],
        notes: None,
    };
    w.table("fit_summary.csv", &schema, &rows)?;
    if let Some(j) = joint {
        let p = &j.fit.params;
        w.json(
            "dcc.json",
            &DccFile {
                entities: m.panel.entities(),
                orders: cfg.dcc_orders,
                c: &p.c,
                d: &p.d,
                nu_copula: p.nu_copula,
                qbar: p.qbar.row_iter().map(|r| r.iter().copied().collect()).collect(),
                loglik: j.fit.loglik,
                converged: j.fit.diagnostics.converged,
                evaluations: j.fit.diagnostics.evaluations,
            },
        )?;
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig) -> Result<Failures, String> {
    let inputs = pipeline::load_inputs(cfg)?;
    let m = pipeline::fit_marginals(&inputs, cfg)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    let joint = pipeline::fit_joint(&m, cfg);
    write_fit(&mut w, cfg, &m, joint.as_ref().ok())?;
    joint?;
    Ok(m.failures())
}

// --------------------------------------------------------------------- mst

fn by_state<T>(labels: &[MarketState], values: impl Iterator<Item = T>) -> BTreeMap<MarketState, Vec<T>> {
    let mut out: BTreeMap<MarketState, Vec<T>> = BTreeMap::new();
    for (l, v) in labels.iter().zip(values) {
        out.entry(l.clone()).or_default().push(v);
    }
    out
}

pub fn write_mst(w: &mut Writer, cfg: &RunConfig, labels: &[MarketState], trees: &[WeeklyTree]) -> Result<(), String> {
    let max_bc = |t: &WeeklyTree| t.indicators.bc.normalized.iter().copied().fold(0.0, f64::max);
    let rows: Vec<Vec<String>> = trees
        .iter()
        .zip(labels)
        .map(|(t, l)| {
            vec![
                date(&t.date),
                l.to_string(),
                num(t.indicators.apl),
                t.indicators.max_degree.to_string(),
                opt_num(t.indicators.alpha_degree),
                num(max_bc(t)),
            ]
        })
        .collect();
    let indicators = TableSchema {
        table: "mst_indicators",
        columns: vec![
            col("date", "date", "week end"),
            col("state", "string", "market-state label"),
            col("apl", "float", "average path length of the weekly MST"),
            col("max_degree", "int", "largest vertex degree"),
            col("alpha_degree", "float", "power-law exponent of the degree distribution; empty when not identified"),
            col("max_bc", "float", "largest normalized betweenness centrality"),
        ],
        notes: None,
    };
    w.table("mst_indicators.csv", &indicators, &rows)?;

    let mut node_rows = Vec::new();
    let mut edge_rows = Vec::new();
    for t in trees {
        for (i, e) in t.tree.entities.iter().enumerate() {
            node_rows.push(vec![
                date(&t.date),
                e.clone(),
                t.node_degrees[i].to_string(),
                t.indicators.bc.raw[i].to_string(),
                num(t.indicators.bc.normalized[i]),
            ]);
        }
        for e in &t.tree.edges {
            edge_rows.push(vec![
                date(&t.date),
                t.tree.entities[e.a].clone(),
                t.tree.entities[e.b].clone(),
                num(e.weight),
            ]);
        }
    }
    let nodes = TableSchema {
        table: "mst_nodes",
        columns: vec![
            col("date", "date", "week end"),
            col("entity", "string", "entity identifier"),
            col("degree", "int", "vertex degree"),
            col("bc_raw", "int", "unordered vertex pairs whose tree path passes through the vertex"),
            col("bc", "float", "betweenness normalized by (k-1)(k-2)/2"),
        ],
        notes: None,
    };
    w.table("mst_nodes.csv", &nodes, &node_rows)?;
    let edges = TableSchema {
        table: "mst_edges",
        columns: vec![
            col("date", "date", "week end"),
            col("source", "string", "endpoint earlier in entity order"),
            col("target", "string", "other endpoint"),
            col("distance", "float", "sqrt(2(1-rho))"),
        ],
        notes: None,
    };
    w.table("mst_edges.csv", &edges, &edge_rows)?;

    let mut summary = Vec::new();
    for (state, weeks) in by_state(labels, trees.iter()) {
        summary.push(vec![
            state.to_string(),
            weeks.len().to_string(),
            num(mean(weeks.iter().map(|t| t.indicators.apl))),
            num(mean(weeks.iter().map(|t| t.indicators.max_degree as f64))),
            num(mean(weeks.iter().filter_map(|t| t.indicators.alpha_degree))),
            num(mean(weeks.iter().map(|t| max_bc(t)))),
        ]);
    }
    let summary_schema = TableSchema {
        table: "mst_summary_by_state",
        columns: vec![
            col("state", "string", "market-state label"),
            col("weeks", "int", "weeks carrying the label"),
            col("mean_apl", "float", "mean average path length"),
            col("mean_max_degree", "float", "mean maximum degree"),
            col("mean_alpha_degree", "float", "mean power-law exponent over identified weeks"),
            col("mean_max_bc", "float", "mean of the weekly largest normalized betweenness"),
        ],
        notes: None,
    };
    w.table("mst_summary_by_state.csv", &summary_schema, &summary)?;

    if cfg.charts && !trees.is_empty() {
        let apl: Vec<f64> = trees.iter().map(|t| t.indicators.apl).collect();
        let deg: Vec<f64> = trees.iter().map(|t| t.indicators.max_degree as f64).collect();
        let ends = (date(&trees[0].date), date(&trees[trees.len() - 1].date));
        w.text(
            "charts/mst_indicators.svg",
            &line_chart(
                "Weekly MST: average path length and maximum degree",
                (&ends.0, &ends.1),
                &[Series { name: "APL", values: &apl }, Series { name: "max degree", values: &deg }],
            ),
        )?;
    }
    Ok(())
}

pub fn mst(cfg: &RunConfig) -> Result<Failures, String> {
    let inputs = pipeline::load_inputs(cfg)?;
    let m = pipeline::fit_marginals(&inputs, cfg)?;
    let joint = pipeline::fit_joint(&m, cfg)?;
    let trees = pipeline::weekly_trees(&m, &joint)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    write_mst(&mut w, cfg, &inputs.labels, &trees)?;
    Ok(m.failures())
}

// ------------------------------------------------------------------- covar

const SECTOR_NOTE: &str = "sector index for entity i: mean log-return of all other fitted entities, \
equally weighted unless sector_weights is configured; entity i is always excluded";

#[derive(Serialize)]
struct CovarMeta<'a> {
    alpha: f64,
    beta: f64,
    sector_index: &'a str,
    sector_weights: Option<&'a [f64]>,
    copulas: Vec<CopulaMeta<'a>>,
}

#[derive(Serialize)]
struct CopulaMeta<'a> {
    entity: &'a str,
    nu_copula: f64,
    mean_rho: f64,
}

pub fn write_covar(
    w: &mut Writer,
    cfg: &RunConfig,
    labels: &[MarketState],
    series: &[(String, Result<RiskSeries, String>)],
) -> Result<(), String> {
    let ok: Vec<&RiskSeries> = series.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let mut rows = Vec::new();
    for s in &ok {
        for t in 0..s.dates.len() {
            rows.push(vec![
                date(&s.dates[t]),
                s.entity.clone(),
                labels[t].to_string(),
                num(s.var_i[t]),
                num(s.covar_stress[t]),
                num(s.covar_median[t]),
                num(s.delta_covar[t]),
            ]);
        }
    }
    let long = TableSchema {
        table: "covar_series",
        columns: vec![
            col("date", "date", "week end"),
            col("entity", "string", "conditioning entity i"),
            col("state", "string", "market-state label"),
            col("var_i", "float", "alpha-quantile of entity i's conditional return"),
            col("covar_stress", "float", "beta-quantile of the sector given entity i at or below its VaR"),
            col("covar_median", "float", "beta-quantile of the sector given entity i at or below its median"),
            col("delta_covar", "float", "covar_stress - covar_median; more negative means a larger contribution"),
        ],
        notes: Some(SECTOR_NOTE.into()),
    };
    w.table("covar_series.csv", &long, &rows)?;

    let mut summary = Vec::new();
    for s in &ok {
        for (state, weeks) in by_state(labels, 0..s.dates.len()) {
            summary.push(vec![
                s.entity.clone(),
                state.to_string(),
                weeks.len().to_string(),
                num(mean(weeks.iter().map(|&t| s.var_i[t]))),
                num(mean(weeks.iter().map(|&t| s.covar_stress[t]))),
                num(mean(weeks.iter().map(|&t| s.covar_median[t]))),
                num(mean(weeks.iter().map(|&t| s.delta_covar[t]))),
            ]);
        }
    }
    let summary_schema = TableSchema {
        table: "covar_summary_by_state",
        columns: vec![
            col("entity", "string", "conditioning entity i"),
            col("state", "string", "market-state label"),
            col("weeks", "int", "weeks carrying the label"),
            col("mean_var_i", "float", "mean VaR of entity i"),
            col("mean_covar_stress", "float", "mean stress CoVaR"),
            col("mean_covar_median", "float", "mean median CoVaR"),
            col("mean_delta_covar", "float", "mean delta CoVaR"),
        ],
        notes: Some(SECTOR_NOTE.into()),
    };
    w.table("covar_summary_by_state.csv", &summary_schema, &summary)?;

    let meta = CovarMeta {
        alpha: cfg.levels.alpha,
        beta: cfg.levels.beta,
        sector_index: SECTOR_NOTE,
        sector_weights: cfg.sector_weights.as_deref(),
        copulas: ok
            .iter()
            .map(|s| CopulaMeta { entity: &s.entity, nu_copula: s.nu_copula, mean_rho: mean(s.rho.iter().copied()) })
            .collect(),
    };
    w.json("covar_metadata.json", &meta)?;

    if cfg.charts && !ok.is_empty() {
        let first = &ok[0].dates;
        let ends = (date(&first[0]), date(&first[first.len() - 1]));
        let lines: Vec<Series> = ok.iter().map(|s| Series { name: &s.entity, values: &s.delta_covar }).collect();
        w.text("charts/delta_covar.svg", &line_chart("Weekly delta CoVaR", (&ends.0, &ends.1), &lines))?;
    }
    Ok(())
}

pub fn covar(cfg: &RunConfig) -> Result<Failures, String> {
    let inputs = pipeline::load_inputs(cfg)?;
    let m = pipeline::fit_marginals(&inputs, cfg)?;
    let series = pipeline::risk_series(&m, cfg)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    write_covar(&mut w, cfg, &inputs.labels, &series)?;
    let mut failures = m.failures();
    failures.extend(series.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| (n.clone(), e.clone()))));
    if failures.len() == inputs.returns.k() {
        return Err("every entity failed".into());
    }
    Ok(failures)
}

// ------------------------------------------------------------------ relate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelateSummary {
    pub entities: usize,
    /// Spearman rank correlation of (mean BC, mean ΔCoVaR); null when undefined.
    pub spearman: Option<f64>,
    pub highest_mean_bc: Option<String>,
    pub most_negative_delta_covar: Option<String>,
}

pub fn write_relate(
    w: &mut Writer,
    trees: &[WeeklyTree],
    series: &[(String, Result<RiskSeries, String>)],
) -> Result<RelateSummary, String> {
    let entities: Vec<String> = trees.first().map(|t| t.tree.entities.clone()).unwrap_or_default();
    let mut rows = Vec::new();
    let mut bc_col = Vec::new();
    let mut dc_col = Vec::new();
    let mut names = Vec::new();
    for (i, e) in entities.iter().enumerate() {
        let Some(s) = series.iter().find(|(n, _)| n == e).and_then(|(_, r)| r.as_ref().ok()) else {
            continue;
        };
        let bc = mean(trees.iter().map(|t| t.indicators.bc.normalized[i]));
        let dc = s.mean_delta_covar();
        rows.push(vec![e.clone(), num(bc), num(dc)]);
        bc_col.push(bc);
        dc_col.push(dc);
        names.push(e.clone());
    }
    let schema = TableSchema {
        table: "relate",
        columns: vec![
            col("entity", "string", "entity identifier"),
            col("mean_bc", "float", "mean normalized betweenness in the weekly MSTs"),
            col("mean_delta_covar", "float", "mean delta CoVaR"),
        ],
        notes: Some(SECTOR_NOTE.into()),
    };
    w.table("relate.csv", &schema, &rows)?;
    let arg = |v: &[f64], better: fn(f64, f64) -> bool| {
        let mut best: Option<usize> = None;
        for (i, &x) in v.iter().enumerate() {
            if best.is_none_or(|b| better(x, v[b])) {
                best = Some(i);
            }
        }
        best.map(|i| names[i].clone())
    };
    let rho = spearman(&bc_col, &dc_col);
    let summary = RelateSummary {
        entities: names.len(),
        spearman: rho.is_finite().then_some(rho),
        highest_mean_bc: arg(&bc_col, |a, b| a > b),
        most_negative_delta_covar: arg(&dc_col, |a, b| a < b),
    };
    w.json("relate_summary.json", &summary)?;
    Ok(summary)
}

pub fn relate(cfg: &RunConfig) -> Result<Failures, String> {
    let inputs = pipeline::load_inputs(cfg)?;
    let m = pipeline::fit_marginals(&inputs, cfg)?;
    let joint = pipeline::fit_joint(&m, cfg)?;
    let trees = pipeline::weekly_trees(&m, &joint)?;
    let series = pipeline::risk_series(&m, cfg)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    write_relate(&mut w, &trees, &series)?;
    let mut failures = m.failures();
    failures.extend(series.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| (n.clone(), e.clone()))));
    Ok(failures)
}

// ------------------------------------------------------------------ report

#[derive(Serialize)]
struct ReportIndex<'a> {
    schema_version: u32,
    status: &'a str,
    entities_in: usize,
    entities_fitted: usize,
    failures: &'a [(String, String)],
    relate: &'a RelateSummary,
    config: &'a RunConfig,
    files: Vec<String>,
}

/// Every stage once, sharing the fitted models.
pub fn report(cfg: &RunConfig) -> Result<Failures, String> {
    let inputs: Inputs = pipeline::load_inputs(cfg)?;
    let m = pipeline::fit_marginals(&inputs, cfg)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    let joint = pipeline::fit_joint(&m, cfg);
    write_fit(&mut w, cfg, &m, joint.as_ref().ok())?;
    let joint = joint?;
    let trees = pipeline::weekly_trees(&m, &joint)?;
    write_mst(&mut w, cfg, &inputs.labels, &trees)?;
    let series = pipeline::risk_series(&m, cfg)?;
    write_covar(&mut w, cfg, &inputs.labels, &series)?;
    let relate = write_relate(&mut w, &trees, &series)?;

    let mut failures = m.failures();
    failures.extend(series.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| (n.clone(), e.clone()))));
    // Neither the output location nor the thread count affects the results.
    let shown = RunConfig { output_dir: Path::new(".").to_path_buf(), threads: 0, ..cfg.clone() };
    let mut files = w.written();
    files.push("report.json".into());
    files.sort();
    let index = ReportIndex {
        schema_version: crate::output::SCHEMA_VERSION,
        status: if failures.is_empty() { "ok" } else { "partial" },
        entities_in: inputs.returns.k(),
        entities_fitted: m.models.len(),
        failures: &failures,
        relate: &relate,
        config: &shown,
        files,
    };
    w.json("report.json", &index)?;
    Ok(failures)
}

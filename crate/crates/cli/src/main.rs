use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sysrisk_cli::commands::{self, SimulateArgs};
use sysrisk_cli::config::{parse_dcc_orders, parse_marginal_orders, Overrides, RunConfig, OUTPUT_DIR_ENV};
use sysrisk_cli::exit;
use sysrisk_core::dependence::DccOrders;
use sysrisk_core::univariate::MarginalOrders;

#[derive(Parser)]
#[command(name = "sysrisk", version, about = "Correlation-network topology and CoVaR systemic-risk pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Price CSV with a `date` column and one column per entity.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Comma-separated entity columns to keep.
    #[arg(long, global = true, value_delimiter = ',')]
    entities: Option<Vec<String>>,
    /// ARMA and eGARCH orders as p,q,r,s.
    #[arg(long, global = true, value_parser = parse_marginal_orders)]
    orders: Option<MarginalOrders>,
    /// DCC orders as m,n.
    #[arg(long, global = true, value_parser = parse_dcc_orders)]
    dcc_orders: Option<DccOrders>,
    /// Conditioning (VaR) level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Sector quantile level.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Market-state calendar JSON.
    #[arg(long, global = true)]
    calendar: Option<PathBuf>,
    /// Output directory (also settable through SYSRISK_OUTPUT_DIR).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    charts: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a price panel and its ground-truth manifest.
    Simulate {
        /// Simulation spec JSON; a hub market is generated when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.9)]
        hub_loading: f64,
        #[arg(long, default_value_t = 0.3)]
        periphery_loading: f64,
        /// Number of weekly returns (prices have one more row).
        #[arg(long)]
        weeks: Option<usize>,
    },
    /// Fit marginal models and the joint DCC copula.
    Fit,
    /// Weekly minimum spanning trees and their indicators.
    Mst,
    /// VaR, CoVaR and delta CoVaR for every entity.
    Covar,
    /// Join mean betweenness with mean delta CoVaR.
    Relate,
    /// Run fit, mst, covar and relate into one output tree.
    Report,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = cli.common;
    let overrides = Overrides {
        input: c.input,
        entities: c.entities,
        marginal_orders: c.orders,
        dcc_orders: c.dcc_orders,
        alpha: c.alpha,
        beta: c.beta,
        calendar: c.calendar,
        output_dir: c.output,
        threads: c.threads,
        seed: c.seed,
        charts: c.charts,
    };
    let env_output = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let cfg = match RunConfig::resolve(c.config.as_deref(), env_output, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit::FAILURE);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: {e}");
            std::process::exit(exit::FAILURE);
        }
    }
    let result = match cli.command {
        Command::Simulate { spec, k, hub_loading, periphery_loading, weeks } => {
            commands::simulate(&cfg, &SimulateArgs { spec, k, hub_loading, periphery_loading, weeks })
        }
        Command::Fit => commands::fit(&cfg),
        Command::Mst => commands::mst(&cfg),
        Command::Covar => commands::covar(&cfg),
        Command::Relate => commands::relate(&cfg),
        Command::Report => commands::report(&cfg),
    };
    let code = match result {
        Ok(failures) if failures.is_empty() => exit::SUCCESS,
        Ok(failures) => {
            for (entity, reason) in &failures {
                eprintln!("warning: {entity}: {reason}");
            }
            exit::PARTIAL
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::FAILURE
        }
    };
    std::process::exit(code);
}

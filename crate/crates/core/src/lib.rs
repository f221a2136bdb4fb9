//! Systemic-risk analytics for a panel of financial institutions.
//!
//! The crate covers two connected pipelines built on the same estimated
//! dependence model:
//!
//! - Network topology: ARMA-eGARCH marginals with Student-t innovations feed a
//!   DCC Student-t copula. Each week's conditional correlation matrix is turned
//!   into a Mantegna distance matrix, reduced to its minimum spanning tree and
//!   summarised by average path length, maximum degree, a power-law degree
//!   exponent and betweenness centrality.
//! - Tail risk: for each institution a bivariate copula-DCC model against the
//!   remaining sector gives weekly VaR, CoVaR under stress and median
//!   conditioning, and their difference (ΔCoVaR).
//!
//! Estimation is two-stage (marginals first, then dependence on the
//! probability-integral transforms). All numerical routines are deterministic.

pub mod data_panel;
pub mod dependence;
pub mod error;
pub mod graph_metrics;
pub mod optim;
pub mod quadrature;
pub mod risk_measures;
pub mod rng;
pub mod stats;
pub mod student_t;
pub mod synthetic;
pub mod univariate;

pub use error::{Error, Result};

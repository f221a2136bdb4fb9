//! Minimum spanning trees on correlation distances and their topology.
//!
//! Distances use the Mantegna metric d = √(2(1 − ρ)), so the tree depends
//! only on the ordering of correlations. Kruskal's algorithm processes edges
//! in (weight, a, b) order, which fixes the tree under tied weights.
//!
//! Power-law degree fits are noisy on trees of a few dozen nodes; treat the
//! exponent series as descriptive.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optim::golden_section;
use crate::stats::riemann_zeta;
use crate::{Error, Result};

const RHO_SLACK: f64 = 1e-9;

pub fn mantegna_distance(rho: f64) -> Result<f64> {
    if !(rho >= -1.0 - RHO_SLACK && rho <= 1.0 + RHO_SLACK) {
        return Err(Error::Domain(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok((2.0 * (1.0 - rho.clamp(-1.0, 1.0))).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entities: Vec<String>,
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn from_correlation(entities: Vec<String>, corr: &DMatrix<f64>) -> Result<Self> {
        let k = corr.nrows();
        if !corr.is_square() || entities.len() != k {
            return Err(Error::Domain(format!(
                "{} entities for a {}×{} correlation matrix",
                entities.len(),
                corr.nrows(),
                corr.ncols()
            )));
        }
        let mut d = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                let v = mantegna_distance(corr[(i, j)])?;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        Ok(Self { entities, d })
    }

    /// Wraps a raw distance matrix after checking symmetry, zero diagonal and range.
    pub fn new(entities: Vec<String>, d: DMatrix<f64>) -> Result<Self> {
        let k = d.nrows();
        if !d.is_square() || entities.len() != k {
            return Err(Error::Domain("distance matrix shape does not match entities".into()));
        }
        for i in 0..k {
            if d[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = d[(i, j)];
                if v != d[(j, i)] || !(0.0..=2.0).contains(&v) {
                    return Err(Error::Domain(format!("invalid distance at ({i}, {j})")));
                }
            }
        }
        Ok(Self { entities, d })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn k(&self) -> usize {
        self.entities.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Smaller endpoint index.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// A spanning tree over `entities`; edges refer to entity indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub entities: Vec<String>,
    pub edges: Vec<Edge>,
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal MST; ties are broken by (weight, a, b).
pub fn build_mst(dist: &DistanceMatrix) -> SpanningTree {
    let k = dist.k();
    let mut candidates = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            candidates.push(Edge {
                a,
                b,
                weight: dist.d[(a, b)],
            });
        }
    }
    candidates.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut uf = UnionFind::new(k);
    let mut edges = Vec::with_capacity(k.saturating_sub(1));
    for e in candidates {
        if uf.union(e.a, e.b) {
            edges.push(e);
            if edges.len() + 1 == k {
                break;
            }
        }
    }
    SpanningTree {
        entities: dist.entities.clone(),
        edges,
    }
}

impl SpanningTree {
    pub fn k(&self) -> usize {
        self.entities.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.k()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.k()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    /// k − 1 edges, in-range endpoints and no cycle.
    pub fn is_valid(&self) -> bool {
        let k = self.k();
        if k == 0 || self.edges.len() + 1 != k {
            return false;
        }
        let mut uf = UnionFind::new(k);
        self.edges
            .iter()
            .all(|e| e.a < k && e.b < k && e.a != e.b && uf.union(e.a, e.b))
    }
}

/// Mean hop distance over unordered node pairs.
pub fn apl(tree: &SpanningTree) -> f64 {
    let k = tree.k();
    if k < 2 {
        return 0.0;
    }
    // Each edge lies on s·(k − s) paths, where s is the size of one side.
    let (parent, sizes) = rooted(tree);
    let total: usize = (0..k)
        .filter(|&v| parent[v].is_some())
        .map(|v| sizes[v] * (k - sizes[v]))
        .sum();
    total as f64 / (k * (k - 1) / 2) as f64
}

pub fn max_degree(tree: &SpanningTree) -> usize {
    tree.degrees().into_iter().max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Betweenness {
    /// Number of unordered pairs whose path transits the node.
    pub raw: Vec<u64>,
    /// `raw` divided by (k − 1)(k − 2)/2; zero when k < 3.
    pub normalized: Vec<f64>,
}

pub fn betweenness(tree: &SpanningTree) -> Betweenness {
    let k = tree.k();
    let adj = tree.adjacency();
    let (parent, sizes) = rooted(tree);
    let pairs = |n: usize| (n * n.saturating_sub(1) / 2) as u64;
    let raw: Vec<u64> = (0..k)
        .map(|v| {
            // Components left after deleting v: each child subtree, plus the rest.
            let mut excluded = 0u64;
            let mut below = 0;
            for &w in &adj[v] {
                if parent[w] == Some(v) {
                    excluded += pairs(sizes[w]);
                    below += sizes[w];
                }
            }
            excluded += pairs(k - 1 - below);
            pairs(k - 1) - excluded
        })
        .collect();
    let denom = ((k.saturating_sub(1)) * (k.saturating_sub(2)) / 2) as f64;
    let normalized = raw
        .iter()
        .map(|&r| if denom > 0.0 { r as f64 / denom } else { 0.0 })
        .collect();
    Betweenness { raw, normalized }
}

/// Parent pointers and subtree sizes for the tree rooted at node 0.
fn rooted(tree: &SpanningTree) -> (Vec<Option<usize>>, Vec<usize>) {
    let k = tree.k();
    let adj = tree.adjacency();
    let mut parent = vec![None; k];
    let mut order = Vec::with_capacity(k);
    let mut seen = vec![false; k];
    if k > 0 {
        seen[0] = true;
        order.push(0);
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    order.push(w);
                }
            }
            i += 1;
        }
    }
    let mut size = vec![1; k];
    for &v in order.iter().rev() {
        if let Some(p) = parent[v] {
            size[p] += size[v];
        }
    }
    (parent, size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistributionFit {
    pub alpha: Option<f64>,
    /// 1/ζ(α); absent when unconverged.
    pub c: Option<f64>,
    pub n_obs: usize,
    pub converged: bool,
}

const ALPHA_BOUNDS: (f64, f64) = (1.000_001, 20.0);

/// Discrete power-law MLE with s_min = 1: maximizes −α Σ ln s − n ln ζ(α).
pub fn fit_degree_alpha(degrees: &[usize]) -> Result<DegreeDistributionFit> {
    if degrees.contains(&0) {
        return Err(Error::Domain("degrees must be positive".into()));
    }
    let n = degrees.len();
    let mut distinct: Vec<usize> = degrees.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let unconverged = DegreeDistributionFit {
        alpha: None,
        c: None,
        n_obs: n,
        converged: false,
    };
    if distinct.len() < 3 {
        return Ok(unconverged);
    }
    let sum_ln: f64 = degrees.iter().map(|&s| (s as f64).ln()).sum();
    let neg_ll = |a: f64| a * sum_ln + n as f64 * riemann_zeta(a).ln();
    let (alpha, value) = golden_section(neg_ll, ALPHA_BOUNDS.0, ALPHA_BOUNDS.1, 1e-6);
    let interior = alpha > ALPHA_BOUNDS.0 + 1e-5 && alpha < ALPHA_BOUNDS.1 - 1e-5;
    if !interior || !value.is_finite() {
        return Ok(unconverged);
    }
    Ok(DegreeDistributionFit {
        alpha: Some(alpha),
        c: Some(1.0 / riemann_zeta(alpha)),
        n_obs: n,
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeIndicators {
    pub apl: f64,
    pub max_degree: usize,
    pub alpha_degree: Option<f64>,
    pub bc: Betweenness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyTree {
    pub date: NaiveDate,
    pub tree: SpanningTree,
    pub node_degrees: Vec<usize>,
    pub indicators: TreeIndicators,
}

impl WeeklyTree {
    pub fn from_tree(date: NaiveDate, tree: SpanningTree) -> Result<Self> {
        let node_degrees = tree.degrees();
        let fit = fit_degree_alpha(&node_degrees)?;
        let indicators = TreeIndicators {
            apl: apl(&tree),
            max_degree: node_degrees.iter().copied().max().unwrap_or(0),
            alpha_degree: fit.alpha,
            bc: betweenness(&tree),
        };
        Ok(Self {
            date,
            tree,
            node_degrees,
            indicators,
        })
    }

    pub fn from_correlation(date: NaiveDate, entities: Vec<String>, corr: &DMatrix<f64>) -> Result<Self> {
        let dist = DistanceMatrix::from_correlation(entities, corr)?;
        Self::from_tree(date, build_mst(&dist))
    }
}

/// One tree per week of a correlation path; errors carry the week index.
pub fn tree_indicator_series(
    r_series: &[DMatrix<f64>],
    dates: &[NaiveDate],
    entities: &[String],
) -> Result<Vec<WeeklyTree>> {
    if r_series.len() != dates.len() {
        return Err(Error::Validation(format!(
            "{} correlation matrices for {} dates",
            r_series.len(),
            dates.len()
        )));
    }
    if entities.len() < 2 {
        return Err(Error::Validation("need at least two entities".into()));
    }
    r_series
        .par_iter()
        .zip(dates.par_iter())
        .enumerate()
        .map(|(t, (r, &date))| {
            WeeklyTree::from_correlation(date, entities.to_vec(), r).map_err(|e| Error::Numerical {
                index: t,
                message: e.to_string(),
            })
        })
        .collect()
}

//! Pair statistics, estimated and exact k-relative neighborhood graphs.
//!
//! Two objects are joined in the k-RNG iff fewer than `k` other objects lie
//! in their lens. A most-central statement `(a; b, c)` says `a` is in the
//! lens of `{b, c}`, so `V = N / D` over the statements mentioning a pair
//! estimates the fraction of the data inside its lens.

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::DistanceOracle;
use crate::statements::{fold_parallel, Statement, StatementCollection, StatementFold, StatementKind};

/// Largest universe stored as a dense triangular table by default.
pub const DENSE_PAIR_LIMIT: usize = 20_000;

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    b * (b - 1) / 2 + a
}

fn pair_total(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PairStore {
    Dense { num: Vec<u32>, den: Vec<u32> },
    Sparse(HashMap<(u32, u32), (u32, u32)>),
}

/// Per unordered pair: `N`, the statements designating a third member
/// between them, and `D`, the statements mentioning both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairStats {
    n: usize,
    store: PairStore,
}

impl PairStats {
    pub fn new(n: usize) -> Self {
        Self::with_dense_limit(n, DENSE_PAIR_LIMIT)
    }

    pub fn with_dense_limit(n: usize, dense_limit: usize) -> Self {
        let store = if n <= dense_limit {
            let m = pair_total(n);
            PairStore::Dense {
                num: vec![0; m],
                den: vec![0; m],
            }
        } else {
            PairStore::Sparse(HashMap::new())
        };
        PairStats { n, store }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.store, PairStore::Dense { .. })
    }

    /// `(N, D)` for the pair; `(0, 0)` on the diagonal.
    pub fn counts(&self, i: usize, j: usize) -> (u32, u32) {
        if i == j {
            return (0, 0);
        }
        match &self.store {
            PairStore::Dense { num, den } => {
                let p = pair_index(i, j);
                (num[p], den[p])
            }
            PairStore::Sparse(map) => {
                let key = (i.min(j) as u32, i.max(j) as u32);
                map.get(&key).copied().unwrap_or((0, 0))
            }
        }
    }

    /// `N / D`, or `+∞` when the pair was never mentioned.
    pub fn v(&self, i: usize, j: usize) -> f64 {
        let (num, den) = self.counts(i, j);
        if den == 0 {
            f64::INFINITY
        } else {
            num as f64 / den as f64
        }
    }

    /// Pairs `i < j` with `D > 0`, with their `(N, D)`.
    pub fn mentioned_pairs(&self) -> Vec<(usize, usize, u32, u32)> {
        let mut out = Vec::new();
        match &self.store {
            PairStore::Dense { num, den } => {
                for i in 0..self.n {
                    for j in i + 1..self.n {
                        let p = pair_index(i, j);
                        if den[p] > 0 {
                            out.push((i, j, num[p], den[p]));
                        }
                    }
                }
            }
            PairStore::Sparse(map) => {
                out.extend(map.iter().map(|(&(i, j), &(a, b))| (i as usize, j as usize, a, b)));
                out.sort_unstable();
            }
        }
        out
    }

    #[inline]
    pub(crate) fn bump(&mut self, i: usize, j: usize, designated_between: bool) {
        let inc = u32::from(designated_between);
        match &mut self.store {
            PairStore::Dense { num, den } => {
                let p = pair_index(i, j);
                num[p] += inc;
                den[p] += 1;
            }
            PairStore::Sparse(map) => {
                let e = map.entry((i.min(j) as u32, i.max(j) as u32)).or_insert((0, 0));
                e.0 += inc;
                e.1 += 1;
            }
        }
    }
}

impl StatementFold for PairStats {
    #[inline]
    fn observe(&mut self, s: &Statement) {
        let (a, b, c) = (s.designated.index(), s.other1.index(), s.other2.index());
        self.bump(b, c, true);
        self.bump(a, b, false);
        self.bump(a, c, false);
    }

    fn merge(&mut self, other: Self) {
        match (&mut self.store, other.store) {
            (PairStore::Dense { num, den }, PairStore::Dense { num: n2, den: d2 }) => {
                for (a, b) in num.iter_mut().zip(n2) {
                    *a += b;
                }
                for (a, b) in den.iter_mut().zip(d2) {
                    *a += b;
                }
            }
            (PairStore::Sparse(map), PairStore::Sparse(m2)) => {
                for (k, (a, b)) in m2 {
                    let e = map.entry(k).or_insert((0, 0));
                    e.0 += a;
                    e.1 += b;
                }
            }
            _ => panic!("cannot merge dense and sparse pair statistics"),
        }
    }
}

/// Accumulates `N` and `D` over a most-central collection.
pub fn accumulate_pair_stats(c: &StatementCollection) -> Result<PairStats> {
    accumulate_pair_stats_with_limit(c, DENSE_PAIR_LIMIT)
}

pub fn accumulate_pair_stats_with_limit(c: &StatementCollection, dense_limit: usize) -> Result<PairStats> {
    c.require_kind(StatementKind::MostCentral)?;
    let n = c.n();
    if n > dense_limit {
        return Ok(fold_parallel(c.items(), || PairStats::with_dense_limit(n, dense_limit)));
    }
    // one shared table updated atomically instead of a copy per worker
    let m = pair_total(n);
    let num: Vec<AtomicU32> = (0..m).map(|_| AtomicU32::new(0)).collect();
    let den: Vec<AtomicU32> = (0..m).map(|_| AtomicU32::new(0)).collect();
    c.items().par_iter().with_min_len(4096).for_each(|s| {
        let (a, b, cc) = (s.designated.index(), s.other1.index(), s.other2.index());
        let p = pair_index(b, cc);
        num[p].fetch_add(1, Ordering::Relaxed);
        den[p].fetch_add(1, Ordering::Relaxed);
        den[pair_index(a, b)].fetch_add(1, Ordering::Relaxed);
        den[pair_index(a, cc)].fetch_add(1, Ordering::Relaxed);
    });
    Ok(PairStats {
        n,
        store: PairStore::Dense {
            num: num.into_iter().map(AtomicU32::into_inner).collect(),
            den: den.into_iter().map(AtomicU32::into_inner).collect(),
        },
    })
}

/// Undirected graph on `0..n` with sorted edges `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
}

impl EstimatedGraph {
    /// Builds a graph from arbitrary pairs; self-loops and duplicates are
    /// dropped.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(usize, usize)> = pairs
            .into_iter()
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        EstimatedGraph {
            n,
            edges,
            weights: None,
        }
    }

    fn from_sorted(n: usize, edges: Vec<(usize, usize)>, weights: Option<Vec<f64>>) -> Self {
        EstimatedGraph { n, edges, weights }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    /// Weight of edge `{i, j}`: 1 for unweighted edges, 0 for non-edges.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self.edges.binary_search(&(i.min(j), i.max(j))) {
            Ok(p) => self.weights.as_ref().map_or(1.0, |w| w[p]),
            Err(_) => 0.0,
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_subgraph_of(&self, other: &EstimatedGraph) -> bool {
        self.edges.iter().all(|&(i, j)| other.has_edge(i, j))
    }

    /// CSV `i,j[,weight]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (p, &(i, j)) in self.edges.iter().enumerate() {
            match &self.weights {
                Some(ws) => writeln!(w, "{i},{j},{}", ws[p])?,
                None => writeln!(w, "{i},{j}")?,
            }
        }
        Ok(())
    }
}

fn check_errorprob(e: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&e) || e.is_nan() {
        return Err(Error::BadErrorProb(e));
    }
    if e >= 2.0 / 3.0 {
        return Err(Error::ErrorProbTooLarge(e));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::BadSigma(sigma))
    }
}

/// `k / (n - 2)`, infinite when there is no room for a third object.
fn lens_threshold(k: usize, n: usize) -> f64 {
    if n <= 2 {
        f64::INFINITY
    } else {
        k as f64 / (n - 2) as f64
    }
}

/// Maps noise-free lens fractions to their expectation under the flip model.
pub fn noise_forward(p: f64, errorprob: f64) -> f64 {
    p * (1.0 - errorprob) + (1.0 - p) * errorprob / 2.0
}

/// Inverse of [`noise_forward`].
pub fn noise_invert(p_noisy: f64, errorprob: f64) -> Result<f64> {
    check_errorprob(errorprob)?;
    Ok((p_noisy - errorprob / 2.0) / (1.0 - 1.5 * errorprob))
}

/// The `k'` whose exact RNG an uncorrected estimate from noisy statements
/// approximates.
pub fn effective_k(k: f64, errorprob: f64, n: usize) -> Result<f64> {
    check_errorprob(errorprob)?;
    Ok((k - 0.5 * errorprob * (n as f64 - 2.0)) / (1.0 - 1.5 * errorprob))
}

/// Pairs passing the threshold with the `V` that admitted them.
fn passing_pairs(ps: &PairStats, k: usize, correction: Option<f64>) -> Result<Vec<(usize, usize, f64)>> {
    if let Some(e) = correction {
        check_errorprob(e)?;
    }
    let threshold = lens_threshold(k, ps.n);
    let mut out = Vec::new();
    for (i, j, num, den) in ps.mentioned_pairs() {
        let v = num as f64 / den as f64;
        let score = match correction {
            Some(e) => (v - e / 2.0) / (1.0 - 1.5 * e),
            None => v,
        };
        if score < threshold {
            out.push((i, j, v));
        }
    }
    Ok(out)
}

/// Connects `{i, j}` iff `V < k / (n - 2)`, or with a known error
/// probability, iff the debiased `V` is below it.
pub fn estimate_krng(ps: &PairStats, k: usize, correction: Option<f64>) -> Result<EstimatedGraph> {
    let pairs = passing_pairs(ps, k, correction)?;
    Ok(EstimatedGraph::from_sorted(
        ps.n,
        pairs.into_iter().map(|(i, j, _)| (i, j)).collect(),
        None,
    ))
}

/// As [`estimate_krng`] with edge weights `exp(-V² / σ²)`.
pub fn estimate_weighted_krng(
    ps: &PairStats,
    k: usize,
    correction: Option<f64>,
    sigma: f64,
) -> Result<EstimatedGraph> {
    check_sigma(sigma)?;
    let pairs = passing_pairs(ps, k, correction)?;
    let s2 = sigma * sigma;
    let weights = pairs.iter().map(|&(_, _, v)| (-(v * v) / s2).exp()).collect();
    Ok(EstimatedGraph::from_sorted(
        ps.n,
        pairs.into_iter().map(|(i, j, _)| (i, j)).collect(),
        Some(weights),
    ))
}

/// Number of objects strictly inside the lens of `{i, j}`.
pub fn lens_count(o: &DistanceOracle, i: usize, j: usize) -> Result<usize> {
    if i == j {
        return Err(Error::DuplicateMember(i, j, j));
    }
    Ok(lens_count_unchecked(o, i, j))
}

fn lens_count_unchecked(o: &DistanceOracle, i: usize, j: usize) -> usize {
    let dij = o.dist(i, j);
    (0..o.n())
        .filter(|&t| t != i && t != j && o.dist(t, i).max(o.dist(t, j)) < dij)
        .count()
}

/// Lens counts of all pairs `i < j`, row by row.
pub fn all_lens_counts(o: &DistanceOracle) -> Vec<(usize, usize, usize)> {
    let n = o.n();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j, lens_count_unchecked(o, i, j))))
        .collect()
}

/// Edge iff the lens holds fewer than `k` objects.
pub fn exact_krng(o: &DistanceOracle, k: usize) -> EstimatedGraph {
    let edges = all_lens_counts(o)
        .into_iter()
        .filter(|&(_, _, c)| c < k)
        .map(|(i, j, _)| (i, j))
        .collect();
    EstimatedGraph::from_sorted(o.n(), edges, None)
}

/// As [`exact_krng`] with weights `exp(-(lens / (n-2))² / σ²)`.
pub fn exact_weighted_krng(o: &DistanceOracle, k: usize, sigma: f64) -> Result<EstimatedGraph> {
    check_sigma(sigma)?;
    let n = o.n();
    let s2 = sigma * sigma;
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (i, j, c) in all_lens_counts(o) {
        if c < k {
            let frac = if n <= 2 { 0.0 } else { c as f64 / (n - 2) as f64 };
            edges.push((i, j));
            weights.push((-(frac * frac) / s2).exp());
        }
    }
    Ok(EstimatedGraph::from_sorted(n, edges, Some(weights)))
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
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

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDiagnostics {
    pub n: usize,
    pub edges: usize,
    pub mean_degree: f64,
    pub components: usize,
    pub isolated: usize,
}

impl GraphDiagnostics {
    /// `key=value` lines.
    pub fn write_kv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n={}", self.n)?;
        writeln!(w, "edges={}", self.edges)?;
        writeln!(w, "mean_degree={}", self.mean_degree)?;
        writeln!(w, "components={}", self.components)?;
        writeln!(w, "isolated={}", self.isolated)?;
        Ok(())
    }
}

pub fn graph_diagnostics(g: &EstimatedGraph) -> GraphDiagnostics {
    let mut uf = UnionFind::new(g.n);
    let mut components = g.n;
    for &(i, j) in &g.edges {
        if uf.union(i, j) {
            components -= 1;
        }
    }
    let isolated = g.degrees().iter().filter(|&&d| d == 0).count();
    let mean_degree = if g.n == 0 {
        0.0
    } else {
        2.0 * g.edges.len() as f64 / g.n as f64
    };
    GraphDiagnostics {
        n: g.n,
        edges: g.edges.len(),
        mean_degree,
        components,
        isolated,
    }
}

/// Minimum spanning tree (forest for `n < 2`); equal distances are broken
/// by lexicographic pair order.
pub fn mst(o: &DistanceOracle) -> EstimatedGraph {
    let n = o.n();
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(c, d)| o.dist(a, b).total_cmp(&o.dist(c, d)).then((a, b).cmp(&(c, d))));
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (i, j) in pairs {
        if uf.union(i, j) {
            edges.push((i, j));
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    edges.sort_unstable();
    EstimatedGraph::from_sorted(n, edges, None)
}

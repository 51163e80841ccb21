//! Spectral clustering on the estimated k-RNG.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::{mix_seed, rng_for};
use crate::proxgraph::{estimate_krng, estimate_weighted_krng, EstimatedGraph, PairStats};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-8;
pub const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;
const KMEANS_REL_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;
const EIGEN_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AffinityMode {
    Unweighted,
    Weighted { sigma: f64 },
}

/// Dense symmetric `n × n` affinity with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    w: Vec<f64>,
}

impl AffinityMatrix {
    pub fn from_graph(g: &EstimatedGraph) -> Self {
        let n = g.n();
        let mut w = vec![0.0; n * n];
        let weights = g.weights();
        for (p, &(i, j)) in g.edges().iter().enumerate() {
            let x = weights.map_or(1.0, |ws| ws[p]);
            w[i * n + j] = x;
            w[j * n + i] = x;
        }
        AffinityMatrix { n, w }
    }

    /// Row-major entries; the caller vouches for symmetry, which
    /// [`spectral_clustering`] checks.
    pub fn from_dense(n: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::SizeMismatch(w.len(), n * n));
        }
        Ok(AffinityMatrix { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.w.chunks(self.n.max(1)).take(self.n).map(|r| r.iter().sum()).collect()
    }

    /// True iff both matrices have zeros in exactly the same cells.
    pub fn same_zero_pattern(&self, other: &AffinityMatrix) -> bool {
        self.n == other.n && self.w.iter().zip(&other.w).all(|(a, b)| (*a == 0.0) == (*b == 0.0))
    }

    /// CSV `i,j,weight` for every nonzero entry with `i < j`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                let x = self.get(i, j);
                if x != 0.0 {
                    writeln!(out, "{i},{j},{x}")?;
                }
            }
        }
        Ok(())
    }
}

/// Affinity from pair statistics: 1 or `exp(-V² / σ²)` where the (optionally
/// corrected) k-RNG threshold passes, 0 elsewhere.
pub fn build_affinity(
    ps: &PairStats,
    k: usize,
    mode: AffinityMode,
    correction: Option<f64>,
) -> Result<AffinityMatrix> {
    let g = match mode {
        AffinityMode::Unweighted => estimate_krng(ps, k, correction)?,
        AffinityMode::Weighted { sigma } => estimate_weighted_krng(ps, k, correction, sigma)?,
    };
    Ok(AffinityMatrix::from_graph(&g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// One orthonormal column per value.
    pub vectors: DMatrix<f64>,
}

/// The `count` smallest eigenpairs of a symmetric matrix, each with
/// residual `‖Sv - λv‖ ≤ tol · ‖S‖₂`.
pub fn smallest_eigenpairs(s: &DMatrix<f64>, count: usize, tol: f64) -> Result<EigenPairs> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::SizeMismatch(n, s.ncols()));
    }
    if count > n {
        return Err(Error::InvalidParameter(format!(
            "asked for {count} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or_else(|| Error::NoConvergence(format!("no convergence after {EIGEN_MAX_SWEEPS} iterations")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut values = Vec::with_capacity(count);
    let mut vectors = DMatrix::zeros(n, count);
    for (c, &idx) in order.iter().take(count).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let mut v = eig.eigenvectors.column(idx).into_owned();
        // sign: first entry of largest magnitude is positive
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        let residual = (s * &v - &v * lambda).norm();
        if residual > tol * norm.max(f64::MIN_POSITIVE) && residual > 0.0 {
            return Err(Error::NoConvergence(format!(
                "eigenpair {c} has residual {residual:e} above {tol:e} x {norm:e}"
            )));
        }
        values.push(lambda);
        vectors.set_column(c, &v);
    }
    Ok(EigenPairs { values, vectors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centers(rows: &[Vec<f64>], l: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < l {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // rounding can run past the end; take the last positive weight
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap();
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn lloyd(rows: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeansResult {
    let (n, l) = (rows.len(), centers.len());
    let dim = rows[0].len();
    let mut assignment = vec![0usize; n];
    let mut prev = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITER {
        let mut inertia = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let (c, d) = nearest(r, &centers);
            assignment[i] = c;
            inertia += d;
        }
        if prev.is_finite() && (prev - inertia).abs() <= KMEANS_REL_TOL * prev {
            break;
        }
        prev = inertia;
        let mut sums = vec![vec![0.0; dim]; l];
        let mut counts = vec![0usize; l];
        for (r, &c) in rows.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(r) {
                *s += x;
            }
        }
        for c in 0..l {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centers[c] = std::mem::take(&mut sums[c]);
            } else {
                // empty cluster takes the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centers[assignment[a]])
                            .total_cmp(&sq_dist(&rows[b], &centers[assignment[b]]))
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                centers[c] = rows[far].clone();
                assignment[far] = c;
            }
        }
    }
    // final assignment against the final centers
    let mut inertia = 0.0;
    for (i, r) in rows.iter().enumerate() {
        let (c, d) = nearest(r, &centers);
        assignment[i] = c;
        inertia += d;
    }
    KMeansResult {
        assignment,
        centers,
        inertia,
    }
}

/// Relabels clusters in order of first appearance.
fn canonical(mut res: KMeansResult) -> KMeansResult {
    let l = res.centers.len();
    let mut map = vec![usize::MAX; l];
    let mut next = 0;
    for a in &res.assignment {
        if map[*a] == usize::MAX {
            map[*a] = next;
            next += 1;
        }
    }
    for m in map.iter_mut() {
        if *m == usize::MAX {
            *m = next;
            next += 1;
        }
    }
    let mut centers = vec![Vec::new(); l];
    for (old, c) in res.centers.into_iter().enumerate() {
        centers[map[old]] = c;
    }
    for a in res.assignment.iter_mut() {
        *a = map[*a];
    }
    res.centers = centers;
    res
}

/// k-means with squared-distance seeding and Lloyd iterations; the best of
/// `restarts` runs by inertia, earliest run on ties.
pub fn kmeans(rows: &[Vec<f64>], l: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    let n = rows.len();
    if l == 0 || l > n {
        return Err(Error::InvalidParameter(format!("cannot form {l} clusters from {n} rows")));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::InvalidParameter("rows differ in length".into()));
    }
    let runs: Vec<KMeansResult> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(mix_seed(seed, r as u64), 0);
            lloyd(rows, seed_centers(rows, l, &mut rng))
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.inertia.total_cmp(&b.inertia).then(ia.cmp(ib)))
        .map(|(_, r)| r)
        .unwrap();
    Ok(canonical(best))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringResult {
    pub assignment: Vec<usize>,
    pub l: usize,
}

impl ClusteringResult {
    /// CSV `id,cluster`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, c) in self.assignment.iter().enumerate() {
            writeln!(w, "{i},{c}")?;
        }
        Ok(())
    }
}

/// What to do with vertices of zero degree.
#[derive(Debug, Clone, Copy)]
pub enum IsolatedPolicy<'a> {
    Reject,
    /// Cluster the rest, then give each isolated vertex the cluster of the
    /// object with the smallest finite `V` to it, or cluster 0.
    Attach(Option<&'a PairStats>),
}

/// Normalized spectral clustering: the `l` smallest generalized
/// eigenvectors of `(Deg - W) v = λ Deg v`, rows clustered by k-means.
pub fn spectral_clustering(
    w: &AffinityMatrix,
    l: usize,
    seed: u64,
    isolated: IsolatedPolicy<'_>,
) -> Result<ClusteringResult> {
    let n = w.n();
    if l == 0 {
        return Err(Error::InvalidParameter("need at least one cluster".into()));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        if w.get(i, i) != 0.0 {
            return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            asym = asym.max((w.get(i, j) - w.get(j, i)).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let deg = w.degrees();
    let lonely: Vec<usize> = (0..n).filter(|&i| deg[i] <= 0.0).collect();
    let attach = match isolated {
        IsolatedPolicy::Reject if !lonely.is_empty() => return Err(Error::IsolatedVertices(lonely)),
        IsolatedPolicy::Reject => None,
        IsolatedPolicy::Attach(ps) => ps,
    };
    let core: Vec<usize> = (0..n).filter(|&i| deg[i] > 0.0).collect();
    let mut assignment = vec![0usize; n];
    if l > 1 && !core.is_empty() {
        let m = core.len();
        if l > m {
            return Err(Error::InvalidParameter(format!(
                "cannot form {l} clusters from {m} connected objects"
            )));
        }
        let inv_sqrt: Vec<f64> = core.iter().map(|&i| 1.0 / deg[i].sqrt()).collect();
        let lsym = DMatrix::from_fn(m, m, |a, b| {
            let base = if a == b { 1.0 } else { 0.0 };
            base - w.get(core[a], core[b]) * inv_sqrt[a] * inv_sqrt[b]
        });
        let eig = smallest_eigenpairs(&lsym, l, DEFAULT_EIGEN_TOL)?;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|a| (0..l).map(|c| eig.vectors[(a, c)] * inv_sqrt[a]).collect())
            .collect();
        let km = kmeans(&rows, l, seed, KMEANS_RESTARTS)?;
        for (a, &i) in core.iter().enumerate() {
            assignment[i] = km.assignment[a];
        }
    }
    for &u in &lonely {
        let mut best: Option<(f64, usize)> = None;
        if let Some(ps) = attach {
            for &t in &core {
                let v = ps.v(u, t);
                if v.is_finite() && best.is_none_or(|(bv, _)| v < bv) {
                    best = Some((v, t));
                }
            }
        }
        assignment[u] = best.map_or(0, |(_, t)| assignment[t]);
    }
    Ok(ClusteringResult { assignment, l })
}

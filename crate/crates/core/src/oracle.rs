//! Ground-truth dissimilarities, synthetic data sets, and the noisy
//! statement-sampling process.
//!
//! Oracles are only used to generate statements and to score estimates; the
//! estimators themselves never see a distance.
//!
//! All randomness flows through [`Rng`] (ChaCha with 8 rounds), seeded with
//! [`rng_for`]. Stream 0 of a seed draws the triple ranks; statement block
//! `b` (of [`SAMPLE_BLOCK`] statements) draws its noise from stream `b + 1`.
//! Output is therefore identical for any number of worker threads.

use std::io::BufRead;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::statements::{
    ObjectId, Statement, StatementCollection, StatementFold, StatementKind,
};

pub type Rng = ChaCha8Rng;

/// Number of statements that share one noise stream.
pub const SAMPLE_BLOCK: usize = 1 << 14;

/// Default cap on `C(n,3)` for exhaustive enumeration.
pub const ALL_STATEMENTS_CAP: u128 = 50_000_000;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-task `index` of `seed`:
/// `splitmix64(seed ^ index * 0x9E3779B97F4A7C15)`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ index.wrapping_mul(GOLDEN))
}

/// Generator for `seed` positioned at the start of `stream`.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `C(n, 3)`.
pub fn triple_count(n: usize) -> u128 {
    let n = n as u128;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

fn choose(n: u64, k: u32) -> u64 {
    match k {
        1 => n,
        2 => {
            if n < 2 {
                0
            } else {
                n * (n - 1) / 2
            }
        }
        3 => triple_count(n as usize) as u64,
        _ => unreachable!(),
    }
}

/// Largest `x < hi` with `C(x, k) <= r`.
fn largest_below(r: u64, k: u32, hi: u64) -> u64 {
    let (mut lo, mut hi) = (0u64, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if choose(mid, k) <= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Maps a rank in `0..C(n,3)` to the triple `a < b < c` at that position in
/// lexicographic order.
pub fn unrank_triple(rank: u64, n: usize) -> [usize; 3] {
    let total = triple_count(n) as u64;
    debug_assert!(rank < total);
    // lexicographic order of (a,b,c) is reversed colex order of
    // (n-1-c, n-1-b, n-1-a)
    let mut r = total - 1 - rank;
    let z = largest_below(r, 3, n as u64);
    r -= choose(z, 3);
    let y = largest_below(r, 2, z);
    r -= choose(y, 2);
    let x = r;
    let m = n as u64 - 1;
    [(m - z) as usize, (m - y) as usize, (m - x) as usize]
}

pub fn rank_triple(t: [usize; 3], n: usize) -> u64 {
    let m = n as u64 - 1;
    let (x, y, z) = (m - t[2] as u64, m - t[1] as u64, m - t[0] as u64);
    let colex = choose(z, 3) + choose(y, 2) + x;
    triple_count(n) as u64 - 1 - colex
}

struct ShortestPaths {
    adjacency: Vec<Vec<u32>>,
    cache: Vec<OnceLock<Box<[u32]>>>,
}

impl ShortestPaths {
    fn bfs(&self, source: usize) -> Box<[u32]> {
        let n = self.adjacency.len();
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::with_capacity(n);
        dist[source] = 0;
        queue.push_back(source as u32);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in &self.adjacency[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist.into_boxed_slice()
    }

    fn row(&self, source: usize) -> &[u32] {
        self.cache[source].get_or_init(|| self.bfs(source))
    }
}

enum Backing {
    Dense { n: usize, data: Vec<f64> },
    Points { dim: usize, coords: Vec<f64> },
    Graph(ShortestPaths),
}

/// A finite semimetric space on objects `0..n`.
pub struct DistanceOracle {
    backing: Backing,
}

impl std::fmt::Debug for DistanceOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backing {
            Backing::Dense { .. } => "dense",
            Backing::Points { .. } => "points",
            Backing::Graph(_) => "graph",
        };
        f.debug_struct("DistanceOracle")
            .field("backing", &kind)
            .field("n", &self.n())
            .finish()
    }
}

impl DistanceOracle {
    /// Dense symmetric matrix; validated as a semimetric.
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        let o = DistanceOracle {
            backing: Backing::Dense { n, data },
        };
        o.check_semimetric()?;
        Ok(o)
    }

    /// Euclidean point cloud, one row per object.
    pub fn points(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            coords.extend(row);
        }
        Ok(DistanceOracle {
            backing: Backing::Points { dim, coords },
        })
    }

    /// Points on the real line.
    pub fn line(xs: &[f64]) -> Result<Self> {
        Self::points(xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn n(&self) -> usize {
        match &self.backing {
            Backing::Dense { n, .. } => *n,
            Backing::Points { dim, coords } => {
                if *dim == 0 {
                    0
                } else {
                    coords.len() / dim
                }
            }
            Backing::Graph(g) => g.adjacency.len(),
        }
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.backing {
            Backing::Dense { n, data } => data[i * n + j],
            Backing::Points { dim, coords } => {
                let (a, b) = (&coords[i * dim..][..*dim], &coords[j * dim..][..*dim]);
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            Backing::Graph(g) => f64::from(g.row(i)[j]),
        }
    }

    /// Coordinates of object `i` for point-cloud oracles.
    pub fn point(&self, i: usize) -> Option<&[f64]> {
        match &self.backing {
            Backing::Points { dim, coords } => Some(&coords[i * dim..][..*dim]),
            _ => None,
        }
    }

    /// Materializes all pairwise distances.
    pub fn to_dense(&self) -> DistanceOracle {
        let n = self.n();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = self.dist(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceOracle {
            backing: Backing::Dense { n, data },
        }
    }

    /// Restriction to `ids`, reindexed as `0..ids.len()`.
    pub fn restrict(&self, ids: &[usize]) -> DistanceOracle {
        let m = ids.len();
        let mut data = vec![0.0; m * m];
        for (a, &i) in ids.iter().enumerate() {
            for (b, &j) in ids.iter().enumerate() {
                if a != b {
                    data[a * m + b] = self.dist(i, j);
                }
            }
        }
        DistanceOracle {
            backing: Backing::Dense { n: m, data },
        }
    }

    /// Zero diagonal, symmetry, and positive off-diagonal entries.
    pub fn check_semimetric(&self) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let dii = self.dist(i, i);
            if dii != 0.0 {
                return Err(Error::InvalidParameter(format!("d({i},{i}) = {dii} != 0")));
            }
            for j in i + 1..n {
                let (a, b) = (self.dist(i, j), self.dist(j, i));
                if a != b {
                    return Err(Error::InvalidParameter(format!(
                        "d({i},{j}) = {a} but d({j},{i}) = {b}"
                    )));
                }
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "d({i},{j}) = {a} must be positive and finite"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Unweighted shortest-path oracle. Rows are computed by BFS on first use
/// and cached; no `n^2` table is built up front.
pub fn shortest_path_oracle(edges: &[(usize, usize)], n: usize) -> Result<DistanceOracle> {
    let mut adjacency = vec![Vec::new(); n];
    for &(u, v) in edges {
        for id in [u, v] {
            if id >= n {
                return Err(Error::IdOutOfRange { id, n });
            }
        }
        if u == v {
            continue;
        }
        adjacency[u].push(v as u32);
        adjacency[v].push(u as u32);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    let sp = ShortestPaths {
        adjacency,
        cache: (0..n).map(|_| OnceLock::new()).collect(),
    };
    if n > 1 {
        let row = sp.row(0);
        if let Some(v) = row.iter().position(|&d| d == u32::MAX) {
            return Err(Error::DisconnectedGraph(0, v));
        }
    }
    Ok(DistanceOracle {
        backing: Backing::Graph(sp),
    })
}

/// Outcome of evaluating a triple against the oracle. `tie` is set when the
/// deciding side was not unique and the smallest valid id was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Designation {
    pub id: ObjectId,
    pub tie: bool,
}

fn check_distinct(a: ObjectId, b: ObjectId, c: ObjectId) -> Result<()> {
    if a == b || a == c || b == c {
        return Err(Error::DuplicateMember(a.index(), b.index(), c.index()));
    }
    Ok(())
}

/// Picks the member opposite the extreme side. `longest` selects the
/// longest side (most central) or the shortest (odd one out).
fn opposite_extreme(o: &DistanceOracle, m: [ObjectId; 3], longest: bool) -> Designation {
    let [a, b, c] = m;
    // side opposite each member
    let opp = [
        o.dist(b.index(), c.index()),
        o.dist(a.index(), c.index()),
        o.dist(a.index(), b.index()),
    ];
    let better = |x: f64, y: f64| if longest { x > y } else { x < y };
    let mut best = opp[0];
    for &d in &opp[1..] {
        if better(d, best) {
            best = d;
        }
    }
    let mut winners = m.iter().zip(opp).filter(|&(_, d)| d == best).map(|(&id, _)| id);
    let first = winners.next().unwrap();
    let rest: Vec<ObjectId> = winners.collect();
    let id = rest.iter().copied().fold(first, ObjectId::min);
    Designation {
        id,
        tie: !rest.is_empty(),
    }
}

/// The member opposite the strictly longest side of the triangle.
pub fn true_center(o: &DistanceOracle, a: ObjectId, b: ObjectId, c: ObjectId) -> Result<Designation> {
    check_distinct(a, b, c)?;
    Ok(opposite_extreme(o, [a, b, c], true))
}

/// The member opposite the strictly shortest side of the triangle.
pub fn true_odd_one_out(
    o: &DistanceOracle,
    a: ObjectId,
    b: ObjectId,
    c: ObjectId,
) -> Result<Designation> {
    check_distinct(a, b, c)?;
    Ok(opposite_extreme(o, [a, b, c], false))
}

fn truthful(o: &DistanceOracle, t: [usize; 3], kind: StatementKind) -> (Statement, bool) {
    let m = t.map(ObjectId::new);
    let d = opposite_extreme(o, m, kind == StatementKind::MostCentral);
    let s = Statement {
        kind,
        designated: m[0],
        other1: m[1],
        other2: m[2],
    }
    .redesignate(d.id);
    (s, d.tie)
}

/// Per-statement flip model: with probability `errorprob` the designated
/// member is replaced by one of the other two, each with probability 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    errorprob: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(errorprob: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&errorprob) {
            return Err(Error::BadErrorProb(errorprob));
        }
        Ok(NoiseModel { errorprob, seed })
    }

    pub fn truthful(seed: u64) -> Self {
        NoiseModel {
            errorprob: 0.0,
            seed,
        }
    }

    pub fn errorprob(&self) -> f64 {
        self.errorprob
    }
}

/// Applies the flip model to one truthful statement.
pub fn apply_noise<R: rand::Rng + ?Sized>(s: Statement, errorprob: f64, rng: &mut R) -> Statement {
    let u: f64 = rng.random();
    if u >= errorprob {
        return s;
    }
    let replacement = if rng.random::<bool>() { s.other1 } else { s.other2 };
    s.redesignate(replacement)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    WithoutReplacement,
    WithReplacement,
}

/// Sampled statements plus the number of triples that hit a distance tie.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub statements: StatementCollection,
    pub ties: usize,
}

struct SamplePlan<'a> {
    oracle: &'a DistanceOracle,
    n: usize,
    count: usize,
    kind: StatementKind,
    noise: NoiseModel,
    total: u64,
    ranks: Option<Vec<u64>>,
}

impl<'a> SamplePlan<'a> {
    fn new(
        oracle: &'a DistanceOracle,
        count: usize,
        mode: SamplingMode,
        noise: NoiseModel,
        kind: StatementKind,
    ) -> Result<Self> {
        let n = oracle.n();
        let total = triple_count(n);
        if total > u64::MAX as u128 {
            return Err(Error::TooLarge {
                triples: total,
                cap: u64::MAX as u128,
            });
        }
        let exceeds = match mode {
            SamplingMode::WithoutReplacement => count as u128 > total,
            SamplingMode::WithReplacement => total == 0 && count > 0,
        };
        if exceeds {
            return Err(Error::CountExceedsTriples {
                requested: count as u128,
                available: total,
            });
        }
        let ranks = match mode {
            SamplingMode::WithoutReplacement => {
                let mut rng = rng_for(noise.seed, 0);
                let idx = rand::seq::index::sample(&mut rng, total as usize, count);
                Some(idx.into_iter().map(|r| r as u64).collect())
            }
            SamplingMode::WithReplacement => None,
        };
        Ok(SamplePlan {
            oracle,
            n,
            count,
            kind,
            noise,
            total: total as u64,
            ranks,
        })
    }

    fn blocks(&self) -> usize {
        self.count.div_ceil(SAMPLE_BLOCK)
    }

    /// Generates block `b`, feeding each statement and its tie flag to `sink`.
    fn run_block(&self, b: usize, mut sink: impl FnMut(Statement, bool)) {
        let mut rng = rng_for(self.noise.seed, b as u64 + 1);
        let start = b * SAMPLE_BLOCK;
        let end = (start + SAMPLE_BLOCK).min(self.count);
        for i in start..end {
            let rank = match &self.ranks {
                Some(r) => r[i],
                None => rng.random_range(0..self.total),
            };
            let (s, tie) = truthful(self.oracle, unrank_triple(rank, self.n), self.kind);
            sink(apply_noise(s, self.noise.errorprob, &mut rng), tie);
        }
    }
}

/// Draws `count` triples uniformly and emits one noisy statement per triple.
/// Deterministic in `noise.seed` regardless of the rayon pool size.
pub fn sample_statements(
    o: &DistanceOracle,
    count: usize,
    mode: SamplingMode,
    noise: NoiseModel,
    kind: StatementKind,
) -> Result<Sampled> {
    let plan = SamplePlan::new(o, count, mode, noise, kind)?;
    let blocks: Vec<(Vec<Statement>, usize)> = (0..plan.blocks())
        .into_par_iter()
        .map(|b| {
            let mut out = Vec::with_capacity(SAMPLE_BLOCK);
            let mut ties = 0;
            plan.run_block(b, |s, tie| {
                out.push(s);
                ties += usize::from(tie);
            });
            (out, ties)
        })
        .collect();
    let mut items = Vec::with_capacity(count);
    let mut ties = 0;
    for (block, t) in blocks {
        items.extend(block);
        ties += t;
    }
    Ok(Sampled {
        statements: StatementCollection::from_trusted(o.n(), items),
        ties,
    })
}

/// Streaming counterpart of [`sample_statements`]: the same statements are
/// folded into `init()` accumulators without being stored.
pub fn sample_fold<F, I>(
    o: &DistanceOracle,
    count: usize,
    mode: SamplingMode,
    noise: NoiseModel,
    kind: StatementKind,
    init: I,
) -> Result<(F, usize)>
where
    F: StatementFold,
    I: Fn() -> F + Sync + Send,
{
    let plan = SamplePlan::new(o, count, mode, noise, kind)?;
    let folded = (0..plan.blocks())
        .into_par_iter()
        .fold(
            || (init(), 0usize),
            |(mut acc, mut ties), b| {
                plan.run_block(b, |s, tie| {
                    acc.observe(&s);
                    ties += usize::from(tie);
                });
                (acc, ties)
            },
        )
        .reduce_with(|(mut a, ta), (b, tb)| {
            a.merge(b);
            (a, ta + tb)
        });
    Ok(folded.unwrap_or_else(|| (init(), 0)))
}

/// One truthful statement per triple, triples in lexicographic order.
pub fn all_statements(o: &DistanceOracle, kind: StatementKind) -> Result<Sampled> {
    all_statements_capped(o, kind, ALL_STATEMENTS_CAP)
}

pub fn all_statements_capped(o: &DistanceOracle, kind: StatementKind, cap: u128) -> Result<Sampled> {
    let n = o.n();
    let total = triple_count(n);
    if total > cap {
        return Err(Error::TooLarge { triples: total, cap });
    }
    let rows: Vec<(Vec<Statement>, usize)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut out = Vec::new();
            let mut ties = 0;
            for b in a + 1..n {
                for c in b + 1..n {
                    let (s, tie) = truthful(o, [a, b, c], kind);
                    out.push(s);
                    ties += usize::from(tie);
                }
            }
            (out, ties)
        })
        .collect();
    let mut items = Vec::with_capacity(total as usize);
    let mut ties = 0;
    for (row, t) in rows {
        items.extend(row);
        ties += t;
    }
    Ok(Sampled {
        statements: StatementCollection::from_trusted(n, items),
        ties,
    })
}

/// A generated point cloud with the generating component of each point.
#[derive(Debug)]
pub struct LabeledCloud {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub oracle: DistanceOracle,
}

impl LabeledCloud {
    fn new(points: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let oracle = DistanceOracle::points(points.clone())?;
        Ok(LabeledCloud {
            points,
            labels,
            oracle,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl GaussianComponent {
    pub fn isotropic(weight: f64, mean: Vec<f64>) -> Self {
        let m = mean.len();
        let covariance = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        GaussianComponent {
            weight,
            mean,
            covariance,
        }
    }
}

/// Samples `count` points from a Gaussian mixture; labels record the component.
pub fn gen_gaussian_mixture(
    components: &[GaussianComponent],
    count: usize,
    seed: u64,
) -> Result<LabeledCloud> {
    if components.is_empty() {
        return Err(Error::BadMixture("no components".into()));
    }
    let dim = components[0].mean.len();
    let mut factors = Vec::with_capacity(components.len());
    let mut total_weight = 0.0;
    for (idx, c) in components.iter().enumerate() {
        if !(c.weight > 0.0) {
            return Err(Error::BadMixture(format!("component {idx} has non-positive weight")));
        }
        total_weight += c.weight;
        if c.mean.len() != dim || c.covariance.len() != dim {
            return Err(Error::BadMixture(format!("component {idx} has wrong dimension")));
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for (i, row) in c.covariance.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::BadCovariance(idx));
            }
            for (j, &v) in row.iter().enumerate() {
                cov[(i, j)] = v;
            }
        }
        if (&cov - cov.transpose()).amax() > 1e-12 {
            return Err(Error::BadCovariance(idx));
        }
        let chol = cov.cholesky().ok_or(Error::BadCovariance(idx))?;
        factors.push(chol.l());
    }
    if (total_weight - 1.0).abs() > 1e-9 {
        return Err(Error::BadMixture(format!("weights sum to {total_weight}, expected 1")));
    }

    let mut rng = rng_for(seed, 0);
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut label = components.len() - 1;
        for (i, c) in components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                label = i;
                break;
            }
        }
        let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let l = &factors[label];
        let x: Vec<f64> = (0..dim)
            .map(|i| components[label].mean[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
            .collect();
        points.push(x);
        labels.push(label);
    }
    LabeledCloud::new(points, labels)
}

/// Geometry of the two-moons generator.
///
/// Moon 0 is the upper half-annulus centred at the origin; moon 1 is the
/// lower half-annulus centred at `(radius, -offset)`. Radii are
/// `radius ± width`, angles uniform on `[0, π]`. Even indices go to moon 0
/// and odd indices to moon 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMoons {
    pub radius: f64,
    pub width: f64,
    pub offset: f64,
}

impl Default for TwoMoons {
    fn default() -> Self {
        TwoMoons {
            radius: 1.0,
            width: 0.1,
            offset: 0.25,
        }
    }
}

impl TwoMoons {
    pub fn center(&self, moon: usize) -> (f64, f64) {
        if moon == 0 {
            (0.0, 0.0)
        } else {
            (self.radius, -self.offset)
        }
    }
}

pub fn gen_two_moons(count: usize, geometry: TwoMoons, seed: u64) -> Result<LabeledCloud> {
    if count < 2 {
        return Err(Error::InvalidParameter("two moons needs at least 2 points".into()));
    }
    if !(geometry.radius > 0.0) || !(geometry.width >= 0.0) || geometry.width >= geometry.radius {
        return Err(Error::InvalidParameter(
            "two moons needs radius > width >= 0".into(),
        ));
    }
    let mut rng = rng_for(seed, 0);
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let moon = i % 2;
        let theta = rng.random::<f64>() * std::f64::consts::PI;
        let r = geometry.radius + (2.0 * rng.random::<f64>() - 1.0) * geometry.width;
        let (cx, cy) = geometry.center(moon);
        let p = if moon == 0 {
            vec![cx + r * theta.cos(), cy + r * theta.sin()]
        } else {
            vec![cx - r * theta.cos(), cy - r * theta.sin()]
        };
        points.push(p);
        labels.push(moon);
    }
    LabeledCloud::new(points, labels)
}

fn parse_rows<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Point cloud CSV, `x1,...,xm` per row.
pub fn read_points<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    parse_rows(reader)
}

/// Dense matrix CSV, one matrix row per line.
pub fn read_matrix<R: BufRead>(reader: R) -> Result<DistanceOracle> {
    DistanceOracle::dense(parse_rows(reader)?)
}

/// Edge list CSV, `u,v` per row. Returns the edges and `1 + max id`.
pub fn read_edges<R: BufRead>(reader: R) -> Result<(Vec<(usize, usize)>, usize)> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parsed: Option<(usize, usize)> = t.split_once(',').and_then(|(u, v)| {
            Some((u.trim().parse().ok()?, v.trim().parse().ok()?))
        });
        let (u, v) = parsed.ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `u,v`, found {t:?}"),
        })?;
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v));
    }
    Ok((edges, n))
}

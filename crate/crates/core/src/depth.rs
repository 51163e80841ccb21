//! Lens depth from statements, its exact counterpart from an oracle, and
//! the procedures built on it: medoid estimation, outlier ranking, and
//! class-conditional depth features. Also the crowd-median score computed
//! from odd-one-out statements.
//!
//! A point `t` lies in the lens of `{i, j}` iff it is the most central
//! member of the triple `(t, i, j)`, so counting how often an object is
//! designated most central, relative to how often it appears, estimates the
//! probability that it falls in the lens of a random pair.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::DistanceOracle;
use crate::statements::{fold_parallel, ObjectId, Statement, StatementCollection, StatementFold, StatementKind};

/// Per-object designation and appearance counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthCounts {
    pub designated: Vec<u64>,
    pub appear: Vec<u64>,
}

impl DepthCounts {
    pub fn new(n: usize) -> Self {
        DepthCounts {
            designated: vec![0; n],
            appear: vec![0; n],
        }
    }
}

impl StatementFold for DepthCounts {
    #[inline]
    fn observe(&mut self, s: &Statement) {
        self.designated[s.designated.index()] += 1;
        for m in s.members() {
            self.appear[m.index()] += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.designated.iter_mut().zip(other.designated) {
            *a += b;
        }
        for (a, b) in self.appear.iter_mut().zip(other.appear) {
            *a += b;
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Estimated lens depth per object.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthTable {
    pub central_count: Vec<u64>,
    pub appear_count: Vec<u64>,
    pub ld: Vec<f64>,
}

impl DepthTable {
    pub fn from_counts(c: DepthCounts) -> Self {
        let ld = c
            .designated
            .iter()
            .zip(&c.appear)
            .map(|(&a, &b)| ratio(a, b))
            .collect();
        DepthTable {
            central_count: c.designated,
            appear_count: c.appear,
            ld,
        }
    }

    pub fn n(&self) -> usize {
        self.ld.len()
    }

    /// CSV `id,central_count,appear_count,ld`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            writeln!(
                w,
                "{i},{},{},{}",
                self.central_count[i], self.appear_count[i], self.ld[i]
            )?;
        }
        Ok(())
    }
}

/// Estimates lens depth as (#times designated) / (#appearances), zero for
/// objects that never appear.
pub fn estimate_lens_depth(c: &StatementCollection) -> Result<DepthTable> {
    c.require_kind(StatementKind::MostCentral)?;
    let n = c.n();
    let counts = fold_parallel(c.items(), || DepthCounts::new(n));
    Ok(DepthTable::from_counts(counts))
}

/// Lens depth computed from distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDepthTable {
    pub lens_pair_count: Vec<u64>,
    pairs_per_object: u64,
}

impl ExactDepthTable {
    /// `C(n-1, 2)`, the number of pairs not containing a given object.
    pub fn pairs_per_object(&self) -> u64 {
        self.pairs_per_object
    }

    pub fn normalized(&self, i: usize) -> f64 {
        ratio(self.lens_pair_count[i], self.pairs_per_object)
    }

    pub fn normalized_all(&self) -> Vec<f64> {
        (0..self.lens_pair_count.len()).map(|i| self.normalized(i)).collect()
    }
}

/// For each object, the number of pairs whose lens strictly contains it.
pub fn exact_lens_depth(o: &DistanceOracle) -> ExactDepthTable {
    let n = o.n();
    let lens_pair_count = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut count = 0u64;
            for i in 0..n {
                if i == t {
                    continue;
                }
                let dti = o.dist(t, i);
                for j in i + 1..n {
                    if j == t {
                        continue;
                    }
                    if dti.max(o.dist(t, j)) < o.dist(i, j) {
                        count += 1;
                    }
                }
            }
            count
        })
        .collect();
    let m = n.saturating_sub(1) as u64;
    ExactDepthTable {
        lens_pair_count,
        pairs_per_object: m * m.saturating_sub(1) / 2,
    }
}

fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Object with maximal estimated lens depth; smallest id on ties.
pub fn estimate_medoid(c: &StatementCollection) -> Result<ObjectId> {
    if c.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let table = estimate_lens_depth(c)?;
    Ok(ObjectId::new(argmax_first(&table.ld).unwrap()))
}

/// `D(i) = Σ_j d(i, j)` for every object.
pub fn medoid_objectives(o: &DistanceOracle) -> Vec<f64> {
    let n = o.n();
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| o.dist(i, j)).sum())
        .collect()
}

/// Minimizer of the summed distance, with its objective value.
pub fn true_medoid(o: &DistanceOracle) -> Result<(ObjectId, f64)> {
    let objectives = medoid_objectives(o);
    let mut best: Option<usize> = None;
    for (i, &v) in objectives.iter().enumerate() {
        if best.is_none_or(|b| v < objectives[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::InvalidParameter("oracle has no objects".into()))?;
    Ok((ObjectId::new(best), objectives[best]))
}

/// Objects in ascending order of estimated lens depth, truncated to
/// `report_count`. Objects that never appear come first among equal depths,
/// then smaller ids.
pub fn rank_outliers(c: &StatementCollection, report_count: usize) -> Result<Vec<(ObjectId, f64)>> {
    let table = estimate_lens_depth(c)?;
    let mut ranked = ranking_ascending(&table);
    ranked.truncate(report_count);
    Ok(ranked)
}

fn ranking_ascending(table: &DepthTable) -> Vec<(ObjectId, f64)> {
    let mut order: Vec<usize> = (0..table.n()).collect();
    order.sort_by(|&a, &b| {
        table.ld[a]
            .total_cmp(&table.ld[b])
            .then_with(|| (table.appear_count[a] > 0).cmp(&(table.appear_count[b] > 0)))
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .map(|i| (ObjectId::new(i), table.ld[i]))
        .collect()
}

/// Full ascending ranking of a depth table.
pub fn outlier_ranking(table: &DepthTable) -> Vec<(ObjectId, f64)> {
    ranking_ascending(table)
}

/// Position of the widest jump between consecutive depths of an ascending
/// ranking: the returned `p` suggests reporting the first `p` objects.
/// Earliest position wins ties; `None` for fewer than two entries.
pub fn largest_gap(ranked: &[(ObjectId, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (p, w) in ranked.windows(2).enumerate() {
        let gap = w[1].1 - w[0].1;
        if best.is_none_or(|(_, g)| gap > g) {
            best = Some((p + 1, gap));
        }
    }
    best.map(|(p, _)| p)
}

/// Outlier frequencies from odd-one-out statements.
#[derive(Debug, Clone, PartialEq)]
pub struct CrowdMedianTable {
    pub outlier_count: Vec<u64>,
    pub appear_count: Vec<u64>,
    pub frequency: Vec<f64>,
}

impl CrowdMedianTable {
    /// Least-frequent outlier among objects that appear at all; smallest id
    /// on ties. Objects never seen carry no information and are skipped.
    pub fn medoid(&self) -> Option<ObjectId> {
        let mut best: Option<usize> = None;
        for i in 0..self.frequency.len() {
            if self.appear_count[i] == 0 {
                continue;
            }
            if best.is_none_or(|b| self.frequency[i] < self.frequency[b]) {
                best = Some(i);
            }
        }
        best.map(ObjectId::new)
    }

    /// Objects by descending outlier frequency, smallest id on ties.
    pub fn outlier_candidates(&self, report_count: usize) -> Vec<(ObjectId, f64)> {
        let mut order: Vec<usize> = (0..self.frequency.len()).collect();
        order.sort_by(|&a, &b| {
            self.frequency[b]
                .total_cmp(&self.frequency[a])
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(report_count)
            .map(|i| (ObjectId::new(i), self.frequency[i]))
            .collect()
    }
}

/// Per object, the fraction of statements containing it that name it the
/// odd one out.
pub fn crowdmedian_scores(c: &StatementCollection) -> Result<CrowdMedianTable> {
    c.require_kind(StatementKind::OddOneOut)?;
    let n = c.n();
    let counts = fold_parallel(c.items(), || DepthCounts::new(n));
    let frequency = counts
        .designated
        .iter()
        .zip(&counts.appear)
        .map(|(&a, &b)| ratio(a, b))
        .collect();
    Ok(CrowdMedianTable {
        outlier_count: counts.designated,
        appear_count: counts.appear,
        frequency,
    })
}

/// Per (object, class) counters restricted to statements whose two other
/// members are labeled with that class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDepthCounts {
    classes: usize,
    labels: std::sync::Arc<[Option<u32>]>,
    pub designated: Vec<u64>,
    pub appear: Vec<u64>,
}

impl ClassDepthCounts {
    fn new(labels: std::sync::Arc<[Option<u32>]>, classes: usize) -> Self {
        let cells = labels.len() * classes;
        ClassDepthCounts {
            classes,
            labels,
            designated: vec![0; cells],
            appear: vec![0; cells],
        }
    }
}

impl StatementFold for ClassDepthCounts {
    fn observe(&mut self, s: &Statement) {
        let m = s.members();
        for k in 0..3 {
            let (x, y) = (m[(k + 1) % 3], m[(k + 2) % 3]);
            let (Some(cx), Some(cy)) = (self.labels[x.index()], self.labels[y.index()]) else {
                continue;
            };
            if cx != cy {
                continue;
            }
            let cell = m[k].index() * self.classes + cx as usize;
            self.appear[cell] += 1;
            if k == 0 {
                self.designated[cell] += 1;
            }
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.designated.iter_mut().zip(other.designated) {
            *a += b;
        }
        for (a, b) in self.appear.iter_mut().zip(other.appear) {
            *a += b;
        }
    }
}

/// Row-major `n × K` matrix of class-conditional depths in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub classes: usize,
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        if self.classes == 0 {
            0
        } else {
            self.values.len() / self.classes
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.classes..(i + 1) * self.classes]
    }

    /// CSV `id,ld_c1,...,ld_cK`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            write!(w, "{i}")?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Class-conditional lens depth of every object with respect to every
/// class. `labels[i]` is `Some(class)` for labeled objects.
pub fn class_conditional_depth(
    c: &StatementCollection,
    labels: &[Option<usize>],
    classes: usize,
) -> Result<FeatureMatrix> {
    c.require_kind(StatementKind::MostCentral)?;
    if labels.len() != c.n() {
        return Err(Error::SizeMismatch(labels.len(), c.n()));
    }
    let mut packed = Vec::with_capacity(labels.len());
    for (id, l) in labels.iter().enumerate() {
        match *l {
            Some(class) if class >= classes => {
                return Err(Error::UnknownLabel { id, class, classes })
            }
            Some(class) => packed.push(Some(class as u32)),
            None => packed.push(None),
        }
    }
    let labels: std::sync::Arc<[Option<u32>]> = packed.into();
    let counts = fold_parallel(c.items(), || ClassDepthCounts::new(labels.clone(), classes));
    let values = counts
        .designated
        .iter()
        .zip(&counts.appear)
        .map(|(&a, &b)| ratio(a, b))
        .collect();
    Ok(FeatureMatrix { classes, values })
}

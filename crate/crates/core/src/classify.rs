//! Classification from most-central statements.
//!
//! Two routes: class-conditional depth features fed to a k-NN classifier,
//! and a vote among the labeled objects adjacent to the query in the
//! estimated k-RNG.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::depth::{class_conditional_depth, FeatureMatrix};
use crate::error::{Error, Result};
use crate::oracle::{mix_seed, rng_for};
use crate::proxgraph::PairStats;
use crate::statements::{fold_parallel, Statement, StatementCollection, StatementFold, StatementKind};

pub const DEFAULT_KNN_GRID: [usize; 6] = [1, 3, 5, 7, 11, 15];
pub const DEFAULT_RNG_GRID: [usize; 9] = [1, 2, 3, 5, 7, 15, 25, 45, 70];
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_LOOCV_REPEATS: usize = 20;

/// Objects `0..n`, some carrying a class in `0..classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    labels: Vec<Option<usize>>,
    classes: usize,
}

impl LabeledDataset {
    /// Every class must have at least one labeled object.
    pub fn new(labels: Vec<Option<usize>>, classes: usize) -> Result<Self> {
        let mut seen = vec![false; classes];
        for (id, l) in labels.iter().enumerate() {
            if let Some(class) = *l {
                if class >= classes {
                    return Err(Error::UnknownLabel { id, class, classes });
                }
                seen[class] = true;
            }
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyClass(empty));
        }
        Ok(LabeledDataset { labels, classes })
    }

    /// Builds the label vector from `(id, class)` pairs.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)], classes: usize) -> Result<Self> {
        let mut labels = vec![None; n];
        for &(id, class) in pairs {
            if id >= n {
                return Err(Error::IdOutOfRange { id, n });
            }
            if labels[id].is_some_and(|c| c != class) {
                return Err(Error::InvalidParameter(format!("object {id} labeled twice")));
            }
            labels[id] = Some(class);
        }
        Self::new(labels, classes)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn labeled(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i].is_none()).collect()
    }

    /// Smallest class with the most labeled members.
    pub fn majority_class(&self) -> usize {
        let mut counts = vec![0usize; self.classes];
        for c in self.labels.iter().flatten() {
            counts[*c] += 1;
        }
        argmax_first(&counts).unwrap_or(0)
    }
}

fn argmax_first(counts: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in counts.iter().enumerate() {
        if best.is_none_or(|b| c > counts[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    FeatureKnn,
    RngVote,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierConfig {
    pub variant: Variant,
    pub k_grid: Vec<usize>,
    /// Cross-validation folds for the k-NN variant.
    pub folds: usize,
    /// Leave-one-out repetitions for the vote variant.
    pub repeats: usize,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn feature_knn(seed: u64) -> Self {
        ClassifierConfig {
            variant: Variant::FeatureKnn,
            k_grid: DEFAULT_KNN_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            repeats: DEFAULT_LOOCV_REPEATS,
            seed,
        }
    }

    pub fn rng_vote(seed: u64) -> Self {
        ClassifierConfig {
            variant: Variant::RngVote,
            k_grid: DEFAULT_RNG_GRID.to_vec(),
            ..Self::feature_knn(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::InvalidParameter("k grid must be nonempty and positive".into()));
        }
        if self.folds == 0 || self.repeats == 0 {
            return Err(Error::InvalidParameter("folds and repeats must be positive".into()));
        }
        Ok(())
    }
}

/// Caps every grid value at `limit` (at least 1) and removes duplicates.
pub fn clip_grid(grid: &[usize], limit: usize) -> Vec<usize> {
    let mut out: Vec<usize> = grid.iter().map(|&k| k.min(limit.max(1))).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-NN vote over `train` (object ids with classes) in feature space.
/// Distance ties go to the smaller object id, vote ties to the smaller class.
fn knn_vote(features: &FeatureMatrix, train: &[(usize, usize)], query: usize, k: usize) -> usize {
    let q = features.row(query);
    let mut dists: Vec<(f64, usize, usize)> = train
        .iter()
        .map(|&(id, class)| (squared_distance(q, features.row(id)), id, class))
        .collect();
    let k = k.min(dists.len());
    if k == 0 {
        return 0;
    }
    let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, cmp);
    }
    let mut votes = vec![0usize; features.classes];
    for d in &dists[..k] {
        votes[d.2] += 1;
    }
    argmax_first(&votes).unwrap_or(0)
}

/// Result of the depth-feature route.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureClassification {
    pub predictions: BTreeMap<usize, usize>,
    pub knn_k: usize,
    pub features: FeatureMatrix,
}

/// Picks the k-NN `k` with the fewest cross-validation errors on the
/// labeled rows; smallest `k` on ties.
pub fn select_knn_k(
    features: &FeatureMatrix,
    train: &[(usize, usize)],
    grid: &[usize],
    folds: usize,
    seed: u64,
) -> usize {
    if train.len() < 2 {
        return grid.iter().copied().min().unwrap_or(1);
    }
    let folds = folds.clamp(2, train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng_for(seed, 0));
    let mut errors = vec![0usize; grid.len()];
    for f in 0..folds {
        let held: Vec<usize> = order.iter().skip(f).step_by(folds).copied().collect();
        let fit: Vec<(usize, usize)> = order
            .iter()
            .enumerate()
            .filter(|(pos, _)| pos % folds != f)
            .map(|(_, &i)| train[i])
            .collect();
        for (g, &k) in grid.iter().enumerate() {
            errors[g] += held
                .iter()
                .filter(|&&i| knn_vote(features, &fit, train[i].0, k) != train[i].1)
                .count();
        }
    }
    let mut best = 0;
    for g in 1..grid.len() {
        if errors[g] < errors[best] || (errors[g] == errors[best] && grid[g] < grid[best]) {
            best = g;
        }
    }
    grid[best]
}

/// Class-conditional depth features plus a built-in k-NN classifier.
/// Features are used as they are, without rescaling.
pub fn classify_feature(
    c: &StatementCollection,
    ds: &LabeledDataset,
    cfg: &ClassifierConfig,
) -> Result<FeatureClassification> {
    cfg.validate()?;
    if ds.n() != c.n() {
        return Err(Error::SizeMismatch(ds.n(), c.n()));
    }
    let features = class_conditional_depth(c, ds.labels(), ds.classes())?;
    let train: Vec<(usize, usize)> = ds
        .labeled()
        .into_iter()
        .map(|i| (i, ds.label(i).unwrap()))
        .collect();
    let knn_k = select_knn_k(&features, &train, &cfg.k_grid, cfg.folds, cfg.seed);
    let predictions = ds
        .unlabeled()
        .into_par_iter()
        .map(|u| (u, knn_vote(&features, &train, u, knn_k)))
        .collect();
    Ok(FeatureClassification {
        predictions,
        knn_k,
        features,
    })
}

/// Pair statistics counting only statements whose third member is labeled.
struct LabeledThirdCounts {
    labeled: Arc<[bool]>,
    stats: PairStats,
}

impl StatementFold for LabeledThirdCounts {
    fn observe(&mut self, s: &Statement) {
        let m = s.members();
        for k in 0..3 {
            if self.labeled[m[k].index()] {
                let (x, y) = (m[(k + 1) % 3].index(), m[(k + 2) % 3].index());
                self.stats.bump(x, y, k == 0);
            }
        }
    }

    fn merge(&mut self, other: Self) {
        self.stats.merge(other.stats);
    }
}

/// Vote rule state: `V` between every object and the labeled objects.
#[derive(Debug, Clone)]
pub struct RngVoteModel {
    labels: Vec<Option<usize>>,
    classes: usize,
    labeled: Vec<usize>,
    stats: PairStats,
}

impl RngVoteModel {
    pub fn fit(c: &StatementCollection, ds: &LabeledDataset) -> Result<Self> {
        c.require_kind(StatementKind::MostCentral)?;
        if ds.n() != c.n() {
            return Err(Error::SizeMismatch(ds.n(), c.n()));
        }
        let mask: Arc<[bool]> = ds.labels().iter().map(Option::is_some).collect();
        let n = c.n();
        let counts = fold_parallel(c.items(), || LabeledThirdCounts {
            labeled: mask.clone(),
            stats: PairStats::new(n),
        });
        Ok(RngVoteModel {
            labels: ds.labels().to_vec(),
            classes: ds.classes(),
            labeled: ds.labeled(),
            stats: counts.stats,
        })
    }

    /// `V(u, l)` over statements whose third member is labeled.
    pub fn v(&self, u: usize, l: usize) -> f64 {
        self.stats.v(u, l)
    }

    fn threshold(&self, k: usize) -> f64 {
        if self.labeled.len() <= 1 {
            f64::INFINITY
        } else {
            k as f64 / (self.labeled.len() - 1) as f64
        }
    }

    /// Labeled objects other than `u` with `V(u, l) < k / (|L| - 1)`.
    pub fn neighbors(&self, u: usize, k: usize) -> Vec<usize> {
        let t = self.threshold(k);
        self.labeled
            .iter()
            .copied()
            .filter(|&l| l != u && self.v(u, l) < t)
            .collect()
    }

    /// Majority class among the neighbors. Ties pick a uniformly random
    /// neighbor from the tied classes, drawn from a stream keyed by
    /// `(seed, u)`.
    pub fn predict(&self, u: usize, k: usize, seed: u64) -> usize {
        let neighbors = self.neighbors(u, k);
        if neighbors.is_empty() {
            return self.fallback(u);
        }
        let mut votes = vec![0usize; self.classes];
        for &l in &neighbors {
            votes[self.labels[l].unwrap()] += 1;
        }
        let top = *votes.iter().max().unwrap();
        let tied: Vec<usize> = neighbors
            .into_iter()
            .filter(|&l| votes[self.labels[l].unwrap()] == top)
            .collect();
        let pick = if tied.len() == 1 || votes.iter().filter(|&&v| v == top).count() == 1 {
            tied[0]
        } else {
            tied[rng_for(mix_seed(seed, u as u64), 0).random_range(0..tied.len())]
        };
        self.labels[pick].unwrap()
    }

    /// Class of the labeled object with the smallest finite `V`, else the
    /// majority class, else class 0.
    fn fallback(&self, u: usize) -> usize {
        let mut best: Option<(f64, usize)> = None;
        for &l in &self.labeled {
            if l == u {
                continue;
            }
            let v = self.v(u, l);
            if v.is_finite() && best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, l));
            }
        }
        if let Some((_, l)) = best {
            return self.labels[l].unwrap();
        }
        let mut counts = vec![0usize; self.classes];
        for &l in &self.labeled {
            if l != u {
                counts[self.labels[l].unwrap()] += 1;
            }
        }
        if counts.iter().all(|&c| c == 0) {
            return 0;
        }
        argmax_first(&counts).unwrap_or(0)
    }
}

/// Predicts every unlabeled object by the k-RNG vote rule.
pub fn classify_rng_vote(
    c: &StatementCollection,
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<BTreeMap<usize, usize>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let model = RngVoteModel::fit(c, ds)?;
    Ok(ds
        .unlabeled()
        .into_par_iter()
        .map(|u| (u, model.predict(u, k, seed)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    /// Mean validation 0-1 loss per grid value.
    pub losses: Vec<(usize, f64)>,
}

/// Repeated leave-one-out selection of the vote rule's `k`: each repeat
/// hides one random labeled object and predicts it from the rest.
pub fn select_k_loocv(
    c: &StatementCollection,
    ds: &LabeledDataset,
    k_grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<KSelection> {
    let labeled = ds.labeled();
    if labeled.len() < 2 {
        return Err(Error::InvalidParameter("leave-one-out needs at least two labeled objects".into()));
    }
    if k_grid.is_empty() || k_grid.contains(&0) || repeats == 0 {
        return Err(Error::InvalidParameter("k grid must be nonempty and positive".into()));
    }
    let mut errors = vec![0usize; k_grid.len()];
    let per_rep: Vec<Result<Vec<bool>>> = (0..repeats)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = mix_seed(seed, rep as u64);
            let held = labeled[rng_for(rep_seed, 0).random_range(0..labeled.len())];
            let mut labels = ds.labels().to_vec();
            labels[held] = None;
            // the reduced set may leave a class empty; the rule does not need it
            let reduced = LabeledDataset {
                labels,
                classes: ds.classes(),
            };
            let model = RngVoteModel::fit(c, &reduced)?;
            let truth = ds.label(held).unwrap();
            Ok(k_grid
                .iter()
                .map(|&k| model.predict(held, k, rep_seed) != truth)
                .collect())
        })
        .collect();
    for wrong in per_rep {
        for (e, w) in errors.iter_mut().zip(wrong?) {
            *e += usize::from(w);
        }
    }
    let mut best = 0;
    for g in 1..k_grid.len() {
        if errors[g] < errors[best] || (errors[g] == errors[best] && k_grid[g] < k_grid[best]) {
            best = g;
        }
    }
    Ok(KSelection {
        k: k_grid[best],
        losses: k_grid
            .iter()
            .zip(&errors)
            .map(|(&k, &e)| (k, e as f64 / repeats as f64))
            .collect(),
    })
}

/// CSV `id,predicted_class`.
pub fn write_predictions<W: Write>(pred: &BTreeMap<usize, usize>, mut w: W) -> Result<()> {
    for (id, class) in pred {
        writeln!(w, "{id},{class}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{all_statements, apply_noise, gen_gaussian_mixture, GaussianComponent, LabeledCloud};
    use crate::proxgraph::exact_krng;
    use crate::statements::partition;
    use proptest::prelude::*;

    fn two_blobs(n: usize, spread: f64, seed: u64) -> LabeledCloud {
        let comps = [
            GaussianComponent::isotropic(0.5, vec![-spread, 0.0]),
            GaussianComponent::isotropic(0.5, vec![spread, 0.0]),
        ];
        gen_gaussian_mixture(&comps, n, seed).unwrap()
    }

    /// Labels every object except the ids in `hidden`.
    fn dataset(cloud: &LabeledCloud, hidden: &[usize]) -> LabeledDataset {
        let labels = cloud
            .labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (!hidden.contains(&i)).then_some(l))
            .collect();
        LabeledDataset::new(labels, 2).unwrap()
    }

    fn truthful(cloud: &LabeledCloud) -> StatementCollection {
        all_statements(&cloud.oracle, StatementKind::MostCentral).unwrap().statements
    }

    #[test]
    fn dataset_validation() {
        assert_eq!(LabeledDataset::new(vec![Some(0), None], 2), Err(Error::EmptyClass(1)));
        assert_eq!(
            LabeledDataset::new(vec![Some(0), Some(2)], 2),
            Err(Error::UnknownLabel { id: 1, class: 2, classes: 2 })
        );
        assert!(matches!(
            LabeledDataset::from_pairs(3, &[(5, 0)], 1),
            Err(Error::IdOutOfRange { id: 5, n: 3 })
        ));
        let ds = LabeledDataset::from_pairs(4, &[(0, 1), (2, 0), (3, 1)], 2).unwrap();
        assert_eq!(ds.labeled(), vec![0, 2, 3]);
        assert_eq!(ds.unlabeled(), vec![1]);
        assert_eq!(ds.majority_class(), 1);
    }

    #[test]
    fn separated_clusters_feature_route() {
        let cloud = two_blobs(40, 6.0, 5);
        let hidden: Vec<usize> = (0..40).step_by(4).collect();
        let ds = dataset(&cloud, &hidden);
        let out = classify_feature(&truthful(&cloud), &ds, &ClassifierConfig::feature_knn(1)).unwrap();
        assert_eq!(out.predictions.len(), hidden.len());
        for (&u, &p) in &out.predictions {
            assert_eq!(p, cloud.labels[u], "object {u}");
        }
        assert!(DEFAULT_KNN_GRID.contains(&out.knn_k));
    }

    #[test]
    fn unmentioned_object_gets_zero_features() {
        // object 5 never appears; its neighbors are the all-zero rows
        let items = vec![
            Statement::central(0, 1, 2).unwrap(),
            Statement::central(3, 4, 1).unwrap(),
            Statement::central(2, 3, 4).unwrap(),
        ];
        let c = StatementCollection::new(6, items).unwrap();
        let ds = LabeledDataset::new(vec![Some(1), Some(0), Some(0), Some(1), Some(1), None], 2).unwrap();
        let cfg = ClassifierConfig {
            k_grid: vec![1],
            ..ClassifierConfig::feature_knn(0)
        };
        let out = classify_feature(&c, &ds, &cfg).unwrap();
        assert_eq!(out.features.row(5), &[0.0, 0.0]);
        // brute force: rows with zero distance to the origin
        let zero_rows: Vec<usize> = (0..5).filter(|&i| out.features.row(i).iter().all(|&v| v == 0.0)).collect();
        let expected = ds.label(zero_rows[0]).unwrap();
        assert_eq!(out.predictions[&5], expected);
    }

    #[test]
    fn single_class_predicts_it() {
        let cloud = two_blobs(12, 1.0, 2);
        let labels = (0..12).map(|i| (i % 3 != 0).then_some(0)).collect();
        let ds = LabeledDataset::new(labels, 1).unwrap();
        let out = classify_feature(&truthful(&cloud), &ds, &ClassifierConfig::feature_knn(3)).unwrap();
        assert!(out.predictions.values().all(|&p| p == 0));
        let votes = classify_rng_vote(&truthful(&cloud), &ds, 2, 3).unwrap();
        assert!(votes.values().all(|&p| p == 0));
    }

    #[test]
    fn vote_inside_tight_cluster() {
        let cloud = two_blobs(30, 8.0, 9);
        let u = (0..30).find(|&i| cloud.labels[i] == 0).unwrap();
        let ds = dataset(&cloud, &[u]);
        for k in [1, 3, 7] {
            let pred = classify_rng_vote(&truthful(&cloud), &ds, k, 4).unwrap();
            assert_eq!(pred[&u], 0, "k={k}");
        }
    }

    #[test]
    fn vote_neighbors_match_exact_rng() {
        let cloud = two_blobs(26, 2.0, 17);
        let hidden = [3, 11, 20];
        let ds = dataset(&cloud, &hidden);
        let model = RngVoteModel::fit(&truthful(&cloud), &ds).unwrap();
        let labeled = ds.labeled();
        for &u in &hidden {
            let mut ids = labeled.clone();
            ids.push(u);
            let sub = cloud.oracle.restrict(&ids);
            let upos = ids.len() - 1;
            for k in [1, 2, 4, 9] {
                let g = exact_krng(&sub, k);
                let expected: Vec<usize> = (0..upos).filter(|&p| g.has_edge(p, upos)).map(|p| ids[p]).collect();
                assert_eq!(model.neighbors(u, k), expected, "u={u} k={k}");
            }
        }
    }

    #[test]
    fn large_k_admits_every_finite_v() {
        let cloud = two_blobs(20, 1.0, 23);
        let ds = dataset(&cloud, &[0]);
        let model = RngVoteModel::fit(&truthful(&cloud), &ds).unwrap();
        assert_eq!(model.neighbors(0, 18), ds.labeled());
        let mut votes = [0usize; 2];
        for l in ds.labeled() {
            votes[cloud.labels[l]] += 1;
        }
        if votes[0] != votes[1] {
            let plural = usize::from(votes[1] > votes[0]);
            assert_eq!(model.predict(0, 18, 0), plural);
        }
    }

    #[test]
    fn threshold_is_strict() {
        // labeled {0,1,2}, threshold k/(|L|-1) = 1/2 for k = 1
        let items = vec![Statement::central(1, 3, 0).unwrap(), Statement::central(0, 3, 2).unwrap()];
        let c = StatementCollection::new(4, items).unwrap();
        let ds = LabeledDataset::new(vec![Some(0), Some(1), Some(1), None], 2).unwrap();
        let model = RngVoteModel::fit(&c, &ds).unwrap();
        assert_eq!(model.v(3, 0), 0.5);
        assert!(!model.neighbors(3, 1).contains(&0));
        assert!(model.neighbors(3, 2).contains(&0));
    }

    #[test]
    fn fallback_chain() {
        // no statement links 3 to anything; majority of L is class 1
        let items = vec![Statement::central(0, 1, 2).unwrap()];
        let c = StatementCollection::new(4, items).unwrap();
        let ds = LabeledDataset::new(vec![Some(0), Some(1), Some(1), None], 2).unwrap();
        let pred = classify_rng_vote(&c, &ds, 1, 0).unwrap();
        assert_eq!(pred[&3], 1);

        // V(3, 0) = V(3, 1) = 1/2 sits on the threshold for k = 1; the
        // smaller id wins the argmin and outvotes the majority class
        let items = vec![Statement::central(0, 3, 1).unwrap(), Statement::central(1, 3, 0).unwrap()];
        let c = StatementCollection::new(4, items).unwrap();
        let ds = LabeledDataset::new(vec![Some(1), Some(0), Some(0), None], 2).unwrap();
        let model = RngVoteModel::fit(&c, &ds).unwrap();
        assert_eq!(model.v(3, 0), 0.5);
        assert_eq!(model.v(3, 1), 0.5);
        assert_eq!(model.v(3, 2), f64::INFINITY);
        assert!(model.neighbors(3, 1).is_empty());
        assert_eq!(model.predict(3, 1, 0), 1);
        assert_eq!(model.neighbors(3, 2), vec![0, 1]);
    }

    #[test]
    fn tie_break_is_seeded_and_random() {
        let items = vec![Statement::central(1, 2, 0).unwrap()];
        let c = StatementCollection::new(3, items).unwrap();
        let ds = LabeledDataset::new(vec![None, Some(0), Some(1)], 2).unwrap();
        let model = RngVoteModel::fit(&c, &ds).unwrap();
        // only one labeled third, so both pairs have V = 1; k = 2 admits both
        assert_eq!(model.neighbors(0, 2), vec![1, 2]);
        let picks: Vec<usize> = (0..64).map(|s| model.predict(0, 2, s)).collect();
        assert!(picks.contains(&0) && picks.contains(&1));
        assert_eq!(picks, (0..64).map(|s| model.predict(0, 2, s)).collect::<Vec<_>>());
    }

    #[test]
    fn loocv_selection() {
        let cloud = two_blobs(30, 7.0, 31);
        let ds = dataset(&cloud, &[]);
        let c = truthful(&cloud);
        assert_eq!(select_k_loocv(&c, &ds, &[3], 20, 1).unwrap().k, 3);
        let a = select_k_loocv(&c, &ds, &[1, 5, 45], 20, 8).unwrap();
        let b = select_k_loocv(&c, &ds, &[1, 5, 45], 20, 8).unwrap();
        assert_eq!(a, b);
        // exhaustive check of the rule on each hidden object for the chosen k
        for held in ds.labeled() {
            let mut labels = ds.labels().to_vec();
            labels[held] = None;
            let reduced = LabeledDataset { labels, classes: 2 };
            let model = RngVoteModel::fit(&c, &reduced).unwrap();
            assert_eq!(model.predict(held, a.k, 0), cloud.labels[held]);
        }
        assert_eq!(a.losses.iter().find(|(k, _)| *k == a.k).unwrap().1, 0.0);
        let one = LabeledDataset::new(vec![Some(0), None, None], 1).unwrap();
        assert!(select_k_loocv(&StatementCollection::empty(3), &one, &[1], 5, 0).is_err());
    }

    #[test]
    fn grid_clipping() {
        assert_eq!(clip_grid(&DEFAULT_RNG_GRID, 29), vec![1, 2, 3, 5, 7, 15, 25, 29]);
        assert_eq!(clip_grid(&DEFAULT_RNG_GRID, 0), vec![1]);
    }

    #[test]
    fn invariant_under_partition_and_reorder() {
        let cloud = two_blobs(24, 1.5, 41);
        let ds = dataset(&cloud, &[1, 5, 9, 13, 17]);
        let c = truthful(&cloud);
        let mut rng = rng_for(5, 0);
        let noisy: Vec<Statement> = c.iter().map(|s| apply_noise(*s, 0.2, &mut rng)).collect();
        let c = StatementCollection::new(24, noisy).unwrap();
        let mut shuffled = c.items().to_vec();
        shuffled.shuffle(&mut rng);
        let reordered = StatementCollection::new(24, shuffled).unwrap();
        let cfg = ClassifierConfig::feature_knn(2);
        assert_eq!(
            classify_feature(&c, &ds, &cfg).unwrap(),
            classify_feature(&reordered, &ds, &cfg).unwrap()
        );
        assert_eq!(
            classify_rng_vote(&c, &ds, 3, 2).unwrap(),
            classify_rng_vote(&reordered, &ds, 3, 2).unwrap()
        );
        let mut joined = StatementCollection::empty(24);
        for p in partition(&c, 4).iter().rev() {
            joined.extend_from(p).unwrap();
        }
        assert_eq!(
            classify_rng_vote(&c, &ds, 3, 2).unwrap(),
            classify_rng_vote(&joined, &ds, 3, 2).unwrap()
        );
    }

    #[test]
    fn prediction_csv() {
        let pred: BTreeMap<usize, usize> = [(4, 1), (2, 0)].into();
        let mut buf = Vec::new();
        write_predictions(&pred, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2,0\n4,1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn swapping_classes_swaps_predictions(seed in 0u64..500, k in 1usize..6) {
            let cloud = two_blobs(22, 1.2, seed);
            let hidden: Vec<usize> = (0..22).filter(|i| i % 4 == 1).collect();
            let ds = dataset(&cloud, &hidden);
            let swapped = LabeledDataset::new(
                ds.labels().iter().map(|l| l.map(|c| 1 - c)).collect(),
                2,
            ).unwrap();
            let mut rng = rng_for(seed, 9);
            let c = StatementCollection::new(
                22,
                truthful(&cloud).iter().map(|s| apply_noise(*s, 0.1, &mut rng)).collect(),
            ).unwrap();
            let a = classify_rng_vote(&c, &ds, k, seed).unwrap();
            let b = classify_rng_vote(&c, &swapped, k, seed).unwrap();
            for (u, p) in &a {
                let model = RngVoteModel::fit(&c, &ds).unwrap();
                // the final fallback resolves count ties by class order
                if !model.neighbors(*u, k).is_empty() {
                    prop_assert_eq!(b[u], 1 - p);
                }
            }
            // odd k below every training size, so k-NN votes never tie
            let cfg = ClassifierConfig {
                k_grid: vec![1, 3, 5, 7],
                ..ClassifierConfig::feature_knn(seed)
            };
            let fa = classify_feature(&c, &ds, &cfg).unwrap();
            let fb = classify_feature(&c, &swapped, &cfg).unwrap();
            prop_assert_eq!(fa.knn_k, fb.knn_k);
            for (u, p) in &fa.predictions {
                prop_assert_eq!(fb.predictions[u], 1 - p);
            }
        }
    }
}

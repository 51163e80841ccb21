//! Monte Carlo sweeps over statement counts and error probabilities.
//!
//! Repetition `r` draws its dataset from `rep_seed(seed, r)`; cell `c` of
//! that repetition samples statements from `statement_seed(rep_seed, c)`.
//! Cells are numbered row-major over (count, errorprob). Every value is a
//! pure function of these seeds, so output does not depend on the number of
//! worker threads.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use ordlens::classify::{
    classify_feature, classify_rng_vote, clip_grid, select_k_loocv, ClassifierConfig, LabeledDataset,
    DEFAULT_LOOCV_REPEATS, DEFAULT_RNG_GRID,
};
use ordlens::cluster::{build_affinity, spectral_clustering, AffinityMode, IsolatedPolicy};
use ordlens::depth::{crowdmedian_scores, estimate_medoid, medoid_objectives, rank_outliers};
use ordlens::metrics::{hamming_error, purity, relative_error_from, zero_one_loss};
use ordlens::oracle::{
    gen_gaussian_mixture, gen_two_moons, mix_seed, sample_statements, triple_count, DistanceOracle,
    GaussianComponent, LabeledCloud, NoiseModel, SamplingMode, TwoMoons,
};
use ordlens::proxgraph::{accumulate_pair_stats, estimate_krng, exact_krng};
use ordlens::{Error, Result, StatementCollection, StatementKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Medoid,
    Outlier,
    Rng,
    Classify,
    Cluster,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Medoid => "medoid",
            Task::Outlier => "outlier",
            Task::Rng => "rng",
            Task::Classify => "classify",
            Task::Cluster => "cluster",
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Task::Medoid | Task::Cluster => 100,
            Task::Outlier => 103,
            Task::Rng => 150,
            Task::Classify => 140,
        }
    }
}

/// A statement count, or every triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSpec {
    Exact(usize),
    All,
}

impl CountSpec {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            CountSpec::Exact(c) => c,
            CountSpec::All => triple_count(n).min(usize::MAX as u128) as usize,
        }
    }
}

impl FromStr for CountSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(CountSpec::All);
        }
        s.parse::<usize>()
            .map(CountSpec::Exact)
            .map_err(|e| format!("invalid statement count {s:?}: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub task: Task,
    /// Dataset size; `None` uses the task default.
    pub n: Option<usize>,
    pub counts: Vec<CountSpec>,
    pub errorprobs: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Neighborhood parameter for the graph-based tasks.
    pub k: usize,
    /// Adds a weighted clustering method when set.
    pub sigma: Option<f64>,
    pub clusters: usize,
    /// Labeled objects for classification; defaults to 5/7 of `n`.
    pub labeled: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(task: Task, counts: Vec<CountSpec>, errorprobs: Vec<f64>, reps: usize, seed: u64) -> Self {
        ExperimentSpec {
            task,
            n: None,
            counts,
            errorprobs,
            reps,
            seed,
            k: 7,
            sigma: None,
            clusters: 2,
            labeled: None,
        }
    }

    pub fn size(&self) -> usize {
        self.n.unwrap_or(self.task.default_n())
    }

    fn validate(&self) -> Result<()> {
        if self.counts.is_empty() || self.errorprobs.is_empty() {
            return Err(Error::InvalidParameter("count and errorprob grids must be nonempty".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if self.counts.contains(&CountSpec::Exact(0)) {
            return Err(Error::InvalidParameter("statement counts must be positive".into()));
        }
        for &e in &self.errorprobs {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::BadErrorProb(e));
            }
        }
        if self.size() < 3 {
            return Err(Error::InvalidParameter("datasets need at least 3 objects".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub task: &'static str,
    pub method: &'static str,
    pub count: usize,
    pub errorprob: f64,
    pub reps: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub const SWEEP_HEADER: &str = "task,method,count,errorprob,reps,mean,min,max";

pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    mix_seed(seed, rep as u64)
}

pub fn statement_seed(rep_seed: u64, cell: usize) -> u64 {
    mix_seed(rep_seed, cell as u64 + 1)
}

/// Planted outliers for the outlier task, far outside a standard normal.
pub const PLANTED_OUTLIERS: [[f64; 2]; 3] = [[6.0, 0.5], [-4.5, 4.5], [0.5, -6.5]];

/// The dataset used by `task` for one repetition.
pub fn task_dataset(task: Task, n: usize, seed: u64) -> Result<LabeledCloud> {
    let origin = || GaussianComponent::isotropic(1.0, vec![0.0, 0.0]);
    match task {
        Task::Medoid => gen_gaussian_mixture(&[origin()], n, seed),
        Task::Outlier => {
            let inliers = n.saturating_sub(PLANTED_OUTLIERS.len());
            let base = gen_gaussian_mixture(&[origin()], inliers, seed)?;
            let mut points = base.points;
            let mut labels = base.labels;
            for p in PLANTED_OUTLIERS.iter().take(n - inliers) {
                points.push(p.to_vec());
                labels.push(1);
            }
            let oracle = DistanceOracle::points(points.clone())?;
            Ok(LabeledCloud {
                points,
                labels,
                oracle,
            })
        }
        Task::Rng => gen_gaussian_mixture(&rng_mixture(), n, seed),
        Task::Classify => gen_gaussian_mixture(
            &[
                GaussianComponent::isotropic(0.5, vec![0.0, 0.0]),
                GaussianComponent::isotropic(0.5, vec![3.0, 0.0]),
            ],
            n,
            seed,
        ),
        Task::Cluster => gen_two_moons(n, TwoMoons::default(), seed),
    }
}

/// Weights 0.6 / 0.4, means (-3, 0) and (3, 0), covariances I and [1 1; 1 2].
pub fn rng_mixture() -> Vec<GaussianComponent> {
    vec![
        GaussianComponent::isotropic(0.6, vec![-3.0, 0.0]),
        GaussianComponent {
            weight: 0.4,
            mean: vec![3.0, 0.0],
            covariance: vec![vec![1.0, 1.0], vec![1.0, 2.0]],
        },
    ]
}

/// Samples without replacement while the count fits, else with replacement.
pub fn draw(
    o: &DistanceOracle,
    count: usize,
    errorprob: f64,
    seed: u64,
    kind: StatementKind,
) -> Result<StatementCollection> {
    let mode = if count as u128 <= triple_count(o.n()) {
        SamplingMode::WithoutReplacement
    } else {
        SamplingMode::WithReplacement
    };
    Ok(sample_statements(o, count, mode, NoiseModel::new(errorprob, seed)?, kind)?.statements)
}

fn methods(spec: &ExperimentSpec) -> Vec<&'static str> {
    match spec.task {
        Task::Medoid | Task::Outlier => vec!["lens", "crowd"],
        Task::Rng => vec!["uncorrected", "corrected"],
        Task::Classify => vec!["feature", "vote"],
        Task::Cluster if spec.sigma.is_some() => vec!["unweighted", "weighted"],
        Task::Cluster => vec!["unweighted"],
    }
}

/// Metric values for one repetition of one cell, in `methods` order.
fn run_cell(
    spec: &ExperimentSpec,
    cloud: &LabeledCloud,
    objectives: &[f64],
    count: usize,
    errorprob: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let o = &cloud.oracle;
    let n = o.n();
    match spec.task {
        Task::Medoid => {
            let central = draw(o, count, errorprob, seed, StatementKind::MostCentral)?;
            let odd = draw(o, count, errorprob, seed, StatementKind::OddOneOut)?;
            let lens = relative_error_from(objectives, estimate_medoid(&central)?)?;
            let crowd_id = crowdmedian_scores(&odd)?.medoid().ok_or(Error::EmptyCollection)?;
            Ok(vec![lens, relative_error_from(objectives, crowd_id)?])
        }
        Task::Outlier => {
            let planted: Vec<usize> = (0..n).filter(|&i| cloud.labels[i] == 1).collect();
            let m = planted.len();
            let missed = |found: Vec<usize>| {
                planted.iter().filter(|p| !found.contains(p)).count() as f64 / m.max(1) as f64
            };
            let central = draw(o, count, errorprob, seed, StatementKind::MostCentral)?;
            let odd = draw(o, count, errorprob, seed, StatementKind::OddOneOut)?;
            let lens = rank_outliers(&central, m)?.into_iter().map(|(id, _)| id.index()).collect();
            let crowd = crowdmedian_scores(&odd)?
                .outlier_candidates(m)
                .into_iter()
                .map(|(id, _)| id.index())
                .collect();
            Ok(vec![missed(lens), missed(crowd)])
        }
        Task::Rng => {
            let c = draw(o, count, errorprob, seed, StatementKind::MostCentral)?;
            let ps = accumulate_pair_stats(&c)?;
            let truth = exact_krng(o, spec.k);
            let plain = hamming_error(&truth, &estimate_krng(&ps, spec.k, None)?)?;
            let corrected = hamming_error(&truth, &estimate_krng(&ps, spec.k, Some(errorprob))?)?;
            Ok(vec![plain, corrected])
        }
        Task::Classify => {
            let labeled = spec.labeled.unwrap_or(n * 5 / 7).clamp(2, n - 1);
            let labels = (0..n).map(|i| (i < labeled).then_some(cloud.labels[i])).collect();
            let ds = match LabeledDataset::new(labels, 2) {
                Ok(ds) => ds,
                Err(Error::EmptyClass(_)) => {
                    return Err(Error::InvalidParameter("a class drew no labeled points".into()))
                }
                Err(e) => return Err(e),
            };
            let truth = (labeled..n).map(|i| (i, cloud.labels[i])).collect();
            let c = draw(o, count, errorprob, seed, StatementKind::MostCentral)?;
            let feature = classify_feature(&c, &ds, &ClassifierConfig::feature_knn(seed))?;
            let grid = clip_grid(&DEFAULT_RNG_GRID, labeled - 1);
            let k = select_k_loocv(&c, &ds, &grid, DEFAULT_LOOCV_REPEATS, seed)?.k;
            let vote = classify_rng_vote(&c, &ds, k, seed)?;
            Ok(vec![
                zero_one_loss(&feature.predictions, &truth)?,
                zero_one_loss(&vote, &truth)?,
            ])
        }
        Task::Cluster => {
            let c = draw(o, count, errorprob, seed, StatementKind::MostCentral)?;
            let ps = accumulate_pair_stats(&c)?;
            let mut out = Vec::new();
            let mut modes = vec![AffinityMode::Unweighted];
            if let Some(sigma) = spec.sigma {
                modes.push(AffinityMode::Weighted { sigma });
            }
            for mode in modes {
                let w = build_affinity(&ps, spec.k, mode, None)?;
                let r = spectral_clustering(&w, spec.clusters, seed, IsolatedPolicy::Attach(Some(&ps)))?;
                out.push(purity(&r.assignment, &cloud.labels)?);
            }
            Ok(out)
        }
    }
}

/// Runs every (count, errorprob) cell `reps` times and aggregates each
/// method's metric. Rows come out ordered by count, errorprob, method.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let n = spec.size();
    let cells: Vec<(usize, f64)> = spec
        .counts
        .iter()
        .flat_map(|c| spec.errorprobs.iter().map(move |&e| (c.resolve(n), e)))
        .collect();
    let per_rep: Vec<Result<Vec<Vec<f64>>>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let rs = rep_seed(spec.seed, rep);
            let cloud = task_dataset(spec.task, n, rs)?;
            let objectives = match spec.task {
                Task::Medoid => medoid_objectives(&cloud.oracle),
                _ => Vec::new(),
            };
            cells
                .par_iter()
                .enumerate()
                .map(|(ci, &(count, e))| run_cell(spec, &cloud, &objectives, count, e, statement_seed(rs, ci)))
                .collect()
        })
        .collect();
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let names = methods(spec);
    let mut rows = Vec::with_capacity(cells.len() * names.len());
    for (ci, &(count, errorprob)) in cells.iter().enumerate() {
        for (mi, &method) in names.iter().enumerate() {
            let values: Vec<f64> = per_rep.iter().map(|r| r[ci][mi]).collect();
            rows.push(SweepRow {
                task: spec.task.name(),
                method,
                count,
                errorprob,
                reps: spec.reps,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.task, r.method, r.count, r.errorprob, r.reps, r.mean, r.min, r.max
        )?;
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ordlens::classify::{
    classify_feature, classify_rng_vote, clip_grid, select_k_loocv, ClassifierConfig, LabeledDataset,
    DEFAULT_RNG_GRID,
};
use ordlens::cluster::{build_affinity, spectral_clustering, AffinityMode, IsolatedPolicy};
use ordlens::depth::{crowdmedian_scores, estimate_lens_depth, estimate_medoid, largest_gap, outlier_ranking};
use ordlens::metrics::{hamming_error, purity, relative_error, zero_one_loss, MetricReport};
use ordlens::oracle::{
    all_statements, apply_noise, gen_gaussian_mixture, gen_two_moons, read_edges, read_matrix, read_points,
    rng_for, sample_statements, shortest_path_oracle, DistanceOracle, GaussianComponent, LabeledCloud,
    NoiseModel, SamplingMode, TwoMoons, SAMPLE_BLOCK,
};
use ordlens::proxgraph::{
    accumulate_pair_stats, estimate_krng, estimate_weighted_krng, exact_krng, exact_weighted_krng,
    graph_diagnostics, EstimatedGraph,
};
use ordlens::statements::{parse_statements, write_statements, NameMap};
use ordlens::{ObjectId, StatementCollection, StatementKind};

use crate::sweep::{self, ExperimentSpec, Task};
use crate::*;

pub(crate) fn dispatch(cmd: &Command, out: &mut Vec<u8>, notes: &mut Vec<u8>) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => generate(a, out, notes),
        Command::Medoid(a) => medoid(a, out),
        Command::Outliers(a) => outliers(a, out, notes),
        Command::Rng(a) => rng(a, out),
        Command::Classify(a) => classify(a, out),
        Command::Cluster(a) => cluster(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Sweep(a) => run_sweep(a, out),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn load_statements(path: &Path, n: Option<usize>, names: Option<&Path>) -> CliResult<(StatementCollection, Option<NameMap>)> {
    match names {
        Some(np) => {
            let map = NameMap::parse(open(np)?)?;
            if let Some(n) = n {
                if n != map.len() {
                    return Err(CliError::Usage(format!("--n {n} but the name map has {} entries", map.len())));
                }
            }
            let c = map.parse_statements(open(path)?)?;
            Ok((c, Some(map)))
        }
        None => {
            let n = n.ok_or_else(|| CliError::Usage("--n is required without --names".into()))?;
            Ok((parse_statements(open(path)?, n)?, None))
        }
    }
}

fn load_input(input: &StatementInput) -> CliResult<(StatementCollection, Option<NameMap>)> {
    load_statements(&input.statements, input.n, input.names.as_deref())
}

fn display_id(names: &Option<NameMap>, id: ObjectId) -> String {
    names
        .as_ref()
        .and_then(|m| m.name(id.index()))
        .map_or_else(|| id.to_string(), str::to_string)
}

fn load_oracle(src: &OracleSource) -> CliResult<Option<DistanceOracle>> {
    if let Some(p) = &src.points {
        return Ok(Some(DistanceOracle::points(read_points(open(p)?)?)?));
    }
    if let Some(p) = &src.matrix {
        return Ok(Some(read_matrix(open(p)?)?));
    }
    if let Some(p) = &src.edges {
        let (edges, n) = read_edges(open(p)?)?;
        return Ok(Some(shortest_path_oracle(&edges, n)?));
    }
    Ok(None)
}

/// Lines of at least two comma-separated integers; extra fields are ignored.
fn read_int_pairs(path: &Path) -> CliResult<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut fields = t.split(',').map(str::trim);
        let parsed = (|| Some((fields.next()?.parse().ok()?, fields.next()?.parse().ok()?)))();
        match parsed {
            Some(p) => out.push(p),
            // a header line is allowed at the top
            None if out.is_empty() && i == 0 => {}
            None => {
                return Err(ordlens::Error::Parse {
                    line: i + 1,
                    message: format!("expected two integers, found {t:?}"),
                }
                .into())
            }
        }
    }
    Ok(out)
}

fn kind_of(k: KindArg) -> StatementKind {
    match k {
        KindArg::Central => StatementKind::MostCentral,
        KindArg::Odd => StatementKind::OddOneOut,
    }
}

fn synthetic(a: &GenerateArgs, d: Dataset) -> CliResult<LabeledCloud> {
    let cloud = match d {
        Dataset::Gaussian => {
            if a.dim == 0 {
                return Err(CliError::Usage("--dim must be at least 1".into()));
            }
            gen_gaussian_mixture(&[GaussianComponent::isotropic(1.0, vec![0.0; a.dim])], a.n, a.seed)?
        }
        Dataset::TwoGaussians => gen_gaussian_mixture(
            &[
                GaussianComponent::isotropic(0.5, vec![0.0, 0.0]),
                GaussianComponent::isotropic(0.5, vec![a.separation, 0.0]),
            ],
            a.n,
            a.seed,
        )?,
        Dataset::Moons => gen_two_moons(a.n, TwoMoons::default(), a.seed)?,
        Dataset::Mixture => gen_gaussian_mixture(&sweep::rng_mixture(), a.n, a.seed)?,
    };
    Ok(cloud)
}

fn write_points<W: Write>(points: &[Vec<f64>], mut w: W) -> CliResult<()> {
    for p in points {
        let row: Vec<String> = p.iter().map(f64::to_string).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn generate(a: &GenerateArgs, out: &mut Vec<u8>, notes: &mut Vec<u8>) -> CliResult<()> {
    let (loaded, cloud) = match (a.dataset, load_oracle(&a.source)?) {
        (Some(d), _) => (None, Some(synthetic(a, d)?)),
        (None, Some(o)) => (Some(o), None),
        (None, None) => return Err(CliError::Usage("give --dataset or one of --points/--matrix/--edges".into())),
    };
    let oracle = match (&cloud, &loaded) {
        (Some(c), _) => &c.oracle,
        (None, Some(o)) => o,
        (None, None) => unreachable!(),
    };
    if let Some(c) = &cloud {
        if let Some(p) = &a.points_out {
            write_points(&c.points, create(p)?)?;
        }
        if let Some(p) = &a.labels_out {
            let mut w = create(p)?;
            for (i, l) in c.labels.iter().enumerate() {
                writeln!(w, "{i},{l}")?;
            }
        }
    } else if a.points_out.is_some() || a.labels_out.is_some() {
        return Err(CliError::Usage("--points-out and --labels-out need --dataset".into()));
    }
    let seed = ordlens::oracle::mix_seed(a.seed, 1);
    let kind = kind_of(a.kind);
    let sampled = if a.all {
        let mut s = all_statements(oracle, kind)?;
        if a.errorprob > 0.0 {
            NoiseModel::new(a.errorprob, seed)?;
            let items: Vec<_> = s
                .statements
                .items()
                .chunks(SAMPLE_BLOCK)
                .enumerate()
                .flat_map(|(b, chunk)| {
                    let mut r = rng_for(seed, b as u64 + 1);
                    chunk.iter().map(move |&st| apply_noise(st, a.errorprob, &mut r)).collect::<Vec<_>>()
                })
                .collect();
            s.statements = StatementCollection::new(oracle.n(), items)?;
        }
        Some(s)
    } else if let Some(count) = a.count {
        let mode = if a.with_replacement {
            SamplingMode::WithReplacement
        } else {
            SamplingMode::WithoutReplacement
        };
        Some(sample_statements(oracle, count, mode, NoiseModel::new(a.errorprob, seed)?, kind)?)
    } else {
        None
    };
    match (sampled, &cloud) {
        (Some(s), _) => {
            write_statements(&s.statements, &mut *out)?;
            writeln!(notes, "statements={} ties={}", s.statements.len(), s.ties)?;
        }
        (None, Some(c)) if a.points_out.is_none() => write_points(&c.points, &mut *out)?,
        (None, Some(_)) => {}
        (None, None) => return Err(CliError::Usage("nothing to generate: give --count or --all".into())),
    }
    Ok(())
}

fn medoid(a: &MedoidArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let (c, names) = load_input(&a.input)?;
    let id = match a.method {
        DepthMethod::Lens => {
            if let Some(p) = &a.depth_out {
                estimate_lens_depth(&c)?.write_csv(create(p)?)?;
            }
            estimate_medoid(&c)?
        }
        DepthMethod::Crowd => {
            let table = crowdmedian_scores(&c)?;
            if let Some(p) = &a.depth_out {
                let mut w = create(p)?;
                writeln!(w, "id,outlier_count,appear_count,frequency")?;
                for i in 0..c.n() {
                    writeln!(
                        w,
                        "{i},{},{},{}",
                        table.outlier_count[i], table.appear_count[i], table.frequency[i]
                    )?;
                }
            }
            table.medoid().ok_or(ordlens::Error::EmptyCollection)?
        }
    };
    writeln!(out, "{}", display_id(&names, id))?;
    Ok(())
}

fn outliers(a: &OutliersArgs, out: &mut Vec<u8>, notes: &mut Vec<u8>) -> CliResult<()> {
    let (c, names) = load_input(&a.input)?;
    let (ranked, header) = match a.method {
        DepthMethod::Lens => (outlier_ranking(&estimate_lens_depth(&c)?), "id,ld"),
        DepthMethod::Crowd => (crowdmedian_scores(&c)?.outlier_candidates(c.n()), "id,frequency"),
    };
    if a.gap {
        // crowd scores are descending: negate so the gap search sees an ascending list
        let ascending: Vec<_> = match a.method {
            DepthMethod::Lens => ranked.clone(),
            DepthMethod::Crowd => ranked.iter().map(|&(id, f)| (id, -f)).collect(),
        };
        match largest_gap(&ascending) {
            Some(p) => writeln!(notes, "largest_gap_after={p}")?,
            None => writeln!(notes, "largest_gap_after=none")?,
        }
    }
    let top = a.top.unwrap_or(ranked.len());
    writeln!(out, "{header}")?;
    for &(id, v) in ranked.iter().take(top) {
        writeln!(out, "{},{v}", display_id(&names, id))?;
    }
    Ok(())
}

fn rng(a: &RngArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let correction = match (a.correct, a.errorprob) {
        (true, Some(e)) => Some(e),
        _ => None,
    };
    let g: EstimatedGraph = if a.exact {
        let o = load_oracle(&a.source)?.ok_or_else(|| CliError::Usage("--exact needs an oracle".into()))?;
        match a.sigma {
            Some(s) => exact_weighted_krng(&o, a.k, s)?,
            None => exact_krng(&o, a.k),
        }
    } else {
        let path = a.statements.as_deref().ok_or_else(|| CliError::Usage("--statements is required".into()))?;
        let (c, _) = load_statements(path, a.n, a.names.as_deref())?;
        let ps = accumulate_pair_stats(&c)?;
        match a.sigma {
            Some(s) => estimate_weighted_krng(&ps, a.k, correction, s)?,
            None => estimate_krng(&ps, a.k, correction)?,
        }
    };
    if a.diagnostics {
        graph_diagnostics(&g).write_kv(&mut *out)?;
    } else {
        g.write_csv(&mut *out)?;
    }
    Ok(())
}

fn classify(a: &ClassifyArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let (c, _) = load_input(&a.input)?;
    let pairs = read_int_pairs(&a.labels)?;
    let classes = a
        .classes
        .unwrap_or_else(|| pairs.iter().map(|&(_, l)| l + 1).max().unwrap_or(0));
    let ds = LabeledDataset::from_pairs(c.n(), &pairs, classes)?;
    let labeled = ds.labeled().len();
    let predictions = match a.method {
        ClassifyMethod::Feature => {
            let mut cfg = ClassifierConfig::feature_knn(a.seed);
            if let Some(g) = &a.k_grid {
                cfg.k_grid = g.clone();
            }
            cfg.folds = a.folds;
            cfg.repeats = a.repeats;
            let r = classify_feature(&c, &ds, &cfg)?;
            if let Some(p) = &a.features_out {
                r.features.write_csv(create(p)?)?;
            }
            r.predictions
        }
        ClassifyMethod::Vote => {
            let k = match a.k {
                Some(k) => k,
                None => {
                    let base = a.k_grid.clone().unwrap_or_else(|| DEFAULT_RNG_GRID.to_vec());
                    let grid = clip_grid(&base, labeled.saturating_sub(1));
                    select_k_loocv(&c, &ds, &grid, a.repeats, a.seed)?.k
                }
            };
            classify_rng_vote(&c, &ds, k, a.seed)?
        }
    };
    ordlens::classify::write_predictions(&predictions, &mut *out)?;
    Ok(())
}

fn cluster(a: &ClusterArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let (c, _) = load_input(&a.input)?;
    let ps = accumulate_pair_stats(&c)?;
    let correction = if a.correct { a.errorprob } else { None };
    let mode = match a.sigma {
        Some(sigma) => AffinityMode::Weighted { sigma },
        None => AffinityMode::Unweighted,
    };
    let w = build_affinity(&ps, a.k, mode, correction)?;
    if let Some(p) = &a.affinity_out {
        w.write_csv(create(p)?)?;
    }
    let policy = if a.allow_isolated {
        IsolatedPolicy::Attach(Some(&ps))
    } else {
        IsolatedPolicy::Reject
    };
    spectral_clustering(&w, a.clusters, a.seed, policy)?.write_csv(&mut *out)?;
    Ok(())
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("this metric needs {flag}")))
}

fn eval(a: &EvalArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let report = match a.metric {
        MetricArg::RelativeError => {
            let o = load_oracle(&a.source)?
                .ok_or_else(|| CliError::Usage("relative-error needs --points, --matrix or --edges".into()))?;
            let est = required(&a.estimate, "--estimate")?;
            let id = match est.trim().parse::<usize>() {
                Ok(id) => id,
                Err(_) => {
                    let mut first = String::new();
                    open(Path::new(est))?.read_line(&mut first)?;
                    first.trim().parse().map_err(|_| ordlens::Error::Parse {
                        line: 1,
                        message: format!("expected an object id, found {:?}", first.trim()),
                    })?
                }
            };
            MetricReport::new("relative_error", relative_error(&o, ObjectId::new(id))?).with("estimate", id)
        }
        MetricArg::Hamming => {
            let n = *required(&a.n, "--n")?;
            let est = read_int_pairs(Path::new(required(&a.estimate, "--estimate")?))?;
            let truth = read_int_pairs(required(&a.truth, "--truth")?)?;
            for &(i, j) in est.iter().chain(&truth) {
                if i.max(j) >= n {
                    return Err(ordlens::Error::IdOutOfRange { id: i.max(j), n }.into());
                }
            }
            let h = hamming_error(&EstimatedGraph::from_edges(n, truth), &EstimatedGraph::from_edges(n, est))?;
            MetricReport::new("hamming", h).with("n", n)
        }
        MetricArg::ZeroOne => {
            let pred: BTreeMap<_, _> = read_int_pairs(required(&a.predicted, "--predicted")?)?.into_iter().collect();
            let truth_all: BTreeMap<_, _> = read_int_pairs(required(&a.truth, "--truth")?)?.into_iter().collect();
            // truth files may cover every object; score only the predicted ones
            let truth = if pred.keys().all(|k| truth_all.contains_key(k)) {
                pred.keys().map(|k| (*k, truth_all[k])).collect()
            } else {
                truth_all
            };
            MetricReport::new("zero_one", zero_one_loss(&pred, &truth)?).with("predicted", pred.len())
        }
        MetricArg::Purity => {
            let pred: BTreeMap<_, _> = read_int_pairs(required(&a.predicted, "--predicted")?)?.into_iter().collect();
            let truth: BTreeMap<_, _> = read_int_pairs(required(&a.truth, "--truth")?)?.into_iter().collect();
            if pred.keys().ne(truth.keys()) {
                return Err(ordlens::Error::KeyMismatch("cluster and class files cover different ids".into()).into());
            }
            let assign: Vec<usize> = pred.values().copied().collect();
            let classes: Vec<usize> = truth.values().copied().collect();
            MetricReport::new("purity", purity(&assign, &classes)?).with("n", assign.len())
        }
    };
    writeln!(out, "{report}")?;
    Ok(())
}

fn run_sweep(a: &SweepArgs, out: &mut Vec<u8>) -> CliResult<()> {
    let task = match a.task {
        TaskArg::Medoid => Task::Medoid,
        TaskArg::Outlier => Task::Outlier,
        TaskArg::Rng => Task::Rng,
        TaskArg::Classify => Task::Classify,
        TaskArg::Cluster => Task::Cluster,
    };
    let mut spec = ExperimentSpec::new(task, a.counts.clone(), a.errorprob.clone(), a.reps, a.seed);
    spec.n = a.n;
    spec.k = a.k;
    spec.sigma = a.sigma;
    spec.clusters = a.clusters;
    spec.labeled = a.labeled;
    let rows = sweep::run_sweep(&spec)?;
    sweep::write_sweep_csv(&rows, &mut *out)?;
    Ok(())
}

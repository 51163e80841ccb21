use ordlens::classify::{classify_rng_vote, LabeledDataset};
use ordlens::depth::{estimate_lens_depth, exact_lens_depth};
use ordlens::oracle::{
    all_statements, gen_gaussian_mixture, sample_fold, sample_statements, GaussianComponent, NoiseModel,
    SamplingMode,
};
use ordlens::proxgraph::{
    accumulate_pair_stats, accumulate_pair_stats_with_limit, estimate_krng, exact_krng, noise_forward, PairStats,
};
use ordlens::statements::{parse_statements, write_statements};
use ordlens::StatementKind;

fn cloud(n: usize, seed: u64) -> ordlens::oracle::LabeledCloud {
    gen_gaussian_mixture(&[GaussianComponent::isotropic(1.0, vec![0.0, 0.0])], n, seed).unwrap()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn sampling_is_independent_of_pool_size() {
    let c = cloud(80, 1);
    let draw = || {
        sample_statements(
            &c.oracle,
            50_000,
            SamplingMode::WithReplacement,
            NoiseModel::new(0.25, 9).unwrap(),
            StatementKind::MostCentral,
        )
        .unwrap()
        .statements
    };
    let one = pool(1).install(draw);
    let many = pool(7).install(draw);
    assert_eq!(one, many);
}

#[test]
fn streamed_fold_matches_materialized_sample() {
    let c = cloud(60, 2);
    let noise = NoiseModel::new(0.1, 4).unwrap();
    let sampled = sample_statements(&c.oracle, 20_000, SamplingMode::WithoutReplacement, noise, StatementKind::MostCentral)
        .unwrap();
    let (folded, ties) = sample_fold(
        &c.oracle,
        20_000,
        SamplingMode::WithoutReplacement,
        noise,
        StatementKind::MostCentral,
        || PairStats::new(60),
    )
    .unwrap();
    assert_eq!(ties, sampled.ties);
    let direct = accumulate_pair_stats(&sampled.statements).unwrap();
    assert_eq!(folded.mentioned_pairs(), direct.mentioned_pairs());
}

#[test]
fn sparse_and_dense_pair_tables_agree() {
    let c = cloud(40, 3);
    let s = sample_statements(&c.oracle, 3_000, SamplingMode::WithoutReplacement, NoiseModel::truthful(5), StatementKind::MostCentral)
        .unwrap()
        .statements;
    let dense = accumulate_pair_stats(&s).unwrap();
    let sparse = accumulate_pair_stats_with_limit(&s, 0).unwrap();
    assert!(dense.is_dense() && !sparse.is_dense());
    assert_eq!(dense.mentioned_pairs(), sparse.mentioned_pairs());
    assert_eq!(estimate_krng(&dense, 3, None).unwrap(), estimate_krng(&sparse, 3, None).unwrap());
}

#[test]
fn statement_file_round_trip_preserves_estimates() {
    let c = cloud(25, 4);
    let all = all_statements(&c.oracle, StatementKind::MostCentral).unwrap().statements;
    let mut buf = Vec::new();
    write_statements(&all, &mut buf).unwrap();
    let back = parse_statements(&buf[..], 25).unwrap();
    assert_eq!(back, all);
    let est = estimate_lens_depth(&back).unwrap();
    assert_eq!(est.central_count, exact_lens_depth(&c.oracle).lens_pair_count);
    let ps = accumulate_pair_stats(&back).unwrap();
    assert_eq!(estimate_krng(&ps, 2, None).unwrap(), exact_krng(&c.oracle, 2));
}

#[test]
fn noisy_pair_fraction_follows_forward_model() {
    // many noisy replicas of every statement: V concentrates on noise_forward(p)
    let c = cloud(20, 5);
    let truthful = accumulate_pair_stats(&all_statements(&c.oracle, StatementKind::MostCentral).unwrap().statements).unwrap();
    let (noisy, _) = sample_fold(
        &c.oracle,
        1_140 * 400,
        SamplingMode::WithReplacement,
        NoiseModel::new(0.3, 6).unwrap(),
        StatementKind::MostCentral,
        || PairStats::new(20),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for (i, j, _, _) in truthful.mentioned_pairs() {
        let expected = noise_forward(truthful.v(i, j), 0.3);
        worst = worst.max((noisy.v(i, j) - expected).abs());
    }
    assert!(worst < 0.03, "largest deviation {worst}");
}

#[test]
fn vote_rule_on_separated_classes() {
    let comps = [
        GaussianComponent::isotropic(0.5, vec![-4.0, 0.0]),
        GaussianComponent::isotropic(0.5, vec![4.0, 0.0]),
    ];
    let data = gen_gaussian_mixture(&comps, 60, 7).unwrap();
    let labels = (0..60).map(|i| (i < 45).then_some(data.labels[i])).collect();
    let ds = LabeledDataset::new(labels, 2).unwrap();
    let s = all_statements(&data.oracle, StatementKind::MostCentral).unwrap().statements;
    let pred = classify_rng_vote(&s, &ds, 3, 1).unwrap();
    let wrong = pred.iter().filter(|(&i, &l)| data.labels[i] != l).count();
    assert!(wrong <= 1, "{wrong} of 15 misclassified");
}

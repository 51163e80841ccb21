use std::path::Path;

use ordlens::depth::estimate_medoid;
use ordlens::oracle::{gen_gaussian_mixture, mix_seed, sample_statements, GaussianComponent, NoiseModel, SamplingMode};
use ordlens::proxgraph::{accumulate_pair_stats, estimate_krng};
use ordlens::statements::{parse_statements, write_statements};
use ordlens::StatementKind;
use ordlens_cli::sweep::{rep_seed, run_sweep, statement_seed, task_dataset, draw, CountSpec, ExperimentSpec, Task};
use ordlens_cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["ordlens"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn statements_file(dir: &Path, n: usize, count: usize, e: f64, seed: u64) -> String {
    let cloud = gen_gaussian_mixture(&[GaussianComponent::isotropic(1.0, vec![0.0, 0.0])], n, seed).unwrap();
    let s = sample_statements(
        &cloud.oracle,
        count,
        SamplingMode::WithoutReplacement,
        NoiseModel::new(e, seed).unwrap(),
        StatementKind::MostCentral,
    )
    .unwrap()
    .statements;
    let path = p(dir, &format!("s{n}_{count}.csv"));
    write_statements(&s, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn medoid_prints_estimated_id() {
    let dir = tempfile::tempdir().unwrap();
    let s = statements_file(dir.path(), 100, 5000, 0.0, 1);
    let (code, out, _) = cli(&["medoid", "--statements", &s, "--n", "100"]);
    assert_eq!(code, EXIT_OK);
    let c = parse_statements(std::io::BufReader::new(std::fs::File::open(&s).unwrap()), 100).unwrap();
    assert_eq!(out.trim(), estimate_medoid(&c).unwrap().to_string());
}

#[test]
fn corrected_rng_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let s = statements_file(dir.path(), 150, 60_000, 0.3, 2);
    let (code, out, _) = cli(&["rng", "--statements", &s, "--n", "150", "--k", "20", "--errorprob", "0.3", "--correct"]);
    assert_eq!(code, EXIT_OK);
    let c = parse_statements(std::io::BufReader::new(std::fs::File::open(&s).unwrap()), 150).unwrap();
    let g = estimate_krng(&accumulate_pair_stats(&c).unwrap(), 20, Some(0.3)).unwrap();
    let mut expected = Vec::new();
    g.write_csv(&mut expected).unwrap();
    assert!(g.edge_count() > 0);
    assert_eq!(out.as_bytes(), &expected[..]);
    // without --correct the noisy estimate keeps far fewer edges
    let (_, plain, _) = cli(&["rng", "--statements", &s, "--n", "150", "--k", "20"]);
    assert!(plain.lines().count() < out.lines().count());
}

#[test]
fn sweep_cell_matches_manual_loop() {
    let (code, out, _) = cli(&["sweep", "--task", "medoid", "--counts", "1000,5000", "--errorprob", "0,0.3", "--reps", "4", "--seed", "8", "--n", "50"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "task,method,count,errorprob,reps,mean,min,max");
    assert_eq!(lines.len(), 1 + 4 * 2);
    // cell (5000, 0.3) has index 3
    let mut values = Vec::new();
    for rep in 0..4 {
        let rs = rep_seed(8, rep);
        let cloud = task_dataset(Task::Medoid, 50, rs).unwrap();
        let c = draw(&cloud.oracle, 5000, 0.3, statement_seed(rs, 3), StatementKind::MostCentral).unwrap();
        values.push(ordlens::metrics::relative_error(&cloud.oracle, estimate_medoid(&c).unwrap()).unwrap());
    }
    let mean = values.iter().sum::<f64>() / 4.0;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(lines.contains(&format!("medoid,lens,5000,0.3,4,{mean},{min},{max}").as_str()));

    let mut spec = ExperimentSpec::new(
        Task::Medoid,
        vec![CountSpec::Exact(1000), CountSpec::Exact(5000)],
        vec![0.0, 0.3],
        4,
        8,
    );
    spec.n = Some(50);
    assert_eq!(run_sweep(&spec).unwrap().len(), 8);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let s = statements_file(dir.path(), 40, 4000, 0.0, 3);
    let conf = p(dir.path(), "rng.conf");
    std::fs::write(&conf, format!("statements={s}\nn=40\nk=2\n")).unwrap();
    let (c1, from_config, _) = cli(&["--config", &conf, "rng"]);
    let (_, direct2, _) = cli(&["rng", "--statements", &s, "--n", "40", "--k", "2"]);
    let (c2, overridden, _) = cli(&["--config", &conf, "rng", "--k", "6"]);
    let (_, direct6, _) = cli(&["rng", "--statements", &s, "--n", "40", "--k", "6"]);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(from_config, direct2);
    assert_eq!(overridden, direct6);
    assert_ne!(direct2, direct6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&[]).0, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(cli(&["medoid", "--n", "5"]).0, EXIT_USAGE);
    let (code, out, _) = cli(&["medoid", "--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("--statements"));
    assert_eq!(cli(&["--version"]).0, EXIT_OK);

    let missing = p(dir.path(), "missing.csv");
    let (code, _, err) = cli(&["medoid", "--statements", &missing, "--n", "5"]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("missing.csv"));

    let bad = p(dir.path(), "bad.csv");
    std::fs::write(&bad, "C,0,1,2\nC,0,0,2\n").unwrap();
    let (code, _, err) = cli(&["medoid", "--statements", &bad, "--n", "5"]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("line 2"), "{err}");

    std::fs::write(&bad, "C,0,1,9\n").unwrap();
    assert_eq!(cli(&["medoid", "--statements", &bad, "--n", "5"]).0, EXIT_DATA);

    let odd = p(dir.path(), "odd.csv");
    std::fs::write(&odd, "O,0,1,2\n").unwrap();
    assert_eq!(cli(&["medoid", "--statements", &odd, "--n", "3"]).0, EXIT_DATA);
    assert_eq!(cli(&["medoid", "--statements", &odd, "--n", "3", "--method", "crowd"]).0, EXIT_OK);

    let s = statements_file(dir.path(), 20, 300, 0.0, 4);
    assert_eq!(cli(&["rng", "--statements", &s, "--n", "20", "--k", "2", "--errorprob", "0.7", "--correct"]).0, EXIT_DATA);
    assert_eq!(cli(&["rng", "--statements", &s, "--n", "20", "--k", "2", "--correct"]).0, EXIT_USAGE);
    assert_eq!(cli(&["sweep", "--task", "medoid", "--counts", "100", "--reps", "0"]).0, EXIT_USAGE);
}

#[test]
fn names_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let names = p(dir.path(), "names.csv");
    std::fs::write(&names, "0,left\n1,middle\n2,right\n3,far\n").unwrap();
    let s = p(dir.path(), "named.csv");
    // points on a line at 0, 1, 3, 7: the middle two are the deepest
    std::fs::write(&s, "C,middle,left,right\nC,middle,left,far\nC,right,left,far\nC,right,middle,far\n").unwrap();
    let (code, out, _) = cli(&["medoid", "--statements", &s, "--names", &names]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "middle\n");
    let (_, ranked, _) = cli(&["outliers", "--statements", &s, "--names", &names, "--top", "2"]);
    assert_eq!(ranked, "id,ld\nleft,0\nfar,0\n");
    assert_eq!(cli(&["medoid", "--statements", &s, "--names", &names, "--n", "7"]).0, EXIT_USAGE);
}

#[test]
fn out_flag_and_generate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, out, err) = cli(&[
        "generate", "--dataset", "two-gaussians", "--n", "60", "--separation", "6", "--points-out", &p(d, "pts.csv"),
        "--labels-out", &p(d, "lab.csv"), "--all", "--seed", "5", "--out", &p(d, "s.csv"),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    assert!(err.contains("statements=34220"), "{err}");
    let labels = std::fs::read_to_string(p(d, "lab.csv")).unwrap();
    let train: String = labels.lines().take(45).map(|l| format!("{l}\n")).collect();
    std::fs::write(p(d, "train.csv"), train).unwrap();

    for method in ["feature", "vote"] {
        let pred = p(d, &format!("{method}.csv"));
        let (code, _, _) = cli(&[
            "classify", "--statements", &p(d, "s.csv"), "--n", "60", "--labels", &p(d, "train.csv"), "--method", method,
            "--out", &pred,
        ]);
        assert_eq!(code, EXIT_OK);
        let (code, report, _) = cli(&["eval", "--metric", "zero-one", "--predicted", &pred, "--truth", &p(d, "lab.csv")]);
        assert_eq!(code, EXIT_OK);
        assert!(report.starts_with("zero_one,"));
        let loss: f64 = report.split(',').nth(1).unwrap().parse().unwrap();
        assert!(loss <= 0.2, "{method}: {report}");
    }

    let (code, med, _) = cli(&["medoid", "--statements", &p(d, "s.csv"), "--n", "60"]);
    assert_eq!(code, EXIT_OK);
    let (code, report, _) = cli(&["eval", "--metric", "relative-error", "--estimate", med.trim(), "--points", &p(d, "pts.csv")]);
    assert_eq!(code, EXIT_OK);
    assert!(report.starts_with("relative_error,"));

    let (_, exact, _) = cli(&["rng", "--exact", "--points", &p(d, "pts.csv"), "--k", "3"]);
    let (_, est, _) = cli(&["rng", "--statements", &p(d, "s.csv"), "--n", "60", "--k", "3"]);
    assert_eq!(exact, est, "exhaustive truthful statements recover the exact graph");
}

#[test]
fn generate_seed_derivation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (_, pts, _) = cli(&["generate", "--dataset", "gaussian", "--n", "30", "--seed", "12"]);
    std::fs::write(p(d, "pts.csv"), &pts).unwrap();
    let (code, out, _) = cli(&["generate", "--points", &p(d, "pts.csv"), "--count", "500", "--errorprob", "0.2", "--seed", "12"]);
    assert_eq!(code, EXIT_OK);
    let cloud = gen_gaussian_mixture(&[GaussianComponent::isotropic(1.0, vec![0.0, 0.0])], 30, 12).unwrap();
    let expected = sample_statements(
        &cloud.oracle,
        500,
        SamplingMode::WithoutReplacement,
        NoiseModel::new(0.2, mix_seed(12, 1)).unwrap(),
        StatementKind::MostCentral,
    )
    .unwrap()
    .statements;
    let mut buf = Vec::new();
    write_statements(&expected, &mut buf).unwrap();
    assert_eq!(out.as_bytes(), &buf[..]);
}

#[test]
fn cluster_and_purity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, _, _) = cli(&[
        "generate", "--dataset", "moons", "--n", "50", "--labels-out", &p(d, "lab.csv"), "--all", "--seed", "1", "--out",
        &p(d, "s.csv"),
    ]);
    assert_eq!(code, EXIT_OK);
    let (code, out, _) = cli(&["cluster", "--statements", &p(d, "s.csv"), "--n", "50", "--k", "5", "--sigma", "3", "--affinity-out", &p(d, "w.csv")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 50);
    std::fs::write(p(d, "c.csv"), &out).unwrap();
    let (code, report, _) = cli(&["eval", "--metric", "purity", "--predicted", &p(d, "c.csv"), "--truth", &p(d, "lab.csv")]);
    assert_eq!(code, EXIT_OK);
    let value: f64 = report.split(',').nth(1).unwrap().parse().unwrap();
    assert!((0.5..=1.0).contains(&value));
    assert!(std::fs::read_to_string(p(d, "w.csv")).unwrap().lines().count() > 50);
}

#[test]
fn parallel_env_var_is_honoured() {
    // the flag value overrides the environment; both give identical output
    let (_, a, _) = cli(&["--parallel", "3", "sweep", "--task", "rng", "--counts", "2000", "--reps", "2", "--n", "25", "--k", "2"]);
    let (_, b, _) = cli(&["--parallel", "1", "sweep", "--task", "rng", "--counts", "2000", "--reps", "2", "--n", "25", "--k", "2"]);
    assert_eq!(a, b);
    let bin = env!("CARGO_BIN_EXE_ordlens");
    let out = std::process::Command::new(bin)
        .env("ORDLENS_PARALLEL", "not-a-number")
        .args(["sweep", "--task", "rng", "--counts", "10", "--reps", "1", "--n", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}

#[test]
fn corrected_rng_error_falls_with_more_statements() {
    let mut spec = ExperimentSpec::new(
        Task::Rng,
        vec![CountSpec::Exact(2_000), CountSpec::Exact(10_000), CountSpec::Exact(40_000), CountSpec::All],
        vec![0.2],
        6,
        21,
    );
    spec.n = Some(60);
    spec.k = 4;
    let rows = run_sweep(&spec).unwrap();
    let corrected: Vec<f64> = rows.iter().filter(|r| r.method == "corrected").map(|r| r.mean).collect();
    assert_eq!(corrected.len(), 4);
    for w in corrected.windows(2) {
        assert!(w[1] <= w[0] + 0.1, "{corrected:?}");
    }
    assert!(corrected[3] < corrected[0]);
}

#[test]
fn outlier_gap_and_graph_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // a tight cluster on the line plus one far point
    let xs = ["0", "0.1", "0.25", "0.3", "0.45", "0.5", "20"];
    std::fs::write(p(d, "pts.csv"), xs.iter().map(|x| format!("{x}\n")).collect::<String>()).unwrap();
    let (_, s, _) = cli(&["generate", "--points", &p(d, "pts.csv"), "--all", "--seed", "0"]);
    std::fs::write(p(d, "s.csv"), &s).unwrap();
    let (code, out, err) = cli(&["outliers", "--statements", &p(d, "s.csv"), "--n", "7", "--gap"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 8);
    // both line endpoints have depth 0, ties go to the smaller id
    assert_eq!(out.lines().take(3).collect::<Vec<_>>(), ["id,ld", "0,0", "6,0"]);
    assert!(err.contains("largest_gap_after="), "{err}");

    let (code, diag, _) = cli(&["rng", "--statements", &p(d, "s.csv"), "--n", "7", "--k", "1", "--diagnostics"]);
    assert_eq!(code, EXIT_OK);
    assert!(diag.starts_with("n=7\nedges="));
    assert!(diag.contains("components=1\n"));
}

use std::fs;
use std::path::{Path, PathBuf};

use rhgnn_cli::formats::{read_checkpoint, read_graph, read_matrix, read_splits};
use rhgnn_cli::{run_args, Outcome};
use rhgnn_core::hetgraph::decompose;
use rhgnn_core::training::relation_importance;

fn run(args: &[&str]) -> Outcome {
    let mut v = vec!["rhgnn"];
    v.extend_from_slice(args);
    run_args(v).unwrap_or_else(|e| panic!("{args:?}: {e}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    run(&[
        "gen-synth",
        "--out",
        s(&out),
        "--node-types",
        "M:30:6,D:10:4,A:20:4",
        "--relations",
        "M-D:M:D:30,M-A:M:A:60",
        "--labeled",
        "M",
        "--seed",
        seed,
    ]);
    out
}

const SMALL: [&str; 14] = [
    "--heads", "2", "--input-dim", "8", "--hidden-dim", "8", "--relation-dim", "4", "--fuse-dim", "8", "--epochs", "6",
    "--patience", "6",
];

fn classify(dir: &Path, data: &Path, name: &str, extra: &[&str]) -> Outcome {
    let out = dir.join(name);
    let (g, l, sp) = (data.join("graph.txt"), data.join("labels.txt"), data.join("splits.txt"));
    let mut a = vec!["train-classify", "--out", s(&out), "--graph", s(&g), "--labels", s(&l), "--splits", s(&sp)];
    a.extend_from_slice(&SMALL);
    a.extend_from_slice(extra);
    run(&a)
}

fn files_equal(a: &Path, b: &Path) {
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{} vs {}", a.display(), b.display());
}

#[test]
fn gen_synth_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a", "5");
    let b = synth(dir.path(), "b", "5");
    let c = synth(dir.path(), "c", "6");
    for f in ["graph.txt", "graph.txt.M.feat", "graph.txt.A.feat", "labels.txt", "splits.txt"] {
        files_equal(&a.join(f), &b.join(f));
    }
    assert_ne!(fs::read(a.join("graph.txt")).unwrap(), fs::read(c.join("graph.txt")).unwrap());
    let g = read_graph(&a.join("graph.txt")).unwrap();
    assert_eq!(g.node_counts(), &[30, 10, 20]);
    assert_eq!(g.num_edges(), 90);
    let sp = read_splits(&a.join("splits.txt")).unwrap();
    assert_eq!((sp.train.len(), sp.valid.len(), sp.test.len()), (6, 3, 21));
}

#[test]
fn failed_runs_leave_no_directory_and_existing_output_is_protected() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "data", "1");
    let out = dir.path().join("bad");
    let err = run_args([
        "rhgnn",
        "train-linkpred",
        "--out",
        s(&out),
        "--graph",
        s(&data.join("graph.txt")),
        "--relation",
        "NOPE",
    ])
    .unwrap_err();
    assert!(err.to_string().contains("NOPE"), "{err}");
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "staging directory left behind");

    let again = run_args([
        "rhgnn", "gen-synth", "--out", s(&data), "--node-types", "M:5:2", "--relations", "M-M:M:M:3", "--labeled", "M",
    ]);
    assert!(again.unwrap_err().to_string().contains("exists"));
    run(&[
        "gen-synth", "--out", s(&data), "--node-types", "M:5:2", "--relations", "M-M:M:M:3", "--labeled", "M",
        "--overwrite",
    ]);
    assert_eq!(read_graph(&data.join("graph.txt")).unwrap().node_counts(), &[5]);
}

#[test]
fn classify_run_directory_reproduces_from_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "data", "2");
    let first = classify(dir.path(), &data, "r1", &["--seed", "4", "--runs", "2", "--threads", "2"]);
    for f in ["config.resolved", "report.log", "metrics.txt", "checkpoint.bin"] {
        assert!(first.out_dir.join(f).exists(), "{f}");
    }
    let report = fs::read_to_string(first.out_dir.join("report.log")).unwrap();
    assert!(report.starts_with("epoch 1 train_loss "), "{report}");
    let names: Vec<&str> = first.metrics.iter().map(|m| m.0.as_str()).collect();
    assert!(names.contains(&"test_accuracy") && names.contains(&"run1_test_accuracy"));

    let resolved = first.out_dir.join("config.resolved");
    let second = run(&["train-classify", "--config", s(&resolved), "--out", s(&dir.path().join("r2")), "--threads", "1"]);
    assert_eq!(first.metrics, second.metrics);
    files_equal(&first.out_dir.join("metrics.txt"), &second.out_dir.join("metrics.txt"));
    files_equal(&first.out_dir.join("checkpoint.bin"), &second.out_dir.join("checkpoint.bin"));
    files_equal(&first.out_dir.join("report.log"), &second.out_dir.join("report.log"));

    let other = classify(dir.path(), &data, "r3", &["--seed", "5"]);
    assert_ne!(
        fs::read(first.out_dir.join("checkpoint.bin")).unwrap(),
        fs::read(other.out_dir.join("checkpoint.bin")).unwrap()
    );
}

#[test]
fn ablation_flags_reach_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "data", "3");
    let out = classify(dir.path(), &data, "abl", &["--no-cmp", "--no-rrf", "--full-batch"]);
    let g = read_graph(&data.join("graph.txt")).unwrap();
    let m = read_checkpoint(&out.out_dir.join("checkpoint.bin"), &g).unwrap();
    let a = m.model.config().ablation;
    assert!(a.no_cmp && a.no_rrf && !a.no_wrc);
    let text = fs::read_to_string(out.out_dir.join("config.resolved")).unwrap();
    assert!(text.contains("no_cmp = true\n") && text.contains("full_batch = true\n"), "{text}");
}

#[test]
fn embed_writes_one_row_per_node_and_matching_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "data", "4");
    let trained = classify(dir.path(), &data, "train", &[]);
    let gpath = data.join("graph.txt");
    let cp = trained.out_dir.join("checkpoint.bin");
    let out = run(&["embed", "--out", s(&dir.path().join("emb")), "--graph", s(&gpath), "--checkpoint", s(&cp), "--node-type", "M"]);
    let emb = read_matrix(&out.out_dir.join("embeddings.bin")).unwrap();
    assert_eq!(emb.shape(), (30, 8));

    let gamma = fs::read_to_string(out.out_dir.join("gamma.txt")).unwrap();
    let parsed: Vec<(String, f64)> = gamma
        .lines()
        .map(|l| {
            let (n, v) = l.split_once(' ').unwrap();
            (n.to_string(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(parsed.iter().map(|p| p.0.as_str()).collect::<Vec<_>>(), ["M-D^-1", "M-A^-1"]);
    assert!((parsed.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);

    let g = read_graph(&gpath).unwrap();
    let m = read_checkpoint(&cp, &g).unwrap();
    let rset = decompose(&g);
    let nodes: Vec<usize> = (0..30).collect();
    let again = relation_importance(&m.model, &m.store, &g, &rset, 0, &nodes).unwrap();
    for ((_, w), (_, v)) in again.iter().zip(&parsed) {
        assert_eq!(w, v);
    }

    let missing = run_args([
        "rhgnn", "embed", "--out", s(&dir.path().join("e2")), "--graph", s(&gpath), "--checkpoint",
        s(&dir.path().join("none.bin")), "--node-type", "M",
    ]);
    assert!(missing.unwrap_err().to_string().contains("checkpoint"));
}

#[test]
fn cluster_scores_are_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "data", "5");
    let trained = classify(dir.path(), &data, "train", &[]);
    let cp = trained.out_dir.join("checkpoint.bin");
    let go = |name: &str, threads: &str| {
        run(&[
            "cluster", "--out", s(&dir.path().join(name)), "--graph", s(&data.join("graph.txt")), "--labels",
            s(&data.join("labels.txt")), "--checkpoint", s(&cp), "--reps", "4", "--threads", threads,
        ])
    };
    let a = go("c1", "1");
    let b = go("c4", "4");
    assert_eq!(a.metrics, b.metrics);
    let nmi = a.metrics.iter().find(|m| m.0 == "nmi").unwrap().1;
    assert!((0.0..=1.0).contains(&nmi));
}

#[test]
fn linkpred_reports_disjoint_splits() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "data", "6");
    let out = dir.path().join("lp");
    let mut a = vec!["train-linkpred", "--out", s(&out), "--graph", "", "--relation", "M-A", "--full-batch"];
    let g = data.join("graph.txt");
    a[4] = s(&g);
    a.extend_from_slice(&SMALL);
    let r = run(&a);
    let get = |k: &str| r.metrics.iter().find(|m| m.0 == k).unwrap().1;
    assert_eq!(get("train_edges") + get("valid_edges") + get("test_edges"), 60.0);
    assert_eq!(get("test_edges"), 12.0);
    assert!(get("test_rmse") > 0.0 && get("test_rmse") < 1.0);
}

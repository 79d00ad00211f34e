use std::fs;

use rhgnn_cli::config::{parse_config_text, Command, RunConfig, KEYS};
use rhgnn_cli::CliError;

fn args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["rhgnn"];
    v.extend_from_slice(extra);
    v
}

fn error_text(r: Result<RunConfig, CliError>) -> String {
    r.expect_err("should fail").to_string()
}

#[test]
fn empty_file_with_required_keys_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("empty.conf");
    fs::write(&cfg_path, "").unwrap();
    let graph = dir.path().join("g.txt");
    fs::write(&graph, "").unwrap();
    let cfg = RunConfig::from_args(args(&[
        "train-linkpred",
        "--config",
        cfg_path.to_str().unwrap(),
        "--graph",
        graph.to_str().unwrap(),
        "--relation",
        "M-A",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]))
    .unwrap();
    let m = cfg.model_config();
    assert_eq!((m.num_layers, m.heads, m.relation_dim), (2, 8, 64));
    assert_eq!(m.dropout, 0.6);
    let t = cfg.train_config().unwrap();
    assert_eq!((t.lr, t.epochs, t.negatives_train, t.negatives_eval), (0.001, 200, 5, 1));
    assert_eq!(t.batch_size, None);
    assert!(cfg.to_text().contains("edge_split = 0.7,0.1\n"));
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    fs::write(&graph, "").unwrap();
    let cfg_path = dir.path().join("run.conf");
    fs::write(&cfg_path, "lr = 0.5\nepochs = 7  # short\nno_cmp = true\n").unwrap();
    let cfg = RunConfig::from_args(args(&[
        "train-linkpred",
        "--config",
        cfg_path.to_str().unwrap(),
        "--lr",
        "0.25",
        "--no-wrc",
        "--graph",
        graph.to_str().unwrap(),
        "--relation",
        "R",
        "--out",
        "o",
    ]))
    .unwrap();
    assert_eq!(cfg.f64("lr"), 0.25);
    assert_eq!(cfg.usize("epochs"), 7);
    assert!(cfg.bool("no_cmp") && cfg.bool("no_wrc") && !cfg.bool("no_rrf"));
}

#[test]
fn unknown_and_foreign_keys_are_rejected_by_name() {
    let p = std::path::Path::new("x.conf");
    let e = parse_config_text("lr = 0.1\nlearning_rate = 0.1\n", Command::TrainClassify, p).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("learning_rate") && msg.contains("x.conf:2"), "{msg}");
    let msg = parse_config_text("homophily = 0.3", Command::TrainClassify, p).unwrap_err().to_string();
    assert!(msg.contains("homophily") && msg.contains("train-classify"), "{msg}");
    let msg = parse_config_text("epochs = many", Command::TrainClassify, p).unwrap_err().to_string();
    assert!(msg.contains("epochs"), "{msg}");
    assert!(parse_config_text("epochs 3", Command::TrainClassify, p).is_err());
    assert!(parse_config_text("seed = 1\nseed = 2", Command::GenSynth, p).is_err());
    let msg = error_text(RunConfig::from_args(args(&["cluster", "--lr", "0.1"])));
    assert!(msg.contains("--lr"), "{msg}");
}

#[test]
fn missing_required_keys_and_files_are_reported() {
    let msg = error_text(RunConfig::from_args(args(&["gen-synth", "--out", "o", "--labeled", "M", "--relations", "a:b:c:1"])));
    assert!(msg.contains("node_types"), "{msg}");
    let msg = error_text(RunConfig::from_args(args(&["embed", "--out", "o", "--graph", "/nonexistent/g.txt"])));
    assert!(msg.contains("graph") && msg.contains("does not exist"), "{msg}");
}

#[test]
fn full_batch_conflicts_with_sampling_keys() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    fs::write(&graph, "").unwrap();
    let g = graph.to_str().unwrap();
    let base = ["train-linkpred", "--graph", g, "--relation", "R", "--out", "o", "--full-batch"];
    let cfg = RunConfig::from_args(args(&[&base[..], &["--fanouts", "5, 5"]].concat())).unwrap();
    assert!(cfg.train_config().is_err());
    let cfg = RunConfig::from_args(args(&base)).unwrap();
    assert_eq!(cfg.train_config().unwrap().fanouts, None);
    let cfg = RunConfig::from_args(args(&["train-linkpred", "--graph", g, "--relation", "R", "--out", "o", "--fanouts", "5, 3"])).unwrap();
    assert_eq!(cfg.train_config().unwrap().fanouts, Some(vec![5, 3]));
}

#[test]
fn resolved_text_parses_back_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    fs::write(&graph, "").unwrap();
    for command in Command::ALL {
        let mut a = vec!["rhgnn".to_string(), command.name().to_string(), "--out".into(), "o".into()];
        let mut push = |k: &str, v: &str| {
            a.push(format!("--{}", k.replace('_', "-")));
            a.push(v.to_string());
        };
        for spec in KEYS.iter().filter(|s| s.required) {
            let v = match spec.name {
                "graph" | "labels" | "splits" | "checkpoint" => graph.to_str().unwrap(),
                _ => "X",
            };
            if rhgnn_cli::config::keys_for(command).any(|k| k.name == spec.name) && spec.name != "out" {
                push(spec.name, v);
            }
        }
        let cfg = RunConfig::from_args(&a).unwrap();
        let text = cfg.to_text();
        let file = parse_config_text(&text, command, std::path::Path::new("resolved")).unwrap();
        let again = RunConfig::resolve(command, file, Default::default()).unwrap();
        assert_eq!(again, cfg, "{}", command.name());
    }
}

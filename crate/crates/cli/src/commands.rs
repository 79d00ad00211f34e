use std::fmt::Write as _;
use std::path::PathBuf;

use rhgnn_core::eval::{clustering_run, mean_score};
use rhgnn_core::hetgraph::{decompose, HeteroGraph};
use rhgnn_core::layers::Model;
use rhgnn_core::seeded_rng;
use rhgnn_core::tensor::ParamStore;
use rhgnn_core::training::{
    embed_nodes, evaluate_classification, evaluate_link_prediction, relation_importance, split_edges,
    train_classification, train_link_prediction, ClassificationTask, TrainReport,
};

use crate::config::{Command, RunConfig};
use crate::error::{config_err, Result};
use crate::formats::{
    read_checkpoint, read_graph, read_labels, read_splits, write_checkpoint, write_graph, write_labels, write_matrix,
    write_splits, Labels,
};
use crate::parallel::parallel_map;
use crate::run::RunDir;
use crate::synth::{generate, parse_node_types, parse_relations, parse_split, SyntheticSpec};

/// Named scalar results, in output order.
pub type Metrics = Vec<(String, f64)>;

/// Result of a successful command.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub metrics: Metrics,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let dir = RunDir::create(&cfg.path("out"), cfg.bool("overwrite"))?;
    dir.write("config.resolved", cfg.to_text())?;
    let metrics = match cfg.command {
        Command::GenSynth => gen_synth(cfg, &dir)?,
        Command::TrainClassify => train_classify(cfg, &dir)?,
        Command::TrainLinkpred => train_linkpred(cfg, &dir)?,
        Command::Cluster => cluster(cfg, &dir)?,
        Command::Embed => embed(cfg, &dir)?,
    };
    dir.write("metrics.txt", metrics_text(&metrics))?;
    Ok(Outcome {
        out_dir: dir.commit()?,
        metrics,
    })
}

pub fn metrics_text(m: &Metrics) -> String {
    m.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
}

fn report_text(report: &TrainReport) -> String {
    let mut s = String::new();
    for r in &report.records {
        writeln!(
            s,
            "epoch {} train_loss {} val_metric {} val_loss {} lr {}",
            r.epoch, r.train_loss, r.val_metric, r.val_loss, r.lr
        )
        .expect("write to string");
    }
    writeln!(
        s,
        "best_epoch {} best_val_metric {} stopped_epoch {}",
        report.best_epoch, report.best_val_metric, report.stopped_epoch
    )
    .expect("write to string");
    s
}

fn synthetic_spec(cfg: &RunConfig) -> Result<SyntheticSpec> {
    Ok(SyntheticSpec {
        node_types: parse_node_types(cfg.text("node_types"))?,
        relations: parse_relations(cfg.text("relations"))?,
        classes: cfg.usize("classes"),
        signal: cfg.f64("signal"),
        homophily: cfg.f64("homophily"),
        labeled: cfg.text("labeled").to_string(),
        split: parse_split(cfg.text("split"))?,
    })
}

fn gen_synth(cfg: &RunConfig, dir: &RunDir) -> Result<Metrics> {
    let spec = synthetic_spec(cfg)?;
    let data = generate(&spec, &mut seeded_rng(cfg.u64("seed")))?;
    write_graph(&dir.file("graph.txt"), &data.graph)?;
    write_labels(&dir.file("labels.txt"), &spec.labeled, &data.labels)?;
    write_splits(&dir.file("splits.txt"), &data.splits)?;
    Ok(vec![
        ("nodes".into(), data.graph.node_counts().iter().sum::<usize>() as f64),
        ("edges".into(), data.graph.num_edges() as f64),
        ("labeled".into(), data.labels.len() as f64),
    ])
}

fn classification_task(graph: &HeteroGraph, labels: Labels, cfg: &RunConfig) -> Result<ClassificationTask> {
    let splits = read_splits(&cfg.path("splits"))?;
    let task = ClassificationTask {
        target_type: graph.schema().type_index(&labels.node_type)?,
        num_classes: labels.num_classes,
        labels: labels.labels,
        train: splits.train,
        valid: splits.valid,
        test: splits.test,
    };
    task.validate(graph)?;
    Ok(task)
}

struct ClassifyRun {
    model: Model,
    store: ParamStore,
    report: TrainReport,
    metrics: [f64; 5],
}

const CLASSIFY_METRICS: [&str; 5] = ["train_accuracy", "valid_accuracy", "test_accuracy", "test_macro_f1", "test_loss"];

fn train_classify(cfg: &RunConfig, dir: &RunDir) -> Result<Metrics> {
    let graph = read_graph(&cfg.path("graph"))?;
    let task = classification_task(&graph, read_labels(&cfg.path("labels"), &graph)?, cfg)?;
    let rset = decompose(&graph);
    let model_cfg = cfg.model_config();
    let train_cfg = cfg.train_config()?;
    let runs = cfg.usize("runs");
    if runs == 0 {
        return Err(config_err("runs must be at least 1"));
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| train_cfg.seed + i).collect();
    let results = parallel_map(&seeds, cfg.threads(), |&seed| -> Result<ClassifyRun> {
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        let model = Model::new(graph.schema(), &rset, Some(task.num_classes), model_cfg.clone(), &mut store, &mut rng)?;
        let report = train_classification(&model, &mut store, &graph, &rset, &task, &train_cfg, &mut rng)?;
        let eval = |nodes: &[usize]| evaluate_classification(&model, &store, &graph, &rset, &task, nodes, train_cfg.batch_size);
        let (tr, va, te) = (eval(&task.train)?, eval(&task.valid)?, eval(&task.test)?);
        Ok(ClassifyRun {
            metrics: [tr.accuracy, va.accuracy, te.accuracy, te.macro_f1, te.loss],
            model,
            store,
            report,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let first = &results[0];
    write_checkpoint(&dir.file("checkpoint.bin"), &first.model, &first.store, Some(task.num_classes))?;
    dir.write("report.log", report_text(&first.report))?;

    let mut metrics: Metrics = CLASSIFY_METRICS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mean = results.iter().map(|r| r.metrics[j]).sum::<f64>() / runs as f64;
            (name.to_string(), mean)
        })
        .collect();
    metrics.push(("best_epoch".into(), first.report.best_epoch as f64));
    metrics.push(("stopped_epoch".into(), first.report.stopped_epoch as f64));
    if runs > 1 {
        for (i, r) in results.iter().enumerate() {
            metrics.push((format!("run{i}_test_accuracy"), r.metrics[2]));
        }
    }
    Ok(metrics)
}

fn train_linkpred(cfg: &RunConfig, dir: &RunDir) -> Result<Metrics> {
    let graph = read_graph(&cfg.path("graph"))?;
    let relation = graph.schema().relation_index(cfg.text("relation"))?;
    let fractions: Vec<f64> = cfg.list("edge_split").expect("has a default");
    let [ft, fv] = fractions[..] else {
        return Err(config_err("edge_split needs exactly two fractions (train, valid)"));
    };
    let train_cfg = cfg.train_config()?;
    let mut rng = seeded_rng(train_cfg.seed);
    let (task, mp) = split_edges(&graph, relation, (ft, fv), train_cfg.negatives_eval, &mut rng)?;
    let rset = decompose(&mp);
    let mut store = ParamStore::new();
    let model = Model::new(mp.schema(), &rset, None, cfg.model_config(), &mut store, &mut rng)?;
    let untrained = evaluate_link_prediction(&model, &store, &mp, &rset, &task, &task.test, &task.test_negatives)?;
    let report = train_link_prediction(&model, &mut store, &mp, &rset, &task, &train_cfg, &mut rng)?;
    let test = evaluate_link_prediction(&model, &store, &mp, &rset, &task, &task.test, &task.test_negatives)?;
    write_checkpoint(&dir.file("checkpoint.bin"), &model, &store, None)?;
    dir.write("report.log", report_text(&report))?;
    Ok(vec![
        ("test_rmse".into(), test.metrics.rmse),
        ("test_mae".into(), test.metrics.mae),
        ("test_loss".into(), test.loss),
        ("valid_rmse".into(), report.best_val_metric),
        ("untrained_test_rmse".into(), untrained.metrics.rmse),
        ("untrained_test_mae".into(), untrained.metrics.mae),
        ("best_epoch".into(), report.best_epoch as f64),
        ("stopped_epoch".into(), report.stopped_epoch as f64),
        ("train_edges".into(), task.train.len() as f64),
        ("valid_edges".into(), task.valid.len() as f64),
        ("test_edges".into(), task.test.len() as f64),
        ("negatives_exhausted".into(), report.negatives_exhausted as f64),
    ])
}

fn cluster(cfg: &RunConfig, _dir: &RunDir) -> Result<Metrics> {
    let graph = read_graph(&cfg.path("graph"))?;
    let labels = read_labels(&cfg.path("labels"), &graph)?;
    let loaded = read_checkpoint(&cfg.path("checkpoint"), &graph)?;
    let rset = decompose(&graph);
    let t = graph.schema().type_index(&labels.node_type)?;
    let (nodes, truth): (Vec<usize>, Vec<usize>) =
        labels.labels.iter().enumerate().filter_map(|(v, l)| l.map(|c| (v, c))).unzip();
    let emb = embed_nodes(&loaded.model, &loaded.store, &graph, &rset, t, &nodes, None)?;
    let k = cfg.opt_usize("k").unwrap_or(labels.num_classes);
    let reps = cfg.usize("reps");
    let restarts = cfg.usize("restarts");
    if reps == 0 {
        return Err(config_err("reps must be at least 1"));
    }
    let seeds: Vec<u64> = (0..reps as u64).map(|i| cfg.u64("seed") + i).collect();
    let scores = parallel_map(&seeds, cfg.threads(), |&s| clustering_run(&emb, &truth, k, restarts, &mut seeded_rng(s)))
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mean = mean_score(&scores);
    Ok(vec![
        ("nmi".into(), mean.nmi),
        ("ari".into(), mean.ari),
        ("k".into(), k as f64),
        ("nodes".into(), nodes.len() as f64),
    ])
}

fn embed(cfg: &RunConfig, dir: &RunDir) -> Result<Metrics> {
    let graph = read_graph(&cfg.path("graph"))?;
    let loaded = read_checkpoint(&cfg.path("checkpoint"), &graph)?;
    let rset = decompose(&graph);
    let t = graph.schema().type_index(cfg.text("node_type"))?;
    let nodes: Vec<usize> = (0..graph.node_count(t)).collect();
    let emb = embed_nodes(&loaded.model, &loaded.store, &graph, &rset, t, &nodes, None)?;
    write_matrix(&dir.file("embeddings.bin"), &emb)?;
    let gamma = relation_importance(&loaded.model, &loaded.store, &graph, &rset, t, &nodes)?;
    let mut text = String::new();
    for &(r, w) in &gamma {
        writeln!(text, "{} {w}", rset.relation(r).name).expect("write to string");
    }
    dir.write("gamma.txt", text)?;
    Ok(vec![
        ("rows".into(), emb.rows() as f64),
        ("cols".into(), emb.cols() as f64),
        ("gamma_sum".into(), gamma.iter().map(|g| g.1).sum()),
    ])
}

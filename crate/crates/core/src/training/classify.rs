use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::embed::{embed_nodes, seed_rows, training_chain};
use super::{Adam, EarlyStopping, EpochRecord, TrainConfig, TrainReport};
use crate::error::invalid;
use crate::eval::{accuracy, macro_f1};
use crate::hetgraph::{HeteroGraph, RelationGraphSet};
use crate::layers::{Mode, Model};
use crate::tensor::{Matrix, ParamStore, Tape};
use crate::training::cosine_lr;
use crate::Result;

/// Node classification on one node type.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationTask {
    pub target_type: usize,
    pub num_classes: usize,
    /// Indexed by node id of the target type.
    pub labels: Vec<Option<usize>>,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl ClassificationTask {
    pub fn validate(&self, graph: &HeteroGraph) -> Result<()> {
        if self.target_type >= graph.schema().num_types() {
            return Err(invalid("target type out of range"));
        }
        if self.labels.len() != graph.node_count(self.target_type) {
            return Err(invalid(format!(
                "{} labels for {} target nodes",
                self.labels.len(),
                graph.node_count(self.target_type)
            )));
        }
        for (name, split) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            if split.is_empty() {
                return Err(invalid(format!("{name} split is empty")));
            }
            self.labels_of(split)?;
        }
        Ok(())
    }

    /// Labels of `nodes`; every node must be labeled.
    pub fn labels_of(&self, nodes: &[usize]) -> Result<Vec<usize>> {
        nodes
            .iter()
            .map(|&v| match self.labels.get(v) {
                Some(Some(c)) if *c < self.num_classes => Ok(*c),
                Some(Some(c)) => Err(invalid(format!("label {c} of node {v} exceeds class count"))),
                _ => Err(invalid(format!("node {v} has no label"))),
            })
            .collect()
    }
}

/// Eval-mode classification quality on one node set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassificationEval {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub loss: f64,
}

/// Eval-mode logits of `nodes`.
pub fn classification_logits(
    model: &Model,
    store: &ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    target_type: usize,
    nodes: &[usize],
    batch: Option<usize>,
) -> Result<Matrix> {
    let emb = embed_nodes(model, store, graph, rset, target_type, nodes, batch)?;
    let mut tape = Tape::new();
    let x = tape.input(emb);
    let logits = model.classify(&mut tape, store, x)?;
    Ok(tape.value(logits).clone())
}

pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn evaluate_classification(
    model: &Model,
    store: &ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    task: &ClassificationTask,
    nodes: &[usize],
    batch: Option<usize>,
) -> Result<ClassificationEval> {
    let truth = task.labels_of(nodes)?;
    let logits = classification_logits(model, store, graph, rset, task.target_type, nodes, batch)?;
    let pred = argmax_rows(&logits);
    let mut tape = Tape::new();
    let x = tape.input(logits);
    let loss = tape.cross_entropy(x, truth.clone().into())?;
    Ok(ClassificationEval {
        accuracy: accuracy(&pred, &truth)?,
        macro_f1: macro_f1(&pred, &truth, task.num_classes)?,
        loss: tape.value(loss).item()?,
    })
}

/// Trains with Adam under a per-epoch cosine schedule, validates on accuracy after
/// every epoch and stops after `patience` epochs without improvement. Leaves the
/// best-on-validation parameters in `store`.
pub fn train_classification<R: Rng + ?Sized>(
    model: &Model,
    store: &mut ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    task: &ClassificationTask,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    cfg.validate(model.config().num_layers)?;
    task.validate(graph)?;
    let t = task.target_type;
    let mut adam = Adam::new(store);
    let mut stopper = EarlyStopping::new(cfg.patience, true);
    let mut best_values = store.snapshot();
    let mut records = Vec::new();
    let mut order = task.train.clone();
    let batch = cfg.batch_size.unwrap_or(order.len()).max(1);

    for epoch in 1..=cfg.epochs {
        let lr = cosine_lr(epoch - 1, cfg.epochs, cfg.lr, cfg.lr_min);
        if batch < order.len() {
            order.shuffle(rng);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let mut seeds = vec![Vec::new(); rset.num_types()];
            seeds[t] = chunk.to_vec();
            let chain = training_chain(rset, &seeds, cfg, model.config().num_layers, rng)?;
            let rows = seed_rows(&chain, t, rset.node_count(t));
            let idx: Arc<[usize]> = chunk.iter().map(|&v| rows[v]).collect();
            let labels: Arc<[usize]> = task.labels_of(chunk)?.into();
            let mut tape = Tape::new();
            let fwd = model.forward(&mut tape, store, graph, &chain, Mode::Train, rng, false)?;
            let emb = tape.row_gather(fwd.embeddings[t].expect("seeded type"), idx)?;
            let logits = model.classify(&mut tape, store, emb)?;
            let loss = tape.cross_entropy(logits, labels)?;
            loss_sum += tape.value(loss).item()? * chunk.len() as f64;
            store.zero_grads();
            tape.backward(loss, store)?;
            adam.step(store, lr);
        }
        store.zero_grads();
        let val = evaluate_classification(model, store, graph, rset, task, &task.valid, cfg.batch_size)?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_metric: val.accuracy,
            val_loss: val.loss,
            lr,
        });
        let decision = stopper.observe(epoch, val.accuracy, val.loss);
        if decision.improved {
            best_values = store.snapshot();
        }
        if decision.stop {
            break;
        }
    }
    store.restore(&best_values);
    let (best_val_metric, best_epoch) = stopper.best().expect("at least one epoch");
    Ok(TrainReport {
        stopped_epoch: records.len(),
        records,
        best_epoch,
        best_val_metric,
        negatives_exhausted: 0,
    })
}

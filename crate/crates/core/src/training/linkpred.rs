use alloc::collections::BTreeSet;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::embed::{seed_rows, training_chain};
use super::{cosine_lr, linkpred_loss, sample_negatives, Adam, EarlyStopping, EpochRecord, TrainConfig, TrainReport};
use crate::error::invalid;
use crate::eval::{link_metrics, LinkMetrics};
use crate::hetgraph::{full_blocks, HeteroGraph, RelationGraphSet, SampledBlockChain};
use crate::layers::{Mode, Model};
use crate::math::{exp, ln, round};
use crate::tensor::{ParamStore, Tape, Var};
use crate::Result;

/// Link prediction on one base relation. Edges are `(src, dst)` node ids of the
/// relation's source and destination types.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredictionTask {
    pub relation: usize,
    pub src_type: usize,
    pub dst_type: usize,
    pub num_dst: usize,
    pub train: Vec<(usize, usize)>,
    pub valid: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
    /// Fixed evaluation negatives.
    pub valid_negatives: Vec<(usize, usize)>,
    pub test_negatives: Vec<(usize, usize)>,
    /// Every edge of the relation in the full graph; negatives avoid these.
    pub observed: BTreeSet<(usize, usize)>,
    pub negatives_exhausted: usize,
}

/// Shuffles the edges of base relation `relation` into train/valid/test parts by
/// `fractions` (train, valid; test takes the rest), draws `negatives_eval` fixed
/// negatives per evaluation edge, and returns the task with the message-passing
/// graph, which lacks the valid and test edges.
pub fn split_edges<R: Rng + ?Sized>(
    graph: &HeteroGraph,
    relation: usize,
    fractions: (f64, f64),
    negatives_eval: usize,
    rng: &mut R,
) -> Result<(LinkPredictionTask, HeteroGraph)> {
    let schema = graph.schema();
    let def = schema
        .relations()
        .get(relation)
        .ok_or_else(|| invalid(format!("relation {relation} out of range")))?;
    let (ft, fv) = fractions;
    if !(ft > 0.0 && fv > 0.0 && ft + fv < 1.0) {
        return Err(invalid(format!("edge split fractions ({ft}, {fv}) leave no room for all three parts")));
    }
    let mut edges = graph.edges(relation).to_vec();
    let n = edges.len();
    let n_train = round(ft * n as f64) as usize;
    let n_valid = round(fv * n as f64) as usize;
    if n_train == 0 || n_valid == 0 || n_train + n_valid >= n {
        return Err(invalid(format!("relation {} has too few edges ({n}) to split", def.name)));
    }
    edges.shuffle(rng);
    let observed: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let num_dst = graph.node_count(def.dst_type);
    let valid = edges[n_train..n_train + n_valid].to_vec();
    let test = edges[n_train + n_valid..].to_vec();
    let vneg = sample_negatives(&valid, &observed, num_dst, negatives_eval, rng)?;
    let tneg = sample_negatives(&test, &observed, num_dst, negatives_eval, rng)?;
    let held_out: Vec<(usize, usize)> = valid.iter().chain(&test).copied().collect();
    let mp = graph.without_edges(relation, &held_out);
    Ok((
        LinkPredictionTask {
            relation,
            src_type: def.src_type,
            dst_type: def.dst_type,
            num_dst,
            train: edges[..n_train].to_vec(),
            valid,
            test,
            valid_negatives: vneg.pairs,
            test_negatives: tneg.pairs,
            observed,
            negatives_exhausted: vneg.exhausted + tneg.exhausted,
        },
        mp,
    ))
}

struct PairEmbeddings {
    src: Var,
    dst: Var,
}

fn pair_seeds(rset: &RelationGraphSet, task: &LinkPredictionTask, groups: &[&[(usize, usize)]]) -> Vec<Vec<usize>> {
    let mut seeds = vec![Vec::new(); rset.num_types()];
    for pairs in groups {
        for &(s, d) in *pairs {
            seeds[task.src_type].push(s);
            seeds[task.dst_type].push(d);
        }
    }
    seeds
}

fn gather_pairs(
    tape: &mut Tape,
    embeddings: &[Option<Var>],
    chain: &SampledBlockChain,
    rset: &RelationGraphSet,
    task: &LinkPredictionTask,
    pairs: &[(usize, usize)],
) -> Result<PairEmbeddings> {
    let src_rows = seed_rows(chain, task.src_type, rset.node_count(task.src_type));
    let dst_rows = seed_rows(chain, task.dst_type, rset.node_count(task.dst_type));
    let si: Arc<[usize]> = pairs.iter().map(|p| src_rows[p.0]).collect();
    let di: Arc<[usize]> = pairs.iter().map(|p| dst_rows[p.1]).collect();
    Ok(PairEmbeddings {
        src: tape.row_gather(embeddings[task.src_type].expect("seeded type"), si)?,
        dst: tape.row_gather(embeddings[task.dst_type].expect("seeded type"), di)?,
    })
}

/// Eval-mode dot-product scores (before the sigmoid) of `pairs`.
pub fn link_scores_of(
    model: &Model,
    store: &ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    task: &LinkPredictionTask,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let seeds = pair_seeds(rset, task, &[pairs]);
    let chain = full_blocks(rset, &seeds, model.config().num_layers)?;
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, store, graph, &chain, Mode::Eval, &mut crate::seeded_rng(0), false)?;
    let e = gather_pairs(&mut tape, &fwd.embeddings, &chain, rset, task, pairs)?;
    let s = tape.row_dot(e.src, e.dst)?;
    Ok(tape.value(s).as_slice().to_vec())
}

/// Eval-mode link prediction quality: probabilities `sigmoid(score)` against 1 for
/// positives and 0 for negatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkEval {
    pub metrics: LinkMetrics,
    pub loss: f64,
}

fn softplus_neg(s: f64) -> f64 {
    // -log sigmoid(s) for s in [-30, 30].
    ln(1.0 + exp(-s))
}

pub fn evaluate_link_prediction(
    model: &Model,
    store: &ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    task: &LinkPredictionTask,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
) -> Result<LinkEval> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(invalid("link evaluation needs positive and negative pairs"));
    }
    let all: Vec<(usize, usize)> = positives.iter().chain(negatives).copied().collect();
    let scores = link_scores_of(model, store, graph, rset, task, &all)?;
    let np = positives.len();
    let probs: Vec<f64> = scores.iter().map(|&s| crate::math::sigmoid(s)).collect();
    let labels: Vec<f64> = (0..all.len()).map(|i| if i < np { 1.0 } else { 0.0 }).collect();
    let clamp = |s: f64| s.clamp(-30.0, 30.0);
    let lp = scores[..np].iter().map(|&s| softplus_neg(clamp(s))).sum::<f64>() / np as f64;
    let ln_ = scores[np..].iter().map(|&s| softplus_neg(-clamp(s))).sum::<f64>() / (all.len() - np) as f64;
    Ok(LinkEval {
        metrics: link_metrics(&probs, &labels)?,
        loss: lp + ln_,
    })
}

/// Trains on `task.train` with `negatives_train` fresh negatives per positive each
/// step; validates on RMSE against the fixed validation negatives. `graph` is the
/// message-passing graph. Leaves the best-on-validation parameters in `store`.
pub fn train_link_prediction<R: Rng + ?Sized>(
    model: &Model,
    store: &mut ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    task: &LinkPredictionTask,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    cfg.validate(model.config().num_layers)?;
    if task.train.is_empty() || task.valid.is_empty() {
        return Err(invalid("link prediction needs train and valid edges"));
    }
    let mut adam = Adam::new(store);
    let mut stopper = EarlyStopping::new(cfg.patience, false);
    let mut best_values = store.snapshot();
    let mut records = Vec::new();
    let mut exhausted = task.negatives_exhausted;
    let mut order = task.train.clone();
    let batch = cfg.batch_size.unwrap_or(order.len()).max(1);

    for epoch in 1..=cfg.epochs {
        let lr = cosine_lr(epoch - 1, cfg.epochs, cfg.lr, cfg.lr_min);
        if batch < order.len() {
            order.shuffle(rng);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let neg = sample_negatives(chunk, &task.observed, task.num_dst, cfg.negatives_train, rng)?;
            exhausted += neg.exhausted;
            let seeds = pair_seeds(rset, task, &[chunk, &neg.pairs]);
            let chain = training_chain(rset, &seeds, cfg, model.config().num_layers, rng)?;
            let mut tape = Tape::new();
            let fwd = model.forward(&mut tape, store, graph, &chain, Mode::Train, rng, false)?;
            let p = gather_pairs(&mut tape, &fwd.embeddings, &chain, rset, task, chunk)?;
            let n = gather_pairs(&mut tape, &fwd.embeddings, &chain, rset, task, &neg.pairs)?;
            let loss = linkpred_loss(&mut tape, p.src, p.dst, n.src, n.dst)?;
            loss_sum += tape.value(loss).item()? * chunk.len() as f64;
            store.zero_grads();
            tape.backward(loss, store)?;
            adam.step(store, lr);
        }
        store.zero_grads();
        let val = evaluate_link_prediction(model, store, graph, rset, task, &task.valid, &task.valid_negatives)?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_metric: val.metrics.rmse,
            val_loss: val.loss,
            lr,
        });
        let decision = stopper.observe(epoch, val.metrics.rmse, val.loss);
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
        negatives_exhausted: exhausted,
    })
}

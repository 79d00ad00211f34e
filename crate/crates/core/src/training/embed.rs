use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::TrainConfig;
use crate::error::invalid;
use crate::hetgraph::{full_blocks, sample_blocks, HeteroGraph, RelationGraphSet, SampledBlockChain};
use crate::layers::{Mode, Model};
use crate::tensor::{Matrix, ParamStore, Tape};
use crate::Result;

/// Block chain for one training step: sampled when fanouts are configured, full
/// neighborhoods otherwise.
pub fn training_chain<R: Rng + ?Sized>(
    rset: &RelationGraphSet,
    seeds: &[Vec<usize>],
    cfg: &TrainConfig,
    num_layers: usize,
    rng: &mut R,
) -> Result<SampledBlockChain> {
    match &cfg.fanouts {
        Some(f) => sample_blocks(rset, seeds, f, rng),
        None => full_blocks(rset, seeds, num_layers),
    }
}

/// Row of every seed in `chain.seeds[t]`, indexed by node id (`usize::MAX` when
/// absent).
pub(crate) fn seed_rows(chain: &SampledBlockChain, node_type: usize, count: usize) -> Vec<usize> {
    let mut rows = vec![usize::MAX; count];
    for (i, &v) in chain.seeds[node_type].iter().enumerate() {
        rows[v] = i;
    }
    rows
}

/// Fused eval-mode embeddings of `nodes` (of `node_type`), over full neighborhoods,
/// `batch` nodes per forward pass.
pub fn embed_nodes(
    model: &Model,
    store: &ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    node_type: usize,
    nodes: &[usize],
    batch: Option<usize>,
) -> Result<Matrix> {
    let nt = rset.num_types();
    if node_type >= nt {
        return Err(invalid("node type out of range"));
    }
    let width = model.config().fuse_dim;
    let mut out = Matrix::zeros(nodes.len(), width);
    let step = batch.unwrap_or(nodes.len()).max(1);
    let mut rng = crate::seeded_rng(0);
    for (c, chunk) in nodes.chunks(step).enumerate() {
        let mut seeds = vec![Vec::new(); nt];
        seeds[node_type] = chunk.to_vec();
        let chain = full_blocks(rset, &seeds, model.config().num_layers)?;
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, store, graph, &chain, Mode::Eval, &mut rng, false)?;
        let emb = tape.value(fwd.embeddings[node_type].expect("seeded type"));
        let rows = seed_rows(&chain, node_type, rset.node_count(node_type));
        for (i, &v) in chunk.iter().enumerate() {
            out.row_mut(c * step + i).copy_from_slice(emb.row(rows[v]));
        }
    }
    Ok(out)
}

/// Mean fusing weight of each relation targeting `node_type`, averaged over
/// `nodes` and heads. Pairs are `(directed relation id, mean weight)`; the weights
/// sum to 1. Empty under mean-pooling fusion.
pub fn relation_importance(
    model: &Model,
    store: &ParamStore,
    graph: &HeteroGraph,
    rset: &RelationGraphSet,
    node_type: usize,
    nodes: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if nodes.is_empty() {
        return Err(invalid("relation importance needs at least one node"));
    }
    let mut seeds = vec![Vec::new(); rset.num_types()];
    seeds[node_type] = nodes.to_vec();
    let chain = full_blocks(rset, &seeds, model.config().num_layers)?;
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, store, graph, &chain, Mode::Eval, &mut crate::seeded_rng(0), true)?;
    let trace = fwd.trace.expect("trace requested");
    let rels = model.relations_of(node_type);
    let mut sums = vec![0.0; rels.len()];
    let mut count = 0usize;
    for g in trace.gamma.iter().filter(|g| g.node_type == node_type) {
        for i in 0..g.weights.rows() {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += g.weights[(i, j)];
            }
        }
        count += g.weights.rows();
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    Ok(rels.iter().zip(sums).map(|(&r, s)| (r, s / count as f64)).collect())
}

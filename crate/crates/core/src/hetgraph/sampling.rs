use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::RelationGraphSet;
use crate::{Error, Result};

/// Sampled neighborhoods of one directed relation inside a [`Block`].
///
/// Destination `v` (a local index into the block's destination nodes of the
/// relation's destination type) draws from `sources[offsets[v]..offsets[v + 1]]`,
/// which are local indices into the block's source nodes of the relation's source
/// type. `targets[e]` repeats the destination of edge `e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockEdges {
    pub offsets: Arc<[usize]>,
    pub sources: Arc<[usize]>,
    pub targets: Arc<[usize]>,
}

impl BlockEdges {
    pub fn num_edges(&self) -> usize {
        self.sources.len()
    }

    pub fn sources_of(&self, v: usize) -> &[usize] {
        &self.sources[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// One layer of message passing: a bipartite graph from source nodes to destination
/// nodes for every directed relation.
///
/// Per node type, the destination nodes are the first `num_dst[t]` entries of
/// `src_nodes[t]`, so every destination also has a source-side representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub src_nodes: Vec<Vec<usize>>,
    pub num_dst: Vec<usize>,
    pub edges: Vec<BlockEdges>,
}

impl Block {
    pub fn dst_nodes(&self, node_type: usize) -> &[usize] {
        &self.src_nodes[node_type][..self.num_dst[node_type]]
    }
}

/// Blocks for an `L`-layer model, input side first: `blocks[0]` consumes raw
/// features and `blocks[L - 1]` produces the seed representations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledBlockChain {
    /// Deduplicated seeds per node type, in first-seen order.
    pub seeds: Vec<Vec<usize>>,
    pub blocks: Vec<Block>,
}

impl SampledBlockChain {
    pub fn num_layers(&self) -> usize {
        self.blocks.len()
    }

    /// Nodes whose raw features the first layer needs, per type.
    pub fn input_nodes(&self) -> &[Vec<usize>] {
        &self.blocks[0].src_nodes
    }
}

/// Samples up to `fanouts[l]` neighbors per (destination, directed relation) for
/// layer `l + 1`, uniformly without replacement. The layer adjacent to the seeds
/// uses the last fanout.
pub fn sample_blocks<R: Rng + ?Sized>(
    rset: &RelationGraphSet,
    seeds: &[Vec<usize>],
    fanouts: &[usize],
    rng: &mut R,
) -> Result<SampledBlockChain> {
    let limits: Vec<Option<usize>> = fanouts.iter().map(|&f| Some(f)).collect();
    build_chain(rset, seeds, &limits, Some(rng))
}

/// Like [`sample_blocks`] but keeps every neighbor.
pub fn full_blocks(
    rset: &RelationGraphSet,
    seeds: &[Vec<usize>],
    num_layers: usize,
) -> Result<SampledBlockChain> {
    build_chain::<rand_chacha::ChaCha8Rng>(rset, seeds, &vec![None; num_layers], None)
}

fn build_chain<R: Rng + ?Sized>(
    rset: &RelationGraphSet,
    seeds: &[Vec<usize>],
    limits: &[Option<usize>],
    mut rng: Option<&mut R>,
) -> Result<SampledBlockChain> {
    let nt = rset.num_types();
    if seeds.len() != nt {
        return Err(crate::error::invalid(alloc::format!(
            "seeds given for {} node types, graph has {nt}",
            seeds.len()
        )));
    }
    if limits.is_empty() {
        return Err(crate::error::invalid("at least one layer is required"));
    }
    let mut local: Vec<Vec<usize>> = (0..nt).map(|t| vec![usize::MAX; rset.node_count(t)]).collect();

    let mut dst: Vec<Vec<usize>> = vec![Vec::new(); nt];
    for (t, list) in seeds.iter().enumerate() {
        for &v in list {
            if v >= rset.node_count(t) {
                return Err(Error::IndexOutOfRange {
                    what: "seed",
                    index: v,
                    bound: rset.node_count(t),
                });
            }
            if local[t][v] == usize::MAX {
                local[t][v] = dst[t].len();
                dst[t].push(v);
            }
        }
    }
    let seeds = dst.clone();

    let mut blocks: Vec<Block> = Vec::with_capacity(limits.len());
    for &limit in limits.iter().rev() {
        // `local` maps exactly the current destination nodes here.
        let num_dst: Vec<usize> = dst.iter().map(Vec::len).collect();
        let mut src = dst.clone();
        let mut edges = Vec::with_capacity(rset.num_relations());
        let mut picked: Vec<usize> = Vec::new();
        for rel in rset.relations() {
            let csr = rset.adjacency(rel.id);
            let (st, dt) = (rel.src_type, rel.dst_type);
            let mut offsets = Vec::with_capacity(num_dst[dt] + 1);
            let mut sources = Vec::new();
            let mut targets = Vec::new();
            offsets.push(0);
            for (lv, &v) in dst[dt].iter().enumerate() {
                let neigh = csr.neighbors(v);
                picked.clear();
                match (limit, rng.as_deref_mut()) {
                    (Some(k), Some(r)) if neigh.len() > k => {
                        picked.extend(rand::seq::index::sample(r, neigh.len(), k).into_iter());
                        picked.sort_unstable();
                    }
                    _ => picked.extend(0..neigh.len()),
                }
                for &p in &picked {
                    let u = neigh[p];
                    let slot = &mut local[st][u];
                    if *slot == usize::MAX {
                        *slot = src[st].len();
                        src[st].push(u);
                    }
                    sources.push(*slot);
                    targets.push(lv);
                }
                offsets.push(sources.len());
            }
            edges.push(BlockEdges {
                offsets: offsets.into(),
                sources: sources.into(),
                targets: targets.into(),
            });
        }
        blocks.push(Block {
            src_nodes: src.clone(),
            num_dst,
            edges,
        });
        dst = src;
    }
    for (t, list) in dst.iter().enumerate() {
        for &v in list {
            local[t][v] = usize::MAX;
        }
    }
    blocks.reverse();
    Ok(SampledBlockChain { seeds, blocks })
}

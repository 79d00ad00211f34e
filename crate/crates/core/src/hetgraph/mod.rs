//! Typed heterogeneous graphs, relation-specific decomposition and neighbor
//! sampling.

mod graph;
mod relations;
mod sampling;

pub use graph::{build_graph, HeteroGraph, NodeTypeDef, RelationDef, Schema};
pub use relations::{decompose, Csr, DirectedRelation, RelationGraphSet};
pub use sampling::{full_blocks, sample_blocks, Block, BlockEdges, SampledBlockChain};

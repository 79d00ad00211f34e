use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::HeteroGraph;
use crate::{Error, Result};

/// A relation with a direction: either a base relation or its inverse.
///
/// Directed ids are `2 * base` for the forward relation and `2 * base + 1` for the
/// inverse, so inverses are interleaved with their base in schema order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedRelation {
    pub id: usize,
    pub base: usize,
    pub inverse: bool,
    pub name: String,
    pub src_type: usize,
    pub dst_type: usize,
}

impl DirectedRelation {
    /// Id of the same base relation in the opposite direction.
    pub fn reverse_id(&self) -> usize {
        self.id ^ 1
    }
}

/// Compressed adjacency indexed by destination node: the sources of destination
/// `v` are `neighbors[offsets[v]..offsets[v + 1]]`, in edge-list order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<usize>,
}

impl Csr {
    fn from_pairs(num_dst: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Csr {
        let mut offsets = vec![0usize; num_dst + 1];
        for (_, d) in pairs.clone() {
            offsets[d + 1] += 1;
        }
        for i in 0..num_dst {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0usize; offsets[num_dst]];
        for (s, d) in pairs {
            neighbors[cursor[d]] = s;
            cursor[d] += 1;
        }
        Csr { offsets, neighbors }
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn num_dst(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len()
    }
}

/// The graph decomposed into relation-specific graphs, each holding a base relation
/// and its inverse.
#[derive(Clone, Debug)]
pub struct RelationGraphSet {
    node_counts: Vec<usize>,
    relations: Vec<DirectedRelation>,
    adjacency: Vec<Csr>,
    by_dst_type: Vec<Vec<usize>>,
}

/// Splits `g` into one relation-specific graph per base relation, adding the inverse
/// of every relation.
pub fn decompose(g: &HeteroGraph) -> RelationGraphSet {
    let schema = g.schema();
    let mut relations = Vec::with_capacity(2 * schema.relations().len());
    let mut adjacency = Vec::with_capacity(2 * schema.relations().len());
    for (base, rel) in schema.relations().iter().enumerate() {
        let edges = g.edges(base);
        relations.push(DirectedRelation {
            id: 2 * base,
            base,
            inverse: false,
            name: rel.name.clone(),
            src_type: rel.src_type,
            dst_type: rel.dst_type,
        });
        adjacency.push(Csr::from_pairs(
            g.node_count(rel.dst_type),
            edges.iter().copied(),
        ));
        relations.push(DirectedRelation {
            id: 2 * base + 1,
            base,
            inverse: true,
            name: format!("{}^-1", rel.name),
            src_type: rel.dst_type,
            dst_type: rel.src_type,
        });
        adjacency.push(Csr::from_pairs(
            g.node_count(rel.src_type),
            edges.iter().map(|&(s, d)| (d, s)),
        ));
    }
    let mut by_dst_type = vec![Vec::new(); schema.num_types()];
    for r in &relations {
        by_dst_type[r.dst_type].push(r.id);
    }
    RelationGraphSet {
        node_counts: g.node_counts().to_vec(),
        relations,
        adjacency,
        by_dst_type,
    }
}

impl RelationGraphSet {
    pub fn relations(&self) -> &[DirectedRelation] {
        &self.relations
    }

    pub fn relation(&self, id: usize) -> &DirectedRelation {
        &self.relations[id]
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_types(&self) -> usize {
        self.node_counts.len()
    }

    pub fn node_count(&self, node_type: usize) -> usize {
        self.node_counts[node_type]
    }

    pub fn adjacency(&self, relation: usize) -> &Csr {
        &self.adjacency[relation]
    }

    /// Directed relations whose destination is `node_type`, in id order.
    pub fn relations_of(&self, node_type: usize) -> Result<&[usize]> {
        self.by_dst_type
            .get(node_type)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                what: "node type",
                index: node_type,
                bound: self.node_counts.len(),
            })
    }

    /// Edge list of a base relation rebuilt from its forward adjacency (grouped by
    /// destination).
    pub fn flatten(&self, base: usize) -> Vec<(usize, usize)> {
        let csr = &self.adjacency[2 * base];
        let mut out = Vec::with_capacity(csr.num_edges());
        for v in 0..csr.num_dst() {
            out.extend(csr.neighbors(v).iter().map(|&u| (u, v)));
        }
        out
    }
}

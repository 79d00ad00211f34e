use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// A node type and the width of its raw features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeTypeDef {
    pub name: String,
    pub feature_dim: usize,
}

/// A base relation `src_type --name--> dst_type`. Type fields index
/// [`Schema::node_types`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationDef {
    pub name: String,
    pub src_type: usize,
    pub dst_type: usize,
}

/// Node types and base relations of a heterogeneous graph.
///
/// Homogeneous schemas (one type, one relation) are accepted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    node_types: Vec<NodeTypeDef>,
    relations: Vec<RelationDef>,
}

impl Schema {
    /// `node_types` are `(name, feature_dim)`; `relations` are
    /// `(name, src_type_name, dst_type_name)`.
    pub fn new<S: AsRef<str>>(node_types: &[(S, usize)], relations: &[(S, S, S)]) -> Result<Self> {
        let mut types: Vec<NodeTypeDef> = Vec::with_capacity(node_types.len());
        for (name, dim) in node_types {
            let name = name.as_ref();
            if types.iter().any(|t| t.name == name) {
                return Err(invalid(format!("duplicate node type `{name}`")));
            }
            types.push(NodeTypeDef {
                name: name.to_owned(),
                feature_dim: *dim,
            });
        }
        let mut schema = Schema {
            node_types: types,
            relations: Vec::with_capacity(relations.len()),
        };
        for (name, src, dst) in relations {
            let name = name.as_ref();
            if schema.relations.iter().any(|r| r.name == name) {
                return Err(invalid(format!("duplicate relation `{name}`")));
            }
            let src_type = schema.type_index(src.as_ref())?;
            let dst_type = schema.type_index(dst.as_ref())?;
            schema.relations.push(RelationDef {
                name: name.to_owned(),
                src_type,
                dst_type,
            });
        }
        Ok(schema)
    }

    pub fn node_types(&self) -> &[NodeTypeDef] {
        &self.node_types
    }

    pub fn relations(&self) -> &[RelationDef] {
        &self.relations
    }

    pub fn num_types(&self) -> usize {
        self.node_types.len()
    }

    pub fn type_index(&self, name: &str) -> Result<usize> {
        self.node_types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownName {
                kind: "node type",
                name: name.to_owned(),
            })
    }

    pub fn relation_index(&self, name: &str) -> Result<usize> {
        self.relations
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownName {
                kind: "relation",
                name: name.to_owned(),
            })
    }
}

/// Immutable typed graph: per-type node counts and feature matrices, and per base
/// relation an edge list of `(src_id, dst_id)` with dense 0-based ids per type.
#[derive(Clone, Debug)]
pub struct HeteroGraph {
    schema: Schema,
    node_counts: Vec<usize>,
    features: Vec<Matrix>,
    edges: Vec<Vec<(usize, usize)>>,
}

/// Validates and assembles a [`HeteroGraph`].
///
/// `features[t]` must be `node_counts[t] x feature_dim(t)`; `edges[r]` lists the
/// edges of base relation `r`.
pub fn build_graph(
    schema: Schema,
    node_counts: Vec<usize>,
    features: Vec<Matrix>,
    edges: Vec<Vec<(usize, usize)>>,
) -> Result<HeteroGraph> {
    let nt = schema.num_types();
    if node_counts.len() != nt || features.len() != nt {
        return Err(invalid(format!(
            "expected {nt} node counts and feature matrices, got {} and {}",
            node_counts.len(),
            features.len()
        )));
    }
    for (t, def) in schema.node_types().iter().enumerate() {
        if features[t].shape() != (node_counts[t], def.feature_dim) {
            return Err(Error::Shape {
                op: "node features",
                lhs: (node_counts[t], def.feature_dim),
                rhs: features[t].shape(),
            });
        }
    }
    if edges.len() != schema.relations().len() {
        return Err(invalid(format!(
            "expected edge lists for {} relations, got {}",
            schema.relations().len(),
            edges.len()
        )));
    }
    for (rel, list) in schema.relations().iter().zip(&edges) {
        let (ns, nd) = (node_counts[rel.src_type], node_counts[rel.dst_type]);
        for &(s, d) in list {
            if s >= ns {
                return Err(Error::IndexOutOfRange {
                    what: "edge source",
                    index: s,
                    bound: ns,
                });
            }
            if d >= nd {
                return Err(Error::IndexOutOfRange {
                    what: "edge destination",
                    index: d,
                    bound: nd,
                });
            }
        }
    }
    Ok(HeteroGraph {
        schema,
        node_counts,
        features,
        edges,
    })
}

impl HeteroGraph {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self, node_type: usize) -> usize {
        self.node_counts[node_type]
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    pub fn features(&self, node_type: usize) -> &Matrix {
        &self.features[node_type]
    }

    pub fn edges(&self, relation: usize) -> &[(usize, usize)] {
        &self.edges[relation]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Copy of the graph with some edges of one base relation removed (used to hold
    /// out link-prediction targets from message passing). Each listed pair removes
    /// one occurrence.
    pub fn without_edges(&self, relation: usize, remove: &[(usize, usize)]) -> HeteroGraph {
        let mut pending: Vec<(usize, usize)> = remove.to_vec();
        pending.sort_unstable();
        let mut kept = Vec::with_capacity(self.edges[relation].len());
        for &e in &self.edges[relation] {
            match pending.binary_search(&e) {
                Ok(pos) => {
                    pending.remove(pos);
                }
                Err(_) => kept.push(e),
            }
        }
        let mut edges = self.edges.clone();
        edges[relation] = kept;
        HeteroGraph {
            schema: self.schema.clone(),
            node_counts: self.node_counts.clone(),
            features: self.features.clone(),
            edges,
        }
    }
}

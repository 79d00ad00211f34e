//! Synthetic labeled heterogeneous graphs with tunable class signal and homophily.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rhgnn_core::hetgraph::{build_graph, HeteroGraph, Schema};
use rhgnn_core::tensor::Matrix;

use crate::error::{config_err, Result};
use crate::formats::Splits;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeTypeSpec {
    pub name: String,
    pub count: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationSpec {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub edges: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub node_types: Vec<NodeTypeSpec>,
    pub relations: Vec<RelationSpec>,
    pub classes: usize,
    /// Fraction of feature variance carried by the class centroid.
    pub signal: f64,
    /// Probability that an edge's destination shares the source's class.
    pub homophily: f64,
    /// Node type whose classes are written out as labels.
    pub labeled: String,
    /// train:valid:test weights for the labeled nodes.
    pub split: [f64; 3],
}

fn parts<const N: usize>(item: &str, what: &str) -> Result<[String; N]> {
    let v: Vec<String> = item.split(':').map(|s| s.trim().to_string()).collect();
    v.try_into()
        .map_err(|_| config_err(format!("{what} `{item}`: expected {N} `:`-separated fields")))
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| config_err(format!("bad {what} `{s}`")))
}

/// Parses `M:200:32,D:100:32`.
pub fn parse_node_types(s: &str) -> Result<Vec<NodeTypeSpec>> {
    s.split(',')
        .map(|item| {
            let [name, count, dim] = parts(item, "node type")?;
            Ok(NodeTypeSpec {
                count: number(&count, "node count")?,
                dim: number(&dim, "feature dim")?,
                name,
            })
        })
        .collect()
}

/// Parses `M-D:M:D:200,M-A:M:A:600`.
pub fn parse_relations(s: &str) -> Result<Vec<RelationSpec>> {
    s.split(',')
        .map(|item| {
            let [name, src, dst, edges] = parts(item, "relation")?;
            Ok(RelationSpec {
                edges: number(&edges, "edge count")?,
                name,
                src,
                dst,
            })
        })
        .collect()
}

/// Parses `2:1:7`.
pub fn parse_split(s: &str) -> Result<[f64; 3]> {
    let [a, b, c] = parts(s, "split")?;
    let w = [number(&a, "split weight")?, number(&b, "split weight")?, number(&c, "split weight")?];
    if w.iter().any(|x: &f64| !(*x > 0.0)) {
        return Err(config_err(format!("split `{s}`: weights must be positive")));
    }
    Ok(w)
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.node_types.is_empty() {
            return Err(config_err("at least one node type is required"));
        }
        for t in &self.node_types {
            if t.count == 0 || t.dim == 0 {
                return Err(config_err(format!("node type {}: count and dim must be positive", t.name)));
            }
        }
        let index = |name: &str| self.node_types.iter().position(|t| t.name == name);
        for r in &self.relations {
            let (Some(s), Some(d)) = (index(&r.src), index(&r.dst)) else {
                return Err(config_err(format!("relation {}: unknown endpoint type", r.name)));
            };
            let capacity = self.node_types[s].count * self.node_types[d].count;
            if r.edges == 0 || r.edges > capacity / 2 {
                return Err(config_err(format!(
                    "relation {}: edge count must be in [1, {}]",
                    r.name,
                    capacity / 2
                )));
            }
        }
        if self.classes == 0 {
            return Err(config_err("classes must be positive"));
        }
        for (name, x) in [("signal", self.signal), ("homophily", self.homophily)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(config_err(format!("{name} {x} not in [0, 1]")));
            }
        }
        match index(&self.labeled) {
            Some(t) if self.node_types[t].count >= 3 => Ok(()),
            Some(_) => Err(config_err("the labeled type needs at least 3 nodes")),
            None => Err(config_err(format!("labeled type `{}` is not declared", self.labeled))),
        }
    }
}

/// A generated dataset: the graph, labels of the labeled type and its splits.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub graph: HeteroGraph,
    pub labels: Vec<Option<usize>>,
    pub splits: Splits,
}

/// Every node of every type gets a class, balanced and shuffled. Features are
/// `sqrt(signal) * centroid + sqrt(1 - signal) * noise` with per-type, per-class
/// standard normal centroids. Edges pick a uniform source, then a destination of
/// the same class with probability `homophily` and a uniform one otherwise;
/// duplicates are redrawn.
pub fn generate<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<SyntheticData> {
    spec.validate()?;
    let c = spec.classes;
    let mut classes = Vec::new();
    let mut by_class: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut features = Vec::new();
    let (a, b) = (spec.signal.sqrt(), (1.0 - spec.signal).sqrt());
    for t in &spec.node_types {
        let mut cls: Vec<usize> = (0..t.count).map(|i| i % c).collect();
        cls.shuffle(rng);
        let centroids: Vec<f64> = (0..c * t.dim).map(|_| StandardNormal.sample(rng)).collect();
        let mut x = Matrix::zeros(t.count, t.dim);
        for (v, &k) in cls.iter().enumerate() {
            for (j, out) in x.row_mut(v).iter_mut().enumerate() {
                let noise: f64 = StandardNormal.sample(rng);
                *out = a * centroids[k * t.dim + j] + b * noise;
            }
        }
        let mut groups = vec![Vec::new(); c];
        for (v, &k) in cls.iter().enumerate() {
            groups[k].push(v);
        }
        classes.push(cls);
        by_class.push(groups);
        features.push(x);
    }

    let index = |name: &str| spec.node_types.iter().position(|t| t.name == name).expect("validated");
    let mut edges = Vec::new();
    for r in &spec.relations {
        let (s, d) = (index(&r.src), index(&r.dst));
        let mut seen = BTreeSet::new();
        let mut list = Vec::with_capacity(r.edges);
        let mut attempts = 0usize;
        while list.len() < r.edges {
            attempts += 1;
            if attempts > 100 * r.edges {
                return Err(config_err(format!("relation {}: could not place {} distinct edges", r.name, r.edges)));
            }
            let u = rng.random_range(0..spec.node_types[s].count);
            let pool = &by_class[d][classes[s][u]];
            let v = if !pool.is_empty() && rng.random_bool(spec.homophily) {
                pool[rng.random_range(0..pool.len())]
            } else {
                rng.random_range(0..spec.node_types[d].count)
            };
            if seen.insert((u, v)) {
                list.push((u, v));
            }
        }
        edges.push(list);
    }

    let types: Vec<(&str, usize)> = spec.node_types.iter().map(|t| (t.name.as_str(), t.dim)).collect();
    let rels: Vec<(&str, &str, &str)> = spec
        .relations
        .iter()
        .map(|r| (r.name.as_str(), r.src.as_str(), r.dst.as_str()))
        .collect();
    let schema = Schema::new(&types, &rels)?;
    let counts = spec.node_types.iter().map(|t| t.count).collect();
    let graph = build_graph(schema, counts, features, edges)?;

    let lt = index(&spec.labeled);
    let n = spec.node_types[lt].count;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let total: f64 = spec.split.iter().sum();
    let n_train = ((spec.split[0] / total * n as f64).round() as usize).clamp(1, n - 2);
    let n_valid = ((spec.split[1] / total * n as f64).round() as usize).clamp(1, n - 1 - n_train);
    let splits = Splits {
        train: ids[..n_train].to_vec(),
        valid: ids[n_train..n_train + n_valid].to_vec(),
        test: ids[n_train + n_valid..].to_vec(),
    };
    Ok(SyntheticData {
        graph,
        labels: classes[lt].iter().map(|&k| Some(k)).collect(),
        splits,
    })
}

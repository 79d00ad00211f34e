//! Text graph files, binary matrix sidecars, labels, splits and checkpoints.
//!
//! Graph file (`#` starts a comment):
//!
//! ```text
//! nodetype <name> <count> <feature_dim>
//! relation <name> <src_type> <dst_type>
//! edge <relation> <src_id> <dst_id>
//! ```
//!
//! Features of type `T` live next to the graph in `<graph path>.T.feat`: two
//! little-endian `u64` (rows, cols) followed by row-major little-endian `f64`.
//! Embedding files use the same layout.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rhgnn_core::hetgraph::{build_graph, HeteroGraph, Schema};
use rhgnn_core::layers::{Ablation, Model, ModelConfig};
use rhgnn_core::tensor::{Matrix, ParamStore};

use crate::error::{io_err, CliError, Result};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, what: &str, s: Option<&str>) -> Result<T> {
    let s = s.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    s.parse()
        .map_err(|_| parse_err(path, line, format!("bad {what} `{s}`")))
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(io_err(path));
    put(&(m.rows() as u64).to_le_bytes())?;
    put(&(m.cols() as u64).to_le_bytes())?;
    for x in m.as_slice() {
        put(&x.to_le_bytes())?;
    }
    w.flush().map_err(io_err(path))
}

fn read_f64s(path: &Path, bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() != count * 8 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("expected {} payload bytes, found {}", count * 8, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 16 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: "truncated matrix header".into(),
        });
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let data = read_f64s(path, &bytes[16..], rows * cols)?;
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn feature_path(graph: &Path, node_type: &str) -> PathBuf {
    let mut s = graph.as_os_str().to_owned();
    s.push(format!(".{node_type}.feat"));
    PathBuf::from(s)
}

/// Reads a graph file and its feature sidecars.
pub fn read_graph(path: &Path) -> Result<HeteroGraph> {
    let text = read_text(path)?;
    let mut types: Vec<(String, usize)> = Vec::new();
    let mut counts = Vec::new();
    let mut rels: Vec<(String, String, String)> = Vec::new();
    let mut rel_index: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<Vec<(usize, usize)>> = Vec::new();
    for (ln, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("nodetype") => {
                let name: String = field(path, ln, "node type name", it.next())?;
                counts.push(field(path, ln, "node count", it.next())?);
                types.push((name, field(path, ln, "feature dim", it.next())?));
            }
            Some("relation") => {
                let name: String = field(path, ln, "relation name", it.next())?;
                let src = field(path, ln, "source type", it.next())?;
                let dst = field(path, ln, "destination type", it.next())?;
                rel_index.insert(name.clone(), rels.len());
                rels.push((name, src, dst));
                edges.push(Vec::new());
            }
            Some("edge") => {
                let name: String = field(path, ln, "relation name", it.next())?;
                let r = *rel_index
                    .get(&name)
                    .ok_or_else(|| parse_err(path, ln, format!("edge of undeclared relation `{name}`")))?;
                let s = field(path, ln, "source id", it.next())?;
                let d = field(path, ln, "destination id", it.next())?;
                edges[r].push((s, d));
            }
            Some(other) => return Err(parse_err(path, ln, format!("unknown record `{other}`"))),
            None => unreachable!("blank lines are skipped"),
        }
        if it.next().is_some() {
            return Err(parse_err(path, ln, "trailing fields"));
        }
    }
    let schema = Schema::new(&types, &rels)?;
    let features = types
        .iter()
        .map(|(name, _)| read_matrix(&feature_path(path, name)))
        .collect::<Result<Vec<_>>>()?;
    Ok(build_graph(schema, counts, features, edges)?)
}

/// Writes a graph file and its feature sidecars.
pub fn write_graph(path: &Path, g: &HeteroGraph) -> Result<()> {
    let schema = g.schema();
    let mut out = String::new();
    for (t, def) in schema.node_types().iter().enumerate() {
        out.push_str(&format!("nodetype {} {} {}\n", def.name, g.node_count(t), def.feature_dim));
    }
    let names: Vec<&str> = schema.node_types().iter().map(|t| t.name.as_str()).collect();
    for r in schema.relations() {
        out.push_str(&format!("relation {} {} {}\n", r.name, names[r.src_type], names[r.dst_type]));
    }
    for (i, r) in schema.relations().iter().enumerate() {
        for &(s, d) in g.edges(i) {
            out.push_str(&format!("edge {} {s} {d}\n", r.name));
        }
    }
    fs::write(path, out).map_err(io_err(path))?;
    for (t, name) in names.iter().enumerate() {
        write_matrix(&feature_path(path, name), g.features(t))?;
    }
    Ok(())
}

/// Labels of one node type, read from `label <type> <id> <class>` lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels {
    pub node_type: String,
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
}

pub fn read_labels(path: &Path, g: &HeteroGraph) -> Result<Labels> {
    let text = read_text(path)?;
    let mut node_type: Option<(String, usize)> = None;
    let mut labels = Vec::new();
    for (ln, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        if it.next() != Some("label") {
            return Err(parse_err(path, ln, "expected `label <type> <id> <class>`"));
        }
        let ty: String = field(path, ln, "node type", it.next())?;
        let id: usize = field(path, ln, "node id", it.next())?;
        let class: usize = field(path, ln, "class", it.next())?;
        let t = match &node_type {
            Some((name, t)) if *name == ty => *t,
            Some((name, _)) => {
                return Err(parse_err(path, ln, format!("labels mix node types `{name}` and `{ty}`")))
            }
            None => {
                let t = g.schema().type_index(&ty)?;
                labels = vec![None; g.node_count(t)];
                node_type = Some((ty.clone(), t));
                t
            }
        };
        if id >= g.node_count(t) {
            return Err(parse_err(path, ln, format!("node id {id} out of range for `{ty}`")));
        }
        if labels[id].replace(class).is_some() {
            return Err(parse_err(path, ln, format!("node {id} labeled twice")));
        }
    }
    let (node_type, _) = node_type.ok_or_else(|| CliError::Format {
        path: path.to_path_buf(),
        message: "no labels".into(),
    })?;
    let num_classes = labels.iter().flatten().max().map_or(0, |c| c + 1);
    Ok(Labels {
        node_type,
        labels,
        num_classes,
    })
}

pub fn write_labels(path: &Path, node_type: &str, labels: &[Option<usize>]) -> Result<()> {
    let mut out = String::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out.push_str(&format!("label {node_type} {i} {c}\n"));
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Node ids of the labeled type, by split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn read_splits(path: &Path) -> Result<Splits> {
    let text = read_text(path)?;
    let mut s = Splits::default();
    for (ln, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        if it.next() != Some("split") {
            return Err(parse_err(path, ln, "expected `split <id> train|valid|test`"));
        }
        let id = field(path, ln, "node id", it.next())?;
        match it.next() {
            Some("train") => s.train.push(id),
            Some("valid") => s.valid.push(id),
            Some("test") => s.test.push(id),
            other => return Err(parse_err(path, ln, format!("bad split name {other:?}"))),
        }
    }
    Ok(s)
}

pub fn write_splits(path: &Path, s: &Splits) -> Result<()> {
    let mut out = String::new();
    for (name, ids) in [("train", &s.train), ("valid", &s.valid), ("test", &s.test)] {
        for id in ids {
            out.push_str(&format!("split {id} {name}\n"));
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

const CHECKPOINT_MAGIC: &str = "RHGNN-CHECKPOINT 1";

fn config_lines(cfg: &ModelConfig) -> Vec<(&'static str, String)> {
    vec![
        ("layers", cfg.num_layers.to_string()),
        ("heads", cfg.heads.to_string()),
        ("input_dim", cfg.input_dim.to_string()),
        ("hidden_dim", cfg.hidden_dim.to_string()),
        ("relation_dim", cfg.relation_dim.to_string()),
        ("fuse_dim", cfg.fuse_dim.to_string()),
        ("dropout", cfg.dropout.to_string()),
        ("negative_slope", cfg.negative_slope.to_string()),
        ("no_wrc", cfg.ablation.no_wrc.to_string()),
        ("no_cmp", cfg.ablation.no_cmp.to_string()),
        ("no_rrf", cfg.ablation.no_rrf.to_string()),
    ]
}

/// Writes header (config echo, directed-relation table, tensor manifest) and the
/// little-endian `f64` payloads of every parameter in registration order.
pub fn write_checkpoint(path: &Path, model: &Model, store: &ParamStore, num_classes: Option<usize>) -> Result<()> {
    let mut header = format!("{CHECKPOINT_MAGIC}\n");
    for (k, v) in config_lines(model.config()) {
        header.push_str(&format!("config {k} {v}\n"));
    }
    match num_classes {
        Some(c) => header.push_str(&format!("classes {c}\n")),
        None => header.push_str("classes none\n"),
    }
    for r in model.relations() {
        header.push_str(&format!("relation {} {} {} {}\n", r.id, r.name, r.src_type, r.dst_type));
    }
    for (_, p) in store.iter() {
        header.push_str(&format!("tensor {} {} {}\n", p.name, p.value.rows(), p.value.cols()));
    }
    header.push_str("end\n");
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(header.as_bytes()).map_err(io_err(path))?;
    for (_, p) in store.iter() {
        for x in p.value.as_slice() {
            w.write_all(&x.to_le_bytes()).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// A model rebuilt from a checkpoint for a given graph.
pub struct LoadedModel {
    pub model: Model,
    pub store: ParamStore,
    pub num_classes: Option<usize>,
}

/// Rebuilds the model for `graph` and loads the stored parameter values. The graph
/// must have the same directed relations and every tensor must match by name and
/// shape.
pub fn read_checkpoint(path: &Path, graph: &HeteroGraph) -> Result<LoadedModel> {
    let mut file = fs::File::open(path).map_err(io_err(path))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(io_err(path))?;
    let end = bytes
        .windows(4)
        .position(|w| w == b"end\n")
        .ok_or_else(|| CliError::Format {
            path: path.to_path_buf(),
            message: "checkpoint header has no `end` line".into(),
        })?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| CliError::Format {
        path: path.to_path_buf(),
        message: "checkpoint header is not UTF-8".into(),
    })?;
    let mut lines = header.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(CHECKPOINT_MAGIC) {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: "not a checkpoint file".into(),
        });
    }
    let mut cfg = ModelConfig::default();
    let mut ablation = Ablation::default();
    let mut num_classes = None;
    let mut relations = Vec::new();
    let mut manifest = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("config") => {
                let key = it.next().unwrap_or("");
                let v = it.next();
                match key {
                    "layers" => cfg.num_layers = field(path, ln, key, v)?,
                    "heads" => cfg.heads = field(path, ln, key, v)?,
                    "input_dim" => cfg.input_dim = field(path, ln, key, v)?,
                    "hidden_dim" => cfg.hidden_dim = field(path, ln, key, v)?,
                    "relation_dim" => cfg.relation_dim = field(path, ln, key, v)?,
                    "fuse_dim" => cfg.fuse_dim = field(path, ln, key, v)?,
                    "dropout" => cfg.dropout = field(path, ln, key, v)?,
                    "negative_slope" => cfg.negative_slope = field(path, ln, key, v)?,
                    "no_wrc" => ablation.no_wrc = field(path, ln, key, v)?,
                    "no_cmp" => ablation.no_cmp = field(path, ln, key, v)?,
                    "no_rrf" => ablation.no_rrf = field(path, ln, key, v)?,
                    _ => return Err(parse_err(path, ln, format!("unknown config key `{key}`"))),
                }
            }
            Some("classes") => {
                num_classes = match it.next() {
                    Some("none") => None,
                    v => Some(field(path, ln, "class count", v)?),
                }
            }
            Some("relation") => {
                let _id: usize = field(path, ln, "relation id", it.next())?;
                relations.push(field::<String>(path, ln, "relation name", it.next())?);
            }
            Some("tensor") => {
                let name: String = field(path, ln, "tensor name", it.next())?;
                let rows: usize = field(path, ln, "rows", it.next())?;
                let cols: usize = field(path, ln, "cols", it.next())?;
                manifest.push((name, rows, cols));
            }
            _ => return Err(parse_err(path, ln, "unknown checkpoint header record")),
        }
    }
    cfg.ablation = ablation;

    let rset = rhgnn_core::hetgraph::decompose(graph);
    let names: Vec<&str> = rset.relations().iter().map(|r| r.name.as_str()).collect();
    if names != relations.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("checkpoint relations {relations:?} do not match the graph's {names:?}"),
        });
    }
    let mut store = ParamStore::new();
    let model = Model::new(graph.schema(), &rset, num_classes, cfg, &mut store, &mut rhgnn_core::seeded_rng(0))?;
    if store.len() != manifest.len() {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: format!("checkpoint has {} tensors, model needs {}", manifest.len(), store.len()),
        });
    }
    let total: usize = manifest.iter().map(|(_, r, c)| r * c).sum();
    let data = read_f64s(path, &bytes[end + 4..], total)?;
    let mut offset = 0;
    let ids: Vec<_> = store.ids().collect();
    for (id, (name, rows, cols)) in ids.into_iter().zip(&manifest) {
        let p = store.get_mut(id);
        if p.name != *name || p.value.shape() != (*rows, *cols) {
            return Err(CliError::Format {
                path: path.to_path_buf(),
                message: format!(
                    "tensor `{name}` {rows}x{cols} does not match model tensor `{}` {:?}",
                    p.name,
                    p.value.shape()
                ),
            });
        }
        let n = rows * cols;
        p.value.as_mut_slice().copy_from_slice(&data[offset..offset + n]);
        offset += n;
    }
    Ok(LoadedModel {
        model,
        store,
        num_classes,
    })
}

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::components::{cross_relation_mp, fuse, relation_conv, relation_update, weighted_residual};
use super::ModelConfig;
use crate::error::invalid;
use crate::hetgraph::{Block, DirectedRelation, HeteroGraph, RelationGraphSet, SampledBlockChain, Schema};
use crate::tensor::{uniform_init, Matrix, ParamId, ParamStore, Tape, Var};
use crate::{Error, Result};

/// Whether dropout is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `x W + b`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Linear {
            weight: store.add(format!("{name}.weight"), uniform_init(fan_in, fan_out, fan_in, rng)),
            bias: store.add(format!("{name}.bias"), Matrix::zeros(1, fan_out)),
        }
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

/// Parameters of one head of one layer. Per-type vectors are indexed by node type,
/// per-relation vectors by directed relation id; entries for types that no relation
/// targets are `None`.
#[derive(Clone, Debug)]
pub struct LayerHeadParams {
    pub w_node: Vec<Option<ParamId>>,
    pub w_align: Vec<Option<ParamId>>,
    pub lambda_raw: Vec<Option<ParamId>>,
    pub w_rel: Vec<ParamId>,
    pub q: Vec<ParamId>,
    pub w_upd: Vec<ParamId>,
    pub b_upd: Vec<ParamId>,
}

/// Fusing parameters of one head, indexed by directed relation. Every head reads the
/// head-concatenated node and relation representations.
#[derive(Clone, Debug)]
pub struct FuseHeadParams {
    pub v: Vec<ParamId>,
    pub e: Vec<ParamId>,
}

/// A stack of relation-aware layers plus the fusing head and an optional linear
/// classifier. All trainable state lives in the [`ParamStore`] the model was
/// registered in.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    relations: Vec<DirectedRelation>,
    relations_by_type: Vec<Vec<usize>>,
    pub projection: Vec<Linear>,
    /// `layers[l][head]`.
    pub layers: Vec<Vec<LayerHeadParams>>,
    pub fusing: Vec<FuseHeadParams>,
    pub classifier: Option<Linear>,
}

/// Attention weights recorded during a forward pass.
#[derive(Clone, Debug, Default)]
pub struct AttentionTrace {
    pub alpha: Vec<AlphaTrace>,
    pub beta: Vec<BetaTrace>,
    pub gamma: Vec<GammaTrace>,
}

/// Neighbor attention of one (layer, head, relation), segmented like the block.
#[derive(Clone, Debug)]
pub struct AlphaTrace {
    pub layer: usize,
    pub head: usize,
    pub relation: usize,
    pub offsets: Arc<[usize]>,
    pub values: Vec<f64>,
}

/// Cross-relation relevance for target relation `relation` of `node_type`: column j
/// of `weights` refers to `relations[j]`.
#[derive(Clone, Debug)]
pub struct BetaTrace {
    pub layer: usize,
    pub head: usize,
    pub node_type: usize,
    pub relation: usize,
    pub relations: Vec<usize>,
    pub weights: Matrix,
}

/// Fusing importance for the seeds of `node_type` in one head.
#[derive(Clone, Debug)]
pub struct GammaTrace {
    pub head: usize,
    pub node_type: usize,
    pub relations: Vec<usize>,
    pub weights: Matrix,
}

/// Result of [`Model::forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Fused representation of `chain.seeds[t]` per node type (`None` when the type
    /// has no seeds).
    pub embeddings: Vec<Option<Var>>,
    /// Final-layer head-concatenated representation per directed relation, rows
    /// aligned with the seeds of the relation's destination type.
    pub node_reps: Vec<Var>,
    /// Final relation representations, `[head][relation]`.
    pub relation_reps: Vec<Vec<Var>>,
    pub trace: Option<AttentionTrace>,
}

/// State between layers: per directed relation, the representation of every
/// source-side node of the relation's destination type in the next block.
struct LayerState {
    node: Vec<Var>,
    rel: Vec<Vec<Var>>,
}

impl Model {
    /// Registers all parameters in `store` and returns the model.
    pub fn new<R: Rng + ?Sized>(
        schema: &Schema,
        rset: &RelationGraphSet,
        num_classes: Option<usize>,
        config: ModelConfig,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Model> {
        config.validate()?;
        if schema.num_types() != rset.num_types() {
            return Err(invalid("schema and relation set disagree on node types"));
        }
        let nt = schema.num_types();
        let nr = rset.num_relations();
        let relations = rset.relations().to_vec();
        let relations_by_type: Vec<Vec<usize>> = (0..nt)
            .map(|t| rset.relations_of(t).map(<[usize]>::to_vec))
            .collect::<Result<_>>()?;
        let type_name = |t: usize| schema.node_types()[t].name.clone();
        let rel_name = |r: usize| relations[r].name.clone();

        let projection = (0..nt)
            .map(|t| {
                let dim = schema.node_types()[t].feature_dim;
                Linear::new(store, &format!("proj.{}", type_name(t)), dim, config.input_dim, rng)
            })
            .collect();

        let dh = config.head_dim();
        let drh = config.head_relation_dim();
        let mut layers = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let d_in = if l == 0 { config.input_dim } else { config.hidden_dim };
            let d_rel_in = if l == 0 { nr } else { drh };
            let mut heads = Vec::with_capacity(config.heads);
            for h in 0..config.heads {
                let prefix = format!("layer{l}.head{h}");
                let mut per_type = |what: &str, rows: usize, cols: usize, fan_in: usize, zero: bool| {
                    (0..nt)
                        .map(|t| {
                            if relations_by_type[t].is_empty() {
                                return None;
                            }
                            let value = if zero {
                                Matrix::zeros(rows, cols)
                            } else {
                                uniform_init(rows, cols, fan_in, rng)
                            };
                            Some(store.add(format!("{prefix}.{what}.{}", type_name(t)), value))
                        })
                        .collect::<Vec<_>>()
                };
                let w_node = per_type("w_node", d_in, dh, d_in, false);
                let w_align = per_type("w_align", d_in, dh, d_in, false);
                let lambda_raw = per_type("lambda", 1, 1, 1, true);
                let mut per_rel = |what: &str, rows: usize, cols: usize, fan_in: usize, zero: bool| {
                    (0..nr)
                        .map(|r| {
                            let value = if zero {
                                Matrix::zeros(rows, cols)
                            } else {
                                uniform_init(rows, cols, fan_in, rng)
                            };
                            store.add(format!("{prefix}.{what}.{}", rel_name(r)), value)
                        })
                        .collect::<Vec<_>>()
                };
                let w_rel = per_rel("w_rel", d_rel_in, 2 * dh, d_rel_in, false);
                let q = per_rel("q", dh, 1, dh, false);
                let w_upd = per_rel("w_upd", d_rel_in, drh, d_rel_in, false);
                let b_upd = per_rel("b_upd", 1, drh, 1, true);
                heads.push(LayerHeadParams {
                    w_node,
                    w_align,
                    lambda_raw,
                    w_rel,
                    q,
                    w_upd,
                    b_upd,
                });
            }
            layers.push(heads);
        }

        let dfh = config.head_fuse_dim();
        let fusing = (0..config.heads)
            .map(|h| FuseHeadParams {
                v: (0..nr)
                    .map(|r| store.add(format!("fuse.head{h}.v.{}", rel_name(r)), uniform_init(config.hidden_dim, dfh, config.hidden_dim, rng)))
                    .collect(),
                e: (0..nr)
                    .map(|r| store.add(format!("fuse.head{h}.e.{}", rel_name(r)), uniform_init(config.relation_dim, dfh, config.relation_dim, rng)))
                    .collect(),
            })
            .collect();

        let classifier = match num_classes {
            Some(0) => return Err(invalid("classifier needs at least one class")),
            Some(c) => Some(Linear::new(store, "classifier", config.fuse_dim, c, rng)),
            None => None,
        };

        Ok(Model {
            config,
            relations,
            relations_by_type,
            projection,
            layers,
            fusing,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn relations(&self) -> &[DirectedRelation] {
        &self.relations
    }

    pub fn relations_of(&self, node_type: usize) -> &[usize] {
        &self.relations_by_type[node_type]
    }

    /// One-hot initial relation representations: row `r` of the identity.
    pub fn initial_relation_features(&self) -> Matrix {
        Matrix::identity(self.relations.len())
    }

    /// Per-type projection of raw features of `nodes[t]` to the common input width.
    pub fn project_features(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &HeteroGraph,
        nodes: &[Vec<usize>],
    ) -> Result<Vec<Var>> {
        let mut out = Vec::with_capacity(nodes.len());
        for (t, list) in nodes.iter().enumerate() {
            let x = tape.input(graph.features(t).gather_rows(list));
            out.push(self.projection[t].apply(tape, store, x)?);
        }
        Ok(out)
    }

    /// Runs all layers over `chain` and fuses the seed representations.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &HeteroGraph,
        chain: &SampledBlockChain,
        mode: Mode,
        rng: &mut R,
        record_trace: bool,
    ) -> Result<ForwardOutput> {
        if chain.num_layers() != self.config.num_layers {
            return Err(invalid(format!(
                "block chain has {} layers, model has {}",
                chain.num_layers(),
                self.config.num_layers
            )));
        }
        let mut trace = record_trace.then(AttentionTrace::default);

        let projected = self.project_features(tape, store, graph, chain.input_nodes())?;
        let one_hot = self.initial_relation_features();
        let mut rel0 = Vec::with_capacity(self.relations.len());
        for r in 0..self.relations.len() {
            rel0.push(tape.input(one_hot.gather_rows(&[r])));
        }
        let mut state = LayerState {
            node: self.relations.iter().map(|r| projected[r.dst_type]).collect(),
            rel: vec![rel0; self.config.heads],
        };

        for (l, block) in chain.blocks.iter().enumerate() {
            state = self.layer(tape, store, l, block, &state, mode, rng, trace.as_mut())?;
        }

        let mut embeddings = vec![None; self.relations_by_type.len()];
        for (t, seeds) in chain.seeds.iter().enumerate() {
            if seeds.is_empty() {
                continue;
            }
            embeddings[t] = Some(self.fuse_type(tape, store, t, &state, trace.as_mut())?);
        }
        Ok(ForwardOutput {
            embeddings,
            node_reps: state.node,
            relation_reps: state.rel,
            trace,
        })
    }

    /// Linear classifier on fused representations.
    pub fn classify(&self, tape: &mut Tape, store: &ParamStore, embedding: Var) -> Result<Var> {
        self.classifier
            .as_ref()
            .ok_or_else(|| invalid("model has no classifier"))?
            .apply(tape, store, embedding)
    }

    #[allow(clippy::too_many_arguments)]
    fn layer<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        l: usize,
        block: &Block,
        input: &LayerState,
        mode: Mode,
        rng: &mut R,
        mut trace: Option<&mut AttentionTrace>,
    ) -> Result<LayerState> {
        let cfg = &self.config;
        let nr = self.relations.len();
        let slope = cfg.negative_slope;
        let training = mode == Mode::Train;

        let mut dropped = Vec::with_capacity(nr);
        for r in 0..nr {
            let x = input.node[r];
            let expect = block.src_nodes[self.relations[r].dst_type].len();
            if tape.shape(x).0 != expect {
                return Err(Error::Shape {
                    op: "layer input",
                    lhs: tape.shape(x),
                    rhs: (expect, 0),
                });
            }
            dropped.push(tape.dropout(x, cfg.dropout, training, rng)?);
        }
        let prefix: Vec<Arc<[usize]>> = block.num_dst.iter().map(|&n| (0..n).collect()).collect();
        let targets: Vec<Var> = (0..nr)
            .map(|r| tape.row_gather(dropped[r], prefix[self.relations[r].dst_type].clone()))
            .collect::<Result<_>>()?;

        let mut head_out: Vec<Vec<Var>> = vec![Vec::with_capacity(cfg.heads); nr];
        let mut rel_out = Vec::with_capacity(cfg.heads);
        for (h, p) in self.layers[l].iter().enumerate() {
            // Every row of dropped[r] projected by the matrix of r's destination type
            // serves as target side of r and source side of r's reverse.
            let mut projected = Vec::with_capacity(nr);
            for r in 0..nr {
                let w = tape.param(store, p.w_node[self.relations[r].dst_type].expect("targeted type"));
                projected.push(tape.matmul(dropped[r], w)?);
            }
            let mut z = Vec::with_capacity(nr);
            for (r, rel) in self.relations.iter().enumerate() {
                let c_src = projected[rel.reverse_id()];
                let c_dst = tape.row_gather(projected[r], prefix[rel.dst_type].clone())?;
                let w_rel = tape.param(store, p.w_rel[r]);
                let c_rel = tape.matmul(input.rel[h][r], w_rel)?;
                let conv = relation_conv(tape, &block.edges[r], c_src, c_dst, c_rel, slope)?;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.alpha.push(AlphaTrace {
                        layer: l,
                        head: h,
                        relation: r,
                        offsets: block.edges[r].offsets.clone(),
                        values: tape.value(conv.alpha).as_slice().to_vec(),
                    });
                }
                let t = rel.dst_type;
                let w_align = tape.param(store, p.w_align[t].expect("targeted type"));
                let lambda = tape.param(store, p.lambda_raw[t].expect("targeted type"));
                z.push(weighted_residual(tape, conv.z_tilde, targets[r], w_align, lambda, cfg.ablation.no_wrc)?);
            }

            let mut h_new: Vec<Option<Var>> = vec![None; nr];
            for (t, rels) in self.relations_by_type.iter().enumerate() {
                if rels.is_empty() {
                    continue;
                }
                let zs: Vec<Var> = rels.iter().map(|&r| z[r]).collect();
                let qs: Vec<Var> = rels.iter().map(|&r| tape.param(store, p.q[r])).collect();
                let out = cross_relation_mp(tape, &zs, &qs, slope, cfg.ablation.no_cmp)?;
                for (i, &r) in rels.iter().enumerate() {
                    h_new[r] = Some(out.h[i]);
                    if let (Some(tr), Some(b)) = (trace.as_deref_mut(), out.beta[i]) {
                        tr.beta.push(BetaTrace {
                            layer: l,
                            head: h,
                            node_type: t,
                            relation: r,
                            relations: rels.clone(),
                            weights: tape.value(b).clone(),
                        });
                    }
                }
            }
            for r in 0..nr {
                head_out[r].push(h_new[r].expect("every relation targets a type"));
            }

            let mut rels = Vec::with_capacity(nr);
            for r in 0..nr {
                let w = tape.param(store, p.w_upd[r]);
                let b = tape.param(store, p.b_upd[r]);
                rels.push(relation_update(tape, input.rel[h][r], w, b)?);
            }
            rel_out.push(rels);
        }

        let node = head_out
            .iter()
            .map(|parts| if parts.len() == 1 { Ok(parts[0]) } else { tape.concat_cols(parts) })
            .collect::<Result<Vec<_>>>()?;
        Ok(LayerState { node, rel: rel_out })
    }

    fn fuse_type(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        t: usize,
        state: &LayerState,
        mut trace: Option<&mut AttentionTrace>,
    ) -> Result<Var> {
        let rels = &self.relations_by_type[t];
        if rels.is_empty() {
            return Err(invalid(format!("node type {t} has no relations to fuse")));
        }
        let node_reps: Vec<Var> = rels.iter().map(|&r| state.node[r]).collect();
        let mut rel_reps = Vec::with_capacity(rels.len());
        for &r in rels {
            let per_head: Vec<Var> = state.rel.iter().map(|heads| heads[r]).collect();
            rel_reps.push(if per_head.len() == 1 { per_head[0] } else { tape.concat_cols(&per_head)? });
        }
        let mut parts = Vec::with_capacity(self.config.heads);
        for (h, fp) in self.fusing.iter().enumerate() {
            let v: Vec<Var> = rels.iter().map(|&r| tape.param(store, fp.v[r])).collect();
            let e: Vec<Var> = rels.iter().map(|&r| tape.param(store, fp.e[r])).collect();
            let out = fuse(
                tape,
                &node_reps,
                &rel_reps,
                &v,
                &e,
                self.config.negative_slope,
                self.config.ablation.no_rrf,
            )?;
            if let (Some(tr), Some(g)) = (trace.as_deref_mut(), out.gamma) {
                tr.gamma.push(GammaTrace {
                    head: h,
                    node_type: t,
                    relations: rels.clone(),
                    weights: tape.value(g).clone(),
                });
            }
            parts.push(out.h);
        }
        if parts.len() == 1 {
            Ok(parts[0])
        } else {
            tape.concat_cols(&parts)
        }
    }

    /// Names of every relation in directed-id order.
    pub fn relation_names(&self) -> Vec<String> {
        self.relations.iter().map(|r| r.name.clone()).collect()
    }
}

//! Dense reference forward pass: every relation is an explicit edge-count matrix
//! over all nodes, every representation a full row-major table. Parameters are
//! looked up by name so the reference shares nothing with the model code besides
//! the parameter values.

use rhgnn_core::hetgraph::HeteroGraph;
use rhgnn_core::layers::ModelConfig;
use rhgnn_core::tensor::ParamStore;

pub type Dense = Vec<Vec<f64>>;

fn mm(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn param(store: &ParamStore, name: &str) -> Dense {
    let id = store.find(name).unwrap_or_else(|| panic!("missing parameter {name}"));
    let m = store.value(id);
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn softmax(s: &[f64], weight: &[f64]) -> Vec<f64> {
    let m = s
        .iter()
        .zip(weight)
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().zip(weight).map(|(x, w)| w * (x - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|x| x / total).collect()
}

fn concat(parts: &[Dense]) -> Dense {
    (0..parts[0].len())
        .map(|i| parts.iter().flat_map(|p| p[i].iter().cloned()).collect())
        .collect()
}

struct Rel {
    name: String,
    src: usize,
    dst: usize,
    /// counts[v][u]: edges from u to v.
    counts: Dense,
}

/// Fused representation of every node of every type.
pub fn dense_forward(g: &HeteroGraph, store: &ParamStore, cfg: &ModelConfig) -> Vec<Dense> {
    let schema = g.schema();
    let types: Vec<String> = schema.node_types().iter().map(|t| t.name.clone()).collect();
    let n = g.node_counts();
    let mut rels = Vec::new();
    for (b, def) in schema.relations().iter().enumerate() {
        let (s, d) = (def.src_type, def.dst_type);
        let mut fwd = vec![vec![0.0; n[s]]; n[d]];
        let mut inv = vec![vec![0.0; n[d]]; n[s]];
        for &(u, v) in g.edges(b) {
            fwd[v][u] += 1.0;
            inv[u][v] += 1.0;
        }
        rels.push(Rel { name: def.name.clone(), src: s, dst: d, counts: fwd });
        rels.push(Rel { name: format!("{}^-1", def.name), src: d, dst: s, counts: inv });
    }
    let nr = rels.len();
    let of_type = |t: usize| (0..nr).filter(|&r| rels[r].dst == t).collect::<Vec<_>>();
    let slope = cfg.negative_slope;

    let projected: Vec<Dense> = (0..types.len())
        .map(|t| {
            let f = g.features(t);
            let x: Dense = (0..f.rows()).map(|i| f.row(i).to_vec()).collect();
            let w = param(store, &format!("proj.{}.weight", types[t]));
            let b = param(store, &format!("proj.{}.bias", types[t]));
            mm(&x, &w)
                .into_iter()
                .map(|row| row.iter().zip(&b[0]).map(|(a, c)| a + c).collect())
                .collect()
        })
        .collect();
    let mut h: Vec<Dense> = rels.iter().map(|r| projected[r.dst].clone()).collect();
    let mut hrel: Vec<Vec<Dense>> = (0..cfg.heads)
        .map(|_| {
            (0..nr)
                .map(|r| vec![(0..nr).map(|c| if c == r { 1.0 } else { 0.0 }).collect()])
                .collect()
        })
        .collect();

    for l in 0..cfg.num_layers {
        let mut head_nodes: Vec<Vec<Dense>> = vec![Vec::new(); nr];
        let mut new_rel = Vec::new();
        for hd in 0..cfg.heads {
            let p = |what: &str, key: &str| param(store, &format!("layer{l}.head{hd}.{what}.{key}"));
            let mut z: Vec<Dense> = Vec::new();
            for (r, rel) in rels.iter().enumerate() {
                let rev = r ^ 1;
                let c_dst = mm(&h[r], &p("w_node", &types[rel.dst]));
                let c_src = mm(&h[rev], &p("w_node", &types[rel.src]));
                let c_rel = mm(&hrel[hd][r], &p("w_rel", &rel.name));
                let lam = 1.0 / (1.0 + (-p("lambda", &types[rel.dst])[0][0]).exp());
                let aligned = mm(&h[r], &p("w_align", &types[rel.dst]));
                let d = c_dst[0].len();
                let mut out = Vec::new();
                for v in 0..n[rel.dst] {
                    let cnt = &rel.counts[v];
                    let mut zt = vec![0.0; d];
                    if cnt.iter().any(|&c| c > 0.0) {
                        let s: Vec<f64> = (0..n[rel.src])
                            .map(|u| {
                                let dot: f64 = (0..d)
                                    .map(|k| c_rel[0][k] * c_dst[v][k] + c_rel[0][d + k] * c_src[u][k])
                                    .sum();
                                leaky(dot, slope)
                            })
                            .collect();
                        let alpha = softmax(&s, cnt);
                        for k in 0..d {
                            let agg: f64 = (0..n[rel.src]).map(|u| alpha[u] * c_src[u][k]).sum();
                            zt[k] = agg.max(0.0);
                        }
                    }
                    if !cfg.ablation.no_wrc {
                        for k in 0..d {
                            zt[k] = lam * zt[k] + (1.0 - lam) * aligned[v][k];
                        }
                    }
                    out.push(zt);
                }
                z.push(out);
            }
            let mut hn: Vec<Dense> = z.clone();
            if !cfg.ablation.no_cmp {
                for t in 0..types.len() {
                    let rs = of_type(t);
                    for &r in &rs {
                        let q = p("q", &rels[r].name);
                        for v in 0..n[t] {
                            let s: Vec<f64> = rs
                                .iter()
                                .map(|&j| leaky(z[j][v].iter().zip(&q).map(|(a, qr)| a * qr[0]).sum(), slope))
                                .collect();
                            let beta = softmax(&s, &vec![1.0; rs.len()]);
                            for k in 0..z[r][v].len() {
                                hn[r][v][k] = rs.iter().zip(&beta).map(|(&j, b)| b * z[j][v][k]).sum();
                            }
                        }
                    }
                }
            }
            for r in 0..nr {
                head_nodes[r].push(hn[r].clone());
            }
            new_rel.push(
                (0..nr)
                    .map(|r| {
                        let y = mm(&hrel[hd][r], &p("w_upd", &rels[r].name));
                        let b = p("b_upd", &rels[r].name);
                        vec![y[0].iter().zip(&b[0]).map(|(a, c)| a + c).collect()]
                    })
                    .collect(),
            );
        }
        h = head_nodes.iter().map(|parts| concat(parts)).collect();
        hrel = new_rel;
    }

    (0..types.len())
        .map(|t| {
            let rs = of_type(t);
            let mut heads = Vec::new();
            for hd in 0..cfg.heads {
                let proj: Vec<Dense> = rs
                    .iter()
                    .map(|&r| mm(&h[r], &param(store, &format!("fuse.head{hd}.v.{}", rels[r].name))))
                    .collect();
                let rel_vec: Vec<Dense> = rs
                    .iter()
                    .map(|&r| {
                        let full = concat(&hrel.iter().map(|per| per[r].clone()).collect::<Vec<_>>());
                        mm(&full, &param(store, &format!("fuse.head{hd}.e.{}", rels[r].name)))
                    })
                    .collect();
                let out: Dense = (0..n[t])
                    .map(|v| {
                        let w = if cfg.ablation.no_rrf {
                            vec![1.0 / rs.len() as f64; rs.len()]
                        } else {
                            let s: Vec<f64> = (0..rs.len())
                                .map(|j| leaky(proj[j][v].iter().zip(&rel_vec[j][0]).map(|(a, b)| a * b).sum(), slope))
                                .collect();
                            softmax(&s, &vec![1.0; rs.len()])
                        };
                        (0..proj[0][v].len())
                            .map(|k| (0..rs.len()).map(|j| w[j] * proj[j][v][k]).sum())
                            .collect()
                    })
                    .collect();
                heads.push(out);
            }
            concat(&heads)
        })
        .collect()
}

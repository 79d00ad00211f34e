//! The four building blocks of a layer and the fusing head, expressed as tape
//! operations. Row-vector convention throughout: representations are rows and
//! weights multiply on the right (`h * W`).

use alloc::vec::Vec;

use crate::error::invalid;
use crate::hetgraph::BlockEdges;
use crate::tensor::{Tape, Var};
use crate::Result;

/// Output of [`relation_conv`].
#[derive(Clone, Copy, Debug)]
pub struct ConvOutput {
    /// Aggregated neighbor information, one row per destination.
    pub z_tilde: Var,
    /// Normalized neighbor importance, one entry per sampled edge (E x 1).
    pub alpha: Var,
}

/// Relation-specific attention convolution over one block relation.
///
/// `c_src` (sources x d) and `c_dst` (destinations x d) are node representations
/// already projected by their type matrices; `c_rel` (1 x 2d) is the projected
/// relation representation. For each edge `(u, v)` the score is
/// `LeakyReLU(c_rel . [c_v, c_u])`, normalized by softmax over the neighbors of `v`,
/// and `z_tilde_v = ReLU(sum_u alpha_vu c_u)`. Destinations without neighbors get a
/// zero row.
pub fn relation_conv(
    tape: &mut Tape,
    edges: &BlockEdges,
    c_src: Var,
    c_dst: Var,
    c_rel: Var,
    slope: f64,
) -> Result<ConvOutput> {
    let d = tape.shape(c_src).1;
    if tape.shape(c_dst).1 != d || tape.shape(c_rel) != (1, 2 * d) {
        return Err(crate::Error::Shape {
            op: "relation_conv",
            lhs: tape.shape(c_src),
            rhs: tape.shape(c_rel),
        });
    }
    if edges.offsets.len() != tape.shape(c_dst).0 + 1 {
        return Err(invalid("relation_conv: block offsets do not match destinations"));
    }
    let dst_e = tape.row_gather(c_dst, edges.targets.clone())?;
    let src_e = tape.row_gather(c_src, edges.sources.clone())?;
    let pair = tape.concat_cols(&[dst_e, src_e])?;
    let rel_col = tape.transpose(c_rel);
    let score = tape.matmul(pair, rel_col)?;
    let score = tape.leaky_relu(score, slope);
    let alpha = tape.segment_softmax(score, edges.offsets.clone())?;
    let msg = tape.mul_col(src_e, alpha)?;
    let agg = tape.segment_sum(msg, edges.offsets.clone())?;
    Ok(ConvOutput {
        z_tilde: tape.relu(agg),
        alpha,
    })
}

/// `z = lambda * z_tilde + (1 - lambda) * h_prev W_align`, with
/// `lambda = sigmoid(lambda_raw)`. With `disabled`, returns `z_tilde`.
pub fn weighted_residual(
    tape: &mut Tape,
    z_tilde: Var,
    h_prev: Var,
    w_align: Var,
    lambda_raw: Var,
    disabled: bool,
) -> Result<Var> {
    if disabled {
        return Ok(z_tilde);
    }
    let lambda = tape.sigmoid(lambda_raw);
    let neg = tape.scale(lambda, -1.0);
    let keep_self = tape.add_const(neg, 1.0);
    let aligned = tape.matmul(h_prev, w_align)?;
    let a = tape.scale_by(z_tilde, lambda)?;
    let b = tape.scale_by(aligned, keep_self)?;
    tape.add(a, b)
}

/// Output of [`cross_relation_mp`], indexed like the input relations.
#[derive(Clone, Debug)]
pub struct CrossRelationOutput {
    pub h: Vec<Var>,
    /// `beta[i]` is n x k: row v holds the relevance of every relation to relation
    /// `i` for node v. `None` when message passing is disabled.
    pub beta: Vec<Option<Var>>,
}

/// Mixes a node's per-relation representations.
///
/// `z[j]` (n x d) is the representation under the j-th relation of the node's
/// type; `q[i]` (d x 1) is the attention vector of relation `i`. Produces
/// `h_i = sum_j beta_ij z_j` with `beta_i. = softmax_j(LeakyReLU(z_j q_i))`.
/// With `disabled`, `h_i = z_i`.
pub fn cross_relation_mp(
    tape: &mut Tape,
    z: &[Var],
    q: &[Var],
    slope: f64,
    disabled: bool,
) -> Result<CrossRelationOutput> {
    if z.is_empty() {
        return Err(invalid("cross_relation_mp: node type has no relations"));
    }
    if z.len() != q.len() {
        return Err(invalid("cross_relation_mp: one attention vector per relation"));
    }
    if disabled {
        return Ok(CrossRelationOutput {
            h: z.to_vec(),
            beta: alloc::vec![None; z.len()],
        });
    }
    let mut h = Vec::with_capacity(z.len());
    let mut beta = Vec::with_capacity(z.len());
    for &qi in q {
        let mut scores = Vec::with_capacity(z.len());
        for &zj in z {
            let s = tape.matmul(zj, qi)?;
            scores.push(tape.leaky_relu(s, slope));
        }
        let s = tape.concat_cols(&scores)?;
        let b = tape.softmax_rows(s);
        h.push(weighted_sum(tape, z, b)?);
        beta.push(Some(b));
    }
    Ok(CrossRelationOutput { h, beta })
}

/// `sum_j weights[:, j] * parts[j]` with row-wise weights.
fn weighted_sum(tape: &mut Tape, parts: &[Var], weights: Var) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for (j, &p) in parts.iter().enumerate() {
        let w = tape.slice_cols(weights, j, 1)?;
        let term = tape.mul_col(p, w)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    acc.ok_or_else(|| invalid("weighted_sum of no parts"))
}

/// Linear relation propagation: `h_rel W_upd + b_upd`.
pub fn relation_update(tape: &mut Tape, h_rel: Var, w_upd: Var, b_upd: Var) -> Result<Var> {
    let lin = tape.matmul(h_rel, w_upd)?;
    tape.add(lin, b_upd)
}

/// Output of [`fuse`].
#[derive(Clone, Copy, Debug)]
pub struct FuseOutput {
    pub h: Var,
    /// n x k relation importance; `None` under mean pooling.
    pub gamma: Option<Var>,
}

/// Relation-aware fusing of final per-relation representations into one compact
/// representation per node.
///
/// For relation `j`: `p_j = h_j V_j` (n x d) and `e_j = h_rel_j E_j` (1 x d);
/// `gamma_.j = softmax_j(LeakyReLU(p_j e_j^T))`, output `sum_j gamma_.j p_j`. With
/// `mean_pool`, the output is the plain mean of the `p_j`.
pub fn fuse(
    tape: &mut Tape,
    node_reps: &[Var],
    rel_reps: &[Var],
    v: &[Var],
    e: &[Var],
    slope: f64,
    mean_pool: bool,
) -> Result<FuseOutput> {
    let k = node_reps.len();
    if k == 0 {
        return Err(invalid("fuse: empty relation set"));
    }
    if rel_reps.len() != k || v.len() != k || e.len() != k {
        return Err(invalid("fuse: inputs must align with the relation set"));
    }
    let mut projected = Vec::with_capacity(k);
    for j in 0..k {
        projected.push(tape.matmul(node_reps[j], v[j])?);
    }
    if mean_pool {
        let mut acc = projected[0];
        for &p in &projected[1..] {
            acc = tape.add(acc, p)?;
        }
        return Ok(FuseOutput {
            h: tape.scale(acc, 1.0 / k as f64),
            gamma: None,
        });
    }
    let mut scores = Vec::with_capacity(k);
    for j in 0..k {
        let rel = tape.matmul(rel_reps[j], e[j])?;
        let rel_col = tape.transpose(rel);
        let s = tape.matmul(projected[j], rel_col)?;
        scores.push(tape.leaky_relu(s, slope));
    }
    let s = tape.concat_cols(&scores)?;
    let gamma = tape.softmax_rows(s);
    Ok(FuseOutput {
        h: weighted_sum(tape, &projected, gamma)?,
        gamma: Some(gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check_params, Matrix, ParamStore};
    use alloc::sync::Arc;
    use alloc::vec;
    use rand::Rng;

    fn edges(lists: &[&[usize]]) -> BlockEdges {
        let mut offsets = vec![0];
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        for (v, list) in lists.iter().enumerate() {
            sources.extend_from_slice(list);
            targets.extend(core::iter::repeat(v).take(list.len()));
            offsets.push(sources.len());
        }
        BlockEdges {
            offsets: offsets.into(),
            sources: sources.into(),
            targets: targets.into(),
        }
    }

    fn random(rows: usize, cols: usize, rng: &mut crate::Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn relu_rows(m: &Matrix) -> Matrix {
        m.map(|x| x.max(0.0))
    }

    #[test]
    fn one_neighbor_takes_full_weight() {
        let mut rng = crate::seeded_rng(1);
        let mut tape = Tape::new();
        let src = tape.input(random(3, 4, &mut rng));
        let dst = tape.input(random(1, 4, &mut rng));
        let rel = tape.input(random(1, 8, &mut rng));
        let out = relation_conv(&mut tape, &edges(&[&[2]]), src, dst, rel, 0.2).unwrap();
        assert_eq!(tape.value(out.alpha).as_slice(), &[1.0]);
        let expect = relu_rows(&tape.value(src).gather_rows(&[2]));
        assert_eq!(tape.value(out.z_tilde), &expect);
    }

    #[test]
    fn identical_neighbors_split_evenly() {
        let mut rng = crate::seeded_rng(2);
        let row = random(1, 4, &mut rng);
        let mut tape = Tape::new();
        let src = tape.input(Matrix::from_rows(&[row.as_slice(), row.as_slice()]));
        let dst = tape.input(random(1, 4, &mut rng));
        let rel = tape.input(random(1, 8, &mut rng));
        let out = relation_conv(&mut tape, &edges(&[&[0, 1]]), src, dst, rel, 0.2).unwrap();
        for &a in tape.value(out.alpha).as_slice() {
            assert!((a - 0.5).abs() < 1e-15);
        }
        assert!(tape.value(out.z_tilde).max_abs_diff(&relu_rows(&row)) < 1e-15);
    }

    #[test]
    fn empty_segment_gives_zero_row() {
        let mut rng = crate::seeded_rng(3);
        let mut tape = Tape::new();
        let src = tape.input(random(2, 3, &mut rng));
        let dst = tape.input(random(2, 3, &mut rng));
        let rel = tape.input(random(1, 6, &mut rng));
        let out = relation_conv(&mut tape, &edges(&[&[], &[0, 1]]), src, dst, rel, 0.2).unwrap();
        assert_eq!(tape.value(out.z_tilde).row(0), &[0.0; 3]);
        let alpha = tape.value(out.alpha).as_slice();
        assert!((alpha[0] + alpha[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conv_rejects_mismatched_relation_width() {
        let mut tape = Tape::new();
        let src = tape.input(Matrix::zeros(2, 3));
        let dst = tape.input(Matrix::zeros(1, 3));
        let rel = tape.input(Matrix::zeros(1, 3));
        assert!(relation_conv(&mut tape, &edges(&[&[0]]), src, dst, rel, 0.2).is_err());
    }

    #[test]
    fn residual_limits() {
        let mut rng = crate::seeded_rng(4);
        let z_tilde = random(3, 2, &mut rng);
        let h_prev = random(3, 5, &mut rng);
        let w = random(5, 2, &mut rng);

        let mut tape = Tape::new();
        let (zt, hp, wa) = (tape.input(z_tilde.clone()), tape.input(h_prev.clone()), tape.input(w.clone()));
        let big = tape.input(Matrix::scalar(60.0));
        let z = weighted_residual(&mut tape, zt, hp, wa, big, false).unwrap();
        assert!(tape.value(z).max_abs_diff(&z_tilde) < 1e-12);

        let aligned = h_prev.matmul(&w).unwrap();
        let zt = tape.input(aligned.clone());
        let half = tape.input(Matrix::scalar(0.0));
        let z = weighted_residual(&mut tape, zt, hp, wa, half, false).unwrap();
        assert!(tape.value(z).max_abs_diff(&aligned) < 1e-15);

        let z = weighted_residual(&mut tape, zt, hp, wa, half, true).unwrap();
        assert_eq!(z, zt);
    }

    #[test]
    fn single_relation_mixing_is_identity() {
        let mut rng = crate::seeded_rng(5);
        let mut tape = Tape::new();
        let z = tape.input(random(4, 3, &mut rng));
        let q = tape.input(random(3, 1, &mut rng));
        let out = cross_relation_mp(&mut tape, &[z], &[q], 0.2, false).unwrap();
        assert!(tape.value(out.beta[0].unwrap()).as_slice().iter().all(|&b| b == 1.0));
        assert_eq!(tape.value(out.h[0]), tape.value(z));
    }

    #[test]
    fn identical_relations_are_a_fixed_point() {
        let mut rng = crate::seeded_rng(6);
        let zm = random(4, 3, &mut rng);
        let mut tape = Tape::new();
        let z: Vec<Var> = (0..3).map(|_| tape.input(zm.clone())).collect();
        let q: Vec<Var> = (0..3).map(|_| tape.input(random(3, 1, &mut rng))).collect();
        let out = cross_relation_mp(&mut tape, &z, &q, 0.2, false).unwrap();
        for h in out.h {
            assert!(tape.value(h).max_abs_diff(&zm) < 1e-15);
        }
    }

    #[test]
    fn mixing_matches_direct_evaluation() {
        let mut rng = crate::seeded_rng(7);
        let zs: Vec<Matrix> = (0..3).map(|_| random(5, 4, &mut rng)).collect();
        let qs: Vec<Matrix> = (0..3).map(|_| random(4, 1, &mut rng)).collect();
        let mut tape = Tape::new();
        let z: Vec<Var> = zs.iter().map(|m| tape.input(m.clone())).collect();
        let q: Vec<Var> = qs.iter().map(|m| tape.input(m.clone())).collect();
        let out = cross_relation_mp(&mut tape, &z, &q, 0.2, false).unwrap();
        let leaky = |x: f64| if x > 0.0 { x } else { 0.2 * x };
        for i in 0..3 {
            let h = tape.value(out.h[i]);
            let beta = tape.value(out.beta[i].unwrap());
            for v in 0..5 {
                let s: Vec<f64> = (0..3)
                    .map(|j| leaky((0..4).map(|k| zs[j][(v, k)] * qs[i][(k, 0)]).sum()))
                    .collect();
                let m = s.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = s.iter().map(|x| crate::math::exp(x - m)).collect();
                let total: f64 = e.iter().sum();
                for j in 0..3 {
                    assert!((beta[(v, j)] - e[j] / total).abs() < 1e-15);
                }
                for k in 0..4 {
                    let want: f64 = (0..3).map(|j| e[j] / total * zs[j][(v, k)]).sum();
                    assert!((h[(v, k)] - want).abs() < 1e-14);
                }
            }
        }
        let off = cross_relation_mp(&mut tape, &z, &q, 0.2, true).unwrap();
        assert_eq!(off.h, z);
        assert!(off.beta.iter().all(Option::is_none));
        assert!(cross_relation_mp(&mut tape, &[], &[], 0.2, false).is_err());
    }

    #[test]
    fn relation_update_special_cases() {
        let mut rng = crate::seeded_rng(8);
        let x = random(1, 4, &mut rng);
        let b = random(1, 4, &mut rng);
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let eye = tape.input(Matrix::identity(4));
        let zero_b = tape.input(Matrix::zeros(1, 4));
        let y = relation_update(&mut tape, xv, eye, zero_b).unwrap();
        assert_eq!(tape.value(y), &x);
        let zero_w = tape.input(Matrix::zeros(4, 4));
        let bv = tape.input(b.clone());
        let y = relation_update(&mut tape, xv, zero_w, bv).unwrap();
        assert_eq!(tape.value(y), &b);
    }

    #[test]
    fn fuse_special_cases() {
        let mut rng = crate::seeded_rng(9);
        let mut tape = Tape::new();
        let h: Vec<Var> = (0..3).map(|_| tape.input(random(4, 6, &mut rng))).collect();
        let r: Vec<Var> = (0..3).map(|_| tape.input(random(1, 5, &mut rng))).collect();
        let v: Vec<Var> = (0..3).map(|_| tape.input(random(6, 2, &mut rng))).collect();
        let e: Vec<Var> = (0..3).map(|_| tape.input(random(5, 2, &mut rng))).collect();

        let single = fuse(&mut tape, &h[..1], &r[..1], &v[..1], &e[..1], 0.2, false).unwrap();
        let want = tape.value(h[0]).matmul(tape.value(v[0])).unwrap();
        assert!(tape.value(single.h).max_abs_diff(&want) < 1e-15);

        let zero_e: Vec<Var> = (0..3).map(|_| tape.input(Matrix::zeros(5, 2))).collect();
        let uniform = fuse(&mut tape, &h, &r, &v, &zero_e, 0.2, false).unwrap();
        let mean = fuse(&mut tape, &h, &r, &v, &e, 0.2, true).unwrap();
        assert!(mean.gamma.is_none());
        assert!(tape.value(uniform.h).max_abs_diff(tape.value(mean.h)) < 1e-15);

        let mut want_mean = Matrix::zeros(4, 2);
        for j in 0..3 {
            want_mean.add_assign(&tape.value(h[j]).matmul(tape.value(v[j])).unwrap());
        }
        let want_mean = want_mean.map(|x| x / 3.0);
        assert!(tape.value(mean.h).max_abs_diff(&want_mean) < 1e-15);
        assert!(fuse(&mut tape, &[], &[], &[], &[], 0.2, false).is_err());
    }

    #[test]
    fn fuse_matches_direct_evaluation() {
        let mut rng = crate::seeded_rng(10);
        let hs: Vec<Matrix> = (0..3).map(|_| random(4, 6, &mut rng)).collect();
        let rs: Vec<Matrix> = (0..3).map(|_| random(1, 5, &mut rng)).collect();
        let vs: Vec<Matrix> = (0..3).map(|_| random(6, 2, &mut rng)).collect();
        let es: Vec<Matrix> = (0..3).map(|_| random(5, 2, &mut rng)).collect();
        let mut tape = Tape::new();
        let ins = |tape: &mut Tape, ms: &[Matrix]| ms.iter().map(|m| tape.input(m.clone())).collect::<Vec<_>>();
        let (h, r, v, e) = (ins(&mut tape, &hs), ins(&mut tape, &rs), ins(&mut tape, &vs), ins(&mut tape, &es));
        let out = fuse(&mut tape, &h, &r, &v, &e, 0.2, false).unwrap();
        let got = tape.value(out.h);
        let gamma = tape.value(out.gamma.unwrap());
        let leaky = |x: f64| if x > 0.0 { x } else { 0.2 * x };
        let p: Vec<Matrix> = (0..3).map(|j| hs[j].matmul(&vs[j]).unwrap()).collect();
        let q: Vec<Matrix> = (0..3).map(|j| rs[j].matmul(&es[j]).unwrap()).collect();
        for n in 0..4 {
            let s: Vec<f64> = (0..3)
                .map(|j| leaky((0..2).map(|k| p[j][(n, k)] * q[j][(0, k)]).sum()))
                .collect();
            let e: Vec<f64> = s.iter().map(|&x| crate::math::exp(x)).collect();
            let total: f64 = e.iter().sum();
            assert!(((0..3).map(|j| gamma[(n, j)]).sum::<f64>() - 1.0).abs() < 1e-12);
            for k in 0..2 {
                let want: f64 = (0..3).map(|j| e[j] / total * p[j][(n, k)]).sum();
                assert!((got[(n, k)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn components_pass_gradient_check() {
        let mut rng = crate::seeded_rng(11);
        let mut store = ParamStore::new();
        let src = store.add("src", random(4, 3, &mut rng));
        let dst = store.add("dst", random(3, 3, &mut rng));
        let rel = store.add("rel", random(1, 6, &mut rng));
        let w_align = store.add("w_align", random(3, 3, &mut rng));
        let lambda = store.add("lambda", Matrix::scalar(0.3));
        let q = store.add("q", random(3, 1, &mut rng));
        let q2 = store.add("q2", random(3, 1, &mut rng));
        let w_upd = store.add("w_upd", random(6, 4, &mut rng));
        let b_upd = store.add("b_upd", random(1, 4, &mut rng));
        let v = store.add("v", random(3, 2, &mut rng));
        let e = store.add("e", random(4, 2, &mut rng));
        let block = edges(&[&[0, 1], &[2], &[1, 2, 3]]);
        let labels: Arc<[usize]> = vec![0, 1, 1].into();
        let report = grad_check_params(
            &store,
            |tape, store| {
                let p = |tape: &mut Tape, id| tape.param(store, id);
                let (s, d, r) = (p(tape, src), p(tape, dst), p(tape, rel));
                let conv = relation_conv(tape, &block, s, d, r, 0.2)?;
                let (wa, l) = (p(tape, w_align), p(tape, lambda));
                let z = weighted_residual(tape, conv.z_tilde, d, wa, l, false)?;
                let other = tape.sigmoid(d);
                let (qa, qb) = (p(tape, q), p(tape, q2));
                let mixed = cross_relation_mp(tape, &[z, other], &[qa, qb], 0.2, false)?;
                let (wu, bu) = (p(tape, w_upd), p(tape, b_upd));
                let hr = relation_update(tape, r, wu, bu)?;
                let (vv, ee) = (p(tape, v), p(tape, e));
                let out = fuse(tape, &mixed.h, &[hr, hr], &[vv, vv], &[ee, ee], 0.2, false)?;
                tape.cross_entropy(out.h, labels.clone())
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
        assert!(report.checked > 50);
    }
}

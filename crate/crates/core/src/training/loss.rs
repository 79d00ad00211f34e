use alloc::sync::Arc;

use crate::error::invalid;
use crate::tensor::{Tape, Var};
use crate::Result;

/// Mean softmax cross-entropy of `logits` (n x C) against class ids.
pub fn classification_loss(tape: &mut Tape, logits: Var, labels: Arc<[usize]>) -> Result<Var> {
    tape.cross_entropy(logits, labels)
}

/// Dot-product scores of aligned rows, as an n x 1 column.
pub fn link_scores(tape: &mut Tape, src: Var, dst: Var) -> Result<Var> {
    tape.row_dot(src, dst)
}

/// Mean of `-log sigmoid(sign * s)` with `s` clamped to [-30, 30].
fn mean_neg_log_sigmoid(tape: &mut Tape, scores: Var, sign: f64) -> Result<Var> {
    let s = tape.clamp(scores, -30.0, 30.0);
    let s = tape.scale(s, sign);
    let p = tape.sigmoid(s);
    let lp = tape.log(p)?;
    let m = tape.mean(lp);
    Ok(tape.scale(m, -1.0))
}

/// Binary cross-entropy with negative sampling over dot-product scores:
/// `mean_P -log sigmoid(h_v . h_u) + mean_N -log sigmoid(-h_v' . h_u')`.
pub fn linkpred_loss(tape: &mut Tape, pos_src: Var, pos_dst: Var, neg_src: Var, neg_dst: Var) -> Result<Var> {
    if tape.shape(pos_src).0 == 0 || tape.shape(neg_src).0 == 0 {
        return Err(invalid("link prediction loss needs positive and negative pairs"));
    }
    let pos = link_scores(tape, pos_src, pos_dst)?;
    let neg = link_scores(tape, neg_src, neg_dst)?;
    let lp = mean_neg_log_sigmoid(tape, pos, 1.0)?;
    let ln = mean_neg_log_sigmoid(tape, neg, -1.0)?;
    tape.add(lp, ln)
}

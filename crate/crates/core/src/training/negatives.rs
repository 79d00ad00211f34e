use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::invalid;
use crate::Result;

/// Redraws allowed per negative before an observed edge is accepted.
pub const MAX_RETRIES: usize = 100;

/// Corrupted pairs plus the number of draws that ran out of retries and were kept
/// even though they are observed edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NegativeSample {
    pub pairs: Vec<(usize, usize)>,
    pub exhausted: usize,
}

/// For every positive `(v, u)` draws `k` pairs `(v, u')` with `u'` uniform over
/// `0..num_dst`, redrawing while `(v, u')` is in `observed`.
pub fn sample_negatives<R: Rng + ?Sized>(
    positives: &[(usize, usize)],
    observed: &BTreeSet<(usize, usize)>,
    num_dst: usize,
    k: usize,
    rng: &mut R,
) -> Result<NegativeSample> {
    if k == 0 {
        return Err(invalid("at least one negative per positive is required"));
    }
    if num_dst == 0 {
        return Err(invalid("cannot corrupt into an empty node type"));
    }
    let mut out = NegativeSample {
        pairs: Vec::with_capacity(positives.len() * k),
        exhausted: 0,
    };
    for &(v, _) in positives {
        for _ in 0..k {
            let mut u = rng.random_range(0..num_dst);
            let mut tries = 0;
            while observed.contains(&(v, u)) {
                if tries == MAX_RETRIES {
                    out.exhausted += 1;
                    break;
                }
                u = rng.random_range(0..num_dst);
                tries += 1;
            }
            out.pairs.push((v, u));
        }
    }
    Ok(out)
}
